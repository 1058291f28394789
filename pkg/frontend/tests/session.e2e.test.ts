// End-to-end scripted session against the real HTTP service: mark the
// corridor layout's door subgoal, run rounds, draw a partial demonstration
// when the agent struggles, and drive the session to `finished` with
// counters matching the history endpoint exactly.
//
// The script drives SessionController, the same object the browser page
// uses for every decision; canvas drawing is the only part not exercised.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SessionApi } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import type { GridGeometry } from "../src/types.js";

const PORT = 8600 + (process.pid % 200);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function serverReady(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const resp = await fetch(`${BASE}/sessions`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("session service did not come up");
}

beforeAll(async () => {
  const sessions = mkdtempSync(join(tmpdir(), "sgirl-ui-"));
  server = spawn("python3", ["-m", "subgoal_irl.cli", "serve",
                             "--sessions-dir", sessions,
                             "--host", "127.0.0.1", "--port", String(PORT)],
                 { stdio: "ignore" });
  await serverReady();
}, 60_000);

afterAll(() => {
  server?.kill("SIGTERM");
});

function bfsPath(geo: GridGeometry, from: number, to: number): number[] {
  // independent shortest path over the view geometry, used to draw a
  // legal demonstration cell by cell
  const key = (x: number, y: number) => `${x},${y}`;
  const stateAt = new Map(geo.cells.map(([x, y], s) => [key(x, y), s]));
  const parent = new Map<number, number>([[from, -1]]);
  const queue = [from];
  while (queue.length) {
    const cur = queue.shift()!;
    if (cur === to) break;
    const [x, y] = geo.cells[cur];
    for (const [dx, dy] of [[0, -1], [0, 1], [-1, 0], [1, 0]]) {
      const next = stateAt.get(key(x + dx, y + dy));
      if (next !== undefined && !parent.has(next)) {
        parent.set(next, cur);
        queue.push(next);
      }
    }
  }
  const path = [to];
  while (path[0] !== from) path.unshift(parent.get(path[0])!);
  return path;
}

describe("scripted live session on the corridor layout", () => {
  it("drives the session to finished with exact counters", async () => {
    const api = new SessionApi(BASE);
    // weak per-round fitting and exact budgets: the agent struggles first,
    // and the drawn demonstration is what teaches it
    const controller = await SessionController.create(api, {
      environment: "grid8_corridor.txt",
      expert: "human",
      seed: 2,
      iterations: 15,
      alpha: 0.02,
      step_thr: 0,
      max_rounds: 40,
      finish_streak: 2,
    });
    expect(controller.phase).toBe("awaiting_subgoals");
    const geo = controller.view!.geometry as GridGeometry;
    expect(geo.kind).toBe("grid");

    // [SECONDARY] validation: clicking an obstacle surfaces an inline error
    // and sends nothing to the server
    const posts = () => api.log.length;
    const before = posts();
    expect(controller.clickCellForSubgoal(3, 0)).toBe(false); // wall cell
    expect(controller.inlineError).toContain("not a free cell");
    expect(posts()).toBe(before);

    // mark the door subgoal (the corridor cell at (3, 3)) and submit
    expect(controller.clickCellForSubgoal(3, 3)).toBe(true);
    expect(controller.markedSubgoals.length).toBe(1);
    expect(await controller.submitSubgoals()).toBe(true);
    expect(controller.phase).toBe("awaiting_rollout");
    expect(controller.view!.subgoals.length).toBe(1);

    // run rounds; when the agent struggles, draw the requested partial
    // demonstration (with one deliberately illegal hop first)
    let demonstrated = false;
    for (let round = 0; round < 40 && controller.phase !== "finished"; round++) {
      if (controller.phase === "awaiting_rollout") {
        await controller.runRound();
        // consume the animation frames like the page would
        let frames = 0;
        while (controller.nextAnimationFrame()) frames++;
        expect(frames).toBeGreaterThan(0);
      } else if (controller.phase === "awaiting_demonstration") {
        const pending = controller.pendingSubtask!;
        const path = bfsPath(geo, pending.start, pending.target);
        if (!demonstrated) {
          // [SECONDARY] validation: a non-adjacent hop is rejected locally
          const sent = posts();
          const [fx, fy] = geo.cells[path[0]];
          const far = geo.cells[pending.target];
          if (Math.abs(far[0] - fx) + Math.abs(far[1] - fy) > 1) {
            expect(controller.dragToCell(far[0], far[1])).toBe(false);
            expect(controller.inlineError).toContain("illegal hop");
            expect(posts()).toBe(sent); // nothing was sent
          }
        }
        for (const state of path.slice(1)) {
          const [x, y] = geo.cells[state];
          expect(controller.dragToCell(x, y)).toBe(true);
        }
        expect(controller.canSubmitDemonstration()).toBe(true);
        expect(await controller.submitDemonstration()).toBe(true);
        demonstrated = true;
      }
    }

    expect(demonstrated).toBe(true); // at least one partial demonstration drawn
    expect(controller.phase).toBe("finished");

    // counters must mirror the history endpoint exactly
    const history = await api.history(controller.sid);
    const rounds = history.rounds;
    expect(rounds.length).toBe(controller.counters!.rounds);
    expect(rounds[rounds.length - 1].cumulative_demo_steps)
      .toBe(controller.counters!.demo_steps);
    const struggles = rounds.filter((r) => r.success_bits.includes("0")).length;
    expect(controller.counters!.failure_count).toBe(struggles);
    expect(rounds[rounds.length - 1].overall_success).toBe(true);
  }, 120_000);

  it("rejects a wrong-phase round with a machine-readable code", async () => {
    const api = new SessionApi(BASE);
    const controller = await SessionController.create(api, {
      environment: "grid8_corridor.txt",
      expert: "simulated",
      seed: 2,
    });
    const outcome = await controller.runRound(); // still awaiting_subgoals
    expect(outcome).toBeNull();
    expect(controller.inlineError).toContain("cannot run a round");
    // and the server-side guard, when bypassing the controller:
    try {
      await api.runRound(controller.sid);
      expect.unreachable("server must refuse");
    } catch (err) {
      expect((err as { status: number }).status).toBe(409);
      expect((err as { code: string }).code).toBe("wrong_phase");
    }
  }, 30_000);
});
