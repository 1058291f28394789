// Page bootstrap: session setup form, canvas interaction, the 1 s poll,
// round animation playback. All decisions live in SessionController.

import { SessionApi } from "./api.js";
import { SessionController } from "./controller.js";
import { cellSize, drawSession } from "./render.js";

const api = new SessionApi("");
let controller: SessionController | null = null;
let agentState: number | null = null;
let animating = false;

const $ = (id: string) => document.getElementById(id)!;

function setText(id: string, text: string) {
  $(id).textContent = text;
}

function phaseBanner(): string {
  if (!controller) return "no session";
  switch (controller.phase) {
    case "awaiting_subgoals":
      return "click cells to mark subgoals, then submit (empty = no subgoals)";
    case "training":
      return "training the reward model...";
    case "awaiting_rollout":
      return "ready: run a round";
    case "awaiting_demonstration":
      return "the agent struggled: drag a demonstration to the marked target";
    case "finished":
      return "finished: the agent completes the task on its own";
  }
}

async function refreshPanel() {
  if (!controller) return;
  const counters = controller.counters;
  setText("phase", `${controller.phase}`);
  setText("banner", phaseBanner());
  setText("error", controller.inlineError ?? "");
  if (counters) {
    setText("counters",
      `rounds ${counters.rounds} | expert demo steps ${counters.demo_steps} | ` +
      `demos ${counters.demo_count} | failures ${counters.failure_count}`);
  }
  const history = await api.history(controller.sid);
  setText("history", history.rounds.map((r) =>
    `#${r.round} start=${r.start} bits=${r.success_bits} ` +
    `demoSteps=${r.cumulative_demo_steps}`).join("\n"));
  const canvas = $("board") as HTMLCanvasElement;
  drawSession(canvas, controller, agentState);
  ($("submit-subgoals") as HTMLButtonElement).disabled =
    controller.phase !== "awaiting_subgoals";
  ($("run-round") as HTMLButtonElement).disabled =
    controller.phase !== "awaiting_rollout" || animating;
  ($("submit-demo") as HTMLButtonElement).disabled =
    !controller.canSubmitDemonstration();
  ($("undo-demo") as HTMLButtonElement).disabled =
    controller.phase !== "awaiting_demonstration";
}

function canvasCell(ev: MouseEvent): [number, number] | null {
  if (!controller?.view) return null;
  const canvas = $("board") as HTMLCanvasElement;
  const geo = controller.view.geometry;
  const rect = canvas.getBoundingClientRect();
  const size = cellSize(canvas, geo);
  const x = Math.floor((ev.clientX - rect.left) / rect.width * canvas.width / size);
  const y = Math.floor((ev.clientY - rect.top) / rect.height * canvas.height / size);
  if (x < 0 || y < 0 || x >= geo.width || y >= geo.height) return null;
  return [x, y];
}

async function playAnimation() {
  if (!controller) return;
  animating = true;
  const timer = setInterval(async () => {
    const frame = controller!.nextAnimationFrame();
    if (!frame) {
      clearInterval(timer);
      animating = false;
      agentState = null;
      await refreshPanel();
      return;
    }
    agentState = frame.state;
    if (frame.last) {
      setText("banner", frame.succeeded
        ? `subtask ${frame.subtask + 1}: reached`
        : `subtask ${frame.subtask + 1}: struggled`);
    }
    drawSession($("board") as HTMLCanvasElement, controller!, agentState);
  }, 90);
}

async function boot() {
  $("create").addEventListener("click", async () => {
    const layout = ($("layout") as HTMLSelectElement).value;
    const expert = ($("expert") as HTMLSelectElement).value;
    controller = await SessionController.create(api, {
      environment: layout,
      expert,
      seed: Number(($("seed") as HTMLInputElement).value || "0"),
      iterations: 40,
      step_thr: 2,
    });
    await refreshPanel();
  });

  $("board").addEventListener("mousedown", async (ev) => {
    if (!controller) return;
    const cell = canvasCell(ev as MouseEvent);
    if (!cell) return;
    if (controller.phase === "awaiting_subgoals") {
      controller.clickCellForSubgoal(cell[0], cell[1]);
    } else if (controller.phase === "awaiting_demonstration") {
      controller.dragToCell(cell[0], cell[1]);
    }
    await refreshPanel();
  });

  $("board").addEventListener("mousemove", async (ev) => {
    if (!controller || controller.phase !== "awaiting_demonstration") return;
    if ((ev as MouseEvent).buttons !== 1) return;
    const cell = canvasCell(ev as MouseEvent);
    if (!cell) return;
    const before = controller.demoPath.length;
    controller.dragToCell(cell[0], cell[1]);
    if (controller.demoPath.length !== before) await refreshPanel();
  });

  $("submit-subgoals").addEventListener("click", async () => {
    if (!controller) return;
    if (controller.markedSubgoals.length === 0 &&
        !window.confirm("No subgoals marked: run without subtask structure?")) {
      return;
    }
    await controller.submitSubgoals();
    await refreshPanel();
  });

  $("run-round").addEventListener("click", async () => {
    if (!controller) return;
    const subtasks = await controller.runRound();
    if (subtasks) await playAnimation();
    await refreshPanel();
  });

  $("submit-demo").addEventListener("click", async () => {
    if (!controller) return;
    await controller.submitDemonstration();
    await refreshPanel();
  });

  $("undo-demo").addEventListener("click", async () => {
    controller?.undoDemoStep();
    await refreshPanel();
  });

  setInterval(async () => {
    if (controller && controller.shouldPoll() && !animating) {
      await controller.refresh();
      await refreshPanel();
    }
  }, 1000);
}

boot();
