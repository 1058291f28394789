// Client-side session driver. Holds only presentation state (pending
// subgoal marks, an in-progress demonstration path, animation frames,
// the last inline error); everything authoritative comes from the
// server's view payload and is re-fetched after every mutation.

import { SessionApi } from "./api.js";
import { GridModel, gridModelFrom } from "./gridModel.js";
import type { ApiError, PendingSubtask, SubtaskView, ViewPayload } from "./types.js";

export interface AnimationFrame {
  subtask: number;
  state: number;
  succeeded: boolean;
  last: boolean; // final frame of its subtask: show the badge
}

export class SessionController {
  readonly api: SessionApi;
  readonly sid: string;
  view: ViewPayload | null = null;
  grid: GridModel | null = null;
  markedSubgoals: number[] = [];
  demoPath: number[] = [];
  inlineError: string | null = null;
  animationQueue: AnimationFrame[] = [];

  constructor(api: SessionApi, sid: string) {
    this.api = api;
    this.sid = sid;
  }

  static async create(api: SessionApi, options: Parameters<SessionApi["createSession"]>[0]) {
    const created = await api.createSession(options);
    const controller = new SessionController(api, created.session_id);
    await controller.refresh();
    return controller;
  }

  async refresh(): Promise<ViewPayload> {
    this.view = await this.api.view(this.sid);
    if (this.view.geometry.kind === "grid") {
      this.grid = gridModelFrom(this.view);
    }
    if (this.view.phase === "awaiting_demonstration" && this.demoPath.length === 0) {
      const pending = this.view.pending_subtask;
      if (pending) this.demoPath = [pending.start];
    }
    return this.view;
  }

  get phase() {
    return this.view?.phase ?? "awaiting_subgoals";
  }

  get counters() {
    return this.view?.counters ?? null;
  }

  get pendingSubtask(): PendingSubtask | null {
    return this.view?.pending_subtask ?? null;
  }

  shouldPoll(): boolean {
    return this.phase === "training";
  }

  // -- subgoal marking -------------------------------------------------------

  clickCellForSubgoal(x: number, y: number): boolean {
    this.inlineError = null;
    if (this.phase !== "awaiting_subgoals") {
      this.inlineError = "subgoals are fixed once submitted";
      return false;
    }
    const grid = this.grid;
    if (!grid) return false;
    if (grid.isObstacle(x, y) || !grid.inBounds(x, y)) {
      this.inlineError = `(${x}, ${y}) is not a free cell`;
      return false;
    }
    const state = grid.stateAt(x, y);
    if (state === null) return false;
    if (state === this.view!.geometry.goal_state) {
      this.inlineError = "the goal cannot be a subgoal";
      return false;
    }
    const at = this.markedSubgoals.indexOf(state);
    if (at >= 0) this.markedSubgoals.splice(at, 1);
    else this.markedSubgoals.push(state);
    return true;
  }

  async submitSubgoals(): Promise<boolean> {
    this.inlineError = null;
    try {
      await this.api.submitSubgoals(this.sid, [...this.markedSubgoals]);
    } catch (err) {
      this.inlineError = (err as ApiError).message;
      return false;
    }
    this.markedSubgoals = [];
    await this.refresh();
    return true;
  }

  // -- rounds ----------------------------------------------------------------

  async runRound(): Promise<SubtaskView[] | null> {
    this.inlineError = null;
    if (this.phase !== "awaiting_rollout") {
      this.inlineError = `cannot run a round while ${this.phase}`;
      return null;
    }
    let round;
    try {
      round = await this.api.runRound(this.sid);
    } catch (err) {
      this.inlineError = (err as ApiError).message;
      return null;
    }
    this.animationQueue = buildAnimation(round.subtasks);
    await this.refresh();
    return round.subtasks;
  }

  nextAnimationFrame(): AnimationFrame | null {
    return this.animationQueue.shift() ?? null;
  }

  // -- demonstration drawing -------------------------------------------------

  get demoTarget(): number | null {
    const pending = this.pendingSubtask;
    return pending ? pending.target : null;
  }

  dragToCell(x: number, y: number): boolean {
    this.inlineError = null;
    if (this.phase !== "awaiting_demonstration") {
      this.inlineError = "no demonstration is being requested";
      return false;
    }
    const grid = this.grid;
    const pending = this.pendingSubtask;
    if (!grid || !pending) return false;
    const state = grid.stateAt(x, y);
    if (state === null) {
      this.inlineError = `(${x}, ${y}) is not a free cell`;
      return false;
    }
    if (this.demoPath.length === 0) this.demoPath = [pending.start];
    const from = this.demoPath[this.demoPath.length - 1];
    if (!grid.legalHop(from, state)) {
      const [fx, fy] = grid.cellOf(from);
      this.inlineError =
        `illegal hop: (${fx}, ${fy}) -> (${x}, ${y}) is not adjacent`;
      return false;
    }
    this.demoPath.push(state);
    return true;
  }

  undoDemoStep() {
    if (this.demoPath.length > 1) this.demoPath.pop();
  }

  resetDemoPath() {
    const pending = this.pendingSubtask;
    this.demoPath = pending ? [pending.start] : [];
  }

  canSubmitDemonstration(): boolean {
    const pending = this.pendingSubtask;
    if (!pending || this.demoPath.length === 0) return false;
    const end = this.demoPath[this.demoPath.length - 1];
    return pending.alternatives.includes(end);
  }

  async submitDemonstration(): Promise<boolean> {
    this.inlineError = null;
    if (!this.canSubmitDemonstration()) {
      this.inlineError = "the path must end on the requested target";
      return false;
    }
    try {
      await this.api.submitDemonstration(this.sid, [...this.demoPath]);
    } catch (err) {
      this.inlineError = (err as ApiError).message;
      return false;
    }
    this.demoPath = [];
    await this.refresh();
    return true;
  }
}

function buildAnimation(subtasks: SubtaskView[]): AnimationFrame[] {
  const frames: AnimationFrame[] = [];
  subtasks.forEach((sub, i) => {
    sub.states.forEach((state, j) => {
      frames.push({
        subtask: i,
        state,
        succeeded: sub.succeeded,
        last: j === sub.states.length - 1,
      });
    });
  });
  return frames;
}
