// Wire types mirroring the session service (see API.md in the repo root).

export type Phase =
  | "awaiting_subgoals"
  | "training"
  | "awaiting_rollout"
  | "awaiting_demonstration"
  | "finished";

export interface Counters {
  rounds: number;
  demo_steps: number;
  demo_count: number;
  failure_count: number;
  success_streak: number;
}

export interface GridGeometry {
  kind: "grid";
  width: number;
  height: number;
  obstacles: [number, number][];
  goal: [number, number];
  start: [number, number] | null;
  cells: [number, number][]; // cell per state index
  goal_state: number;
  start_state: number | null;
  eval_states: number[];
}

export interface CarParkGeometry {
  kind: "carpark";
  width: number;
  height: number;
  headings: number;
  obstacles: [number, number][];
  goal: [number, number];
  goal_heading: number;
  states: [number, number, number][]; // (x, y, heading) per state index
  goal_state: number;
  start_state: number | null;
}

export type Geometry = GridGeometry | CarParkGeometry;

export interface SubtaskView {
  start: number;
  target: number;
  budget: number;
  succeeded: boolean;
  states: number[];
}

export interface PendingSubtask {
  start: number;
  target: number;
  budget: number;
  alternatives: number[];
}

export interface ViewPayload {
  session_id: string;
  phase: Phase;
  counters: Counters;
  subgoals: number[];
  pending_subtask: PendingSubtask | null;
  last_rollout: SubtaskView[];
  reward: number[];
  greedy_actions: number[];
  geometry: Geometry;
}

export interface RoundResponse {
  phase: Phase;
  counters: Counters;
  overall_success: boolean;
  subtasks: SubtaskView[];
  pending_subtask?: PendingSubtask;
}

export interface HistoryRow {
  round: number;
  start: number;
  cumulative_demo_steps: number;
  success_bits: string;
  residual_inf: number;
  overall_success: boolean;
}

export interface ApiError {
  status: number;
  code: string;
  message: string;
}
