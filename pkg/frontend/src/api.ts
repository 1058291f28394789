// Thin fetch client for the session service. Every mutation the UI ever
// sends goes through here, which is also what the tests spy on to prove
// no invalid state reaches the server.

import type { ApiError, HistoryRow, Phase, RoundResponse, ViewPayload } from "./types.js";

export interface CreateSessionOptions {
  env_kind?: string;
  environment: string;
  seed?: number;
  expert?: string;
  model?: string;
  step_thr?: number;
  alpha?: number;
  iterations?: number;
  max_rounds?: number;
  finish_streak?: number;
  action_rule?: string;
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    const detail = (body && body.detail) || {};
    const err: ApiError = {
      status: resp.status,
      code: detail.code || "unknown",
      message: detail.message || resp.statusText,
    };
    throw err;
  }
  return body as T;
}

export class SessionApi {
  readonly base: string;
  readonly log: { method: string; path: string; body?: unknown }[] = [];

  constructor(base: string) {
    this.base = base.replace(/\/$/, "");
  }

  private track(method: string, path: string, body?: unknown) {
    this.log.push({ method, path, body });
  }

  async createSession(opts: CreateSessionOptions): Promise<{ session_id: string; phase: Phase }> {
    this.track("POST", "/sessions", opts);
    return request(`${this.base}/sessions`, {
      method: "POST",
      body: JSON.stringify(opts),
    });
  }

  async submitSubgoals(sid: string, states: number[]): Promise<{ phase: Phase; subgoals: number[] }> {
    this.track("POST", `/sessions/${sid}/subgoals`, { states });
    return request(`${this.base}/sessions/${sid}/subgoals`, {
      method: "POST",
      body: JSON.stringify({ states }),
    });
  }

  async runRound(sid: string): Promise<RoundResponse> {
    this.track("POST", `/sessions/${sid}/round`);
    return request(`${this.base}/sessions/${sid}/round`, { method: "POST" });
  }

  async submitDemonstration(sid: string, states: number[]): Promise<{ phase: Phase }> {
    this.track("POST", `/sessions/${sid}/demonstration`, { states });
    return request(`${this.base}/sessions/${sid}/demonstration`, {
      method: "POST",
      body: JSON.stringify({ states }),
    });
  }

  async view(sid: string): Promise<ViewPayload> {
    return request(`${this.base}/sessions/${sid}/view`);
  }

  async history(sid: string): Promise<{ rounds: HistoryRow[] }> {
    return request(`${this.base}/sessions/${sid}/history`);
  }

  async summary(sid: string): Promise<{ phase: Phase; counters: Record<string, number> }> {
    return request(`${this.base}/sessions/${sid}`);
  }
}
