// Pure grid helpers: state/cell mapping from the view geometry, move
// legality for demonstration drawing, reward color scale. No DOM, no
// network; the server stays the authority on everything.

import type { GridGeometry, ViewPayload } from "./types.js";

export class GridModel {
  readonly geo: GridGeometry;
  private stateOf = new Map<string, number>();
  private obstacleSet = new Set<string>();

  constructor(geo: GridGeometry) {
    this.geo = geo;
    geo.cells.forEach(([x, y], s) => this.stateOf.set(`${x},${y}`, s));
    for (const [x, y] of geo.obstacles) this.obstacleSet.add(`${x},${y}`);
  }

  stateAt(x: number, y: number): number | null {
    const s = this.stateOf.get(`${x},${y}`);
    return s === undefined ? null : s;
  }

  cellOf(state: number): [number, number] {
    return this.geo.cells[state];
  }

  isObstacle(x: number, y: number): boolean {
    return this.obstacleSet.has(`${x},${y}`);
  }

  inBounds(x: number, y: number): boolean {
    return x >= 0 && x < this.geo.width && y >= 0 && y < this.geo.height;
  }

  // A legal demonstration hop moves to a 4-adjacent free cell, or stays
  // put when some move is blocked (only blocked moves self-loop).
  legalHop(from: number, to: number): boolean {
    const [ax, ay] = this.cellOf(from);
    if (from === to) {
      return [[0, -1], [0, 1], [-1, 0], [1, 0]].some(([dx, dy]) => {
        const nx = ax + dx;
        const ny = ay + dy;
        return !this.inBounds(nx, ny) || this.isObstacle(nx, ny);
      });
    }
    const [bx, by] = this.cellOf(to);
    return Math.abs(ax - bx) + Math.abs(ay - by) === 1;
  }

  validatePath(states: number[]): { ok: boolean; badHop: number | null } {
    for (let i = 0; i + 1 < states.length; i++) {
      if (!this.legalHop(states[i], states[i + 1])) {
        return { ok: false, badHop: i };
      }
    }
    return { ok: true, badHop: null };
  }
}

export function rewardScale(reward: number[]): { lo: number; hi: number } {
  let lo = Infinity;
  let hi = -Infinity;
  for (const r of reward) {
    if (r < lo) lo = r;
    if (r > hi) hi = r;
  }
  if (!isFinite(lo) || hi - lo < 1e-12) return { lo: 0, hi: 1 };
  return { lo, hi };
}

// Blue (low) to red (high) heat color for a reward value.
export function rewardColor(value: number, lo: number, hi: number): string {
  const t = Math.max(0, Math.min(1, (value - lo) / (hi - lo)));
  const r = Math.round(40 + 215 * t);
  const b = Math.round(255 - 215 * t);
  return `rgba(${r},80,${b},0.45)`;
}

export function gridModelFrom(view: ViewPayload): GridModel {
  if (view.geometry.kind !== "grid") {
    throw new Error("gridModelFrom needs a grid session");
  }
  return new GridModel(view.geometry);
}
