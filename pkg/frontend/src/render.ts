// Canvas drawing for grid sessions: cells, heat overlay, policy arrows,
// subgoal stars, rollout polylines, the in-progress demonstration path.
// Car-park sessions draw the position lattice with a heading arrow.

import { SessionController } from "./controller.js";
import { rewardColor, rewardScale } from "./gridModel.js";
import type { GridGeometry, ViewPayload } from "./types.js";

const ARROWS = ["↑", "↓", "←", "→"]; // up down left right

export function cellSize(canvas: HTMLCanvasElement, geo: { width: number; height: number }) {
  return Math.floor(Math.min(canvas.width / geo.width, canvas.height / geo.height));
}

export function drawSession(canvas: HTMLCanvasElement, controller: SessionController,
                            agentState: number | null = null) {
  const view = controller.view;
  const ctx = canvas.getContext("2d");
  if (!view || !ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (view.geometry.kind === "grid") {
    drawGrid(ctx, canvas, controller, view, view.geometry, agentState);
  } else {
    drawCarpark(ctx, canvas, view, agentState);
  }
}

function drawGrid(ctx: CanvasRenderingContext2D, canvas: HTMLCanvasElement,
                  controller: SessionController, view: ViewPayload,
                  geo: GridGeometry, agentState: number | null) {
  const size = cellSize(canvas, geo);
  const { lo, hi } = rewardScale(view.reward);

  for (let y = 0; y < geo.height; y++) {
    for (let x = 0; x < geo.width; x++) {
      ctx.fillStyle = "#f7f7f2";
      ctx.fillRect(x * size, y * size, size, size);
    }
  }
  geo.cells.forEach(([x, y], s) => {
    ctx.fillStyle = rewardColor(view.reward[s], lo, hi);
    ctx.fillRect(x * size, y * size, size, size);
  });
  for (const [x, y] of geo.obstacles) {
    ctx.fillStyle = "#3b3b3b";
    ctx.fillRect(x * size, y * size, size, size);
  }

  // goal: green box; start: outlined box
  const [gx, gy] = geo.goal;
  ctx.fillStyle = "#2e9e44";
  ctx.fillRect(gx * size, gy * size, size, size);
  if (geo.start) {
    ctx.strokeStyle = "#1d4ed8";
    ctx.lineWidth = 2;
    ctx.strokeRect(geo.start[0] * size + 2, geo.start[1] * size + 2, size - 4, size - 4);
  }

  // greedy policy arrows
  ctx.fillStyle = "rgba(0,0,0,0.55)";
  ctx.font = `${Math.floor(size * 0.5)}px sans-serif`;
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  geo.cells.forEach(([x, y], s) => {
    if (s === geo.goal_state) return;
    ctx.fillText(ARROWS[view.greedy_actions[s]], (x + 0.5) * size, (y + 0.5) * size);
  });

  // committed subgoals: red stars; optimistic marks: hollow stars
  for (const s of view.subgoals) drawStar(ctx, geo.cells[s], size, "#d11");
  for (const s of controller.markedSubgoals) drawStar(ctx, geo.cells[s], size, "#d11", false);

  // last rollout polylines, green for success, red for failure
  for (const sub of view.last_rollout) {
    drawPath(ctx, sub.states.map((s) => geo.cells[s]), size,
             sub.succeeded ? "rgba(24,160,24,0.9)" : "rgba(220,32,32,0.9)");
  }

  // in-progress demonstration path
  if (controller.demoPath.length > 0) {
    drawPath(ctx, controller.demoPath.map((s) => geo.cells[s]), size, "#7c3aed", 3);
    const target = controller.demoTarget;
    if (target !== null) drawStar(ctx, geo.cells[target], size, "#7c3aed");
  }

  if (agentState !== null) {
    const [ax, ay] = geo.cells[agentState];
    ctx.fillStyle = "#dd3311";
    ctx.beginPath();
    ctx.arc((ax + 0.5) * size, (ay + 0.5) * size, size * 0.3, 0, Math.PI * 2);
    ctx.fill();
  }
}

function drawCarpark(ctx: CanvasRenderingContext2D, canvas: HTMLCanvasElement,
                     view: ViewPayload, agentState: number | null) {
  const geo = view.geometry;
  if (geo.kind !== "carpark") return;
  const size = cellSize(canvas, geo);
  ctx.fillStyle = "#f7f7f2";
  ctx.fillRect(0, 0, geo.width * size, geo.height * size);
  for (const [x, y] of geo.obstacles) {
    ctx.fillStyle = "#3b3b3b";
    ctx.fillRect(x * size, y * size, size, size);
  }
  ctx.fillStyle = "#2e9e44";
  ctx.fillRect(geo.goal[0] * size, geo.goal[1] * size, size, size);
  drawHeading(ctx, geo.goal[0], geo.goal[1], geo.goal_heading, geo.headings, size, "#0a0");
  if (agentState !== null) {
    const [x, y, h] = geo.states[agentState];
    drawHeading(ctx, x, y, h, geo.headings, size, "#dd3311");
  }
}

function drawHeading(ctx: CanvasRenderingContext2D, x: number, y: number,
                     heading: number, headings: number, size: number, color: string) {
  const angle = (2 * Math.PI * heading) / headings;
  const cx = (x + 0.5) * size;
  const cy = (y + 0.5) * size;
  const dx = Math.cos(angle) * size * 0.4;
  const dy = Math.sin(angle) * size * 0.4;
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(cx - dx, cy - dy);
  ctx.lineTo(cx + dx, cy + dy);
  ctx.stroke();
  ctx.beginPath();
  ctx.arc(cx + dx, cy + dy, 3, 0, Math.PI * 2);
  ctx.fillStyle = color;
  ctx.fill();
}

function drawStar(ctx: CanvasRenderingContext2D, cell: [number, number],
                  size: number, color: string, filled = true) {
  const [x, y] = cell;
  const cx = (x + 0.5) * size;
  const cy = (y + 0.5) * size;
  const outer = size * 0.38;
  const inner = outer * 0.45;
  ctx.beginPath();
  for (let i = 0; i < 10; i++) {
    const radius = i % 2 === 0 ? outer : inner;
    const angle = (Math.PI / 5) * i - Math.PI / 2;
    const px = cx + radius * Math.cos(angle);
    const py = cy + radius * Math.sin(angle);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  }
  ctx.closePath();
  if (filled) {
    ctx.fillStyle = color;
    ctx.fill();
  } else {
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.stroke();
  }
}

function drawPath(ctx: CanvasRenderingContext2D, cells: [number, number][],
                  size: number, color: string, width = 2) {
  if (cells.length < 2) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  cells.forEach(([x, y], i) => {
    const px = (x + 0.5) * size;
    const py = (y + 0.5) * size;
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.stroke();
}
