import type { ArmPayload, MazePayload, RenderPayload } from "./types.js";

/**
 * Pure SVG rendering of judgment payloads: the same payload always produces
 * the identical markup string, so views can be diffed and tested directly.
 */

const VIEW = 220;

function fmt(v: number): string {
  return v.toFixed(2);
}

function isPoint(p: unknown): p is [number, number] {
  return Array.isArray(p) && p.length === 2 && p.every((v) => Number.isFinite(v));
}

function isSegment(s: unknown): s is [number, number, number, number] {
  return Array.isArray(s) && s.length === 4 && s.every((v) => Number.isFinite(v));
}

/** Null when the payload is renderable, otherwise a reason for the banner. */
export function payloadProblem(payload: unknown): string | null {
  const p = payload as Partial<RenderPayload> | null;
  if (!p || typeof p !== "object") {
    return "payload is not an object";
  }
  if (p.kind === "arm") {
    const points = (p as ArmPayload).points;
    if (!Array.isArray(points) || points.length < 2 || !points.every(isPoint)) {
      return "arm payload needs at least two finite joint positions";
    }
    return null;
  }
  if (p.kind === "maze") {
    const m = p as MazePayload;
    if (!Array.isArray(m.walls) || !m.walls.every(isSegment)) {
      return "maze payload has malformed wall segments";
    }
    if (!Array.isArray(m.path) || m.path.length < 1 || !m.path.every(isPoint)) {
      return "maze payload has a malformed trajectory";
    }
    return null;
  }
  return `unknown payload kind: ${String((p as { kind?: unknown }).kind)}`;
}

interface Mapping {
  sx(x: number): number;
  sy(y: number): number;
}

/** Map data coordinates into the padded view box, y flipped for SVG. */
function makeMapping(lo: number, hi: number): Mapping {
  const pad = 0.05 * (hi - lo);
  const scale = VIEW / (hi - lo + 2 * pad);
  return {
    sx: (x) => (x - lo + pad) * scale,
    sy: (y) => VIEW - (y - lo + pad) * scale,
  };
}

function polyline(points: [number, number][], m: Mapping, cls: string): string {
  const coords = points.map(([x, y]) => `${fmt(m.sx(x))},${fmt(m.sy(y))}`).join(" ");
  return `<polyline class="${cls}" points="${coords}" fill="none"/>`;
}

function dot(x: number, y: number, m: Mapping, cls: string, r = 4): string {
  return `<circle class="${cls}" cx="${fmt(m.sx(x))}" cy="${fmt(m.sy(y))}" r="${r}"/>`;
}

function svgOpen(): string {
  return `<svg viewBox="0 0 ${VIEW} ${VIEW}" xmlns="http://www.w3.org/2000/svg">`;
}

export function renderArm(payload: ArmPayload): string {
  const extent = Math.max(1, ...payload.points.map(([x, y]) => Math.max(Math.abs(x), Math.abs(y))));
  const m = makeMapping(-extent, extent);
  return [
    svgOpen(),
    polyline(payload.points, m, "arm-links"),
    dot(payload.points[0][0], payload.points[0][1], m, "arm-base"),
    dot(
      payload.points[payload.points.length - 1][0],
      payload.points[payload.points.length - 1][1],
      m,
      "arm-hand",
    ),
    "</svg>",
  ].join("");
}

export function renderMaze(payload: MazePayload): string {
  const m = makeMapping(0, 1);
  const walls = payload.walls
    .map(
      ([x1, y1, x2, y2]) =>
        `<line class="maze-wall" x1="${fmt(m.sx(x1))}" y1="${fmt(m.sy(y1))}" ` +
        `x2="${fmt(m.sx(x2))}" y2="${fmt(m.sy(y2))}"/>`,
    )
    .join("");
  const end = payload.path[payload.path.length - 1];
  return [
    svgOpen(),
    walls,
    polyline(payload.path, m, "maze-path"),
    dot(payload.path[0][0], payload.path[0][1], m, "maze-start", 3),
    dot(end[0], end[1], m, "maze-end"),
    "</svg>",
  ].join("");
}

export function renderPayload(payload: RenderPayload): string {
  return payload.kind === "arm" ? renderArm(payload) : renderMaze(payload);
}
