/**
 * SVG figure builders for the two comparison plots.
 *
 * Both consume a trace table plus its manifest and render one highlighted
 * switching signal: per-time cost curves with mean +/- one standard
 * deviation bands for the stochastic problem, and peak-state curves with a
 * [max - std, max] band, the certified bound line, and the fault-time
 * marker for the worst-case problem.  The numeric band series are returned
 * alongside the markup so callers can check them against the manifest.
 */

import type { CellStats, StatsTable } from "./stats.js";

export interface SignalInfo {
  id: number;
  modes: number[];
  fault_time: number;
  probability?: number;
}

export interface Manifest {
  format: string;
  problem: "h2" | "l1";
  seed: number;
  runs: number;
  horizon: number;
  config_hash: string;
  rng: string;
  controllers: string[];
  objectives: Record<string, number>;
  signals: SignalInfo[];
  stats: StatsTable;
  highlight_signal: number;
  bound?: number;
  binding_signal?: number;
  exceedance_over_bound?: Record<string, number>;
}

export interface BandSeries {
  controller: string;
  /** Center line for h2 (cost mean); upper envelope for l1 (running max). */
  center: number[];
  /** Band bottom edge, per time step. */
  lower: number[];
  /** Band top edge, per time step. */
  upper: number[];
}

export interface Figure {
  svg: string;
  bands: BandSeries[];
  faultTime: number;
  bound?: number;
}

const WIDTH = 640;
const HEIGHT = 400;
const MARGIN = { top: 42, right: 24, bottom: 46, left: 64 };
const COLORS = ["#1f6fb4", "#d0452c", "#3c8e50", "#8057a8"];

export function checkManifest(doc: Manifest): void {
  if (doc.format !== "sim-manifest-v1") {
    throw new Error(`unrecognized manifest format '${doc.format}'`);
  }
  if (doc.problem !== "h2" && doc.problem !== "l1") {
    throw new Error(`manifest problem must be h2 or l1, got '${doc.problem}'`);
  }
  if (!Array.isArray(doc.controllers) || doc.controllers.length === 0) {
    throw new Error("manifest lists no controllers");
  }
}

function cellFor(doc: Manifest, controller: string, signalId: number): CellStats {
  const table = doc.stats[controller];
  if (table === undefined) {
    throw new Error(`manifest has no statistics for controller '${controller}'`);
  }
  const cell = table[String(signalId)];
  if (cell === undefined) {
    throw new Error(
      `manifest has no statistics for signal ${signalId} of '${controller}'`,
    );
  }
  return cell;
}

function faultTimeOf(doc: Manifest, signalId: number): number {
  const sig = doc.signals.find((s) => s.id === signalId);
  if (sig === undefined) {
    throw new Error(`manifest lists no signal with id ${signalId}`);
  }
  return sig.fault_time;
}

/** Band data for the stochastic comparison: cost mean +/- one std. */
export function h2Bands(doc: Manifest, signalId: number): BandSeries[] {
  return doc.controllers.map((controller) => {
    const cell = cellFor(doc, controller, signalId);
    return {
      controller,
      center: cell.cost_mean,
      lower: cell.cost_mean.map((m, t) => m - cell.cost_std[t]),
      upper: cell.cost_mean.map((m, t) => m + cell.cost_std[t]),
    };
  });
}

/** Band data for the worst-case comparison: [max - std, max] envelope. */
export function l1Bands(doc: Manifest, signalId: number): BandSeries[] {
  return doc.controllers.map((controller) => {
    const cell = cellFor(doc, controller, signalId);
    return {
      controller,
      center: cell.xinf_max,
      lower: cell.xinf_max_minus_std,
      upper: cell.xinf_max,
    };
  });
}

interface Scale {
  (v: number): number;
}

function linearScale(lo: number, hi: number, a: number, b: number): Scale {
  const span = hi - lo || 1;
  return (v: number) => a + ((v - lo) / span) * (b - a);
}

function ticks(lo: number, hi: number, count: number): number[] {
  const span = hi - lo || 1;
  const raw = span / count;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 5, 10].map((k) => k * mag).find((s) => span / s <= count) ?? mag * 10;
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += step) {
    out.push(Number(v.toPrecision(12)));
  }
  return out;
}

function fmt(v: number): string {
  return Number(v.toFixed(2)).toString();
}

function polyline(xs: number[], ys: number[]): string {
  return xs.map((x, i) => `${fmt(x)},${fmt(ys[i])}`).join(" ");
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

interface ChartSpec {
  title: string;
  yLabel: string;
  bands: BandSeries[];
  faultTime: number;
  horizon: number;
  bound?: number;
  objectives: Record<string, number>;
}

function renderChart(spec: ChartSpec): string {
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;

  let lo = 0;
  let hi = -Infinity;
  for (const band of spec.bands) {
    for (const v of band.lower) lo = Math.min(lo, v);
    for (const v of band.upper) hi = Math.max(hi, v);
  }
  if (spec.bound !== undefined) hi = Math.max(hi, spec.bound);
  hi += 0.06 * (hi - lo || 1);

  const sx = linearScale(0, spec.horizon, x0, x1);
  const sy = linearScale(lo, hi, y0, y1);
  const times = spec.bands[0].center.map((_, t) => t);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
    `<text x="${(x0 + x1) / 2}" y="24" text-anchor="middle" font-size="15">${esc(spec.title)}</text>`,
  );

  // axes and grid
  for (const v of ticks(lo, hi, 6)) {
    const y = fmt(sy(v));
    parts.push(
      `<line x1="${x0}" y1="${y}" x2="${x1}" y2="${y}" stroke="#ddd" stroke-width="1"/>`,
      `<text x="${x0 - 8}" y="${fmt(sy(v) + 4)}" text-anchor="end" font-size="11">${fmt(v)}</text>`,
    );
  }
  for (let t = 0; t <= spec.horizon; t++) {
    parts.push(
      `<text x="${fmt(sx(t))}" y="${y0 + 18}" text-anchor="middle" font-size="11">${t}</text>`,
    );
  }
  parts.push(
    `<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="#444" stroke-width="1"/>`,
    `<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="#444" stroke-width="1"/>`,
    `<text x="${(x0 + x1) / 2}" y="${HEIGHT - 10}" text-anchor="middle" font-size="12">time step</text>`,
    `<text x="18" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 18 ${(y0 + y1) / 2})">${esc(spec.yLabel)}</text>`,
  );

  // shaded bands first, lines on top
  spec.bands.forEach((band, i) => {
    const color = COLORS[i % COLORS.length];
    const xs = times.map((t) => sx(t));
    const top = band.upper.map((v) => sy(v));
    const bot = band.lower.map((v) => sy(v));
    const ring = polyline(xs, top) + " " + polyline([...xs].reverse(), [...bot].reverse());
    parts.push(`<polygon points="${ring}" fill="${color}" opacity="0.18"/>`);
  });
  spec.bands.forEach((band, i) => {
    const color = COLORS[i % COLORS.length];
    const xs = times.map((t) => sx(t));
    parts.push(
      `<polyline points="${polyline(xs, band.center.map((v) => sy(v)))}" fill="none" stroke="${color}" stroke-width="1.8"/>`,
    );
  });

  // fault-time marker
  if (spec.faultTime <= spec.horizon) {
    const x = fmt(sx(spec.faultTime));
    parts.push(
      `<line x1="${x}" y1="${y0}" x2="${x}" y2="${y1}" stroke="#c22" stroke-width="1.2" stroke-dasharray="5,4"/>`,
      `<text x="${x}" y="${y1 - 4}" text-anchor="middle" font-size="11" fill="#c22">fault at t=${spec.faultTime}</text>`,
    );
  }

  // certified bound line
  if (spec.bound !== undefined) {
    const y = fmt(sy(spec.bound));
    parts.push(
      `<line x1="${x0}" y1="${y}" x2="${x1}" y2="${y}" stroke="#222" stroke-width="1.2" stroke-dasharray="7,4"/>`,
      `<text x="${x1 - 4}" y="${fmt(sy(spec.bound) - 5)}" text-anchor="end" font-size="11">bound ${spec.bound.toFixed(4)}</text>`,
    );
  }

  // legend with synthesized objectives
  spec.bands.forEach((band, i) => {
    const color = COLORS[i % COLORS.length];
    const y = y1 + 14 + 16 * i;
    const objective = spec.objectives[band.controller];
    const label =
      objective === undefined
        ? band.controller
        : `${band.controller} (objective ${objective.toFixed(3)})`;
    parts.push(
      `<rect x="${x0 + 10}" y="${y - 9}" width="18" height="9" fill="${color}" opacity="0.8"/>`,
      `<text x="${x0 + 34}" y="${y}" font-size="12">${esc(label)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

export function renderH2Figure(doc: Manifest, signalId?: number): Figure {
  checkManifest(doc);
  if (doc.problem !== "h2") {
    throw new Error("manifest is not from a stochastic comparison");
  }
  const sid = signalId ?? doc.highlight_signal;
  const bands = h2Bands(doc, sid);
  const faultTime = faultTimeOf(doc, sid);
  const svg = renderChart({
    title: `Stage cost, fault at t=${faultTime} (mean over ${doc.runs} runs, +/-1 std)`,
    yLabel: "stage cost",
    bands,
    faultTime,
    horizon: doc.horizon,
    objectives: doc.objectives,
  });
  return { svg, bands, faultTime };
}

export function renderL1Figure(doc: Manifest, signalId?: number): Figure {
  checkManifest(doc);
  if (doc.problem !== "l1") {
    throw new Error("manifest is not from a worst-case comparison");
  }
  const sid = signalId ?? doc.highlight_signal;
  const bands = l1Bands(doc, sid);
  const faultTime = faultTimeOf(doc, sid);
  const svg = renderChart({
    title: `Peak state magnitude, fault at t=${faultTime} (max over ${doc.runs} runs)`,
    yLabel: "||x||_inf",
    bands,
    faultTime,
    horizon: doc.horizon,
    bound: doc.bound,
    objectives: doc.objectives,
  });
  return { svg, bands, faultTime, bound: doc.bound };
}
