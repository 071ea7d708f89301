export { parseTraces } from "./traces.js";
export type { TraceRow, TraceTable } from "./traces.js";
export { assertStatsMatch, naiveMean, naiveStd, recomputeStats } from "./stats.js";
export type { CellStats, StatsTable } from "./stats.js";
export {
  checkManifest,
  h2Bands,
  l1Bands,
  renderH2Figure,
  renderL1Figure,
} from "./figure.js";
export type { BandSeries, Figure, Manifest, SignalInfo } from "./figure.js";
export { run } from "./cli.js";
