#!/usr/bin/env node
/**
 * Renders one comparison figure from a simulation campaign's trace file and
 * manifest.  Statistics are recomputed from the CSV and must match the
 * manifest exactly before anything is drawn; inputs are never modified.
 */

import { readFileSync, realpathSync, writeFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { parseArgs } from "node:util";

import { renderH2Figure, renderL1Figure, type Manifest } from "./figure.js";
import { assertStatsMatch, recomputeStats } from "./stats.js";
import { parseTraces } from "./traces.js";

const USAGE =
  "usage: prefixsls-plots --input traces.csv --manifest manifest.json --out figure.svg [--signal ID]";

class UsageError extends Error {}

function parseCli(argv: string[]): {
  input: string;
  manifest: string;
  out: string;
  signal?: number;
} {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        input: { type: "string" },
        manifest: { type: "string" },
        out: { type: "string" },
        signal: { type: "string" },
      },
      allowPositionals: false,
    }));
  } catch (err) {
    throw new UsageError(err instanceof Error ? err.message : String(err));
  }
  const { input, manifest, out } = values;
  if (input === undefined || manifest === undefined || out === undefined) {
    throw new UsageError("--input, --manifest and --out are all required");
  }
  if (!out.endsWith(".svg")) {
    throw new UsageError(`--out must name an .svg file, got '${out}'`);
  }
  let signal: number | undefined;
  if (values.signal !== undefined) {
    signal = Number(values.signal);
    if (!Number.isInteger(signal)) {
      throw new UsageError(`--signal must be an integer, got '${values.signal}'`);
    }
  }
  return { input, manifest, out, signal };
}

export function run(argv: string[]): number {
  let args;
  try {
    args = parseCli(argv);
  } catch (err) {
    process.stderr.write(`${err instanceof Error ? err.message : err}\n${USAGE}\n`);
    return 2;
  }
  try {
    const doc = JSON.parse(readFileSync(args.manifest, "utf8")) as Manifest;
    const table = parseTraces(readFileSync(args.input, "utf8"));
    const signalIds = doc.signals.map((s) => s.id);
    const recomputed = recomputeStats(table.rows, doc.controllers, signalIds, doc.horizon);
    assertStatsMatch(recomputed, doc.stats);
    const figure =
      doc.problem === "l1"
        ? renderL1Figure(doc, args.signal)
        : renderH2Figure(doc, args.signal);
    writeFileSync(args.out, figure.svg);
    process.stderr.write(`wrote ${args.out}\n`);
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${err instanceof Error ? err.message : err}\n`);
    return 1;
  }
}

function invokedDirectly(): boolean {
  // argv[1] may be the npm bin shim, so resolve symlinks before comparing
  const entry = process.argv[1];
  if (entry === undefined) return false;
  try {
    return realpathSync(entry) === fileURLToPath(import.meta.url);
  } catch {
    return false;
  }
}

if (invokedDirectly()) {
  process.exit(run(process.argv.slice(2)));
}
