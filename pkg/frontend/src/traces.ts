/**
 * Reader for the simulation trace CSV written by the synthesis CLI.
 *
 * The file is plain comma-separated text with a fixed leading header
 * (controller, signal_id, run, time, cost, state_inf_norm) followed by one
 * column per state coordinate (x1..xN).  Values are never quoted, so no
 * general CSV machinery is needed; floats are written in shortest
 * round-trip form and parse back to the exact same doubles.
 */

export interface TraceRow {
  controller: string;
  signalId: number;
  run: number;
  time: number;
  cost: number;
  stateInfNorm: number;
  states: number[];
}

export interface TraceTable {
  rows: TraceRow[];
  stateColumns: string[];
  controllers: string[];
  signalIds: number[];
}

const REQUIRED = [
  "controller",
  "signal_id",
  "run",
  "time",
  "cost",
  "state_inf_norm",
];

export function parseTraces(text: string): TraceTable {
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new Error("trace file is empty");
  }
  const header = lines[0].split(",");
  for (let i = 0; i < REQUIRED.length; i++) {
    if (header[i] !== REQUIRED[i]) {
      throw new Error(
        `trace header is missing column '${REQUIRED[i]}' at position ${i}`,
      );
    }
  }
  const stateColumns = header.slice(REQUIRED.length);
  if (stateColumns.some((name, i) => name !== `x${i + 1}`)) {
    throw new Error("state columns must be named x1..xN in order");
  }
  if (lines.length === 1) {
    throw new Error("trace file has a header but no runs");
  }

  const rows: TraceRow[] = [];
  const controllers: string[] = [];
  const signalIds: number[] = [];
  const seenController = new Set<string>();
  const seenSignal = new Set<number>();
  for (let k = 1; k < lines.length; k++) {
    const cells = lines[k].split(",");
    if (cells.length !== header.length) {
      throw new Error(`row ${k} has ${cells.length} cells, expected ${header.length}`);
    }
    const row: TraceRow = {
      controller: cells[0],
      signalId: parseIntStrict(cells[1], k, "signal_id"),
      run: parseIntStrict(cells[2], k, "run"),
      time: parseIntStrict(cells[3], k, "time"),
      cost: parseFloatStrict(cells[4], k, "cost"),
      stateInfNorm: parseFloatStrict(cells[5], k, "state_inf_norm"),
      states: cells.slice(REQUIRED.length).map((c, i) =>
        parseFloatStrict(c, k, stateColumns[i]),
      ),
    };
    rows.push(row);
    if (!seenController.has(row.controller)) {
      seenController.add(row.controller);
      controllers.push(row.controller);
    }
    if (!seenSignal.has(row.signalId)) {
      seenSignal.add(row.signalId);
      signalIds.push(row.signalId);
    }
  }
  signalIds.sort((a, b) => a - b);
  return { rows, stateColumns, controllers, signalIds };
}

function parseIntStrict(cell: string, line: number, name: string): number {
  const v = Number(cell);
  if (!Number.isInteger(v)) {
    throw new Error(`row ${line}: column ${name} is not an integer: '${cell}'`);
  }
  return v;
}

function parseFloatStrict(cell: string, line: number, name: string): number {
  const v = Number(cell);
  if (Number.isNaN(v)) {
    throw new Error(`row ${line}: column ${name} is not a number: '${cell}'`);
  }
  return v;
}
