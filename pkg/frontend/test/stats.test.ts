import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import type { Manifest } from "../src/figure.js";
import { assertStatsMatch, naiveMean, naiveStd, recomputeStats } from "../src/stats.js";
import { parseTraces } from "../src/traces.js";

const DEMOS = ["drift_h2", "sensor_l1"] as const;

function demoFile(name: string, file: string): URL {
  return new URL(`../../demo/${name}/${file}`, import.meta.url);
}

function loadDemo(name: string) {
  const manifest = JSON.parse(
    readFileSync(demoFile(name, "manifest.json"), "utf8"),
  ) as Manifest;
  const table = parseTraces(readFileSync(demoFile(name, "traces.csv"), "utf8"));
  return { manifest, table };
}

describe("naive accumulators", () => {
  it("sums left to right", () => {
    expect(naiveMean([1, 2, 4])).toBe((1 + 2 + 4) / 3);
    expect(naiveMean([0.1, 0.2, 0.3])).toBe((0.1 + 0.2 + 0.3) / 3);
  });

  it("uses the unbiased denominator and zeroes out singletons", () => {
    expect(naiveStd([5], 5)).toBe(0);
    expect(naiveStd([], 0)).toBe(0);
    expect(naiveStd([1, 3], 2)).toBe(Math.sqrt(2));
  });
});

describe("trace parsing", () => {
  const header = "controller,signal_id,run,time,cost,state_inf_norm,x1,x2";
  const body = [
    "prefix,0,0,0,1.5,0.25,0.25,-0.1",
    "prefix,0,0,1,0.5,0.125,0.125,0.0",
    "nominal,0,0,0,2.5,0.5,0.5,0.25",
    "nominal,0,0,1,1.0,0.25,-0.25,0.1",
  ];

  it("reads rows, state columns and id sets", () => {
    const table = parseTraces([header, ...body].join("\n") + "\n");
    expect(table.rows).toHaveLength(4);
    expect(table.stateColumns).toEqual(["x1", "x2"]);
    expect(table.controllers).toEqual(["prefix", "nominal"]);
    expect(table.signalIds).toEqual([0]);
    expect(table.rows[1].states).toEqual([0.125, 0.0]);
    expect(table.rows[3].cost).toBe(1.0);
  });

  it("rejects an empty file", () => {
    expect(() => parseTraces("")).toThrow(/empty/);
    expect(() => parseTraces("\n\n")).toThrow(/empty/);
  });

  it("rejects a header with no runs", () => {
    expect(() => parseTraces(header + "\n")).toThrow(/no runs/);
  });

  it("rejects a missing required column", () => {
    const broken = header.replace(",cost", "");
    expect(() => parseTraces([broken, ...body].join("\n"))).toThrow(/cost/);
  });

  it("rejects misnamed state columns", () => {
    const broken = header.replace(",x2", ",y2");
    expect(() => parseTraces([broken, ...body].join("\n"))).toThrow(/x1\.\.xN/);
  });

  it("rejects rows with the wrong cell count", () => {
    const text = [header, body[0], "prefix,0,0,1,0.5,0.125,0.125"].join("\n");
    expect(() => parseTraces(text)).toThrow(/cells/);
  });

  it("rejects non-numeric and non-integer cells", () => {
    const bad = [header, "prefix,0,0,0,oops,0.25,0.25,-0.1"].join("\n");
    expect(() => parseTraces(bad)).toThrow(/oops/);
    const frac = [header, "prefix,0,0.5,0,1.5,0.25,0.25,-0.1"].join("\n");
    expect(() => parseTraces(frac)).toThrow(/integer/);
  });
});

describe("manifest statistics recomputation", () => {
  for (const name of DEMOS) {
    it(`matches the ${name} manifest bit for bit`, () => {
      const { manifest, table } = loadDemo(name);
      const recomputed = recomputeStats(
        table.rows,
        manifest.controllers,
        manifest.signals.map((s) => s.id),
        manifest.horizon,
      );
      expect(() => assertStatsMatch(recomputed, manifest.stats)).not.toThrow();
      // belt and braces beyond assertStatsMatch: every array element is
      // identical under Object.is, not merely close
      for (const controller of manifest.controllers) {
        for (const sig of manifest.signals) {
          const want = manifest.stats[controller][String(sig.id)];
          const got = recomputed[controller][String(sig.id)];
          for (const field of [
            "cost_mean",
            "cost_std",
            "xinf_mean",
            "xinf_std",
            "xinf_max",
            "xinf_max_minus_std",
          ] as const) {
            expect(got[field].length).toBe(manifest.horizon + 1);
            got[field].forEach((v, t) => {
              expect(Object.is(v, want[field][t])).toBe(true);
            });
          }
          expect(Object.is(got.total_cost_mean, want.total_cost_mean)).toBe(true);
          expect(Object.is(got.total_cost_std, want.total_cost_std)).toBe(true);
        }
      }
    });
  }

  it("flags any perturbation of the traces", () => {
    const { manifest, table } = loadDemo("drift_h2");
    table.rows[17].cost += 1e-9;
    const recomputed = recomputeStats(
      table.rows,
      manifest.controllers,
      manifest.signals.map((s) => s.id),
      manifest.horizon,
    );
    expect(() => assertStatsMatch(recomputed, manifest.stats)).toThrow(/match/);
  });

  it("rejects incomplete runs", () => {
    const { manifest, table } = loadDemo("drift_h2");
    const rows = table.rows.slice(0, table.rows.length - 1);
    expect(() =>
      recomputeStats(
        rows,
        manifest.controllers,
        manifest.signals.map((s) => s.id),
        manifest.horizon,
      ),
    ).toThrow(/missing time/);
  });
});
