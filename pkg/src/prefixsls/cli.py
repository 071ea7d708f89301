"""Command line front end.

Subcommands: synth, simulate, compare, check, export-controller.
Exit codes: 0 success, 2 bad config, 3 solver failure, 4 artifact hash
mismatch.  Failures also emit one machine-readable JSON object on stderr.
"""

import argparse
import json
import os
import sys

import numpy as np

from .io import (
    ConfigError,
    build_manifest,
    load_scenario,
    manifest_stats,
    read_solution,
    solution_dict,
    trace_rows,
    write_manifest,
    write_solution,
    write_traces_csv,
    write_traces_json,
)
from .blockmat import BlockLTMatrix
from .language import fault_time
from .sim import monte_carlo
from .sls import SynthesisConsistencyError, SystemResponse, check_affine
from .solver import Infeasible, SolverError, Unbounded
from .synth import (
    closed_loop_family,
    evaluate_h2_objective,
    evaluate_l1_objective,
    memoryless_l1_baseline,
    nominal_h2_baseline,
    synth_h2,
    synth_l1,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_HASH = 4


class HashMismatch(RuntimeError):
    pass


def _fail(kind, code, message):
    payload = {"error": {"kind": kind, "code": code, "message": str(message)}}
    print(json.dumps(payload), file=sys.stderr)
    return code


def _ensure_out(path):
    os.makedirs(path, exist_ok=True)
    return path


def _synthesize(scenario):
    model = scenario.build_model()
    lang = scenario.build_language()
    noise = scenario.build_noise()
    if scenario.problem == "h2":
        return synth_h2(
            model,
            lang,
            noise,
            scenario.build_cost(),
            delay=scenario.delay,
            formulation=scenario.formulation,
            covariance_multiplier=scenario.covariance_multiplier,
            consistency_tol=scenario.consistency_tol,
        )
    formulation = scenario.formulation
    if formulation in ("auto", "reduced"):
        formulation = "slab"
    return synth_l1(
        model,
        lang,
        noise,
        delay=scenario.delay,
        formulation=formulation,
        lp_method=scenario.lp_method,
        consistency_tol=scenario.consistency_tol,
    )


def cmd_synth(args):
    scenario = load_scenario(args.config)
    out = _ensure_out(args.out)
    sol = _synthesize(scenario)
    path = os.path.join(out, "solution.json")
    write_solution(path, sol, scenario)
    print(f"problem {scenario.problem}  objective {sol.objective:.12g}")
    print(f"wrote {path}")
    return EXIT_OK


def _campaign_rows(scenario, model, lang, labeled_controllers):
    """Run the Monte-Carlo campaign for each controller under common seeds."""
    noise = scenario.build_noise()
    cost = scenario.build_cost()
    rows = []
    stats_by_label = {}
    for label, ctrl in labeled_controllers:
        mc = monte_carlo(
            model,
            lang,
            ctrl,
            noise,
            cost,
            scenario.runs,
            scenario.seed,
            bounded_mode=scenario.noise_mode,
            keep_traces=True,
        )
        stats_by_label[label] = mc
        for sig_idx, run, trace in mc.traces:
            rows.extend(trace_rows(label, sig_idx, run, trace))
    return rows, stats_by_label


def _write_campaign(scenario, model, lang, rows, labels, objectives, out, fmt, extra):
    if fmt == "csv":
        traces_path = os.path.join(out, "traces.csv")
        write_traces_csv(traces_path, rows, model.n)
    else:
        traces_path = os.path.join(out, "traces.json")
        write_traces_json(traces_path, rows)
    stats = manifest_stats(rows, labels, range(len(lang)), scenario.horizon)
    doc = build_manifest(scenario, lang, labels, objectives, stats, extra)
    doc["sim"] = {
        "seed": scenario.seed,
        "runs": scenario.runs,
        "noise_mode": scenario.noise_mode,
        "format": fmt,
    }
    manifest_path = os.path.join(out, "manifest.json")
    write_manifest(manifest_path, doc)
    print(f"wrote {traces_path}")
    print(f"wrote {manifest_path}")


def cmd_simulate(args):
    scenario = load_scenario(args.config)
    if args.seed is not None:
        scenario.seed = args.seed
    if args.runs is not None:
        scenario.runs = args.runs
    out = _ensure_out(args.out)
    sol_path = args.solution or os.path.join(out, "solution.json")
    controller, meta = read_solution(sol_path)
    want = scenario.config_hash()
    got = meta.get("config_hash")
    if got is not None and got != want:
        raise HashMismatch(
            f"solution was synthesized under config hash {got[:12]}..., "
            f"current config hashes to {want[:12]}..."
        )
    model = scenario.build_model()
    lang = scenario.build_language()
    rows, _ = _campaign_rows(scenario, model, lang, [("prefix", controller)])
    objectives = {"prefix": meta.get("objective")}
    _write_campaign(
        scenario, model, lang, rows, ["prefix"], objectives, out, args.format, None
    )
    return EXIT_OK


def cmd_compare(args):
    scenario = load_scenario(args.config)
    if args.seed is not None:
        scenario.seed = args.seed
    if args.runs is not None:
        scenario.runs = args.runs
    out = _ensure_out(args.out)
    model = scenario.build_model()
    lang = scenario.build_language()
    noise = scenario.build_noise()
    sol = _synthesize(scenario)
    write_solution(os.path.join(out, "solution.json"), sol, scenario)
    extra = {}
    if scenario.problem == "h2":
        base_label = "nominal"
        base_ctrl, base_sol = nominal_h2_baseline(
            model,
            lang,
            noise,
            scenario.build_cost(),
            covariance_multiplier=scenario.covariance_multiplier,
        )
        base_resps = closed_loop_family(model, lang, base_ctrl)
        base_obj = evaluate_h2_objective(
            lang,
            base_resps,
            noise,
            scenario.build_cost(),
            covariance_multiplier=scenario.covariance_multiplier,
        )
    else:
        base_label = "memoryless"
        base_ctrl, base_obj, base_diag = memoryless_l1_baseline(
            model, lang, noise, delay=scenario.delay
        )
        extra["bound"] = sol.objective
        extra["baseline_exact_value"] = base_obj
        extra["baseline_diagnostics"] = {
            "sweeps": base_diag["sweeps"],
            "converged": base_diag["converged"],
        }
        extra["binding_signal"] = sol.diagnostics["binding_signal"]
    if scenario.problem == "l1":
        extra["highlight_signal"] = sol.diagnostics["binding_signal"]
    else:
        # feature the mid-horizon fault if the language has one
        targets = [i for i, s in enumerate(lang) if fault_time(s) == 4]
        extra["highlight_signal"] = targets[0] if targets else 0
    objectives = {"prefix": sol.objective, base_label: float(base_obj)}
    labeled = [("prefix", sol.controller), (base_label, base_ctrl)]
    rows, _ = _campaign_rows(scenario, model, lang, labeled)
    if scenario.problem == "l1":
        bound = sol.objective
        exceed = {}
        for label, _ in labeled:
            exceed[label] = sum(
                1
                for row in rows
                if row["controller"] == label and row["state_inf_norm"] > bound
            )
        extra["exceedance_over_bound"] = exceed
    labels = [label for label, _ in labeled]
    _write_campaign(
        scenario, model, lang, rows, labels, objectives, out, args.format, extra
    )
    for label in labels:
        print(f"objective[{label}] = {objectives[label]:.12g}")
    return EXIT_OK


def cmd_check(args):
    scenario = load_scenario(args.config)
    model = scenario.build_model()
    lang = scenario.build_language()
    noise = scenario.build_noise()
    failures = []

    def report(name, ok, detail):
        mark = "ok" if ok else "FAIL"
        print(f"[{mark}] {name}: {detail}")
        if not ok:
            failures.append(name)

    sol = _synthesize(scenario)
    report("synthesis", True, f"objective {sol.objective:.12g}")

    res = max(
        check_affine(sol.responses[i], model, sig) for i, sig in enumerate(lang)
    )
    report("affine-identities", res < 1e-6, f"max residual {res:.3e}")

    cres = sol.controller.consistency_residual
    report(
        "prefix-consistency",
        cres <= scenario.consistency_tol,
        f"cross-signal gain spread {cres:.3e}",
    )

    # round trip: rebuild responses from the recovered gains and compare
    rebuilt = closed_loop_family(model, lang, sol.controller)
    gap = 0.0
    for i in range(len(lang)):
        gap = max(
            gap,
            float(np.max(np.abs(sol.responses[i].stacked - rebuilt[i].stacked))),
        )
    report("controller-round-trip", gap < 1e-6, f"max response gap {gap:.3e}")

    if scenario.problem == "h2":
        val = evaluate_h2_objective(
            lang,
            rebuilt,
            noise,
            scenario.build_cost(),
            covariance_multiplier=scenario.covariance_multiplier,
        )
    else:
        val, _ = evaluate_l1_objective(lang, rebuilt, noise)
    rel = abs(val - sol.objective) / max(1.0, abs(sol.objective))
    report("objective-reevaluation", rel < 1e-6, f"relative gap {rel:.3e}")

    # the residual detector must actually fire on a corrupted response
    ref = sol.responses[0]
    bumped = ref.phi_xx.dense
    bumped[-1, 0] += 1e-3
    bad = SystemResponse(
        BlockLTMatrix(ref.phi_xx.grid, bumped, check=False),
        ref.phi_xy,
        ref.phi_ux,
        ref.phi_uy,
    )
    bad_res = check_affine(bad, model, lang.signals[0])
    report("corruption-detection", bad_res > 1e-5, f"perturbed residual {bad_res:.3e}")

    if failures:
        raise SolverError(f"consistency checks failed: {', '.join(failures)}")
    print("all checks passed")
    return EXIT_OK


def cmd_export_controller(args):
    controller, meta = read_solution(args.solution)
    out = _ensure_out(args.out)
    path = os.path.join(out, "controller.json")
    doc = {
        "format": "prefix-controller-v1",
        "problem": meta.get("problem"),
        "objective": meta.get("objective"),
        "config_hash": meta.get("config_hash"),
        "horizon": meta["horizon"],
        "delay": meta.get("delay", 0),
        "dims": meta["dims"],
        "language": meta["language"],
        "gains": meta["gains"],
        "diagnostics": {"exported_from": os.path.basename(args.solution)},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    print(f"wrote {path}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="prefixsls",
        description="Prefix-constrained controller synthesis for switched "
        "linear systems over finite horizons.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, out=True, sim=False):
        sp.add_argument("--config", required=True, help="scenario JSON file")
        if out:
            sp.add_argument("--out", default=".", help="output directory")
        if sim:
            sp.add_argument("--seed", type=int, default=None)
            sp.add_argument("--runs", type=int, default=None)
            sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("synth", help="solve and write solution.json")
    add_common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("simulate", help="roll out a synthesized controller")
    add_common(sp, sim=True)
    sp.add_argument("--solution", default=None, help="solution.json path")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser(
        "compare", help="synthesize, run against the baseline, write traces"
    )
    add_common(sp, sim=True)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("check", help="internal consistency checks")
    sp.add_argument("--config", required=True, help="scenario JSON file")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser(
        "export-controller", help="write a standalone controller file"
    )
    sp.add_argument("--solution", required=True, help="solution.json path")
    sp.add_argument("--out", default=".", help="output directory")
    sp.set_defaults(func=cmd_export_controller)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("config", EXIT_CONFIG, exc)
    except HashMismatch as exc:
        return _fail("hash-mismatch", EXIT_HASH, exc)
    except (Infeasible, Unbounded) as exc:
        return _fail("solver", EXIT_SOLVER, f"{type(exc).__name__}: {exc}")
    except (SolverError, SynthesisConsistencyError) as exc:
        return _fail("solver", EXIT_SOLVER, exc)
    except ValueError as exc:
        return _fail("config", EXIT_CONFIG, exc)


if __name__ == "__main__":
    sys.exit(main())
