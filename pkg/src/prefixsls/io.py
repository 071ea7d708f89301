"""Scenario configs, solution files, trace CSV/JSON output, and manifests.

The scenario format is a single JSON object.  Matrices are row-major nested
lists; scalars stand for scaled identities.  A canonical re-serialization
(sorted keys, no whitespace) is hashed with sha256 and the digest is stamped
into every artifact so downstream commands can refuse mismatched inputs.

Manifest statistics are recomputed from the exact float values written to the
trace file, using plain left-to-right accumulation.  Any consumer that parses
the traces and repeats that arithmetic reproduces the manifest numbers
bit for bit.
"""

import hashlib
import json
import math

import numpy as np

from .language import (
    SwitchingLanguage,
    SwitchingSignal,
    build_prefix_tree,
    fault_language,
    fault_time,
    uniform,
)
from .sls import PrefixController
from .system import CostSpec, NoiseSpec, SwitchedModel, admire_model


class ConfigError(ValueError):
    """Scenario file is missing, malformed, or inconsistent."""


MODEL_PRESETS = ("admire_drift", "admire_sensor")


def _as_matrix(value, rows, cols, name):
    if np.isscalar(value):
        if rows != cols:
            raise ConfigError(f"{name}: scalar shorthand needs a square matrix")
        return float(value) * np.eye(rows)
    try:
        mat = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: not a numeric matrix") from exc
    if mat.shape != (rows, cols):
        raise ConfigError(f"{name}: expected shape {(rows, cols)}, got {mat.shape}")
    return mat


def _per_mode_matrices(value, num_modes, rows, cols, name):
    """Accept scalar, single matrix, or a list with one matrix per mode."""
    if (
        isinstance(value, list)
        and len(value) == num_modes
        and all(isinstance(v, list) or np.isscalar(v) for v in value)
        and (num_modes != rows or any(not np.isscalar(v) for v in value))
    ):
        # list-of-matrices form; the guard above keeps a bare rows x cols
        # matrix (list of scalar rows) from being misread when M == rows
        if all(isinstance(v, list) and v and isinstance(v[0], list) for v in value):
            return [_as_matrix(v, rows, cols, f"{name}[{i}]") for i, v in enumerate(value)]
    mat = _as_matrix(value, rows, cols, name)
    return [mat] * num_modes


def _require(cfg, key, kind, name):
    if key not in cfg:
        raise ConfigError(f"missing required field '{name}'")
    val = cfg[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"field '{name}' has wrong type")
    return val


class Scenario:
    """A validated synthesis/simulation configuration.

    Construction normalizes defaults and checks dimensional consistency; the
    build_* methods produce the model, language, noise, and cost objects.
    """

    def __init__(self, cfg):
        if not isinstance(cfg, dict):
            raise ConfigError("scenario must be a JSON object")
        self.raw = cfg
        known = {
            "model", "horizon", "problem", "language", "noise", "cost",
            "delay", "seed", "runs", "formulation", "covariance_multiplier",
            "lp_method", "noise_mode", "consistency_tol",
        }
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown field(s): {sorted(unknown)}")

        self.problem = cfg.get("problem", "h2")
        if self.problem not in ("h2", "l1"):
            raise ConfigError("problem must be 'h2' or 'l1'")

        self._parse_model(cfg)
        self._parse_language(cfg)
        self._parse_noise(cfg)
        self._parse_cost(cfg)

        self.delay = cfg.get("delay", 0)
        if not isinstance(self.delay, int) or self.delay < 0:
            raise ConfigError("delay must be a nonnegative integer")
        self.seed = cfg.get("seed", 0)
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        self.runs = cfg.get("runs", 1000)
        if not isinstance(self.runs, int) or self.runs < 1:
            raise ConfigError("runs must be a positive integer")
        self.formulation = cfg.get("formulation", "auto")
        if self.formulation not in ("auto", "reduced", "slab", "explicit"):
            raise ConfigError("formulation must be auto|reduced|slab|explicit")
        self.covariance_multiplier = cfg.get("covariance_multiplier", "sqrt")
        if self.covariance_multiplier not in ("sqrt", "literal"):
            raise ConfigError("covariance_multiplier must be sqrt|literal")
        self.lp_method = cfg.get("lp_method", "auto")
        if self.lp_method not in ("auto", "simplex", "highs"):
            raise ConfigError("lp_method must be auto|simplex|highs")
        self.noise_mode = cfg.get("noise_mode", "mix")
        if self.noise_mode not in ("mix", "interior", "vertex"):
            raise ConfigError("noise_mode must be mix|interior|vertex")
        self.consistency_tol = float(cfg.get("consistency_tol", 1e-7))

    # -- field parsers -------------------------------------------------

    def _parse_model(self, cfg):
        spec = cfg.get("model")
        if spec is None:
            raise ConfigError("missing required field 'model'")
        self.horizon = cfg.get("horizon")
        if isinstance(spec, str):
            if spec not in MODEL_PRESETS:
                raise ConfigError(
                    f"unknown model preset '{spec}' (have {MODEL_PRESETS})"
                )
            if self.horizon is None:
                self.horizon = 10
            self.model_spec = spec
            self._model = admire_model(spec.split("_", 1)[1], self.horizon)
        elif isinstance(spec, dict) and "modes" in spec:
            modes = spec["modes"]
            if not isinstance(modes, list) or not modes:
                raise ConfigError("model.modes must be a nonempty list")
            parsed = []
            n = p = m = None
            for i, mode in enumerate(modes):
                if not isinstance(mode, dict):
                    raise ConfigError(f"model.modes[{i}] must be an object")
                mats = {}
                for key in ("A", "B", "C"):
                    raw = _require(mode, key, list, f"model.modes[{i}].{key}")
                    if not raw or not all(
                        isinstance(row, list) and row for row in raw
                    ):
                        raise ConfigError(
                            f"model.modes[{i}].{key} must be a nested "
                            "row-major matrix"
                        )
                    mats[key] = raw
                if n is None:
                    n, p, m = len(mats["A"]), len(mats["B"][0]), len(mats["C"])
                A = _as_matrix(mats["A"], n, n, f"model.modes[{i}].A")
                B = _as_matrix(mats["B"], n, p, f"model.modes[{i}].B")
                C = _as_matrix(mats["C"], m, n, f"model.modes[{i}].C")
                parsed.append((A, B, C))
            if self.horizon is None:
                raise ConfigError("inline models need an explicit 'horizon'")
            if not isinstance(self.horizon, int) or self.horizon < 0:
                raise ConfigError("horizon must be a nonnegative integer")
            self.model_spec = {"modes": [
                {"A": A.tolist(), "B": B.tolist(), "C": C.tolist()}
                for A, B, C in parsed
            ]}
            self._model = SwitchedModel(parsed, self.horizon)
        else:
            raise ConfigError("model must be a preset name or {'modes': [...]}")
        if not isinstance(self.horizon, int) or self.horizon < 0:
            raise ConfigError("horizon must be a nonnegative integer")

    def _parse_language(self, cfg):
        spec = cfg.get("language")
        T = self.horizon
        if spec is None:
            spec = {"fault_model": {"horizon": T}}
        if not isinstance(spec, dict):
            raise ConfigError("language must be an object")
        probs = spec.get("probabilities")
        if "fault_model" in spec:
            fm = spec["fault_model"]
            if not isinstance(fm, dict):
                raise ConfigError("language.fault_model must be an object")
            fm_T = fm.get("horizon", T)
            if fm_T != T:
                raise ConfigError("language horizon differs from model horizon")
            incl = fm.get("include_never_faulty", False)
            if not isinstance(incl, bool):
                raise ConfigError("include_never_faulty must be a boolean")
            lang = fault_language(T, include_never_faulty=incl)
            self.language_spec = {
                "fault_model": {"horizon": T, "include_never_faulty": incl}
            }
        elif "explicit" in spec:
            sigs = spec["explicit"]
            if not isinstance(sigs, list) or not sigs:
                raise ConfigError("language.explicit must be a nonempty list")
            signals = []
            for i, modes in enumerate(sigs):
                if (
                    not isinstance(modes, list)
                    or len(modes) != T + 1
                    or not all(isinstance(x, int) and x >= 1 for x in modes)
                ):
                    raise ConfigError(
                        f"language.explicit[{i}] must list {T + 1} mode indices"
                    )
                signals.append(SwitchingSignal(tuple(modes)))
            lang = SwitchingLanguage(signals)
            self.language_spec = {"explicit": [list(s.modes) for s in signals]}
        else:
            raise ConfigError("language needs 'fault_model' or 'explicit'")

        if probs is None and self.problem == "h2":
            probs = "uniform"
        if probs == "uniform":
            lang = uniform(lang)
            self.language_spec["probabilities"] = "uniform"
        elif probs is not None:
            if not isinstance(probs, list) or len(probs) != len(lang):
                raise ConfigError("probabilities must match the signal count")
            lang = SwitchingLanguage(lang.signals, [float(q) for q in probs])
            self.language_spec["probabilities"] = [float(q) for q in probs]
        else:
            self.language_spec["probabilities"] = None
        if lang.max_mode > self._model.num_modes:
            raise ConfigError(
                "language references a mode index beyond the model's modes"
            )
        self._language = lang

    def _parse_noise(self, cfg):
        spec = cfg.get("noise")
        if spec is None:
            spec = (
                {"kind": "gaussian", "P_x0": 1.0, "P_w": 1.0, "P_v": 1.0}
                if self.problem == "h2"
                else {"kind": "bounded", "w_bar": 1.0, "v_bar": 1.0}
            )
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ConfigError("noise must be an object with a 'kind'")
        kind = spec["kind"]
        n, m = self._model.n, self._model.m
        M = self._model.num_modes
        if kind == "gaussian":
            Px0 = _per_mode_matrices(spec.get("P_x0", 1.0), M, n, n, "noise.P_x0")
            Pw = _per_mode_matrices(spec.get("P_w", 1.0), M, n, n, "noise.P_w")
            Pv = _per_mode_matrices(spec.get("P_v", 1.0), M, m, m, "noise.P_v")
            try:
                self._noise = NoiseSpec.gaussian(Px0, Pw, Pv)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            self.noise_spec = {
                "kind": "gaussian",
                "P_x0": [mat.tolist() for mat in Px0],
                "P_w": [mat.tolist() for mat in Pw],
                "P_v": [mat.tolist() for mat in Pv],
            }
        elif kind == "bounded":
            try:
                w_bar = float(spec.get("w_bar", 1.0))
                v_bar = float(spec.get("v_bar", 1.0))
            except (TypeError, ValueError) as exc:
                raise ConfigError("w_bar/v_bar must be numbers") from exc
            if w_bar < 0 or v_bar < 0:
                raise ConfigError("w_bar/v_bar must be nonnegative")
            self._noise = NoiseSpec.bounded(w_bar, v_bar)
            self.noise_spec = {"kind": "bounded", "w_bar": w_bar, "v_bar": v_bar}
        else:
            raise ConfigError("noise.kind must be 'gaussian' or 'bounded'")
        if self.problem == "h2" and kind != "gaussian":
            raise ConfigError("h2 synthesis needs gaussian noise")
        if self.problem == "l1" and kind != "bounded":
            raise ConfigError("l1 synthesis needs bounded noise")

    def _parse_cost(self, cfg):
        spec = cfg.get("cost")
        n, p = self._model.n, self._model.p
        if spec is None:
            spec = {"Q": 1.0, "R": 1.0}
        if not isinstance(spec, dict):
            raise ConfigError("cost must be an object")
        Q = _as_matrix(spec.get("Q", 1.0), n, n, "cost.Q")
        R = _as_matrix(spec.get("R", 1.0), p, p, "cost.R")
        try:
            self._cost = CostSpec.constant(Q, R, self.horizon)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.cost_spec = {"Q": Q.tolist(), "R": R.tolist()}

    # -- accessors -----------------------------------------------------

    def build_model(self):
        return self._model

    def build_language(self):
        return self._language

    def build_noise(self):
        return self._noise

    def build_cost(self):
        return self._cost

    def normalized(self):
        return {
            "model": self.model_spec,
            "horizon": self.horizon,
            "problem": self.problem,
            "language": self.language_spec,
            "noise": self.noise_spec,
            "cost": self.cost_spec,
            "delay": self.delay,
            "seed": self.seed,
            "runs": self.runs,
            "formulation": self.formulation,
            "covariance_multiplier": self.covariance_multiplier,
            "lp_method": self.lp_method,
            "noise_mode": self.noise_mode,
            "consistency_tol": self.consistency_tol,
        }

    def synthesis_normalized(self):
        """The subset of fields that determine the synthesized controller.

        Simulation-only knobs (seed, runs, noise_mode) are excluded so a
        solution file stays valid when a later simulate call overrides them.
        """
        doc = self.normalized()
        for key in ("seed", "runs", "noise_mode"):
            doc.pop(key)
        return doc

    def config_hash(self):
        blob = json.dumps(
            self.synthesis_normalized(), sort_keys=True, separators=(",", ":")
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def load_scenario(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return Scenario(cfg)


# -- solution files ------------------------------------------------------


def _prefix_key(prefix):
    return ",".join(str(x) for x in prefix)


def solution_dict(sol, scenario):
    """JSON-ready snapshot of a synthesis result."""
    ctrl = sol.controller
    model_dims = {
        "n": int(sol.responses[0].n),
        "p": int(ctrl.gains[0].shape[0]),
        "m": int(ctrl.gains[0].shape[1]),
    }
    gains = []
    for idx, node in enumerate(ctrl.tree.nodes):
        gains.append(
            {
                "depth": node.depth,
                "prefix": list(node.prefix),
                "key": _prefix_key(node.prefix),
                "block": ctrl.gains[idx].tolist(),
            }
        )
    lang = sol.language
    return {
        "format": "prefix-controller-v1",
        "problem": sol.problem,
        "objective": sol.objective,
        "config_hash": scenario.config_hash() if scenario else None,
        "horizon": lang.horizon,
        "delay": ctrl.tree.delay,
        "dims": model_dims,
        "language": {
            "signals": [list(s.modes) for s in lang],
            "probabilities": list(lang.probabilities) if lang.probabilities else None,
        },
        "gains": gains,
        "diagnostics": sol.diagnostics,
    }


def write_solution(path, sol, scenario=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(solution_dict(sol, scenario), fh, indent=1)
        fh.write("\n")


def read_solution(path):
    """Rebuild (controller, metadata) from a solution or controller file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read solution file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"solution is not valid JSON: {exc}") from exc
    if doc.get("format") != "prefix-controller-v1":
        raise ConfigError("unrecognized solution format")
    signals = [SwitchingSignal(tuple(s)) for s in doc["language"]["signals"]]
    probs = doc["language"].get("probabilities")
    lang = SwitchingLanguage(signals, probs)
    tree = build_prefix_tree(lang, doc.get("delay", 0))
    by_key = {
        (node.depth, tuple(node.prefix)): idx for idx, node in enumerate(tree.nodes)
    }
    p, m = doc["dims"]["p"], doc["dims"]["m"]
    gains = {}
    for entry in doc["gains"]:
        idx = by_key.get((entry["depth"], tuple(entry["prefix"])))
        if idx is None:
            raise ConfigError("solution gains do not match the language tree")
        block = np.array(entry["block"], dtype=float)
        depth = tree.nodes[idx].depth
        if block.shape != (p, m * (depth + 1)):
            raise ConfigError("gain block has inconsistent dimensions")
        gains[idx] = block
    if len(gains) != len(tree.nodes):
        raise ConfigError("solution is missing gain blocks for some prefixes")
    return PrefixController(tree, gains), doc


# -- trace output --------------------------------------------------------


def trace_rows(label, signal_id, run, trace):
    """Flatten one rollout into per-time records."""
    rows = []
    T = trace.states.shape[0] - 1
    for t in range(T + 1):
        rows.append(
            {
                "controller": label,
                "signal_id": signal_id,
                "run": run,
                "time": t,
                "cost": float(trace.costs[t]),
                "state_inf_norm": float(trace.state_inf_norms[t]),
                "states": [float(x) for x in trace.states[t]],
            }
        )
    return rows


def write_traces_csv(path, rows, n_states):
    header = ["controller", "signal_id", "run", "time", "cost", "state_inf_norm"]
    header += [f"x{i + 1}" for i in range(n_states)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [
                row["controller"],
                str(row["signal_id"]),
                str(row["run"]),
                str(row["time"]),
                repr(row["cost"]),
                repr(row["state_inf_norm"]),
            ]
            cells += [repr(x) for x in row["states"]]
            fh.write(",".join(cells) + "\n")


def write_traces_json(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh)
        fh.write("\n")


# -- manifest statistics -------------------------------------------------


def naive_mean(values):
    """Left-to-right accumulation; reproducible in any IEEE double language."""
    total = 0.0
    for x in values:
        total += x
    return total / len(values)


def naive_std(values, mean):
    """Unbiased sample deviation with left-to-right accumulation."""
    if len(values) < 2:
        return 0.0
    acc = 0.0
    for x in values:
        d = x - mean
        acc += d * d
    return math.sqrt(acc / (len(values) - 1))


def _series_stats(per_run_values):
    """per_run_values: list over runs of per-time lists (file order)."""
    times = len(per_run_values[0])
    mean, std, peak, peak_minus = [], [], [], []
    for t in range(times):
        col = [run[t] for run in per_run_values]
        mu = naive_mean(col)
        sd = naive_std(col, mu)
        mx = col[0]
        for x in col[1:]:
            if x > mx:
                mx = x
        mean.append(mu)
        std.append(sd)
        peak.append(mx)
        peak_minus.append(mx - sd)
    return mean, std, peak, peak_minus


def manifest_stats(rows, controllers, signal_ids, horizon):
    """Recompute per-(controller, signal) statistics from trace records.

    Works from the exact floats in the records, in record order, with naive
    accumulation, so an external consumer of the written file arrives at the
    same doubles.
    """
    table = {}
    for label in controllers:
        for sid in signal_ids:
            table[(label, sid)] = {}
    for row in rows:
        per_run = table[(row["controller"], row["signal_id"])]
        series = per_run.setdefault(row["run"], {"cost": {}, "xinf": {}})
        series["cost"][row["time"]] = row["cost"]
        series["xinf"][row["time"]] = row["state_inf_norm"]
    out = {}
    for label in controllers:
        out[label] = {}
        for sid in signal_ids:
            per_run = table[(label, sid)]
            run_ids = sorted(per_run)
            costs = [
                [per_run[r]["cost"][t] for t in range(horizon + 1)] for r in run_ids
            ]
            xinfs = [
                [per_run[r]["xinf"][t] for t in range(horizon + 1)] for r in run_ids
            ]
            c_mean, c_std, _, _ = _series_stats(costs)
            x_mean, x_std, x_max, x_mm = _series_stats(xinfs)
            totals = []
            for run_costs in costs:
                acc = 0.0
                for x in run_costs:
                    acc += x
                totals.append(acc)
            t_mean = naive_mean(totals)
            t_std = naive_std(totals, t_mean)
            out[label][str(sid)] = {
                "cost_mean": c_mean,
                "cost_std": c_std,
                "xinf_mean": x_mean,
                "xinf_std": x_std,
                "xinf_max": x_max,
                "xinf_max_minus_std": x_mm,
                "total_cost_mean": t_mean,
                "total_cost_std": t_std,
            }
    return out


def build_manifest(scenario, lang, controllers, objectives, stats, extra=None):
    signals = []
    for i, sig in enumerate(lang):
        entry = {"id": i, "modes": list(sig.modes), "fault_time": fault_time(sig)}
        if lang.probabilities is not None:
            entry["probability"] = lang.probabilities[i]
        signals.append(entry)
    doc = {
        "format": "sim-manifest-v1",
        "problem": scenario.problem,
        "seed": scenario.seed,
        "runs": scenario.runs,
        "horizon": scenario.horizon,
        "config_hash": scenario.config_hash(),
        "rng": "philox4x64",
        "controllers": list(controllers),
        "objectives": objectives,
        "signals": signals,
        "stats": stats,
    }
    if extra:
        doc.update(extra)
    return doc


def write_manifest(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
