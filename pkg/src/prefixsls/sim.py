"""Closed-loop simulation, noise generation, and Monte-Carlo statistics.

Noise streams use the counter-based Philox generator keyed by
(seed, run index, signal index), so any single rollout is reproducible in
isolation and different controllers compared under the same seed see common
random numbers.  The identifier "philox4x64" is recorded in output manifests.
"""

from dataclasses import dataclass

import numpy as np

from .system import psd_sqrt, stack_noise_covariance

RNG_ALGORITHM = "philox4x64"


def noise_rng(seed, run, signal_index):
    """Independent generator for one (run, signal) cell of a campaign."""
    ss = np.random.SeedSequence(seed, spawn_key=(run, signal_index))
    return np.random.Generator(np.random.Philox(ss))


class _GaussianSampler:
    """Per-signal factor cache so campaigns do not refactor covariances."""

    def __init__(self, spec, sigma):
        Pw, Pv = stack_noise_covariance(spec, sigma)
        self.w_factors = [psd_sqrt(b) for b in Pw.blocks]
        self.v_factors = [psd_sqrt(b) for b in Pv.blocks]

    def draw(self, rng):
        w = np.concatenate(
            [f @ rng.standard_normal(f.shape[0]) for f in self.w_factors]
        )
        v = np.concatenate(
            [f @ rng.standard_normal(f.shape[0]) for f in self.v_factors]
        )
        return w, v


def sample_noise(spec, sigma, rng):
    """One stacked gaussian noise draw (w, v) for a signal.

    Samples through per-block symmetric square roots of the mode-dependent
    covariances.  Bounded specs carry no dimensions of their own, so they go
    through bounded_noise() instead.
    """
    if spec.kind != "gaussian":
        raise ValueError("sample_noise handles gaussian specs; see bounded_noise")
    return _GaussianSampler(spec, sigma).draw(rng)


def bounded_noise(spec, n, m, horizon, rng, mode="interior"):
    """Stacked bounded-noise draw with explicit state/output dimensions."""
    if spec.kind != "bounded":
        raise ValueError("spec is not bounded")
    size_w = n * (horizon + 1)
    size_v = m * (horizon + 1)
    if mode == "interior":
        w = rng.uniform(-spec.w_bar, spec.w_bar, size_w)
        v = rng.uniform(-spec.v_bar, spec.v_bar, size_v)
    elif mode == "vertex":
        w = spec.w_bar * (2.0 * rng.integers(0, 2, size_w) - 1.0)
        v = spec.v_bar * (2.0 * rng.integers(0, 2, size_v) - 1.0)
    else:
        raise ValueError("mode must be 'interior' or 'vertex'")
    return w, v


@dataclass
class SimTrace:
    """One closed-loop rollout under a fixed signal and noise realization."""

    signal: object
    states: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    process_noise: np.ndarray
    meas_noise: np.ndarray
    costs: np.ndarray
    state_inf_norms: np.ndarray

    @property
    def total_cost(self):
        return float(np.sum(self.costs))

    @property
    def max_state_inf_norm(self):
        return float(np.max(self.state_inf_norms))

    @property
    def stacked_xu(self):
        return np.concatenate([self.states.ravel(), self.inputs.ravel()])


def simulate(model, sigma, controller, noises, cost=None):
    """Exact rollout of the switched dynamics under a prefix controller.

    noises is the stacked pair (w, v) with the initial state as the first
    block of w.  Gains are looked up from the controller's tree with the
    observed (delay-adjusted) prefix of sigma; a prefix outside the tree
    raises UnknownSignal.
    """
    T = model.horizon
    n, p, m = model.n, model.p, model.m
    w, v = noises
    w = np.asarray(w, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if w.size != n * (T + 1) or v.size != m * (T + 1):
        raise ValueError("noise stacks have wrong dimensions")
    states = np.zeros((T + 1, n))
    inputs = np.zeros((T + 1, p))
    outputs = np.zeros((T + 1, m))
    costs = np.zeros(T + 1)
    states[0] = w[:n]
    ys = np.zeros(m * (T + 1))
    for t in range(T + 1):
        A, B, C = model.mode(sigma[t])
        outputs[t] = C @ states[t] + v[t * m : (t + 1) * m]
        ys[t * m : (t + 1) * m] = outputs[t]
        inputs[t] = controller.control(sigma.modes, t, ys[: (t + 1) * m])
        if cost is not None:
            costs[t] = float(
                states[t] @ (cost.Q[t] @ states[t])
                + inputs[t] @ (cost.R[t] @ inputs[t])
            )
        if t < T:
            states[t + 1] = (
                A @ states[t] + B @ inputs[t] + w[(t + 1) * n : (t + 2) * n]
            )
    return SimTrace(
        signal=sigma,
        states=states,
        inputs=inputs,
        outputs=outputs,
        process_noise=w.reshape(T + 1, n),
        meas_noise=v.reshape(T + 1, m),
        costs=costs,
        state_inf_norms=np.max(np.abs(states), axis=1),
    )


def worst_case_state_norm(resp, w_bar, v_bar):
    """Exact peak state gain of a response and a noise witness attaining it.

    Returns (value, (w, v), row).  The witness is the sign pattern of the
    maximizing row (zeros get +); row ties break toward the lowest index.
    """
    S = np.hstack([w_bar * resp.phi_xx.dense, v_bar * resp.phi_xy.dense])
    sums = np.sum(np.abs(S), axis=1)
    row = int(np.argmax(sums))
    value = float(sums[row])
    nw = resp.phi_xx.shape[1]
    xx_row = resp.phi_xx.dense[row]
    xy_row = resp.phi_xy.dense[row]
    w = np.where(xx_row >= 0, w_bar, -w_bar)
    v = np.where(xy_row >= 0, v_bar, -v_bar)
    return value, (w, v), row


@dataclass
class SignalStats:
    """Per-time ensemble statistics of one (controller, signal) cell."""

    cost_mean: np.ndarray
    cost_std: np.ndarray
    xinf_mean: np.ndarray
    xinf_std: np.ndarray
    xinf_max: np.ndarray
    total_cost_mean: float
    total_cost_std: float

    @property
    def xinf_max_minus_std(self):
        return self.xinf_max - self.xinf_std


class MonteCarloStats:
    """Ensemble statistics per signal plus the probability-weighted mixture."""

    def __init__(self, lang, runs, seed, per_signal, traces=None):
        self.language = lang
        self.runs = runs
        self.seed = seed
        self.per_signal = per_signal
        self.traces = traces

    def mixture_cost_mean(self):
        """E[cost_t] over both noise and signal distribution."""
        probs = self.language.probabilities
        if probs is None:
            raise ValueError("language has no probabilities")
        return sum(
            q * s.cost_mean for q, s in zip(probs, self.per_signal)
        )

    def mixture_total_cost_mean(self):
        probs = self.language.probabilities
        if probs is None:
            raise ValueError("language has no probabilities")
        return float(
            sum(q * s.total_cost_mean for q, s in zip(probs, self.per_signal))
        )

    def overall_xinf_max(self):
        return float(max(np.max(s.xinf_max) for s in self.per_signal))


def _ensemble_stats(cost_runs, xinf_runs):
    cost_runs = np.asarray(cost_runs)
    xinf_runs = np.asarray(xinf_runs)
    ddof = 1 if cost_runs.shape[0] > 1 else 0
    totals = cost_runs.sum(axis=1)
    return SignalStats(
        cost_mean=cost_runs.mean(axis=0),
        cost_std=cost_runs.std(axis=0, ddof=ddof),
        xinf_mean=xinf_runs.mean(axis=0),
        xinf_std=xinf_runs.std(axis=0, ddof=ddof),
        xinf_max=xinf_runs.max(axis=0),
        total_cost_mean=float(totals.mean()),
        total_cost_std=float(totals.std(ddof=ddof)),
    )


def monte_carlo(
    model,
    lang,
    controller,
    spec,
    cost,
    runs,
    seed,
    bounded_mode="mix",
    keep_traces=False,
):
    """Seeded simulation campaign over every signal of the language.

    Gaussian specs sample from the per-mode covariances; bounded specs draw
    from the box interior, its vertices, or alternate between them by run
    parity (bounded_mode "mix", matching how the worst-case experiments
    exercise both).  Statistics use the unbiased variance estimator.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    per_signal = []
    all_traces = [] if keep_traces else None
    T = model.horizon
    for i, sig in enumerate(lang):
        sampler = _GaussianSampler(spec, sig) if spec.kind == "gaussian" else None
        cost_runs = np.zeros((runs, T + 1))
        xinf_runs = np.zeros((runs, T + 1))
        for r in range(runs):
            rng = noise_rng(seed, r, i)
            if sampler is not None:
                w, v = sampler.draw(rng)
            else:
                if bounded_mode == "mix":
                    mode = "interior" if r % 2 == 0 else "vertex"
                else:
                    mode = bounded_mode
                w, v = bounded_noise(spec, model.n, model.m, T, rng, mode)
            trace = simulate(model, sig, controller, (w, v), cost)
            cost_runs[r] = trace.costs
            xinf_runs[r] = trace.state_inf_norms
            if keep_traces:
                all_traces.append((i, r, trace))
        per_signal.append(_ensemble_stats(cost_runs, xinf_runs))
    return MonteCarloStats(lang, runs, seed, per_signal, all_traces)
