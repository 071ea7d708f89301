"""Switched system models, noise and cost specifications, stacking helpers.

A switched model is a finite family of (A, B, C) triples over a common state,
input and output dimension.  Per-mode matrices are time-invariant; a switching
signal selects which triple is active at each step, and the stacking helpers
turn that selection into the block-diagonal matrices the synthesis layer
works with.
"""

import numpy as np

from .blockmat import blkdiag


def check_psd(mat, name, tol=1e-10):
    """Validate symmetric positive semidefiniteness within tol."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square, got {mat.shape}")
    if np.max(np.abs(mat - mat.T)) > tol:
        raise ValueError(f"{name} is not symmetric within {tol}")
    w = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    if w.min() < -tol * max(1.0, abs(w.max())):
        raise ValueError(f"{name} has negative eigenvalue {w.min():.3e}")
    return mat


def psd_sqrt(mat):
    """Symmetric PSD square root via eigendecomposition."""
    w, v = np.linalg.eigh(np.asarray(mat, dtype=float))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


class SwitchedModel:
    """Modes (A^i, B^i, C^i), i = 1..M, over horizon 0..T."""

    def __init__(self, modes, horizon):
        if not modes:
            raise ValueError("need at least one mode")
        parsed = []
        for i, (A, B, C) in enumerate(modes, start=1):
            A = np.array(A, dtype=float)
            B = np.array(B, dtype=float)
            C = np.array(C, dtype=float)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise ValueError(f"mode {i}: A must be square")
            n = A.shape[0]
            if B.shape[0] != n:
                raise ValueError(f"mode {i}: B row count must match A")
            if C.shape[1] != n:
                raise ValueError(f"mode {i}: C column count must match A")
            parsed.append((A, B, C))
        n = parsed[0][0].shape[0]
        p = parsed[0][1].shape[1]
        m = parsed[0][2].shape[0]
        for i, (A, B, C) in enumerate(parsed, start=1):
            if A.shape != (n, n) or B.shape != (n, p) or C.shape != (m, n):
                raise ValueError(f"mode {i} dimensions differ from mode 1")
        if horizon < 0:
            raise ValueError("horizon must be >= 0")
        self.modes = tuple(parsed)
        self.n = n
        self.p = p
        self.m = m
        self.horizon = int(horizon)

    @property
    def num_modes(self):
        return len(self.modes)

    def mode(self, i):
        """The (A, B, C) triple of mode i (1-based)."""
        if not 1 <= i <= self.num_modes:
            raise ValueError(f"mode index {i} outside 1..{self.num_modes}")
        return self.modes[i - 1]


class NoiseSpec:
    """Gaussian (per-mode covariances) or bounded (inf-norm caps) noise.

    The Gaussian stack treats the initial state as the time-0 component of the
    process noise, so P_x0 rides in front of the P_w blocks.  Per-mode lists
    allow the covariances to switch with the signal; passing a single matrix
    applies it to every mode.
    """

    def __init__(self, kind, P_x0=None, P_w=None, P_v=None, w_bar=None, v_bar=None):
        if kind not in ("gaussian", "bounded"):
            raise ValueError("kind must be 'gaussian' or 'bounded'")
        self.kind = kind
        if kind == "gaussian":
            if P_x0 is None or P_w is None or P_v is None:
                raise ValueError("gaussian spec needs P_x0, P_w and P_v")
            self.P_x0 = self._per_mode(P_x0, "P_x0")
            self.P_w = self._per_mode(P_w, "P_w")
            self.P_v = self._per_mode(P_v, "P_v")
            self.w_bar = None
            self.v_bar = None
        else:
            if w_bar is None or v_bar is None:
                raise ValueError("bounded spec needs w_bar and v_bar")
            if w_bar < 0 or v_bar < 0:
                raise ValueError("noise bounds must be non-negative")
            self.w_bar = float(w_bar)
            self.v_bar = float(v_bar)
            self.P_x0 = self.P_w = self.P_v = None

    @staticmethod
    def _per_mode(mats, name):
        mats = list(mats) if isinstance(mats, (list, tuple)) else [mats]
        return tuple(check_psd(m, name) for m in mats)

    @classmethod
    def gaussian(cls, P_x0, P_w, P_v):
        return cls("gaussian", P_x0=P_x0, P_w=P_w, P_v=P_v)

    @classmethod
    def bounded(cls, w_bar, v_bar):
        return cls("bounded", w_bar=w_bar, v_bar=v_bar)

    def _pick(self, mats, mode):
        return mats[mode - 1] if len(mats) > 1 else mats[0]


class CostSpec:
    """Quadratic stage weights Q_t on the state, R_t on the input."""

    def __init__(self, Q, R):
        self.Q = tuple(check_psd(q, "Q_t") for q in Q)
        self.R = tuple(check_psd(r, "R_t") for r in R)
        if len(self.Q) != len(self.R):
            raise ValueError("Q and R must cover the same steps")

    @classmethod
    def constant(cls, Q, R, horizon):
        return cls([Q] * (horizon + 1), [R] * (horizon + 1))

    @property
    def horizon(self):
        return len(self.Q) - 1


def stack_dynamics(model, sigma):
    """Block-diagonal dynamics stacks selected by the signal.

    Returns (A_s, B_s, C_s).  A_s and B_s end with a zero block because the
    last state transition leaves the horizon; C_s carries all T+1 blocks.
    """
    T = model.horizon
    if sigma.horizon != T:
        raise ValueError("signal horizon does not match model")
    if max(sigma.modes) > model.num_modes:
        raise ValueError("signal uses a mode the model does not have")
    A_blocks, B_blocks, C_blocks = [], [], []
    for t in range(T + 1):
        A, B, C = model.mode(sigma[t])
        if t < T:
            A_blocks.append(A)
            B_blocks.append(B)
        else:
            A_blocks.append(np.zeros((model.n, model.n)))
            B_blocks.append(np.zeros((model.n, model.p)))
        C_blocks.append(C)
    return blkdiag(A_blocks), blkdiag(B_blocks), blkdiag(C_blocks)


def stack_noise_covariance(spec, sigma):
    """Covariance stacks (P_w, P_v) ordered (x0, w_0..w_{T-1}) and (v_0..v_T)."""
    if spec.kind != "gaussian":
        raise ValueError("covariance stacks exist only for gaussian specs")
    T = sigma.horizon
    w_blocks = [spec._pick(spec.P_x0, sigma[0])]
    for t in range(T):
        w_blocks.append(spec._pick(spec.P_w, sigma[t]))
    v_blocks = [spec._pick(spec.P_v, sigma[t]) for t in range(T + 1)]
    return blkdiag(w_blocks), blkdiag(v_blocks)


# Linearized ADMIRE fighter aircraft model (angular rates p, q, r), unit
# time step discretization; inputs are canard, right/left elevon and rudder
# deflections.
_ADMIRE_A = np.array(
    [
        [0.3550, 0.0, 0.3428],
        [0.0, 0.6031, 0.0],
        [-0.0521, 0.0, 0.7901],
    ]
)
_ADMIRE_B = np.array(
    [
        [0.0, -2.7200, 2.7200, 0.7376],
        [1.298, -0.9996, -0.9996, 0.0019],
        [0.0, -0.1153, 0.1153, -0.8362],
    ]
)


def admire_model(fault, horizon=10):
    """Two-mode ADMIRE benchmark: mode 1 nominal, mode 2 faulty.

    fault = "drift": the faulty mode adds a destabilizing drift,
    A^2 = A - 1.5 I, with B and C unchanged.
    fault = "sensor": the faulty mode loses all but the first sensor,
    C^2 keeps only entry (1,1); A and B unchanged.
    """
    A, B, C = _ADMIRE_A, _ADMIRE_B, np.eye(3)
    if fault == "drift":
        A2, B2, C2 = A - 1.5 * np.eye(3), B, C
    elif fault == "sensor":
        C2 = np.zeros((3, 3))
        C2[0, 0] = 1.0
        A2, B2 = A, B
    else:
        raise ValueError("fault must be 'drift' or 'sensor'")
    return SwitchedModel([(A, B, C), (A2, B2, C2)], horizon)
