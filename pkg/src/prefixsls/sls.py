"""System-response maps, their affine parameterization, and prefix structure.

For a fixed switching signal the closed loop under a linear output-feedback
controller K is summarized by four block lower-triangular maps taking stacked
noise (w, v) to stacked state and input (x, u).  The achievable maps are
exactly the solutions of two affine equations, and the controller is
recoverable from the maps in closed form, so synthesis can optimize over the
maps instead of over K.

The prefix structure enters through a key equivalence: controllers whose gains
agree while two signals are indistinguishable correspond exactly to response
maps whose block rows agree over the same range.  That lets a prefix tree
serve as a variable-sharing layout (one slab of rows per tree node) which
enforces the information constraint by construction.
"""

import numpy as np

from .blockmat import BlockGrid, BlockLTMatrix, downshift, invert_unit_lower
from .system import stack_dynamics

MAPS = ("xx", "xy", "ux", "uy")


class SynthesisConsistencyError(RuntimeError):
    """Recovered gains disagree across signals that share a prefix node."""


class SystemResponse:
    """The four closed-loop maps for one signal.

    phi_xx: noise-to-state, phi_xy: measurement-noise-to-state,
    phi_ux: noise-to-input, phi_uy: measurement-noise-to-input.
    """

    def __init__(self, phi_xx, phi_xy, phi_ux, phi_uy):
        T = phi_xx.horizon
        n = phi_xx.grid.row_dims[0]
        m = phi_xy.grid.col_dims[0]
        p = phi_ux.grid.row_dims[0]
        expect = {
            "phi_xx": (phi_xx, BlockGrid.uniform(T, n, n)),
            "phi_xy": (phi_xy, BlockGrid.uniform(T, n, m)),
            "phi_ux": (phi_ux, BlockGrid.uniform(T, p, n)),
            "phi_uy": (phi_uy, BlockGrid.uniform(T, p, m)),
        }
        for name, (mat, grid) in expect.items():
            if mat.grid != grid:
                raise ValueError(f"{name} grid {mat.grid} does not match {grid}")
        self.phi_xx = phi_xx
        self.phi_xy = phi_xy
        self.phi_ux = phi_ux
        self.phi_uy = phi_uy
        self.horizon = T
        self.n, self.p, self.m = n, p, m

    def maps(self):
        return {
            "xx": self.phi_xx,
            "xy": self.phi_xy,
            "ux": self.phi_ux,
            "uy": self.phi_uy,
        }

    @property
    def state_map(self):
        """Dense [phi_xx, phi_xy]: all noise into the state trajectory."""
        return np.hstack([self.phi_xx.dense, self.phi_xy.dense])

    @property
    def stacked(self):
        """Dense [[phi_xx, phi_xy], [phi_ux, phi_uy]]."""
        return np.block(
            [
                [self.phi_xx.dense, self.phi_xy.dense],
                [self.phi_ux.dense, self.phi_uy.dense],
            ]
        )

    def truncate(self, t):
        return SystemResponse(
            self.phi_xx.truncate(t),
            self.phi_xy.truncate(t),
            self.phi_ux.truncate(t),
            self.phi_uy.truncate(t),
        )


def _loop_stacks(model, sigma):
    A_s, B_s, C_s = stack_dynamics(model, sigma)
    Z = downshift(model.horizon, model.n)
    ZA = Z @ A_s
    ZB = Z @ B_s
    return ZA, ZB, C_s


def closed_loop_response(model, sigma, K):
    """Response maps achieved by the controller K under one signal."""
    ZA, ZB, C_s = _loop_stacks(model, sigma)
    n = model.n
    grid_xx = BlockGrid.uniform(model.horizon, n, n)
    BKC = ZB @ K @ C_s
    phi_xx = invert_unit_lower(BlockLTMatrix.identity(grid_xx) - ZA - BKC)
    ZBK = ZB @ K
    phi_xy = phi_xx @ ZBK
    phi_ux = K @ C_s @ phi_xx
    phi_uy = K + phi_ux @ ZBK
    return SystemResponse(phi_xx, phi_xy, phi_ux, phi_uy)


def check_affine(resp, model, sigma):
    """Max-abs residual of the two affine feasibility identities."""
    ZA, ZB, C_s = _loop_stacks(model, sigma)
    I_x = BlockLTMatrix.identity(BlockGrid.uniform(model.horizon, model.n, model.n))
    left = I_x - ZA
    r = 0.0
    r = max(r, np.max(np.abs((left @ resp.phi_xx - ZB @ resp.phi_ux - I_x).dense)))
    r = max(r, np.max(np.abs((left @ resp.phi_xy - ZB @ resp.phi_uy).dense)))
    r = max(r, np.max(np.abs((resp.phi_xx @ left - resp.phi_xy @ C_s - I_x).dense)))
    r = max(r, np.max(np.abs((resp.phi_ux @ left - resp.phi_uy @ C_s).dense)))
    return float(r)


def recover_controller(resp):
    """The unique controller achieving a feasible response map.

    K = phi_uy - phi_ux phi_xx^-1 phi_xy; the inverse exists because phi_xx
    carries identity diagonal blocks.
    """
    xx_inv = invert_unit_lower(resp.phi_xx)
    return resp.phi_uy - resp.phi_ux @ xx_inv @ resp.phi_xy


def open_loop_param(model, sigma):
    """Open-loop ingredients (X0, E, F) of the response variety.

    X0 = (I - ZA)^-1 is the open-loop noise-to-state map; E = X0 ZB and
    F = C X0 are the input-injection and measurement maps.  Every feasible
    response is an affine function of G = phi_uy:

        phi_xy = E G,  phi_ux = G F,  phi_xx = X0 + E G F,

    which is what lets the equality constraints be eliminated analytically.
    """
    ZA, ZB, C_s = _loop_stacks(model, sigma)
    I_x = BlockLTMatrix.identity(BlockGrid.uniform(model.horizon, model.n, model.n))
    X0 = invert_unit_lower(I_x - ZA)
    return X0, X0 @ ZB, C_s @ X0


def response_from_uy_param(model, sigma, G):
    """Feasible response with noise-to-input map G (any block LT p x m grid)."""
    X0, E, F = open_loop_param(model, sigma)
    EG = E @ G
    return SystemResponse(X0 + EG @ F, EG, G @ F, G)


_ROW_DIM = {"xx": "n", "xy": "n", "ux": "p", "uy": "p"}
_COL_DIM = {"xx": "n", "xy": "m", "ux": "n", "uy": "m"}


class PrefixLayout:
    """Shared-variable layout: each tree node owns one block row of each map.

    The flat decision vector theta concatenates, node by node in tree order
    and map by map in MAPS order, the C-order flattening of the depth-t block
    row (spanning columns 0..t).  A signal's full response is read off by
    stitching together the slabs along its tree path, which realizes the
    prefix constraint exactly rather than as equations.
    """

    def __init__(self, model, tree):
        if tree.horizon != model.horizon:
            raise ValueError("tree and model horizons differ")
        self.tree = tree
        self.n, self.p, self.m = model.n, model.p, model.m
        dims = {"n": model.n, "p": model.p, "m": model.m}
        self._offset = {}
        self._shape = {}
        off = 0
        for idx, node in enumerate(tree.nodes):
            width = node.depth + 1
            for name in MAPS:
                rows = dims[_ROW_DIM[name]]
                cols = dims[_COL_DIM[name]] * width
                self._offset[(idx, name)] = off
                self._shape[(idx, name)] = (rows, cols)
                off += rows * cols
        self.n_vars = off

    def slab_slice(self, node_index, name):
        off = self._offset[(node_index, name)]
        rows, cols = self._shape[(node_index, name)]
        return slice(off, off + rows * cols)

    def slab(self, theta, node_index, name):
        rows, cols = self._shape[(node_index, name)]
        return theta[self.slab_slice(node_index, name)].reshape(rows, cols)

    def var_index(self, node_index, name, r, c):
        """Flat variable index of slab entry (r, c)."""
        rows, cols = self._shape[(node_index, name)]
        return self._offset[(node_index, name)] + r * cols + c

    def response(self, theta, signal_index):
        """Stitch the path slabs of one signal into a SystemResponse."""
        T = self.tree.horizon
        dims = {"n": self.n, "p": self.p, "m": self.m}
        path = self.tree.paths[signal_index]
        mats = {}
        for name in MAPS:
            rd, cd = dims[_ROW_DIM[name]], dims[_COL_DIM[name]]
            full = np.zeros(((T + 1) * rd, (T + 1) * cd))
            for t in range(T + 1):
                full[t * rd : (t + 1) * rd, : (t + 1) * cd] = self.slab(
                    theta, path[t], name
                )
            mats[name] = BlockLTMatrix(
                BlockGrid.uniform(T, rd, cd), full, check=False
            )
        return SystemResponse(mats["xx"], mats["xy"], mats["ux"], mats["uy"])

    def theta_from_responses(self, responses):
        """Flat vector whose slabs are read off per-signal responses.

        responses maps signal index to SystemResponse; signals sharing a node
        simply overwrite each other, so feed prefix-consistent responses.
        """
        theta = np.zeros(self.n_vars)
        for i, resp in responses.items():
            path = self.tree.paths[i]
            for name, mat in resp.maps().items():
                for t in range(self.tree.horizon + 1):
                    theta[self.slab_slice(path[t], name)] = mat.block_row(
                        t
                    ).ravel()
        return theta


def assemble_layout(model, tree):
    """Variable layout over a prefix tree; see PrefixLayout."""
    return PrefixLayout(model, tree)


class PrefixController:
    """Controller gains stored per prefix-tree node.

    gains[node] is the p x m(t+1) block row acting on the stacked outputs
    y_0..y_t; online lookup walks the tree with the observed (delay-adjusted)
    prefix, so the same object serves every signal in the language.
    """

    def __init__(self, tree, gains):
        self.tree = tree
        self.gains = []
        for idx, node in enumerate(tree.nodes):
            g = np.asarray(gains[idx], dtype=float)
            self.gains.append(g.copy())
        self.gains = tuple(self.gains)

    @property
    def horizon(self):
        return self.tree.horizon

    def gain_row(self, node_index):
        return self.gains[node_index]

    def gain_block(self, node_index, tau):
        m = self.gains[node_index].shape[1] // (
            self.tree.nodes[node_index].depth + 1
        )
        return self.gains[node_index][:, tau * m : (tau + 1) * m]

    def control(self, modes, t, ys):
        """Input u_t from observed modes and stacked outputs y_0..y_t."""
        node = self.tree.node_for_signal(modes, t)
        return self.gains[node] @ ys

    def gain_matrix(self, sigma):
        """Full block LT gain matrix K^sigma along the signal's tree path."""
        T = self.tree.horizon
        p = self.gains[0].shape[0]
        m = self.gains[0].shape[1]
        full = np.zeros((p * (T + 1), m * (T + 1)))
        for t in range(T + 1):
            node = self.tree.node_for_signal(sigma.modes, t)
            full[t * p : (t + 1) * p, : (t + 1) * m] = self.gains[node]
        return BlockLTMatrix(BlockGrid.uniform(T, p, m), full, check=False)

    @classmethod
    def from_gain_matrix(cls, K, tree):
        """Wrap one common gain matrix (no prefix adaptation) onto a tree."""
        gains = {}
        for idx, node in enumerate(tree.nodes):
            gains[idx] = K.block_row(node.depth)
        return cls(tree, gains)


def realize_online(responses, tree, consistency_tol=1e-7):
    """Extract the per-node gains implementing a family of responses.

    responses maps every signal index of the tree's language to its
    SystemResponse.  Each signal's controller is recovered in closed form and
    block row t is attributed to the signal's depth-t node; rows landing on a
    shared node must agree within consistency_tol (scaled by the gain
    magnitude), otherwise the prefix property was violated upstream and a
    SynthesisConsistencyError is raised.  The stored row is the member mean.
    """
    ks = {i: recover_controller(responses[i]) for i in responses}
    scale = max(1.0, max(np.max(np.abs(k.dense)) for k in ks.values()))
    gains = {}
    worst = 0.0
    for idx, node in enumerate(tree.nodes):
        members = tree.signals_through(idx)
        rows = [ks[i].block_row(node.depth) for i in members]
        stackd = np.stack(rows)
        spread = float(np.max(stackd.max(axis=0) - stackd.min(axis=0)))
        worst = max(worst, spread)
        if spread > consistency_tol * scale:
            raise SynthesisConsistencyError(
                f"gain rows disagree by {spread:.3e} at node {idx} "
                f"(depth {node.depth}, prefix {node.prefix}); "
                "responses are not prefix-consistent"
            )
        gains[idx] = stackd.mean(axis=0)
    ctrl = PrefixController(tree, gains)
    ctrl.consistency_residual = worst
    return ctrl


def random_prefix_controller(tree, p, m, rng, scale=0.3):
    """Random gains drawn independently per tree node (for checks)."""
    gains = {}
    for idx, node in enumerate(tree.nodes):
        gains[idx] = scale * rng.standard_normal((p, m * (node.depth + 1)))
    return PrefixController(tree, gains)


def random_feasible_responses(model, tree, rng, scale=0.3):
    """Random affine-feasible, prefix-consistent responses (delay-0 trees).

    Samples the noise-to-input map G per node slab and expands it through the
    open-loop parameterization.  Sharing G on a delay-0 tree shares the
    response block rows as well, since every row band of the expansion
    involves only truncations of signal-shared data.
    """
    if tree.delay != 0:
        raise ValueError("feasible completion by G-sharing needs delay 0")
    g_ctrl = random_prefix_controller(tree, model.p, model.m, rng, scale)
    out = {}
    for i, sig in enumerate(tree.language):
        out[i] = response_from_uy_param(model, sig, g_ctrl.gain_matrix(sig))
    return out
