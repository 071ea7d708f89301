"""Synthesis of prefix-based controllers as convex programs.

Two problems are covered.  The stochastic one minimizes the expected quadratic
cost over the language, which in response-map coordinates is a weighted
Frobenius norm and hence a quadratic program.  The worst-case one minimizes
the peak state amplification over the language under inf-norm bounded noise,
an epigraph linear program over the maximum absolute row sum.

Three interchangeable formulations exist for cross-checking:

  reduced   eliminate the affine equalities analytically through the
            noise-to-input parameterization and solve an unconstrained
            least-squares problem in the shared slabs (delay 0 only; the
            only formulation that scales to the benchmark horizon)
  slab      optimize the shared per-node block rows of all four maps subject
            to the affine equalities
  explicit  one full response per signal plus explicit prefix-equality rows

All three must agree on the optimum; the equivalence is exercised in tests.
"""

import time

import numpy as np
import scipy.linalg
import scipy.sparse

from .blockmat import BlockGrid, BlockLTMatrix
from .language import build_prefix_tree, chain_forest
from .sls import (
    MAPS,
    PrefixController,
    assemble_layout,
    check_affine,
    closed_loop_response,
    open_loop_param,
    realize_online,
    response_from_uy_param,
)
from .solver import DenseLP, EqQP, SolverError, solve_eq_qp, solve_lp
from .system import psd_sqrt, stack_dynamics, stack_noise_covariance

_SLAB_QP_VAR_LIMIT = 6000


class SynthesisSolution:
    """Optimal responses, objective, recovered controller, diagnostics."""

    def __init__(self, problem, language, tree, objective, responses, controller, diagnostics):
        self.problem = problem
        self.language = language
        self.tree = tree
        self.objective = float(objective)
        self.responses = responses
        self.controller = controller
        self.diagnostics = diagnostics


def induced_inf_norm(M):
    """Operator norm from vector inf-norm to vector inf-norm: max abs row sum."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(M), axis=1)))


def _right_gram(P, multiplier):
    """Gram of the right multiplier: P itself for the square-root convention,
    P squared when the covariance is used literally."""
    if multiplier == "sqrt":
        return P
    if multiplier == "literal":
        return P @ P
    raise ValueError("covariance_multiplier must be 'sqrt' or 'literal'")


def _blkdiag_dense(blocks):
    return scipy.linalg.block_diag(*[np.asarray(b, dtype=float) for b in blocks])


def evaluate_h2_objective(lang, responses, noise, cost, covariance_multiplier="sqrt"):
    """Expected-cost objective of arbitrary per-signal responses.

    responses maps each signal index of lang to a SystemResponse; lang must
    carry probabilities.  Scores baselines and solutions alike.
    """
    if lang.probabilities is None:
        raise ValueError("language has no probabilities")
    if noise.kind != "gaussian":
        raise ValueError("stochastic objective needs a gaussian noise spec")
    total = 0.0
    Qbar = _blkdiag_dense(cost.Q)
    Rbar = _blkdiag_dense(cost.R)
    for i, sig in enumerate(lang):
        pi = lang.probabilities[i]
        if pi == 0.0:
            continue
        resp = responses[i]
        Pw, Pv = stack_noise_covariance(noise, sig)
        W2w = _right_gram(Pw.dense, covariance_multiplier)
        W2v = _right_gram(Pv.dense, covariance_multiplier)
        val = 0.0
        for X, S, W2 in (
            (resp.phi_xx.dense, Qbar, W2w),
            (resp.phi_xy.dense, Qbar, W2v),
            (resp.phi_ux.dense, Rbar, W2w),
            (resp.phi_uy.dense, Rbar, W2v),
        ):
            val += float(np.sum((S @ X @ W2) * X))
        total += pi * val
    return total


def evaluate_l1_objective(lang, responses, noise):
    """Worst-case peak state gain over the language; returns (value, argmax)."""
    if noise.kind != "bounded":
        raise ValueError("worst-case objective needs a bounded noise spec")
    best, arg = -1.0, 0
    for i in range(len(lang)):
        resp = responses[i]
        scaled = np.hstack(
            [noise.w_bar * resp.phi_xx.dense, noise.v_bar * resp.phi_xy.dense]
        )
        v = induced_inf_norm(scaled)
        if v > best:
            best, arg = v, i
    return best, arg


class _Emitter:
    """Accumulates sparse equality rows over a PrefixLayout."""

    def __init__(self, layout):
        self.layout = layout
        self.rows = []
        self.cols = []
        self.vals = []
        self.rhs = []
        self.n_eq = 0

    def new_block(self, n_rows, rhs_block=None):
        base = self.n_eq
        self.n_eq += n_rows
        if rhs_block is None:
            self.rhs.append(np.zeros(n_rows))
        else:
            self.rhs.append(np.asarray(rhs_block, dtype=float).ravel())
        return base

    def ident(self, eq_base, a, b, node, name, tau, sign, col_dim):
        # eq entry (i, j) hits slab entry (i, tau*col_dim + j)
        off = self.layout.var_index(node, name, 0, 0)
        cols_total = self.layout._shape[(node, name)][1]
        eq_idx = eq_base + np.arange(a * b)
        var_idx = (
            off
            + np.repeat(np.arange(a), b) * cols_total
            + tau * col_dim
            + np.tile(np.arange(b), a)
        )
        self.rows.append(eq_idx)
        self.cols.append(var_idx)
        self.vals.append(np.full(a * b, float(sign)))

    def left(self, eq_base, L, b, node, name, tau, sign, col_dim):
        # eq entry (i, j) gets sign*L[i, k] on slab entry (k, tau*col_dim + j)
        a, kk = L.shape
        off = self.layout.var_index(node, name, 0, 0)
        cols_total = self.layout._shape[(node, name)][1]
        I, K, J = np.meshgrid(
            np.arange(a), np.arange(kk), np.arange(b), indexing="ij"
        )
        self.rows.append(eq_base + (I * b + J).ravel())
        self.cols.append(
            off + (K * cols_total + tau * col_dim + J).ravel()
        )
        self.vals.append(sign * L[I, K].ravel())

    def right(self, eq_base, a, R, node, name, tau, sign, col_dim):
        # eq entry (i, j) gets sign*R[k, j] on slab entry (i, tau*col_dim + k)
        kk, b = R.shape
        off = self.layout.var_index(node, name, 0, 0)
        cols_total = self.layout._shape[(node, name)][1]
        I, K, J = np.meshgrid(
            np.arange(a), np.arange(kk), np.arange(b), indexing="ij"
        )
        self.rows.append(eq_base + (I * b + J).ravel())
        self.cols.append(off + (I * cols_total + tau * col_dim + K).ravel())
        self.vals.append(sign * R[K, J].ravel())

    def pair_equality(self, node_a, node_b, name):
        """Whole-slab equality between two nodes of equal depth."""
        rows, cols = self.layout._shape[(node_a, name)]
        count = rows * cols
        base = self.new_block(count)
        for node, sign in ((node_a, 1.0), (node_b, -1.0)):
            off = self.layout.var_index(node, name, 0, 0)
            self.rows.append(base + np.arange(count))
            self.cols.append(off + np.arange(count))
            self.vals.append(np.full(count, sign))

    def build(self):
        rows = np.concatenate(self.rows) if self.rows else np.zeros(0, int)
        cols = np.concatenate(self.cols) if self.cols else np.zeros(0, int)
        vals = np.concatenate(self.vals) if self.vals else np.zeros(0)
        A = scipy.sparse.coo_matrix(
            (vals, (rows, cols)), shape=(self.n_eq, self.layout.n_vars)
        ).tocsr()
        rhs = np.concatenate(self.rhs) if self.rhs else np.zeros(0)
        return A, rhs


def _affine_equalities(model, lang, tree, layout, info_delay=0):
    """Equality system realizing the affine response identities per signal.

    Constraint rows are enumerated on the undelayed prefix tree (signals with
    equal full prefixes share identical rows), while variables live wherever
    the layout's possibly-delayed tree put them.  That combination is what
    makes delayed-information problems correctly over-constrained, and
    infeasible when delayed sharing contradicts diverged dynamics.

    For chain-forest layouts (explicit formulation) prefix agreement cannot
    come from sharing and is added as pairwise slab-equality rows over the
    information tree at info_delay.
    """
    n, p, m = model.n, model.p, model.m
    em = _Emitter(layout)
    enum_tree = build_prefix_tree(lang, 0) if tree.dedup else tree
    eye_n = np.eye(n)
    for idx, enode in enumerate(enum_tree.nodes):
        t = enode.depth
        sig_i = enum_tree.signals_through(idx)[0]
        sig = lang[sig_i]
        v_t = tree.paths[sig_i][t]
        v_p = tree.paths[sig_i][t - 1] if t > 0 else None
        if t > 0:
            A_prev, B_prev, _ = model.mode(sig[t - 1])
        for tau in range(t + 1):
            at_diag = tau == t
            # state rows of [I - ZA, -ZB] Phi = [I, 0]
            base = em.new_block(n * n, eye_n if at_diag else None)
            em.ident(base, n, n, v_t, "xx", tau, 1.0, n)
            if t > 0 and tau <= t - 1:
                em.left(base, A_prev, n, v_p, "xx", tau, -1.0, n)
                em.left(base, B_prev, n, v_p, "ux", tau, -1.0, n)
            base = em.new_block(n * m)
            em.ident(base, n, m, v_t, "xy", tau, 1.0, m)
            if t > 0 and tau <= t - 1:
                em.left(base, A_prev, m, v_p, "xy", tau, -1.0, m)
                em.left(base, B_prev, m, v_p, "uy", tau, -1.0, m)
            # columns of Phi [I - ZA; -C] = [I; 0]
            A_tau, _, C_tau = model.mode(sig[tau])
            base = em.new_block(n * n, eye_n if at_diag else None)
            em.ident(base, n, n, v_t, "xx", tau, 1.0, n)
            if tau + 1 <= t:
                em.right(base, n, A_tau, v_t, "xx", tau + 1, -1.0, n)
            em.right(base, n, C_tau, v_t, "xy", tau, -1.0, m)
            base = em.new_block(p * n)
            em.ident(base, p, n, v_t, "ux", tau, 1.0, n)
            if tau + 1 <= t:
                em.right(base, p, A_tau, v_t, "ux", tau + 1, -1.0, n)
            em.right(base, p, C_tau, v_t, "uy", tau, -1.0, m)
    if not tree.dedup:
        # explicit mode: impose prefix agreement between chains sharing a
        # node of the information tree
        info = build_prefix_tree(lang, info_delay)
        for inode_idx, inode in enumerate(info.nodes):
            members = info.signals_through(inode_idx)
            first = members[0]
            for other in members[1:]:
                for name in MAPS:
                    em.pair_equality(
                        tree.paths[first][inode.depth],
                        tree.paths[other][inode.depth],
                        name,
                    )
    return em.build()


def _h2_slab_objective(layout, lang, noise, cost, multiplier):
    tree = layout.tree
    n_vars = layout.n_vars
    H = np.zeros((n_vars, n_vars))
    col_of = {"xx": ("w", layout.n), "xy": ("v", layout.m),
              "ux": ("w", layout.n), "uy": ("v", layout.m)}
    for i, sig in enumerate(lang):
        pi = lang.probabilities[i]
        if pi == 0.0:
            continue
        Pw, Pv = stack_noise_covariance(noise, sig)
        gram = {
            "w": [_right_gram(b, multiplier) for b in Pw.blocks],
            "v": [_right_gram(b, multiplier) for b in Pv.blocks],
        }
        for t in range(tree.horizon + 1):
            node = tree.paths[i][t]
            for name in MAPS:
                row_w = cost.Q[t] if name in ("xx", "xy") else cost.R[t]
                which, cd = col_of[name]
                a = row_w.shape[0]
                cols_total = layout._shape[(node, name)][1]
                off = layout.var_index(node, name, 0, 0)
                for tau in range(t + 1):
                    block = (2.0 * pi) * np.kron(row_w, gram[which][tau])
                    idx = (
                        off
                        + np.repeat(np.arange(a), cd) * cols_total
                        + tau * cd
                        + np.tile(np.arange(cd), a)
                    )
                    H[np.ix_(idx, idx)] += block
    return H


def _solve_h2_slab(model, lang, noise, cost, tree, multiplier, explicit):
    layout = assemble_layout(model, chain_forest(lang) if explicit else tree)
    if layout.n_vars > _SLAB_QP_VAR_LIMIT:
        raise SolverError(
            f"slab QP has {layout.n_vars} variables, over the dense-KKT limit "
            f"{_SLAB_QP_VAR_LIMIT}; use the reduced formulation (delay 0) or "
            "a smaller instance"
        )
    A, b = _affine_equalities(model, lang, layout.tree, layout, info_delay=tree.delay)
    H = _h2_slab_objective(layout, lang, noise, cost, multiplier)
    qp = EqQP(H, np.zeros(layout.n_vars), A.toarray(), b)
    res = solve_eq_qp(qp, psd_check="never")
    theta = res.x
    responses = {i: layout.response(theta, i) for i in range(len(lang))}
    objective = 0.5 * float(theta @ (H @ theta))
    diag = dict(res.diagnostics)
    diag["n_eq_rows"] = int(b.size)
    return responses, objective, diag


def _h2_reduced_system(model, lang, noise, cost, tree, multiplier):
    """Normal-equation pieces of the eliminated problem, per signal.

    With G the noise-to-input map, the objective is a quadratic in the shared
    G slabs whose per-signal Hessian factors as a Kronecker product of a row
    Gram (input side) and a column Gram (measurement side); assembling those
    directly keeps the benchmark-size problem inside memory.
    """
    p, m = model.p, model.m
    T = tree.horizon
    Qbar = _blkdiag_dense(cost.Q)
    Rbar = _blkdiag_dense(cost.R)
    g_off = {}
    total = 0
    for idx, node in enumerate(tree.nodes):
        g_off[idx] = total
        total += p * m * (node.depth + 1)
    H = np.zeros((total, total))
    g_lin = np.zeros(total)
    const = 0.0
    mT = m * (T + 1)
    for i, sig in enumerate(lang):
        pi = lang.probabilities[i]
        if pi == 0.0:
            continue
        X0, E, F = (mat.dense for mat in open_loop_param(model, sig))
        Pw, Pv = stack_noise_covariance(noise, sig)
        W2w = _right_gram(Pw.dense, multiplier)
        W2v = _right_gram(Pv.dense, multiplier)
        row_gram = E.T @ Qbar @ E + Rbar
        col_gram = F @ W2w @ F.T + W2v
        lin_mat = 2.0 * (E.T @ Qbar @ X0 @ W2w @ F.T)
        const += pi * float(np.sum(X0 * (Qbar @ X0 @ W2w)))
        # map lower-triangular entries of the full G to shared slab variables
        rows_g, cols_g, var_idx = [], [], []
        for t in range(T + 1):
            node = tree.paths[i][t]
            width = m * (t + 1)
            for r in range(p):
                rows_g.append(np.full(width, t * p + r))
                cols_g.append(np.arange(width))
                var_idx.append(
                    g_off[node] + r * width + np.arange(width)
                )
        rows_g = np.concatenate(rows_g)
        cols_g = np.concatenate(cols_g)
        var_idx = np.concatenate(var_idx)
        H_sub = row_gram[np.ix_(rows_g, rows_g)] * col_gram[np.ix_(cols_g, cols_g)]
        H[np.ix_(var_idx, var_idx)] += (2.0 * pi) * H_sub
        g_lin[var_idx] += pi * lin_mat[rows_g, cols_g]
    return H, g_lin, const, g_off, total


def _solve_h2_reduced(model, lang, noise, cost, tree, multiplier):
    import scipy.linalg

    H2s, g_lin, const, g_off, total = _h2_reduced_system(
        model, lang, noise, cost, tree, multiplier
    )
    try:
        c, low = scipy.linalg.cho_factor(H2s, check_finite=False)
        theta = scipy.linalg.cho_solve((c, low), -g_lin, check_finite=False)
        solve_path = "cholesky"
    except scipy.linalg.LinAlgError:
        theta, *_ = np.linalg.lstsq(H2s, -g_lin, rcond=None)
        solve_path = "lstsq"
    objective = 0.5 * float(theta @ (H2s @ theta)) + float(g_lin @ theta) + const
    p, m, T = model.p, model.m, tree.horizon
    responses = {}
    for i, sig in enumerate(lang):
        full = np.zeros((p * (T + 1), m * (T + 1)))
        for t in range(T + 1):
            node = tree.paths[i][t]
            width = m * (t + 1)
            off = g_off[node]
            full[t * p : (t + 1) * p, :width] = theta[
                off : off + p * width
            ].reshape(p, width)
        G = BlockLTMatrix(BlockGrid.uniform(T, p, m), full, check=False)
        responses[i] = response_from_uy_param(model, sig, G)
    diag = {"n_vars": total, "solve_path": solve_path}
    return responses, objective, diag


def synth_h2(
    model,
    lang,
    noise,
    cost,
    delay=0,
    formulation="auto",
    covariance_multiplier="sqrt",
    consistency_tol=1e-7,
):
    """Minimize the expected quadratic cost over prefix-based controllers.

    Returns a SynthesisSolution whose controller realizes the optimal
    responses online.  formulation "auto" picks the reduced elimination at
    delay 0 and the slab KKT otherwise; "slab" and "explicit" are the
    cross-checkable direct forms.
    """
    if lang.probabilities is None:
        raise ValueError("stochastic synthesis needs signal probabilities")
    if noise.kind != "gaussian":
        raise ValueError("stochastic synthesis needs a gaussian noise spec")
    if cost.horizon != model.horizon:
        raise ValueError("cost horizon does not match model")
    tree = build_prefix_tree(lang, delay)
    if formulation == "auto":
        formulation = "reduced" if delay == 0 else "slab"
    if formulation == "reduced" and delay != 0:
        raise ValueError(
            "the reduced formulation eliminates constraints through a "
            "parameterization that shares differently under delay; "
            "use slab for delayed problems"
        )
    t0 = time.perf_counter()
    if formulation == "reduced":
        responses, objective, diag = _solve_h2_reduced(
            model, lang, noise, cost, tree, covariance_multiplier
        )
    elif formulation in ("slab", "explicit"):
        responses, objective, diag = _solve_h2_slab(
            model, lang, noise, cost, tree, covariance_multiplier,
            explicit=(formulation == "explicit"),
        )
    else:
        raise ValueError(f"unknown formulation '{formulation}'")
    wall = time.perf_counter() - t0
    controller = realize_online(responses, tree, consistency_tol)
    max_res = max(
        check_affine(responses[i], model, lang[i]) for i in range(len(lang))
    )
    evaluated = evaluate_h2_objective(
        lang, responses, noise, cost, covariance_multiplier
    )
    diag.update(
        {
            "formulation": formulation,
            "delay": delay,
            "covariance_multiplier": covariance_multiplier,
            "max_affine_residual": max_res,
            "gain_consistency_residual": controller.consistency_residual,
            "objective_evaluated": evaluated,
            "wall_time_s": wall,
        }
    )
    return SynthesisSolution("h2", lang, tree, objective, responses, controller, diag)


def _l1_lp(model, lang, noise, layout, info_delay=0):
    """Epigraph LP: minimize t over shared slabs with row-sum constraints."""
    A_eq, b_eq = _affine_equalities(
        model, lang, layout.tree, layout, info_delay=info_delay
    )
    n, m = layout.n, layout.m
    n_theta = layout.n_vars
    scale_of = {"xx": noise.w_bar, "xy": noise.v_bar}
    # auxiliary |entry| bounds: one s per scalar entry of the state slabs
    s_index = {}
    n_s = 0
    for idx, node in enumerate(layout.tree.nodes):
        for name in ("xx", "xy"):
            rows, cols = layout._shape[(idx, name)]
            s_index[(idx, name)] = n_theta + n_s
            n_s += rows * cols
    t_var = n_theta + n_s
    n_all = t_var + 1
    rows_list, cols_list, vals_list, rhs_ub = [], [], [], []
    n_ub = 0

    def add_row(cols, vals):
        nonlocal n_ub
        rows_list.append(np.full(len(cols), n_ub))
        cols_list.append(np.asarray(cols, dtype=int))
        vals_list.append(np.asarray(vals, dtype=float))
        rhs_ub.append(0.0)
        n_ub += 1

    for idx, node in enumerate(layout.tree.nodes):
        row_members = [[] for _ in range(n)]
        for name in ("xx", "xy"):
            rows, cols = layout._shape[(idx, name)]
            off = layout.var_index(idx, name, 0, 0)
            s0 = s_index[(idx, name)]
            scale = scale_of[name]
            for r in range(rows):
                for c in range(cols):
                    theta_j = off + r * cols + c
                    s_j = s0 + r * cols + c
                    add_row([theta_j, s_j], [scale, -1.0])
                    add_row([theta_j, s_j], [-scale, -1.0])
                    row_members[r].append(s_j)
        for r in range(n):
            cols_r = row_members[r] + [t_var]
            vals_r = [1.0] * len(row_members[r]) + [-1.0]
            add_row(cols_r, vals_r)

    A_ub = scipy.sparse.coo_matrix(
        (
            np.concatenate(vals_list),
            (np.concatenate(rows_list), np.concatenate(cols_list)),
        ),
        shape=(n_ub, n_all),
    ).tocsr()
    A_eq_full = scipy.sparse.hstack(
        [A_eq, scipy.sparse.csr_matrix((A_eq.shape[0], n_all - n_theta))]
    ).tocsr()
    c = np.zeros(n_all)
    c[t_var] = 1.0
    nonneg = np.zeros(n_all, dtype=bool)
    nonneg[n_theta:t_var] = True  # the |entry| bounds are sign-constrained
    lp = DenseLP(c, A_eq_full, b_eq, A_ub, np.zeros(n_ub), nonneg)
    return lp, n_theta, t_var


def synth_l1(
    model,
    lang,
    noise,
    delay=0,
    formulation="slab",
    lp_method="auto",
    consistency_tol=1e-7,
):
    """Minimize the worst-case peak state gain over prefix-based controllers."""
    if noise.kind != "bounded":
        raise ValueError("worst-case synthesis needs a bounded noise spec")
    tree = build_prefix_tree(lang, delay)
    if formulation == "auto":
        formulation = "slab"
    if formulation == "slab":
        layout = assemble_layout(model, tree)
    elif formulation == "explicit":
        layout = assemble_layout(model, chain_forest(lang))
    else:
        raise ValueError(f"unknown formulation '{formulation}'")
    t0 = time.perf_counter()
    lp, n_theta, t_var = _l1_lp(model, lang, noise, layout, info_delay=delay)
    res = solve_lp(lp, method=lp_method)
    wall = time.perf_counter() - t0
    theta = res.x[:n_theta]
    responses = {i: layout.response(theta, i) for i in range(len(lang))}
    objective = float(res.x[t_var])
    value, binding = evaluate_l1_objective(lang, responses, noise)
    controller = realize_online(responses, tree, consistency_tol)
    max_res = max(
        check_affine(responses[i], model, lang[i]) for i in range(len(lang))
    )
    diag = {
        "formulation": formulation,
        "delay": delay,
        "lp_method": res.method,
        "lp_iterations": res.iterations,
        "n_vars": lp.n,
        "n_eq_rows": int(lp.b_eq.size),
        "n_ub_rows": int(lp.b_ub.size),
        "max_affine_residual": max_res,
        "gain_consistency_residual": controller.consistency_residual,
        "objective_evaluated": value,
        "binding_signal": int(binding),
        "wall_time_s": wall,
    }
    return SynthesisSolution("l1", lang, tree, objective, responses, controller, diag)


def closed_loop_family(model, lang, controller):
    """Closed-loop responses of one controller under every signal."""
    return {
        i: closed_loop_response(model, sig, controller.gain_matrix(sig))
        for i, sig in enumerate(lang)
    }


def nominal_h2_baseline(model, lang, noise, cost, nominal_mode=1,
                        covariance_multiplier="sqrt"):
    """Controller synthesized as if the nominal mode never switches.

    Solves the single-signal problem for the constant nominal-mode signal and
    wraps the resulting gains onto a fully-delayed tree of the true language,
    so the same gain schedule is applied whatever the signal turns out to be.
    Returns (controller, nominal_solution).
    """
    from .language import SwitchingLanguage

    T = model.horizon
    nominal = SwitchingLanguage(
        [(nominal_mode,) * (T + 1)], probabilities=(1.0,)
    )
    sol = synth_h2(
        model, nominal, noise, cost, delay=0,
        covariance_multiplier=covariance_multiplier,
    )
    K = sol.controller.gain_matrix(nominal[0])
    blind = build_prefix_tree(lang, lang.horizon + 1)
    return PrefixController.from_gain_matrix(K, blind), sol


def _state_gain_fast(model, lang, node_gain, tree, w_bar, v_bar):
    """Peak state gain of a block-diagonal (memoryless) gain assignment.

    node_gain maps tree node index to a p x m static gain used at that node's
    depth.  Dense forward substitution per signal; cheap enough for the inner
    loop of coordinate descent.
    """
    from scipy.linalg import solve_triangular

    T = model.horizon
    n, p, m = model.n, model.p, model.m
    N = n * (T + 1)
    worst = 0.0
    for i, sig in enumerate(lang):
        M = np.zeros((N, N))
        ZBK = np.zeros((N, m * (T + 1)))
        for t in range(T):
            A, B, C = model.mode(sig[t])
            Kt = node_gain[tree.paths[i][t]]
            rs = slice((t + 1) * n, (t + 2) * n)
            M[rs, t * n : (t + 1) * n] = A + B @ Kt @ C
            ZBK[rs, t * m : (t + 1) * m] = B @ Kt
        phi_xx = solve_triangular(
            np.eye(N) - M, np.eye(N), lower=True, unit_diagonal=True
        )
        phi_xy = phi_xx @ ZBK
        gain = np.sum(np.abs(phi_xx), axis=1) * w_bar + np.sum(
            np.abs(phi_xy), axis=1
        ) * v_bar
        worst = max(worst, float(np.max(gain)))
    return worst


def memoryless_l1_baseline(
    model, lang, noise, delay=0, tol=1e-8, max_sweeps=30
):
    """Best block-diagonal (static, output-proportional) gains found by
    deterministic coordinate descent on the exact minimax objective.

    The restriction is not convex in the gains, so this is a reproducible
    local search: zero initialization, nodes in tree order, gain entries in
    row-major order, golden-section line search on an expanding bracket.
    Returns (controller, value, diagnostics).
    """
    tree = build_prefix_tree(lang, delay)
    p, m = model.p, model.m
    node_gain = {idx: np.zeros((p, m)) for idx in range(len(tree.nodes))}
    w_bar, v_bar = noise.w_bar, noise.v_bar

    def objective():
        return _state_gain_fast(model, lang, node_gain, tree, w_bar, v_bar)

    def line_objective(idx, r, c, val):
        old = node_gain[idx][r, c]
        node_gain[idx][r, c] = val
        v = objective()
        node_gain[idx][r, c] = old
        return v

    def golden(idx, r, c, x0, f0):
        # bracket by doubling, then a fixed golden-section contraction
        delta = 0.25
        lo, hi = x0 - delta, x0 + delta
        f_lo, f_hi = line_objective(idx, r, c, lo), line_objective(idx, r, c, hi)
        for _ in range(20):
            if f0 <= f_lo and f0 <= f_hi:
                break
            if f_lo < f_hi:
                lo -= (hi - lo)
                f_lo = line_objective(idx, r, c, lo)
            else:
                hi += (hi - lo)
                f_hi = line_objective(idx, r, c, hi)
        invphi = (np.sqrt(5.0) - 1.0) / 2.0
        a, b = lo, hi
        x1 = b - invphi * (b - a)
        x2 = a + invphi * (b - a)
        f1 = line_objective(idx, r, c, x1)
        f2 = line_objective(idx, r, c, x2)
        for _ in range(24):
            if f1 <= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - invphi * (b - a)
                f1 = line_objective(idx, r, c, x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + invphi * (b - a)
                f2 = line_objective(idx, r, c, x2)
        best_f, best_x = min((f1, x1), (f2, x2), (f0, x0))
        return best_x, best_f

    current = objective()
    sweeps = 0
    converged = False
    evaluations = 0
    while sweeps < max_sweeps:
        before = current
        for idx in range(len(tree.nodes)):
            for r in range(p):
                for c in range(m):
                    x0 = node_gain[idx][r, c]
                    x_new, f_new = golden(idx, r, c, x0, current)
                    evaluations += 1
                    if f_new < current - 1e-15:
                        node_gain[idx][r, c] = x_new
                        current = f_new
        sweeps += 1
        if before - current < tol * max(1.0, before):
            converged = True
            break

    gains = {}
    for idx, node in enumerate(tree.nodes):
        row = np.zeros((p, m * (node.depth + 1)))
        row[:, node.depth * m :] = node_gain[idx]
        gains[idx] = row
    controller = PrefixController(tree, gains)
    diag = {
        "sweeps": sweeps,
        "converged": converged,
        "value": current,
        "line_searches": evaluations,
    }
    return controller, current, diag
