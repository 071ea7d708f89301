"""Convex kernels: equality-constrained QPs and dense linear programs.

These are deliberately plain carriers and solvers.  The QP path factors the
KKT system directly; the LP path is a two-phase revised simplex with Bland's
rule for small problems and delegates to scipy's HiGHS wrapper above a size
threshold, where a dense tableau would not fit in memory.  Both backends are
deterministic for identical inputs.
"""

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse


class SolverError(RuntimeError):
    pass


class Infeasible(SolverError):
    pass


class Unbounded(SolverError):
    pass


class BadProblem(SolverError):
    pass


class EqQP:
    """min 0.5 x'Hx + g'x  s.t.  A_eq x = b_eq  (H symmetric PSD)."""

    def __init__(self, H, g, A_eq=None, b_eq=None):
        self.H = np.asarray(H, dtype=float)
        self.g = np.asarray(g, dtype=float).ravel()
        n = self.g.size
        if self.H.shape != (n, n):
            raise BadProblem(f"H shape {self.H.shape} does not match g ({n})")
        if np.max(np.abs(self.H - self.H.T)) > 1e-12 * max(
            1.0, float(np.max(np.abs(self.H)))
        ):
            raise BadProblem("H is not symmetric within 1e-12")
        if A_eq is None or (hasattr(A_eq, "shape") and A_eq.shape[0] == 0):
            self.A_eq = np.zeros((0, n))
            self.b_eq = np.zeros(0)
        else:
            self.A_eq = np.asarray(A_eq, dtype=float)
            self.b_eq = np.asarray(b_eq, dtype=float).ravel()
            if self.A_eq.shape != (self.b_eq.size, n):
                raise BadProblem("A_eq/b_eq dimensions inconsistent")

    @property
    def n(self):
        return self.g.size


class QPResult:
    def __init__(self, x, lam, status, diagnostics):
        self.x = x
        self.lam = lam
        self.status = status
        self.diagnostics = diagnostics

    def __iter__(self):
        # allows tuple-style unpacking (x, lam, status)
        return iter((self.x, self.lam, self.status))


def _dedupe_rows(A, b, threshold=1e-10):
    """Keep a maximal independent row subset via pivoted QR on A'."""
    if A.shape[0] == 0:
        return A, b, np.zeros(0, dtype=int)
    _, R, piv = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > threshold * scale))
    keep = np.sort(piv[:rank])
    return A[keep], b[keep], keep


def solve_eq_qp(problem, psd_check="auto"):
    """Solve an EqQP; returns QPResult with multipliers and diagnostics.

    Rank-deficient equality systems are deduplicated first; if the solution
    then violates a dropped row the system was inconsistent and Infeasible is
    raised.  A failed KKT factorization triggers one Tikhonov-regularized
    retry (1e-10 scaled), recorded in diagnostics.
    """
    H, g = problem.H, problem.g
    n = problem.n
    diag = {"regularized": False, "dropped_rows": 0}

    if psd_check == "always" or (psd_check == "auto" and n <= 1200):
        w = scipy.linalg.eigvalsh(H, subset_by_index=[0, 0])
        if w[0] < -1e-8 * max(1.0, float(np.max(np.abs(H)))):
            raise BadProblem(f"H has negative curvature {w[0]:.3e}")

    A, b, keep = _dedupe_rows(problem.A_eq, problem.b_eq)
    diag["dropped_rows"] = problem.A_eq.shape[0] - A.shape[0]
    m = A.shape[0]

    def kkt_solve(Hmat):
        if m == 0:
            try:
                c, low = scipy.linalg.cho_factor(Hmat)
                return scipy.linalg.cho_solve((c, low), -g), np.zeros(0)
            except scipy.linalg.LinAlgError:
                x, *_ = np.linalg.lstsq(Hmat, -g, rcond=None)
                return x, np.zeros(0)
        K = np.zeros((n + m, n + m))
        K[:n, :n] = Hmat
        K[:n, n:] = A.T
        K[n:, :n] = A
        rhs = np.concatenate([-g, b])
        sol = scipy.linalg.solve(K, rhs, assume_a="sym")
        return sol[:n], sol[n:]

    scale_H = max(1.0, float(np.max(np.abs(H))) if H.size else 0.0)
    try:
        x, lam = kkt_solve(H)
        bad = not np.all(np.isfinite(x))
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError):
        bad = True
    if bad:
        diag["regularized"] = True
        x, lam = kkt_solve(H + 1e-10 * scale_H * np.eye(n))

    scale = max(
        1.0,
        float(np.max(np.abs(problem.b_eq))) if problem.b_eq.size else 0.0,
        float(np.max(np.abs(x))),
    )
    if problem.A_eq.shape[0]:
        eq_res = float(np.max(np.abs(problem.A_eq @ x - problem.b_eq)))
    else:
        eq_res = 0.0
    if eq_res > 1e-7 * scale:
        # the deduplicated system solved fine, so a violated dropped row
        # means the original equalities were inconsistent
        raise Infeasible(
            f"equality system inconsistent (residual {eq_res:.3e})"
        )
    stat_res = float(np.max(np.abs(H @ x + g + (A.T @ lam if m else 0.0))))
    diag.update(
        {
            "eq_residual": eq_res,
            "stationarity_residual": stat_res,
            "n_vars": n,
            "n_eq": int(problem.A_eq.shape[0]),
            "n_eq_independent": int(m),
        }
    )
    if stat_res > 1e-6 * scale_H * max(1.0, float(np.max(np.abs(x)))):
        raise BadProblem(
            f"KKT solve did not reach stationarity (residual {stat_res:.3e})"
        )
    lam_full = np.zeros(problem.A_eq.shape[0])
    if m:
        lam_full[keep] = lam
    return QPResult(x, lam_full, "optimal", diag)


class DenseLP:
    """min c'x  s.t.  A_eq x = b_eq, A_ub x <= b_ub, x_i >= 0 where nonneg[i].

    A_eq / A_ub may be dense arrays or scipy sparse matrices.  nonneg is a
    boolean array; False entries are free variables.
    """

    def __init__(self, c, A_eq=None, b_eq=None, A_ub=None, b_ub=None, nonneg=None):
        self.c = np.asarray(c, dtype=float).ravel()
        n = self.c.size

        def norm_part(A, b, label):
            if A is None:
                return None, np.zeros(0)
            b = np.asarray(b, dtype=float).ravel()
            if A.shape != (b.size, n):
                raise BadProblem(f"{label} dimensions inconsistent")
            return A, b

        self.A_eq, self.b_eq = norm_part(A_eq, b_eq, "A_eq/b_eq")
        self.A_ub, self.b_ub = norm_part(A_ub, b_ub, "A_ub/b_ub")
        if nonneg is None:
            nonneg = np.ones(n, dtype=bool)
        self.nonneg = np.asarray(nonneg, dtype=bool).ravel()
        if self.nonneg.size != n:
            raise BadProblem("nonneg mask length does not match c")

    @property
    def n(self):
        return self.c.size

    @property
    def n_rows(self):
        return self.b_eq.size + self.b_ub.size


class LPResult:
    def __init__(self, x, objective, status, duals_eq, duals_ub, method, iterations):
        self.x = x
        self.objective = objective
        self.status = status
        self.duals_eq = duals_eq
        self.duals_ub = duals_ub
        self.method = method
        self.iterations = iterations

    def __iter__(self):
        return iter((self.x, self.objective, self.status))


def _dense(A):
    if A is None:
        return None
    return A.toarray() if scipy.sparse.issparse(A) else np.asarray(A, dtype=float)


_SIMPLEX_TOL = 1e-9
_REFACTOR_EVERY = 64


def _simplex_iterate(A, b, c, basis, B_inv, cap):
    """Revised simplex from a feasible basis; Bland's rule throughout.

    The last m columns of A are artificials and are never allowed to enter
    (they may start basic, in phase 1).  Returns (basis, B_inv, x_B,
    objective, iterations, duals) or raises Unbounded.
    """
    m = A.shape[0]
    n_real = A.shape[1] - m
    x_B = np.maximum(B_inv @ b, 0.0)
    iters = 0
    since_refactor = 0

    def refactor():
        fresh = np.linalg.inv(A[:, basis])
        return fresh, np.maximum(fresh @ b, 0.0)

    while True:
        if iters > cap:
            raise SolverError("simplex iteration cap exceeded")
        y = c[basis] @ B_inv
        priced = y @ A
        reduced = c - priced
        reduced[basis] = 0.0
        reduced[n_real:] = 0.0  # artificials never re-enter
        # dual tolerance relative to the pricing scale, or noise-level
        # reduced costs enter and spin on degenerate rays
        tol_c = _SIMPLEX_TOL * max(1.0, float(np.max(np.abs(priced))))
        candidates = np.nonzero(reduced < -tol_c)[0]
        if candidates.size == 0:
            # never conclude from a drifted inverse; re-verify once fresh
            if since_refactor > 0:
                B_inv, x_B = refactor()
                since_refactor = 0
                continue
            obj = float(c[basis] @ x_B)
            return basis, B_inv, x_B, obj, iters, y
        enter = int(candidates[0])  # Bland: lowest variable index
        d = B_inv @ A[:, enter]
        # eligibility relative to the column scale: near-zero entries are
        # noise, and pivoting on one makes the basis numerically singular
        d_scale = float(np.max(np.abs(d))) if d.size else 0.0
        pos = d > max(_SIMPLEX_TOL, 1e-7 * d_scale)
        if not np.any(pos):
            if since_refactor > 0:
                B_inv, x_B = refactor()
                since_refactor = 0
                continue
            raise Unbounded("LP is unbounded along a simplex ray")
        ratios = np.full(m, np.inf)
        ratios[pos] = x_B[pos] / d[pos]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + 1e-12 * (1 + abs(best)))[0]
        # Bland again: among min-ratio rows leave the smallest basic variable
        leave = int(min(ties, key=lambda i: basis[i]))
        theta = ratios[leave]
        x_B = x_B - theta * d
        x_B[leave] = theta
        x_B = np.maximum(x_B, 0.0)
        basis[leave] = enter
        piv = d[leave]
        B_inv[leave, :] /= piv
        for i in range(m):
            if i != leave and abs(d[i]) > 0:
                B_inv[i, :] -= d[i] * B_inv[leave, :]
        iters += 1
        since_refactor += 1
        # tiny pivots poison the running inverse; rebuild it right away
        if since_refactor >= _REFACTOR_EVERY or abs(piv) < 1e-7:
            B_inv, x_B = refactor()
            since_refactor = 0


def _solve_lp_simplex(lp):
    """Two-phase dense revised simplex; deterministic via Bland's rule."""
    A_eq, A_ub = _dense(lp.A_eq), _dense(lp.A_ub)
    n = lp.n
    # standard form columns: split free variables, then slacks
    col_var = []
    col_sign = []
    for j in range(n):
        col_var.append(j)
        col_sign.append(1.0)
        if not lp.nonneg[j]:
            col_var.append(j)
            col_sign.append(-1.0)
    n_split = len(col_var)
    m_eq = lp.b_eq.size
    m_ub = lp.b_ub.size
    m = m_eq + m_ub
    A = np.zeros((m, n_split + m_ub))
    b = np.concatenate([lp.b_eq, lp.b_ub])
    rows = []
    if m_eq:
        rows.append(A_eq)
    if m_ub:
        rows.append(A_ub)
    A_orig = np.vstack(rows) if rows else np.zeros((0, n))
    for k, (j, s) in enumerate(zip(col_var, col_sign)):
        A[:, k] = s * A_orig[:, j]
    for i in range(m_ub):
        A[m_eq + i, n_split + i] = 1.0
    row_sign = np.ones(m)
    neg = b < 0
    A[neg] *= -1.0
    b = np.abs(b)
    row_sign[neg] = -1.0

    cap = 2000 + 200 * (m + n_split)
    # phase 1: drive artificials to zero
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(A.shape[1]), np.ones(m)])
    basis = list(range(A.shape[1], A.shape[1] + m))
    basis, B_inv, x_B, obj1, it1, _ = _simplex_iterate(
        A1, b, c1, basis, np.eye(m), cap
    )
    scale_b = max(1.0, float(np.max(b)) if m else 0.0)
    if obj1 > 1e-8 * scale_b:
        raise Infeasible(f"phase 1 ended at {obj1:.3e}")

    # pivot artificials out of the basis; rows that cannot pivot are redundant
    n_real = A.shape[1]
    drop = []
    for i in range(m):
        if basis[i] >= n_real:
            row = B_inv[i, :] @ A
            j = next(
                (jj for jj in range(n_real) if abs(row[jj]) > _SIMPLEX_TOL), None
            )
            if j is None:
                drop.append(i)
                continue
            d = B_inv @ A[:, j]
            basis[i] = j
            B_inv[i, :] /= d[i]
            for k in range(m):
                if k != i and abs(d[k]) > 0:
                    B_inv[k, :] -= d[k] * B_inv[i, :]
    if drop:
        keep = [i for i in range(m) if i not in drop]
        A = A[keep]
        b = b[keep]
        row_sign_idx = keep
        basis = [basis[i] for i in keep]
        m = len(keep)
        B_inv = np.linalg.inv(A[:, basis])
    else:
        row_sign_idx = list(range(m))

    c2 = np.zeros(A.shape[1] + m)
    for k, (j, s) in enumerate(zip(col_var, col_sign)):
        c2[k] = s * lp.c[j]
    A2 = np.hstack([A, np.eye(m)])
    # phase 2 reuses the feasible basis found by phase 1
    basis2, B_inv, x_B, obj, it2, y = _simplex_iterate(
        A2, b, c2, basis, B_inv, cap
    )

    x = np.zeros(n)
    for row_i, var in enumerate(basis2):
        if var < n_split:
            x[col_var[var]] += col_sign[var] * x_B[row_i]
    duals = np.zeros(m_eq + m_ub)
    for local, orig in enumerate(row_sign_idx):
        duals[orig] = y[local] * row_sign[orig]
    return LPResult(
        x,
        float(lp.c @ x),
        "optimal",
        duals[:m_eq],
        duals[m_eq:],
        "simplex",
        it1 + it2,
    )


def _solve_lp_highs(lp):
    bounds = [(0, None) if nn else (None, None) for nn in lp.nonneg]
    res = scipy.optimize.linprog(
        lp.c,
        A_eq=lp.A_eq,
        b_eq=lp.b_eq if lp.b_eq.size else None,
        A_ub=lp.A_ub,
        b_ub=lp.b_ub if lp.b_ub.size else None,
        bounds=bounds,
        method="highs",
    )
    if res.status == 2:
        raise Infeasible(res.message)
    if res.status == 3:
        raise Unbounded(res.message)
    if res.status != 0:
        raise SolverError(f"linprog failed: {res.message}")
    duals_eq = (
        np.asarray(res.eqlin.marginals) if lp.b_eq.size else np.zeros(0)
    )
    duals_ub = (
        np.asarray(res.ineqlin.marginals) if lp.b_ub.size else np.zeros(0)
    )
    return LPResult(
        np.asarray(res.x),
        float(res.fun),
        "optimal",
        duals_eq,
        duals_ub,
        "highs",
        int(res.nit),
    )


def solve_lp(problem, method="auto"):
    """Solve a DenseLP.

    method "simplex" forces the self-contained revised simplex, "highs" the
    scipy backend; "auto" picks simplex for small instances (its dense basis
    handling is quadratic in the row count) and highs otherwise.
    """
    if method == "auto":
        small = problem.n_rows <= 220 and problem.n <= 450
        method = "simplex" if small else "highs"
    if method == "simplex":
        return _solve_lp_simplex(problem)
    if method == "highs":
        return _solve_lp_highs(problem)
    raise ValueError(f"unknown LP method '{method}'")


def _write_matrix(fh, name, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    fh.write(f"{name} {M.shape[0]} {M.shape[1]}\n")
    for row in M:
        fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def dump_problem(problem, path):
    """Plain-text dump for external cross-checking.

    Format: one header line ("eqqp n m_eq" or "denselp n m_eq m_ub"), then for
    each part a line "<name> <rows> <cols>" followed by row-major decimal
    rows.  LP nonneg mask is written as a 1 x n 0/1 matrix.
    """
    with open(path, "w") as fh:
        if isinstance(problem, EqQP):
            fh.write(f"eqqp {problem.n} {problem.b_eq.size}\n")
            _write_matrix(fh, "H", problem.H)
            _write_matrix(fh, "g", problem.g)
            _write_matrix(fh, "A_eq", problem.A_eq)
            _write_matrix(fh, "b_eq", problem.b_eq)
        elif isinstance(problem, DenseLP):
            fh.write(
                f"denselp {problem.n} {problem.b_eq.size} {problem.b_ub.size}\n"
            )
            _write_matrix(fh, "c", problem.c)
            if problem.A_eq is not None:
                _write_matrix(fh, "A_eq", _dense(problem.A_eq))
                _write_matrix(fh, "b_eq", problem.b_eq)
            if problem.A_ub is not None:
                _write_matrix(fh, "A_ub", _dense(problem.A_ub))
                _write_matrix(fh, "b_ub", problem.b_ub)
            _write_matrix(fh, "nonneg", problem.nonneg.astype(float))
        else:
            raise TypeError("can only dump EqQP or DenseLP")
