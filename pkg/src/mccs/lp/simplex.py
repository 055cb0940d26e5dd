"""Dense two-phase tableau simplex with Bland's rule.

Sized for desk-scale problems (a few hundred rows and columns). The final
basic solution is recomputed from the original constraint data to remove the
drift accumulated over the pivots.
"""

from __future__ import annotations

import numpy as np

from mccs.lp.program import LinearProgram, LpSolution, LpStatus

PIVOT_TOL = 1e-9


class _Tableau:
    def __init__(self, a: np.ndarray, b: np.ndarray, basis: list[int]):
        m, n = a.shape
        self.t = np.zeros((m + 1, n + 1))
        self.t[:m, :n] = a
        self.t[:m, n] = b
        self.basis = basis
        self.iterations = 0

    @property
    def m(self) -> int:
        return self.t.shape[0] - 1

    def set_objective(self, cost: np.ndarray) -> None:
        t = self.t
        t[-1, :-1] = cost
        t[-1, -1] = 0.0
        for i, j in enumerate(self.basis):
            if cost[j] != 0.0:
                t[-1] -= cost[j] * t[i]

    def pivot(self, r: int, c: int) -> None:
        t = self.t
        t[r] /= t[r, c]
        col = t[:, c].copy()
        col[r] = 0.0
        t -= np.outer(col, t[r])
        t[:, c] = 0.0
        t[r, c] = 1.0
        rhs = t[:-1, -1]
        rhs[(rhs < 0) & (rhs > -PIVOT_TOL)] = 0.0
        self.basis[r] = c
        self.iterations += 1

    def run(self, allowed: int, tol: float, max_iter: int) -> LpStatus:
        """Iterate on columns ``0..allowed-1`` until optimal or unbounded."""
        t = self.t
        while True:
            if self.iterations >= max_iter:
                return LpStatus.ITERATION_LIMIT
            reduced = t[-1, :allowed]
            candidates = np.flatnonzero(reduced < -tol)
            if candidates.size == 0:
                return LpStatus.OPTIMAL
            c = int(candidates[0])
            col = t[:-1, c]
            rows = np.flatnonzero(col > tol)
            if rows.size == 0:
                return LpStatus.UNBOUNDED
            ratios = t[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
            r = min(ties, key=lambda i: self.basis[i])
            self.pivot(int(r), c)


def _standard_form(lp: LinearProgram):
    free = np.isinf(lp.lower)
    shift = np.where(free, 0.0, lp.lower)
    n = lp.n_vars
    neg_cols = np.flatnonzero(free)
    m_eq, m_ub = lp.b_eq.size, lp.b_ub.size

    def expand(a):
        return np.hstack([a, -a[:, neg_cols]])

    ny = n + neg_cols.size
    a = np.zeros((m_eq + m_ub, ny + m_ub))
    a[:m_eq, :ny] = expand(lp.a_eq)
    a[m_eq:, :ny] = expand(lp.a_ub)
    a[m_eq:, ny:] = np.eye(m_ub)
    b = np.concatenate([lp.b_eq - lp.a_eq @ shift, lp.b_ub - lp.a_ub @ shift])
    cost = np.concatenate([lp.c, -lp.c[neg_cols], np.zeros(m_ub)])
    return a, b, cost, shift, neg_cols, ny


def solve_simplex(lp: LinearProgram, tol: float = PIVOT_TOL,
                  max_iter: int | None = None) -> LpSolution:
    a, b, cost, shift, neg_cols, ny = _standard_form(lp)
    m, ncols = a.shape
    n = lp.n_vars
    if max_iter is None:
        max_iter = 50 * (m + ncols) + 1000

    flip = b < 0
    a[flip] *= -1.0
    b[flip] *= -1.0
    m_eq = lp.b_eq.size

    basis: list[int] = []
    art_rows: list[int] = []
    for i in range(m):
        if i >= m_eq and not flip[i]:
            basis.append(ny + (i - m_eq))
        else:
            basis.append(ncols + len(art_rows))
            art_rows.append(i)
    n_art = len(art_rows)
    full = np.zeros((m, ncols + n_art))
    full[:, :ncols] = a
    for k, i in enumerate(art_rows):
        full[i, ncols + k] = 1.0

    tab = _Tableau(full, b, basis)

    if n_art:
        phase1_cost = np.zeros(ncols + n_art)
        phase1_cost[ncols:] = 1.0
        tab.set_objective(phase1_cost)
        status = tab.run(ncols + n_art, tol, max_iter)
        if status is LpStatus.ITERATION_LIMIT:
            return LpSolution(status, float("nan"), np.full(n, np.nan), tab.iterations)
        infeas = -tab.t[-1, -1]
        if infeas > tol * max(1.0, float(np.abs(b).max(initial=0.0))) * 10:
            return LpSolution(LpStatus.INFEASIBLE, float("nan"), np.full(n, np.nan), tab.iterations)
        # Drive zero-level artificials out of the basis; drop redundant rows.
        keep = []
        for i in range(m):
            if tab.basis[i] >= ncols:
                row = tab.t[i, :ncols]
                nz = np.flatnonzero(np.abs(row) > tol)
                if nz.size == 0:
                    continue
                tab.pivot(i, int(nz[0]))
            keep.append(i)
        tab.t = np.vstack([tab.t[keep], tab.t[-1:]])
        tab.t = np.delete(tab.t, np.s_[ncols:ncols + n_art], axis=1)
        tab.basis = [tab.basis[i] for i in keep]
        a, b = a[keep], b[keep]

    tab.set_objective(cost)
    status = tab.run(ncols, tol, max_iter)
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status, float("nan"), np.full(n, np.nan), tab.iterations)

    y = np.zeros(ncols)
    y[tab.basis] = tab.t[:-1, -1]
    if tab.basis:
        try:
            refined = np.linalg.solve(a[:, tab.basis], b)
        except np.linalg.LinAlgError:
            refined = None
        if refined is not None and np.all(refined > -tol):
            y[:] = 0.0
            y[tab.basis] = np.maximum(refined, 0.0)
    x = shift + y[:n]
    if neg_cols.size:
        x[neg_cols] -= y[n:ny]
    return LpSolution(LpStatus.OPTIMAL, lp.objective(x), x, tab.iterations)


def solve_highs(lp: LinearProgram) -> LpSolution:
    """Cross-check backend: scipy's HiGHS through ``linprog``."""
    from scipy.optimize import linprog

    bounds = [(None if np.isinf(lo) else lo, None) for lo in lp.lower]
    kwargs = dict(A_ub=lp.a_ub if lp.b_ub.size else None, b_ub=lp.b_ub if lp.b_ub.size else None,
                  A_eq=lp.a_eq if lp.b_eq.size else None, b_eq=lp.b_eq if lp.b_eq.size else None,
                  bounds=bounds, method="highs")
    res = linprog(lp.c, **kwargs)
    if res.status == 2:
        # presolve can label an unbounded LP infeasible; ask again without it
        res = linprog(lp.c, options={"presolve": False}, **kwargs)
    status = {0: LpStatus.OPTIMAL, 1: LpStatus.ITERATION_LIMIT,
              2: LpStatus.INFEASIBLE, 3: LpStatus.UNBOUNDED}.get(res.status, LpStatus.INFEASIBLE)
    n = lp.n_vars
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status, float("nan"), np.full(n, np.nan), int(res.nit))
    x = np.asarray(res.x, dtype=float)
    return LpSolution(status, lp.objective(x), x, int(res.nit))


BACKENDS = {"simplex": solve_simplex, "highs": solve_highs}


def solve(lp: LinearProgram, backend: str = "simplex") -> LpSolution:
    try:
        fn = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown LP backend {backend!r}; choose from {sorted(BACKENDS)}") from None
    return fn(lp)
