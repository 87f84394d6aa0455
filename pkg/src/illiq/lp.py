"""Dense two-phase primal simplex.

Problems are stated as

    maximize    c @ x
    subject to  A[i] @ x  (<=, =, >=)  rhs[i]
                lb <= x <= ub            (bounds may be infinite)

Pricing is Dantzig's largest-coefficient rule; after ``5 * (n + m)``
consecutive degenerate pivots the solver switches to Bland's rule for the
rest of the phase, which guarantees termination.
"""
from __future__ import annotations

import contextlib
import contextvars
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9
REPORT_TOL = 1e-8
GAP_TOL = 1e-7
RATIO_PIVOT_TOL = 1e-7
REINVERT_EVERY = 200

LE, EQ, GE = "<=", "=", ">="
_SENSES = {"<=": LE, "=<": LE, "le": LE, "=": EQ, "==": EQ, "eq": EQ, ">=": GE, "=>": GE, "ge": GE}


def report_tol() -> float:
    """Residual tolerance for reported solutions; ``ILLIQ_LP_TOL`` overrides it."""
    raw = os.environ.get("ILLIQ_LP_TOL")
    if not raw:
        return REPORT_TOL
    try:
        tol = float(raw)
    except ValueError:
        tol = float("nan")
    if not (0 < tol < 1):
        raise InputError(f"ILLIQ_LP_TOL={raw!r}: expected a number in (0, 1)")
    return tol


@dataclass
class SolverStats:
    lp_count: int = 0
    pivot_count: int = 0

    def as_dict(self) -> dict:
        return {"lp_count": self.lp_count, "pivot_count": self.pivot_count}


_stats: contextvars.ContextVar[SolverStats] = contextvars.ContextVar("illiq_lp_stats", default=SolverStats())


def current_stats() -> SolverStats:
    return _stats.get()


@contextlib.contextmanager
def collect_stats():
    """Count LPs and pivots solved inside the block."""
    stats = SolverStats()
    token = _stats.set(stats)
    try:
        yield stats
    finally:
        _stats.reset(token)


@dataclass
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    sense: list
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        if n < 1:
            raise ValueError("LP needs at least one variable")
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        m = self.A.shape[0]
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        self.sense = [_SENSES[s] for s in self.sense]
        if self.rhs.size != m or len(self.sense) != m:
            raise ValueError("row count mismatch between A, sense and rhs")
        self.lb = np.broadcast_to(np.asarray(self.lb, dtype=float), (n,)).copy()
        self.ub = np.broadcast_to(np.asarray(self.ub, dtype=float), (n,)).copy()
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.rhs))):
            raise ValueError("LP coefficients must be finite")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)):
            raise ValueError("NaN bound")
        if np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise ValueError("lower bound +inf or upper bound -inf")

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.A.shape[0]


class LPBuilder:
    """Incremental assembly of a :class:`LinearProgram` by variable blocks."""

    def __init__(self):
        self._lb: list = []
        self._ub: list = []
        self._rows: list = []
        self._obj: dict = {}

    @property
    def n(self) -> int:
        return len(self._lb)

    def add_vars(self, count: int, lb: float = 0.0, ub: float = np.inf) -> np.ndarray:
        start = len(self._lb)
        self._lb.extend([lb] * count)
        self._ub.extend([ub] * count)
        return np.arange(start, start + count)

    def add_row(self, idx, coef, sense: str, rhs: float) -> int:
        idx = np.atleast_1d(np.asarray(idx, dtype=int))
        coef = np.broadcast_to(np.asarray(coef, dtype=float), idx.shape)
        self._rows.append((idx, np.array(coef), sense, float(rhs)))
        return len(self._rows) - 1

    def add_rows(self, idx_blocks, coef_matrix, sense: str, rhs) -> list:
        """Add ``coef_matrix @ x[idx_blocks] (sense) rhs`` row by row."""
        coef_matrix = np.atleast_2d(coef_matrix)
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (coef_matrix.shape[0],))
        return [self.add_row(idx_blocks, coef_matrix[i], sense, rhs[i]) for i in range(coef_matrix.shape[0])]

    def set_objective(self, idx, coef):
        idx = np.atleast_1d(np.asarray(idx, dtype=int))
        coef = np.broadcast_to(np.asarray(coef, dtype=float), idx.shape)
        for j, v in zip(idx, coef):
            self._obj[int(j)] = self._obj.get(int(j), 0.0) + float(v)

    def build(self) -> LinearProgram:
        n = self.n
        c = np.zeros(n)
        for j, v in self._obj.items():
            c[j] = v
        A = np.zeros((len(self._rows), n))
        sense, rhs = [], []
        for r, (idx, coef, s, b) in enumerate(self._rows):
            np.add.at(A[r], idx, coef)
            sense.append(s)
            rhs.append(b)
        return LinearProgram(c=c, A=A, sense=sense, rhs=np.array(rhs), lb=np.array(self._lb), ub=np.array(self._ub))


@dataclass
class LpSolution:
    status: str                       # optimal | infeasible | unbounded | numerical
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = float("nan")
    iterations: int = 0
    message: str = ""
    residual: float = 0.0
    gap: float = 0.0
    basis: tuple = field(default=(), repr=False)   # (kept rows, basic columns); feed to warm_start

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Unbounded(Exception):
    pass


class _Breakdown(Exception):
    pass


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    nz = np.flatnonzero(np.abs(col) > 1e-300)
    if nz.size:
        T[nz] -= np.outer(col[nz], T[r])


def _run_phase(T, basis, allowed, n_orig, max_iter, stats, M, cost, bland=False, twin=None):
    """Optimize the tableau whose last row holds reduced costs (maximization).

    ``twin[j]`` is the negated copy of column ``j`` for split free variables;
    a column may not enter while it or its twin is basic, since drift can
    otherwise give it a spurious positive reduced cost.
    """
    m = T.shape[0] - 1
    N = T.shape[1] - 1
    blocked = np.zeros(N, dtype=bool)
    degenerate = 0
    limit = 5 * (n_orig + m)
    it = 0
    while True:
        r_cost = T[m, :-1]
        blocked[:] = False
        blocked[basis] = True
        if twin is not None:
            tb = twin[basis]
            blocked[tb[tb >= 0]] = True
        cand = np.flatnonzero((r_cost > PIVOT_TOL) & allowed & ~blocked)
        if cand.size == 0:
            return it
        if bland:
            j = int(cand[0])
        else:
            j = int(cand[np.argmax(r_cost[cand])])
        col = T[:m, j]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            raise _Unbounded(j)
        # entries at drift level relative to the column are not safe pivots
        safe = rows[col[rows] > RATIO_PIVOT_TOL * float(np.max(col[rows]))]
        rows = safe if safe.size else rows
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        if bland:
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = int(ties[np.argmin([basis[i] for i in ties])])
        else:
            # Harris pass: among rows blocking within a small feasibility
            # relaxation, pivot on the largest entry
            relaxed = np.min((T[rows, -1] + FEAS_TOL) / col[rows])
            near = rows[ratios <= relaxed]
            r = int(near[np.argmax(col[near])])
            best = max(float(T[r, -1] / col[r]), 0.0)
        if best <= FEAS_TOL:
            degenerate += 1
            if degenerate > limit:
                bland = True
        else:
            degenerate = 0
        _pivot(T, r, j)
        basis[r] = j
        np.maximum(T[:m, -1], 0.0, out=T[:m, -1])   # absorb Harris overshoot
        it += 1
        stats.pivot_count += 1
        if it > max_iter:
            raise _Breakdown("iteration limit reached")
        if it % REINVERT_EVERY == 0:
            _reinvert(T, basis, M, cost)


def _reinvert(T, basis, M, cost):
    """Rebuild ``T`` from the original matrix ``M`` to shed accumulated drift."""
    m = T.shape[0] - 1
    try:
        T[:m] = np.linalg.solve(M[:m][:, basis], M[:m])
    except np.linalg.LinAlgError as exc:
        raise _Breakdown("singular basis on reinversion") from exc
    T[m] = _cost_row(cost, cost[basis], T[:m])


def _cost_row(cost, cb, rows):
    out = -(cb @ rows)
    out[:-1] += cost
    return out


def _warm_tableau(M: np.ndarray, warm, cost: np.ndarray):
    """Tableau for a previous optimal basis, or ``None`` when it is no longer primal feasible."""
    kept, basis = warm
    if not kept or max(kept) >= M.shape[0] or len(basis) != len(kept) or max(basis) >= M.shape[1] - 1:
        return None
    Mk = M[list(kept)]
    try:
        rows = np.linalg.solve(Mk[:, list(basis)], Mk)
    except np.linalg.LinAlgError:
        return None
    scale = 1.0 + float(np.max(np.abs(Mk[:, -1]), initial=0.0))
    if np.any(rows[:, -1] < -FEAS_TOL * scale):
        return None
    rows[:, -1] = np.maximum(rows[:, -1], 0.0)
    T = np.vstack([rows, _cost_row(cost, cost[list(basis)], rows)])
    return T, Mk, list(basis), list(kept)


def solve_lp(lp: LinearProgram, max_iter: int | None = None, warm_start: tuple | None = None) -> LpSolution:
    """Solve ``lp``; never raises for infeasible/unbounded/numerical outcomes.

    ``warm_start`` takes the ``basis`` of an earlier solution of an LP with
    the same rows and bounds (only the objective may differ); phase 1 is
    skipped when that basis is still feasible. A run that fails its
    self-check is repeated once from scratch under Bland's rule.
    """
    stats = current_stats()
    stats.lp_count += 1
    sol = _solve(lp, max_iter, warm_start, stats, bland=False)
    if sol.status == "numerical":
        retry = _solve(lp, max_iter, None, stats, bland=True)
        if retry.status != "numerical":
            return retry
    return sol


def _solve(lp: LinearProgram, max_iter, warm_start, stats, bland: bool) -> LpSolution:
    n, m = lp.n, lp.m
    A, rhs, c = lp.A, lp.rhs, lp.c

    # Substitute x = shift + S @ x' with x' >= 0.
    cols = []
    shift = np.zeros(n)
    extra_ub = []  # (column of x', upper bound)
    for j in range(n):
        lo, hi = lp.lb[j], lp.ub[j]
        if lo > hi + FEAS_TOL:
            return LpSolution("infeasible", message=f"empty bounds on variable {j}")
        if np.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_ub.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    n1 = len(cols)
    S = np.zeros((n, n1))
    twin_pairs = [(k, k + 1) for k in range(n1 - 1) if cols[k][0] == cols[k + 1][0]]
    for k, (j, s) in enumerate(cols):
        S[j, k] = s

    A1 = A @ S
    b1 = rhs - A @ shift
    sense = list(lp.sense)
    if extra_ub:
        Aub = np.zeros((len(extra_ub), n1))
        for r, (k, u) in enumerate(extra_ub):
            Aub[r, k] = 1.0
        A1 = np.vstack([A1, Aub])
        b1 = np.concatenate([b1, [u for _, u in extra_ub]])
        sense += [LE] * len(extra_ub)
    c1 = S.T @ c
    m1 = A1.shape[0]

    flip = np.where(b1 < 0, -1.0, 1.0)
    A1 = A1 * flip[:, None]
    b1 = b1 * flip
    sense = [s if f > 0 else {LE: GE, GE: LE, EQ: EQ}[s] for s, f in zip(sense, flip)]

    n_slack = sum(1 for s in sense if s != EQ)
    n_art = sum(1 for s in sense if s != LE)
    N = n1 + n_slack + n_art
    M = np.zeros((m1, N + 1))
    M[:, :n1] = A1
    M[:, -1] = b1
    basis = [0] * m1
    art_cols = []
    sc = n1
    ac = n1 + n_slack
    for i, s in enumerate(sense):
        if s == LE:
            M[i, sc] = 1.0
            basis[i] = sc
            sc += 1
        elif s == GE:
            M[i, sc] = -1.0
            sc += 1
            M[i, ac] = 1.0
            basis[i] = ac
            art_cols.append(ac)
            ac += 1
        else:
            M[i, ac] = 1.0
            basis[i] = ac
            art_cols.append(ac)
            ac += 1
    if max_iter is None:
        max_iter = 50 * (N + m1) + 1000

    T = np.vstack([M, np.zeros((1, N + 1))])
    allowed = np.ones(N, dtype=bool)
    is_art = np.zeros(N, dtype=bool)
    is_art[art_cols] = True
    twin = np.full(N, -1)
    for a, b in twin_pairs:
        twin[a], twin[b] = b, a
    iters = 0
    cost2 = np.zeros(N)
    cost2[:n1] = c1
    warm = _warm_tableau(M, warm_start, cost2) if warm_start else None
    try:
        if warm is not None:
            T, M, basis, kept_rows = warm
            allowed = ~is_art
        elif art_cols:
            cost1 = np.zeros(N)
            cost1[art_cols] = -1.0
            T[m1] = _cost_row(cost1, cost1[basis], T[:m1])
            iters += _run_phase(T, basis, allowed, n, max_iter, stats, M, cost1, bland, twin)
            infeas = T[m1, -1]
            scale = 1.0 + float(np.max(np.abs(b1), initial=0.0))
            if infeas > FEAS_TOL * scale * 10:
                return LpSolution("infeasible", iterations=iters, message=f"phase-1 residual {infeas:.3g}")
            keep, dropped = [], []
            for i in range(m1):
                if is_art[basis[i]]:
                    row = np.abs(T[i, :N]) * (~is_art)
                    tb = twin[basis]
                    row[tb[tb >= 0]] = 0.0
                    j = int(np.argmax(row))
                    if row[j] > PIVOT_TOL:
                        _pivot(T, i, j)
                        basis[i] = j
                        keep.append(i)
                    else:
                        # redundant: drop the equation this artificial belongs to
                        dropped.append(int(np.argmax(M[:, basis[i]])))
                else:
                    keep.append(i)
            if dropped:
                kept_rows = [r for r in range(m1) if r not in set(dropped)]
                T = np.vstack([T[keep], T[m1:m1 + 1]])
                M = M[kept_rows]
                basis = [basis[i] for i in keep]
            else:
                kept_rows = list(range(m1))
            allowed = ~is_art
        else:
            kept_rows = list(range(m1))
        mk = len(kept_rows)
        T[mk] = _cost_row(cost2, cost2[basis], T[:mk])
        iters += _run_phase(T, basis, allowed, n, max_iter, stats, M, cost2, bland, twin)
    except _Unbounded:
        return LpSolution("unbounded", iterations=iters)
    except _Breakdown as exc:
        return LpSolution("numerical", iterations=iters, message=str(exc))

    # Final solve from the basis for accuracy.
    B = M[:, basis]
    try:
        xb = np.linalg.solve(B, M[:, -1])
        pi_std = np.linalg.solve(B.T, cost2[basis])
    except np.linalg.LinAlgError:
        return LpSolution("numerical", iterations=iters, message="singular final basis")
    xfull = np.zeros(N)
    xfull[basis] = xb
    if np.any(xb < -1e3 * FEAS_TOL * (1 + np.abs(M[:, -1]).max(initial=0))):
        return LpSolution("numerical", iterations=iters, message="negative basic variable after refactorization")
    xprime = np.maximum(xfull[:n1], 0.0)
    x = shift + S @ xprime

    duals_std = np.zeros(m1)
    duals_std[kept_rows] = pi_std
    duals_std *= flip
    duals = duals_std[:m]

    sol = LpSolution("optimal", x=x, duals=duals, objective=float(c @ x), iterations=iters,
                      basis=(tuple(kept_rows), tuple(basis)))
    _self_check(lp, sol)
    return sol


def residuals(lp: LinearProgram, x: np.ndarray) -> float:
    """Largest violation of rows and bounds at ``x``."""
    ax = lp.A @ x
    worst = 0.0
    for i, s in enumerate(lp.sense):
        v = ax[i] - lp.rhs[i]
        if s == LE:
            worst = max(worst, v)
        elif s == GE:
            worst = max(worst, -v)
        else:
            worst = max(worst, abs(v))
    worst = max(worst, float(np.max(lp.lb - x, initial=0.0)), float(np.max(x - lp.ub, initial=0.0)))
    return worst


def dual_objective(lp: LinearProgram, duals: np.ndarray, with_magnitude: bool = False, x: np.ndarray | None = None):
    """Dual objective and dual sign infeasibility for multipliers ``duals``.

    Reduced costs within pivot tolerance of zero are charged at the primal
    point ``x`` when given (complementary choice of bound), else ignored.
    With ``with_magnitude`` also returns the sum of absolute terms, a scale
    for judging the duality gap.
    """
    red = lp.c - lp.A.T @ duals
    infeas = 0.0
    val = float(lp.rhs @ duals)
    mag = float(np.abs(lp.rhs) @ np.abs(duals))
    tiny = PIVOT_TOL * (1.0 + np.abs(lp.c))
    for j in range(lp.n):
        r = red[j]
        if abs(r) <= tiny[j]:
            if x is not None:
                val += r * x[j]
                mag += abs(r * x[j])
            continue
        if r > 0:
            if np.isfinite(lp.ub[j]):
                val += r * lp.ub[j]
                mag += abs(r * lp.ub[j])
            else:
                infeas = max(infeas, r)
        elif r < 0:
            if np.isfinite(lp.lb[j]):
                val += r * lp.lb[j]
                mag += abs(r * lp.lb[j])
            else:
                infeas = max(infeas, -r)
    for i, s in enumerate(lp.sense):
        if s == LE:
            infeas = max(infeas, -duals[i])
        elif s == GE:
            infeas = max(infeas, duals[i])
    if with_magnitude:
        return val, infeas, mag
    return val, infeas


def _self_check(lp: LinearProgram, sol: LpSolution) -> None:
    tol = report_tol()
    scale = 1.0 + float(np.max(np.abs(lp.rhs), initial=0.0)) + float(np.max(np.abs(sol.x), initial=0.0))
    res = residuals(lp, sol.x)
    sol.residual = res
    dval, dinf, mag = dual_objective(lp, sol.duals, with_magnitude=True, x=sol.x)
    sol.gap = abs(dval - sol.objective)
    if res > tol * scale:
        sol.status = "numerical"
        sol.message = f"primal residual {res:.3g} exceeds tolerance"
    elif sol.gap > GAP_TOL * (1.0 + abs(sol.objective) + float(np.abs(lp.c) @ np.abs(sol.x)) + mag) or dinf > 1e-6 * (1 + np.abs(lp.c).max(initial=0)):
        sol.status = "numerical"
        sol.message = f"duality gap {sol.gap:.3g}, dual infeasibility {dinf:.3g}"
