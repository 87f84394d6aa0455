from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from illiq.lp import LinearProgram, LPBuilder, collect_stats, dual_objective, residuals, solve_lp

scipy_optimize = pytest.importorskip("scipy.optimize")


def highs(lp: LinearProgram):
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for row, s, b in zip(lp.A, lp.sense, lp.rhs):
        if s == "<=":
            A_ub.append(row); b_ub.append(b)
        elif s == ">=":
            A_ub.append(-row); b_ub.append(-b)
        else:
            A_eq.append(row); b_eq.append(b)
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
              for lo, hi in zip(lp.lb, lp.ub)]
    return scipy_optimize.linprog(
        -lp.c,
        A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
        A_eq=np.array(A_eq) if A_eq else None, b_eq=b_eq or None,
        bounds=bounds, method="highs",
    )


def random_lp(rng, integer=False):
    n = int(rng.integers(1, 7))
    m = int(rng.integers(0, 7))
    draw = (lambda *s: rng.integers(-4, 5, s).astype(float)) if integer else (lambda *s: rng.normal(size=s).round(3))
    A = draw(m, n)
    rhs = draw(m)
    sense = list(rng.choice(["<=", ">=", "="], size=m, p=[0.6, 0.25, 0.15]))
    lb = np.where(rng.random(n) < 0.7, 0.0, -np.inf)
    lb = np.where(rng.random(n) < 0.1, -1.0, lb)
    ub = np.where(rng.random(n) < 0.2, 3.0, np.inf)
    return LinearProgram(c=draw(n), A=A, sense=sense, rhs=rhs, lb=lb, ub=ub)


STATUS = {0: "optimal", 2: "infeasible", 3: "unbounded"}


@pytest.mark.parametrize("seed", range(5))
def test_matches_highs_on_random_lps(seed):
    rng = np.random.default_rng(seed)
    for _ in range(100):
        lp = random_lp(rng, integer=bool(seed % 2))
        ours = solve_lp(lp)
        ref = highs(lp)
        assert ours.status == STATUS[ref.status], (lp, ours.message)
        if ours.optimal:
            assert ours.objective == pytest.approx(-ref.fun, abs=1e-7, rel=1e-7)
            assert residuals(lp, ours.x) <= 1e-7


def _vertex_max(c, A, b):
    """Exact maximum of ``c.x`` over ``{A x <= b}`` (2 variables) by vertex enumeration; None if empty.

    Only used for bounded, nonempty instances (boxed variables).
    """
    rows = [([Fraction(v) for v in a], Fraction(beta)) for a, beta in zip(A, b)]
    best = None
    for (a1, b1), (a2, b2) in combinations(rows, 2):
        det = a1[0] * a2[1] - a1[1] * a2[0]
        if det == 0:
            continue
        x = ((b1 * a2[1] - a1[1] * b2) / det, (a1[0] * b2 - b1 * a2[0]) / det)
        if all(a[0] * x[0] + a[1] * x[1] <= beta for a, beta in rows):
            val = c[0] * x[0] + c[1] * x[1]
            best = val if best is None or val > best else best
    return best


def test_exact_vertex_oracle_on_boxed_2d_lps():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(200):
        m = int(rng.integers(1, 5))
        A = rng.integers(-3, 4, (m, 2))
        b = rng.integers(-2, 5, m)
        A_full = np.vstack([A, np.eye(2, dtype=int), -np.eye(2, dtype=int)])
        b_full = np.concatenate([b, [5, 5, 5, 5]])
        c = [Fraction(int(v)) for v in rng.integers(-3, 4, 2)]
        exact = _vertex_max(c, A_full, b_full)
        lp = LinearProgram(c=np.array(c, dtype=float), A=A_full.astype(float), sense=["<="] * len(b_full),
                           rhs=b_full.astype(float), lb=np.full(2, -np.inf), ub=np.full(2, np.inf))
        sol = solve_lp(lp)
        if exact is None:
            assert sol.status == "infeasible"
        else:
            assert sol.optimal
            assert sol.objective == pytest.approx(float(exact), abs=1e-9)
            checked += 1
    assert checked > 50


def fourier_motzkin_max(c, A, b):
    """Exact ``sup c.x`` over ``{A x <= b}``: ``None`` if empty, ``inf`` if unbounded.

    Adds ``t <= c.x`` and eliminates every ``x_j``; what is left bounds ``t``.
    """
    n = len(c)
    rows = [[Fraction(v) for v in a] + [Fraction(0)] for a in A]
    rhs = [Fraction(v) for v in b]
    rows.append([-Fraction(v) for v in c] + [Fraction(1)])
    rhs.append(Fraction(0))
    for j in range(n):
        pos = [(r, h) for r, h in zip(rows, rhs) if r[j] > 0]
        neg = [(r, h) for r, h in zip(rows, rhs) if r[j] < 0]
        keep = [(r, h) for r, h in zip(rows, rhs) if r[j] == 0]
        for rp, hp in pos:
            for rn, hn in neg:
                f, g = -rn[j], rp[j]
                keep.append(([f * u + g * v for u, v in zip(rp, rn)], f * hp + g * hn))
        rows, rhs = [r for r, _ in keep], [h for _, h in keep]
    # only t is left: constraints a * t <= h
    if any(r[n] == 0 and h < 0 for r, h in zip(rows, rhs)):
        return None
    uppers = [h / r[n] for r, h in zip(rows, rhs) if r[n] > 0]
    lowers = [h / r[n] for r, h in zip(rows, rhs) if r[n] < 0]
    if uppers and lowers and max(lowers) > min(uppers):
        return None
    return min(uppers) if uppers else float("inf")


def test_fourier_motzkin_oracle_on_tiny_lps():
    rng = np.random.default_rng(17)
    seen = set()
    for _ in range(300):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 7))
        A = rng.integers(-3, 4, (m, n))
        b = rng.integers(-3, 4, m)
        c = rng.integers(-3, 4, n)
        exact = fourier_motzkin_max(c, A, b)
        lp = LinearProgram(c=c.astype(float), A=A.astype(float), sense=["<="] * m, rhs=b.astype(float),
                           lb=np.full(n, -np.inf), ub=np.full(n, np.inf))
        sol = solve_lp(lp)
        if exact is None:
            assert sol.status == "infeasible"
        elif exact == float("inf"):
            assert sol.status == "unbounded"
        else:
            assert sol.optimal
            assert sol.objective == pytest.approx(float(exact), abs=1e-9)
        seen.add(sol.status)
    assert seen == {"optimal", "infeasible", "unbounded"}


def test_gap_and_residuals_on_500_bounded_lps():
    rng = np.random.default_rng(23)
    for _ in range(500):
        n = int(rng.integers(1, 31))
        m = int(rng.integers(1, 31))
        A = rng.normal(size=(m, n))
        x0 = rng.uniform(0, 1, n)
        # feasible by construction, bounded by the box
        rhs = A @ x0 + rng.uniform(0, 1, m)
        lp = LinearProgram(c=rng.normal(size=n), A=A, sense=["<="] * m, rhs=rhs, lb=np.zeros(n), ub=np.full(n, 5.0))
        sol = solve_lp(lp)
        assert sol.optimal
        assert residuals(lp, sol.x) <= 1e-8
        val, infeas = dual_objective(lp, sol.duals, x=sol.x)
        assert infeas <= 1e-7
        assert abs(val - sol.objective) <= 1e-7 * (1 + abs(sol.objective))


def test_redundant_equalities_are_dropped_cleanly():
    # the second row is twice the first
    A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 1.0, 1.0]])
    lp = LinearProgram(c=np.array([1.0, 2.0, -1.0]), A=A, sense=["=", "=", "="], rhs=np.array([1.0, 2.0, 1.0]),
                       lb=np.zeros(3), ub=np.full(3, np.inf))
    sol = solve_lp(lp)
    assert sol.optimal
    assert sol.objective == pytest.approx(highs_value(lp))


def test_parallel_columns_with_free_variables():
    rng = np.random.default_rng(8)
    for _ in range(50):
        base = rng.normal(size=(6, 4))
        A = np.hstack([base, 2.0 * base[:, :2]])     # duplicated directions
        A = np.vstack([A, A[:2] + A[2:4]])           # dependent rows
        x0 = rng.normal(size=6)
        lp = LinearProgram(c=rng.normal(size=6), A=A, sense=["="] * 8, rhs=A @ x0,
                           lb=np.full(6, -np.inf), ub=np.full(6, np.inf))
        lp.lb[4:] = -1.0
        lp.ub[4:] = 1.0
        ours = solve_lp(lp)
        ref = highs(lp)
        assert ours.status == STATUS[ref.status]
        if ours.optimal:
            assert ours.objective == pytest.approx(-ref.fun, abs=1e-7)


def highs_value(lp):
    return -highs(lp).fun


def test_status_examples():
    # infeasible: x <= -1, x >= 0
    lp = LinearProgram(c=np.array([1.0]), A=np.array([[1.0]]), sense=["<="], rhs=np.array([-1.0]),
                       lb=np.zeros(1), ub=np.full(1, np.inf))
    assert solve_lp(lp).status == "infeasible"
    # unbounded
    lp = LinearProgram(c=np.array([1.0, 0.0]), A=np.array([[0.0, 1.0]]), sense=["<="], rhs=np.array([1.0]),
                       lb=np.zeros(2), ub=np.full(2, np.inf))
    assert solve_lp(lp).status == "unbounded"


def test_degenerate_cycling_example_terminates():
    # Beale's classic cycling instance for textbook Dantzig pivoting
    c = np.array([0.75, -150, 0.02, -6])
    A = np.array([[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]], dtype=float)
    lp = LinearProgram(c=c, A=A, sense=["<="] * 3, rhs=np.array([0, 0, 1.0]), lb=np.zeros(4), ub=np.full(4, np.inf))
    sol = solve_lp(lp)
    assert sol.optimal
    assert sol.objective == pytest.approx(0.05)


def test_duals_certify_optimum():
    rng = np.random.default_rng(5)
    for _ in range(50):
        lp = random_lp(rng)
        sol = solve_lp(lp)
        if sol.optimal:
            val, infeas = dual_objective(lp, sol.duals)
            assert infeas <= 1e-7
            assert val == pytest.approx(sol.objective, abs=1e-6)


def test_warm_start_matches_cold_solve():
    rng = np.random.default_rng(3)
    done = 0
    for _ in range(100):
        lp = random_lp(rng)
        first = solve_lp(lp)
        if not first.optimal:
            continue
        lp2 = LinearProgram(c=lp.c + rng.normal(scale=0.3, size=lp.n), A=lp.A, sense=lp.sense, rhs=lp.rhs,
                            lb=lp.lb, ub=lp.ub)
        cold = solve_lp(lp2)
        warm = solve_lp(lp2, warm_start=first.basis)
        assert warm.status == cold.status
        if cold.optimal:
            assert warm.objective == pytest.approx(cold.objective, abs=1e-7)
            done += 1
    assert done > 20


def test_stats_are_counted():
    lp = LinearProgram(c=np.array([1.0, 1.0]), A=np.array([[1.0, 2.0], [3.0, 1.0]]), sense=["<=", "<="],
                       rhs=np.array([4.0, 6.0]), lb=np.zeros(2), ub=np.full(2, np.inf))
    with collect_stats() as stats:
        solve_lp(lp)
        solve_lp(lp)
    assert stats.lp_count == 2 and stats.pivot_count >= 2


def test_builder_accumulates_objective_and_rows():
    bld = LPBuilder()
    x = bld.add_vars(2, lb=0.0, ub=1.0)
    bld.add_row(x, [1.0, 1.0], "<=", 1.5)
    bld.set_objective(x, [1.0, 0.0])
    bld.set_objective(x[1], 2.0)
    sol = solve_lp(bld.build())
    assert sol.objective == pytest.approx(2.5)


def test_rejects_impossible_bounds():
    with pytest.raises(ValueError):
        LinearProgram(c=np.zeros(1), A=np.zeros((0, 1)), sense=[], rhs=np.zeros(0), lb=np.array([np.inf]),
                      ub=np.array([np.inf]))


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_fuzz_against_highs(seed):
    rng = np.random.default_rng(seed)
    lp = random_lp(rng)
    ours = solve_lp(lp)
    ref = highs(lp)
    assert ours.status == STATUS[ref.status]
    if ours.optimal:
        assert ours.objective == pytest.approx(-ref.fun, abs=1e-7, rel=1e-7)
