"""Brute-force verifiers for tiny instances.

Nothing here calls the LP solver: polar checks sample directions, the
one-period membership test scans a grid, and the price-system test for
two-asset bid-ask trees runs exact interval arithmetic on rationals.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .errors import DimensionError, InputError
from .event_tree import EventTree, parse_fraction
from .geometry import HPolyhedron, VCone, project

GRID_STEP = 1e-3
GRID_RADIUS = 10.0
POLAR_TOL = 1e-9


def find_polar_counterexample(K: VCone, P: HPolyhedron, samples: int = 10_000, *, rng=None, seed: int | None = None,
                              tol: float = POLAR_TOL):
    """A direction where ``P`` and the polar of ``K`` disagree, or ``None``.

    Half the samples are drawn in the orthogonal complement of the lineality
    space (where the polar lives when ``K`` contains a line), half are plain
    Gaussian. Directions within ``tol`` of either boundary are skipped.
    """
    if K.d > 4:
        raise DimensionError("brute polar check is limited to d <= 4")
    if P.lifted:
        raise InputError("brute polar check needs a plain polyhedron")
    if samples <= 0:
        return None
    rng = rng if rng is not None else np.random.default_rng(seed)
    d = K.d
    Y = rng.standard_normal((samples, d))
    if K.lineality.size:
        Q, _ = np.linalg.qr(K.lineality.T)
        half = samples // 2
        Y[:half] -= (Y[:half] @ Q) @ Q.T
    G = K.generators
    gmax = np.max(Y @ G.T, axis=1) if G.size else np.full(samples, -np.inf)
    lin = np.max(np.abs(Y @ K.lineality.T), axis=1) if K.lineality.size else np.zeros(samples)
    in_polar = (gmax <= tol) & (lin <= tol)
    vals = Y @ P.A.T - P.b if P.m else np.zeros((samples, 1)) - 1.0
    pmax = np.max(vals, axis=1)
    in_p = pmax <= tol
    # ignore directions sitting on either boundary to within noise
    ambiguous = (np.abs(pmax) <= 1e3 * tol) | (np.abs(np.maximum(gmax, lin)) <= 1e3 * tol)
    bad = (in_polar != in_p) & ~ambiguous
    if np.any(bad):
        return Y[np.flatnonzero(bad)[0]]
    return None


def brute_polar_check(K: VCone, P: HPolyhedron, samples: int = 10_000, **kw) -> bool:
    return find_polar_counterexample(K, P, samples, **kw) is None


def _plain(P: HPolyhedron) -> HPolyhedron:
    return project(P) if P.lifted else P


def _one_period_sets(model):
    tree = model.tree
    if tree.T != 1 or model.d != 2:
        raise DimensionError("brute oracles need T = 1 and d = 2")
    leaves = tree.leaves
    if len(leaves) > 2:
        raise DimensionError("brute oracles handle deterministic or two-leaf trees")
    return _plain(model.sets[0]), [_plain(model.sets[k]) for k in leaves], leaves


def _frontier(C0: HPolyhedron, t: np.ndarray, radius: float) -> np.ndarray:
    """``max {z_2 : (t, z_2) in C_0}``, clipped to the box; ``-inf`` where ``t`` is infeasible."""
    out = np.full(t.shape, radius)
    for (a1, a2), b in zip(C0.A, C0.b):
        if a2 > 1e-12:
            out = np.minimum(out, (b - a1 * t) / a2)
        elif a2 < -1e-12:
            raise InputError("set at the root is not closed under disposal of asset 2")
        else:
            out = np.where(a1 * t <= b + 1e-12, out, -np.inf)
    return out


def brute_membership_AT(model, c_T, grid_step: float = GRID_STEP, grid_radius: float = GRID_RADIUS,
                        tol: float = 1e-9) -> bool:
    """Grid test of ``c_T in C_0 + C_1`` on a one-period two-asset model.

    Root trades ``z_0`` are scanned along the upper frontier of ``C_0`` on a
    grid of the first coordinate (dominated trades are never better, since
    each leaf set is closed under disposal); the leaf part ``c_T - z_0`` is
    then checked against each leaf set directly.
    """
    if grid_step <= 0 or grid_step > grid_radius:
        raise InputError("grid too coarse: step must lie in (0, radius]")
    C0, leaf_sets, leaves = _one_period_sets(model)
    c = np.asarray(c_T, dtype=float).reshape(len(leaves), 2)
    t = np.arange(-grid_radius, grid_radius + grid_step / 2, grid_step)
    f = _frontier(C0, t, grid_radius)
    ok = np.isfinite(f) & (f >= -grid_radius)
    Z = np.column_stack([t[ok], f[ok]])
    good = np.ones(Z.shape[0], dtype=bool)
    for P, cl in zip(leaf_sets, c):
        rest = cl[None, :] - Z
        if P.m:
            good &= np.all(rest @ P.A.T <= P.b + tol * (1 + np.abs(P.b)), axis=1)
    return bool(np.any(good))


def brute_superhedge_one_period(model, c_T, numeraire: int = 0, grid_step: float = GRID_STEP,
                                grid_radius: float = GRID_RADIUS, *, clamp: bool = False) -> float:
    """Smallest root premium in asset ``numeraire`` making ``c_T`` attainable, by bisection.

    With ``clamp`` the result is floored at zero, which is how a claim that
    can be disposed of for free is reported when only the sign matters.
    """
    C0, _, leaves = _one_period_sets(model)
    c = np.asarray(c_T, dtype=float).reshape(len(leaves), 2)
    e = np.zeros(2)
    e[numeraire] = 1.0

    def member(alpha: float) -> bool:
        # paying alpha at the root is the same as receiving -alpha at every leaf
        return brute_membership_AT(model, c - alpha * e, grid_step, grid_radius)

    hi = 1.0
    while not member(hi):
        hi *= 2
        if hi > 4 * grid_radius:
            raise InputError("claim is not attainable within the grid radius")
    lo = hi - 1.0
    while member(lo):
        lo -= max(1.0, hi - lo)
        if lo < -4 * grid_radius:
            return 0.0 if clamp else -np.inf
    while hi - lo > grid_step / 8:
        mid = 0.5 * (lo + hi)
        if member(mid):
            hi = mid
        else:
            lo = mid
    return max(hi, 0.0) if clamp else hi


@dataclass(frozen=True)
class Interval:
    """Interval of rationals with open or closed ends; ``lo > hi`` means empty."""

    lo: Fraction
    hi: Fraction
    lo_closed: bool = True
    hi_closed: bool = True

    @property
    def empty(self) -> bool:
        if self.lo > self.hi:
            return True
        if self.lo == self.hi:
            return not (self.lo_closed and self.hi_closed)
        return False

    def interior(self) -> "Interval":
        """Relative interior (a single point stays a point)."""
        if self.lo == self.hi:
            return self
        return Interval(self.lo, self.hi, False, False)

    def __and__(self, other: "Interval") -> "Interval":
        if self.lo > other.lo:
            lo, lc = self.lo, self.lo_closed
        elif self.lo < other.lo:
            lo, lc = other.lo, other.lo_closed
        else:
            lo, lc = self.lo, self.lo_closed and other.lo_closed
        if self.hi < other.hi:
            hi, hc = self.hi, self.hi_closed
        elif self.hi > other.hi:
            hi, hc = other.hi, other.hi_closed
        else:
            hi, hc = self.hi, self.hi_closed and other.hi_closed
        return Interval(lo, hi, lc, hc)


def _hull(parts: list[Interval], strict: bool) -> Interval:
    """Closure-aware range of strictly positive mixtures of ``parts`` (or of any mixture)."""
    lo = min(p.lo for p in parts)
    hi = max(p.hi for p in parts)
    if strict:
        # an end is reached only when every part reaches it
        lc = all(p.lo == lo and p.lo_closed for p in parts)
        hc = all(p.hi == hi and p.hi_closed for p in parts)
    else:
        lc = any(p.lo == lo and p.lo_closed for p in parts)
        hc = any(p.hi == hi and p.hi_closed for p in parts)
    return Interval(lo, hi, lc, hc)


def _weighted_sum(parts: list[Interval], weights: list[Fraction]) -> Interval:
    lo = sum(w * p.lo for p, w in zip(parts, weights))
    hi = sum(w * p.hi for p, w in zip(parts, weights))
    return Interval(lo, hi, all(p.lo_closed for p in parts), all(p.hi_closed for p in parts))


def interval_martingale_feasibility(tree: EventTree, intervals: Mapping, *, strict: bool = False,
                                    fixed_measure: bool = False) -> bool:
    """Is there a martingale ratio process inside the node intervals?

    For two-asset bid-ask models with asset 1 as numeraire, a consistent
    price system is a positive martingale ``y_1`` with ``y_2 / y_1`` in the
    node's bid-ask interval; after changing measure by ``y_1`` the ratio is
    a martingale under some measure equivalent to the tree's. The recursion
    therefore lets each node mix its children with any strictly positive
    weights (or, non-strictly, with weights that may vanish on some children).

    ``fixed_measure=True`` instead keeps the tree's own conditional
    probabilities, which decides the narrower question for ``y_1`` constant.
    ``strict`` replaces every interval by its relative interior, matching
    strictly consistent price systems.
    """
    iv = {}
    for k, nid in enumerate(tree.ids):
        if nid in intervals:
            raw = intervals[nid]
        elif str(nid) in intervals:
            raw = intervals[str(nid)]
        else:
            raise InputError(f"no interval for node {nid!r}")
        lo, hi = (parse_fraction(v) for v in raw)
        if lo > hi:
            raise InputError(f"node {nid!r}: empty interval [{lo}, {hi}]")
        I = Interval(lo, hi)
        iv[k] = I.interior() if strict else I
    feas: dict[int, Interval] = {}
    for k in reversed(range(tree.size)):       # children come after parents
        ch = list(tree.children[k])
        if not ch:
            feas[k] = iv[k]
            continue
        parts = [feas[j] for j in ch]
        if fixed_measure:
            if any(p.empty for p in parts):
                feas[k] = Interval(Fraction(1), Fraction(0))
                continue
            weights = [Fraction(float(tree.cond_prob[j])).limit_denominator(10**12) for j in ch]
            feas[k] = iv[k] & _weighted_sum(parts, weights)
            continue
        if strict:
            if any(p.empty for p in parts):
                feas[k] = Interval(Fraction(1), Fraction(0))
                continue
        else:
            parts = [p for p in parts if not p.empty]
            if not parts:
                feas[k] = Interval(Fraction(1), Fraction(0))
                continue
        feas[k] = iv[k] & _hull(parts, strict)
    return not feas[0].empty
