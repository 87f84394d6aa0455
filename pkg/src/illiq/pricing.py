"""Superhedging, attainable claims, dual bounds and consistent price systems.

Conventions: a claim ``c`` is an :class:`AdaptedVectorProcess` of portfolio
payouts delivered by the seller; ``c`` is hedgeable when there are holdings
``x`` with ``x_T = 0`` and ``x_t - x_{t-1} + c_t`` freely available at
every node.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DimensionError, InputError, ModelError, NotConicalError, NumericalError
from .event_tree import AdaptedVectorProcess, EventTree, martingale_defect
from .formulation import add_membership
from .geometry import (
    HPolyhedron,
    _dedupe,
    polar_cone,
    polyhedron_from_vrep,
    polyhedron_vrep,
    relative_interior_membership,
)
from .lp import LPBuilder, solve_lp
from .markets import MarketModel

STRICT_THRESHOLD = 1e-7
DUAL_BOX = 1e3
DUAL_ZERO_TOL = 1e-6
ATTAINABLE_MAX_DIM = 8


class HedgingDiagnostic(UserWarning):
    """Primal and dual hedging tests disagree, or a precondition fails."""


@dataclass
class ClaimResult:
    member: bool
    hedge: AdaptedVectorProcess | None = None
    aux: dict | None = None          # node index -> auxiliary values of lifted sets


@dataclass
class PremiumResult:
    alpha: float
    hedge: AdaptedVectorProcess | None
    premium: AdaptedVectorProcess | None
    status: str = "optimal"          # optimal | unbounded (scalable arbitrage)
    numeraire: int = 0
    aux: dict | None = None


@dataclass
class DualResult:
    sup_value: float
    y: AdaptedVectorProcess | None
    encoding: str
    normalization: str
    lam: dict | None = None          # epigraph multipliers per node index
    basis: tuple = field(default=(), repr=False)


@dataclass
class PriceSystem:
    y: AdaptedVectorProcess
    strict: bool
    delta: float = 0.0


def as_process(model: MarketModel, c, what: str = "claim") -> AdaptedVectorProcess:
    tree, d = model.tree, model.d
    if c is None:
        return AdaptedVectorProcess.zeros(tree, d)
    if isinstance(c, AdaptedVectorProcess):
        if c.d != d or c.tree.size != tree.size:
            raise DimensionError(f"{what} does not match the model")
        return c
    if isinstance(c, Mapping):
        return AdaptedVectorProcess.from_mapping(tree, c, d, default=np.zeros(d))
    return AdaptedVectorProcess(tree, c)


def _lp_failure(sol, what: str):
    raise NumericalError(f"{what}: LP returned {sol.status} ({sol.message})")


def _hedge_lp(model: MarketModel, c: AdaptedVectorProcess, alpha_dir: np.ndarray | None = None):
    """Builder with holdings ``x`` at non-leaf nodes; returns ``(builder, x_index, alpha_index)``."""
    tree = model.tree
    bld = LPBuilder()
    x = {k: bld.add_vars(model.d, lb=-np.inf) for k in tree.non_leaves}
    a = bld.add_vars(1, lb=-np.inf) if alpha_dir is not None else None
    aux = {}
    for k in range(tree.size):
        terms = []
        if k in x:
            terms.append((x[k], 1.0))
        par = int(tree.parent[k])
        if par >= 0:
            terms.append((x[par], -1.0))
        if k == 0 and a is not None:
            terms.append((a, -alpha_dir.reshape(-1, 1)))
        if not terms:
            terms.append((bld.add_vars(model.d, lb=0.0, ub=0.0), 1.0))
        aux[k] = add_membership(bld, model.sets[k], terms, const=c.at(k))
    if bld.n == 0:
        bld.add_vars(1, lb=0.0, ub=0.0)
    return bld, x, a, aux


def aux_values(aux: dict, sol) -> dict:
    return {k: sol.x[u] for k, u in aux.items() if u.size}


def _holdings(model: MarketModel, x: dict, sol) -> AdaptedVectorProcess:
    vals = np.zeros((model.tree.size, model.d))
    for k, idx in x.items():
        vals[k] = sol.x[idx]
    return AdaptedVectorProcess(model.tree, vals)


def claim_in_A(model: MarketModel, c) -> ClaimResult:
    """Is the claim process hedgeable from zero wealth?"""
    c = as_process(model, c)
    bld, x, _, aux = _hedge_lp(model, c)
    sol = solve_lp(bld.build())
    if sol.status == "infeasible":
        return ClaimResult(False, None)
    if not sol.optimal:
        _lp_failure(sol, "claim_in_A")
    return ClaimResult(True, _holdings(model, x, sol), aux_values(aux, sol))


def aggregate_along_paths(c: AdaptedVectorProcess) -> np.ndarray:
    """Leaf claims ``sum_{t <= T} c_t`` along each root-to-leaf path, shape ``(L, d)``."""
    return c.path_sums().leaf_values()


def _leaf_claim(model: MarketModel, c_T) -> AdaptedVectorProcess:
    tree = model.tree
    if isinstance(c_T, AdaptedVectorProcess):
        return AdaptedVectorProcess.at_leaves(tree, c_T.leaf_values(), model.d)
    if isinstance(c_T, Mapping):
        c_T = {k: [float(v) for v in np.atleast_1d(vec)] for k, vec in c_T.items()}
    return AdaptedVectorProcess.at_leaves(tree, c_T, model.d)


def attainable_set(model: MarketModel, max_dim: int = ATTAINABLE_MAX_DIM) -> HPolyhedron:
    """Halfspace form of the terminal attainable set in ``R^{L*d}`` (leaf-major).

    The set is the sum over nodes of each node's set copied onto every leaf
    below it; it is built from vertex forms, so only small trees qualify.
    """
    tree, d = model.tree, model.d
    M = tree.ancestors_matrix()            # leaves x nodes
    n_leaf = M.shape[0]
    dim = n_leaf * d
    if dim > max_dim:
        raise DimensionError(f"attainable set has dimension {dim} > {max_dim}")
    V = np.zeros((1, dim))
    rays, lins = [], []
    for k in range(tree.size):
        P = model.projected_set(k) if model.sets[k].lifted else model.sets[k]
        verts, R, L = polyhedron_vrep(P)
        embed = lambda rows: np.kron(M[:, k][None, :], rows) if rows.size else np.zeros((0, dim))  # noqa: E731
        Ve = embed(verts)
        V = _dedupe((V[:, None, :] + Ve[None, :, :]).reshape(-1, dim))
        if V.shape[0] > 64:
            V = polyhedron_vrep(polyhedron_from_vrep(V))[0]
        rays.append(embed(R))
        lins.append(embed(L))
    return polyhedron_from_vrep(V, np.vstack(rays), np.vstack(lins))


def claim_in_AT(model: MarketModel, c_T, *, attainable: HPolyhedron | None = None, tol: float = 1e-9):
    """Is the terminal claim attainable from zero wealth?

    ``c_T`` may be a leaf mapping, an ``(L, d)`` array, or a batch of shape
    ``(N, L, d)``; a batch returns a boolean array. Passing ``attainable``
    (from :func:`attainable_set`) replaces the per-claim LP by a halfspace test.
    """
    n_leaf = len(model.tree.leaves)
    arr = None if isinstance(c_T, (Mapping, AdaptedVectorProcess)) else np.asarray(c_T, dtype=float)
    if arr is not None and arr.ndim == 3:
        if arr.shape[1:] != (n_leaf, model.d):
            raise DimensionError(f"batch must have shape (N, {n_leaf}, {model.d})")
        if attainable is None:
            try:
                attainable = attainable_set(model)
            except DimensionError:
                return np.array([claim_in_AT(model, a) for a in arr])
        flat = arr.reshape(arr.shape[0], -1)
        slack = flat @ attainable.A.T - attainable.b
        return np.all(slack <= tol * (1.0 + np.abs(attainable.b)), axis=1)
    if attainable is not None:
        vec = _leaf_claim(model, c_T).leaf_values().reshape(-1)
        return attainable.contains(vec, tol)
    return claim_in_A(model, _leaf_claim(model, c_T)).member


def superhedge_premium(model: MarketModel, c, numeraire: int = 0, *, check_model: bool = True) -> PremiumResult:
    """Smallest root premium ``alpha * e_numeraire`` that superhedges ``c``."""
    c = as_process(model, c)
    if not 0 <= numeraire < model.d:
        raise InputError(f"numeraire index {numeraire} out of range for d={model.d}")
    if check_model:
        from .arbitrage import check_robust_no_scalable_arbitrage

        if not check_robust_no_scalable_arbitrage(model).holds:
            warnings.warn("model fails robust no scalable arbitrage; premium may be unbounded below",
                          HedgingDiagnostic, stacklevel=2)
    e = np.zeros(model.d)
    e[numeraire] = 1.0
    bld, x, a, aux = _hedge_lp(model, c, alpha_dir=e)
    bld.set_objective(a, -1.0)
    sol = solve_lp(bld.build())
    if sol.status == "unbounded":
        return PremiumResult(-np.inf, None, None, status="unbounded", numeraire=numeraire)
    if sol.status == "infeasible":
        raise ModelError("no premium superhedges the claim; the model sets must contain the negative orthant")
    if not sol.optimal:
        _lp_failure(sol, "superhedge_premium")
    alpha = float(sol.x[a[0]])
    prem = np.zeros((model.tree.size, model.d))
    prem[0] = alpha * e
    return PremiumResult(alpha, _holdings(model, x, sol), AdaptedVectorProcess(model.tree, prem),
                         numeraire=numeraire, aux=aux_values(aux, sol))


def dual_bound(model: MarketModel, c, p=None, *, encoding: str = "auto", box: float = DUAL_BOX,
               warm_start: tuple | None = None) -> DualResult:
    """``sup_y E sum_t [(c_t - p_t) . y_t - sigma_t(y_t)]`` over nonnegative martingales.

    Conical models are normalized by ``sum_i y_0^i <= 1``; other models by
    ``0 <= y <= box``. The objective is positively homogeneous in ``y``, so
    the value is zero exactly when ``p`` superhedges ``c``; a positive value
    scales with the normalization and only its sign is intrinsic.

    ``encoding``: ``"epigraph"`` writes ``sigma(y) = min{b.l : A^T l = y,
    aux^T l = 0, l >= 0}``; ``"polar"`` (conical only) restricts ``y`` to the
    polar cone given by generators; ``"auto"`` picks the epigraph.
    ``warm_start`` reuses the ``basis`` of an earlier result for the same
    model and encoding.
    """
    c = as_process(model, c)
    p = as_process(model, p, "premium")
    w = c.values - p.values
    tree, d = model.tree, model.d
    if encoding == "auto":
        encoding = "epigraph"
    if encoding not in ("epigraph", "polar"):
        raise InputError(f"unknown encoding {encoding!r}")
    if encoding == "polar" and not model.conical:
        raise NotConicalError("the polar encoding needs a conical model")
    conical = model.conical
    bld = LPBuilder()
    ub = np.inf if conical else box
    y = [bld.add_vars(d, lb=0.0, ub=ub) for _ in range(tree.size)]
    lams = {}
    for k in tree.non_leaves:
        ch = list(tree.children[k])
        idx = np.concatenate([y[k]] + [y[j] for j in ch])
        for i in range(d):
            coef = np.zeros(idx.size)
            coef[i] = 1.0
            for r, j in enumerate(ch):
                coef[d * (r + 1) + i] = -tree.cond_prob[j]
            bld.add_row(idx, coef, "=", 0.0)
    for k in range(tree.size):
        P = model.sets[k]
        bld.set_objective(y[k], tree.prob[k] * w[k])
        if encoding == "polar":
            K = model.cone_at(k)
            Q = polar_cone(K)
            if Q.m:
                bld.add_rows(y[k], Q.A, "<=", 0.0)
            continue
        lam = lams[k] = bld.add_vars(P.m, lb=0.0)
        # A^T lam - y = 0 ; aux^T lam = 0
        for i in range(d):
            bld.add_row(np.concatenate([lam, y[k][i:i + 1]]), np.concatenate([P.A[:, i], [-1.0]]), "=", 0.0)
        for j in range(P.n_aux):
            bld.add_row(lam, P.aux[:, j], "=", 0.0)
        if not P.is_cone:
            bld.set_objective(lam, -tree.prob[k] * P.b)
    if conical:
        bld.add_row(y[0], np.ones(d), "<=", 1.0)
    sol = solve_lp(bld.build(), warm_start=warm_start)
    if sol.status == "unbounded":
        return DualResult(np.inf, None, encoding, "sum_y0" if conical else "box")
    if not sol.optimal:
        _lp_failure(sol, "dual_bound")
    vals = np.clip(np.array([sol.x[yk] for yk in y]), 0.0, None)
    return DualResult(max(float(sol.objective), 0.0), AdaptedVectorProcess(tree, vals), encoding,
                      "sum_y0" if conical else "box",
                      {k: np.clip(sol.x[l], 0.0, None) for k, l in lams.items()} if encoding == "epigraph" else None,
                      sol.basis)


def dual_premium_bisection(model: MarketModel, c, numeraire: int = 0, *, iterations: int = 40,
                           bracket: tuple[float, float] | None = None, zero_tol: float = 1e-10,
                           encoding: str = "auto") -> float:
    """Root premium at which :func:`dual_bound` drops to zero, by bisection."""
    c = as_process(model, c)
    e = np.zeros(model.d)
    e[numeraire] = 1.0

    warm: list = [None]

    def positive(alpha: float) -> bool:
        prem = np.zeros((model.tree.size, model.d))
        prem[0] = alpha * e
        r = dual_bound(model, c, AdaptedVectorProcess(model.tree, prem), encoding=encoding, warm_start=warm[0])
        warm[0] = r.basis
        return r.sup_value > zero_tol

    scale = 1.0 + float(np.max(np.abs(c.values)))
    lo, hi = bracket if bracket is not None else (-scale, scale)
    for _ in range(60):
        if not positive(hi):
            break
        lo, hi = hi, hi + 2 * (hi - lo)
    else:
        raise NumericalError("no premium makes the dual bound vanish")
    for _ in range(60):
        if positive(lo):
            break
        lo, hi = lo - 2 * (hi - lo), lo
    else:
        return -np.inf
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if positive(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def superhedge_check(model: MarketModel, c, p=None, *, cross_check: bool = True) -> bool:
    """Does ``p`` superhedge ``c``? Primal LP, optionally confirmed by the dual bound."""
    c = as_process(model, c)
    p = as_process(model, p, "premium")
    member = claim_in_A(model, c - p).member
    if cross_check:
        from .arbitrage import check_robust_no_scalable_arbitrage

        if check_robust_no_scalable_arbitrage(model).holds:
            val = dual_bound(model, c, p).sup_value
            if member != (val <= DUAL_ZERO_TOL):
                warnings.warn(f"primal says {member}, dual bound is {val:.3g}", HedgingDiagnostic, stacklevel=2)
    return member


def _polar_rows(model: MarketModel, k: int, tol: float = 1e-9):
    """Generator rows of the polar at node ``k``, split into inequality and equality rows."""
    K = model.cone_at(k)
    H = model.cone_hrep_at(k)
    ineq, eq = [], list(K.lineality)
    for g in K.generators:
        # g is an implicit row of the polar iff -g also lies in the cone
        scale = max(1.0, float(np.max(np.abs(g))))
        if H.m and np.all(H.A @ (-g) <= tol * scale):
            eq.append(g)
        else:
            ineq.append(g)
    d = model.d
    return np.array(ineq).reshape(-1, d), np.array(eq).reshape(-1, d)


def find_consistent_price_system(model: MarketModel, strict: bool = False, *,
                                 threshold: float = STRICT_THRESHOLD) -> PriceSystem | None:
    """Search for a (strictly) consistent price system by LP.

    Strict mode maximizes the smallest slack ``delta`` over the positivity and
    non-implicit polar constraints and accepts when ``delta >= threshold``.
    """
    if not model.conical:
        raise NotConicalError("consistent price systems are defined for conical models")
    tree, d = model.tree, model.d
    bld = LPBuilder()
    y = [bld.add_vars(d, lb=0.0) for _ in range(tree.size)]
    delta = bld.add_vars(1, lb=-np.inf, ub=1.0) if strict else None
    for k in tree.non_leaves:
        ch = list(tree.children[k])
        idx = np.concatenate([y[k]] + [y[j] for j in ch])
        for i in range(d):
            coef = np.zeros(idx.size)
            coef[i] = 1.0
            for r, j in enumerate(ch):
                coef[d * (r + 1) + i] = -tree.cond_prob[j]
            bld.add_row(idx, coef, "=", 0.0)
    for k in range(tree.size):
        G, E = _polar_rows(model, k)
        for g in G:
            if strict:
                bld.add_row(np.concatenate([y[k], delta]), np.concatenate([g, [1.0]]), "<=", 0.0)
            else:
                bld.add_row(y[k], g, "<=", 0.0)
        for g in E:
            bld.add_row(y[k], g, "=", 0.0)
        if strict:
            for i in range(d):
                bld.add_row([y[k][i], delta[0]], [1.0, -1.0], ">=", 0.0)
    bld.add_row(y[0], np.ones(d), "=", 1.0)
    if strict:
        bld.set_objective(delta, 1.0)
    sol = solve_lp(bld.build())
    if sol.status == "infeasible":
        return None
    if not sol.optimal:
        _lp_failure(sol, "find_consistent_price_system")
    dval = float(sol.x[delta[0]]) if strict else 0.0
    if strict and dval < threshold:
        return None
    vals = np.clip(np.array([sol.x[yk] for yk in y]), 0.0, None)
    return PriceSystem(AdaptedVectorProcess(tree, vals), strict=strict, delta=dval)


def verify_price_system(model: MarketModel, ps: PriceSystem | AdaptedVectorProcess, strict: bool | None = None,
                        *, slack: float = 1e-9, tol: float = 1e-9, use_lp: bool = True) -> list[str]:
    """Re-check the defining properties of a price system; returns the violations found.

    Relative-interior membership is tested against the polar of the node's
    cone. Its implicit rows are found by LP (``use_lp``), independently of the
    search above, or else from the cone's halfspace form without any LP.
    """
    if isinstance(ps, PriceSystem):
        y, strict = ps.y, ps.strict if strict is None else strict
    else:
        y, strict = ps, bool(strict)
    tree = model.tree
    problems = []
    vals = y.values
    if np.any(vals < -tol):
        problems.append("negative component")
    if np.sum(vals[0]) <= tol:
        problems.append("zero at the root")
    defect = martingale_defect(tree, y)
    if defect > tol * max(1.0, float(np.max(np.abs(vals)))):
        problems.append(f"martingale defect {defect:.3g}")
    for k in range(tree.size):
        Q = polar_cone(model.cone_at(k))
        yk = vals[k]
        scale = max(1.0, float(np.max(np.abs(yk))))
        if Q.m and np.any(Q.A @ yk > tol * scale):
            problems.append(f"node {tree.ids[k]!r}: outside the polar cone")
            continue
        if strict:
            if np.any(yk < slack):
                problems.append(f"node {tree.ids[k]!r}: component below {slack:g}")
            implicit = None if use_lp else _implicit_polar_rows(model, k, Q)
            if Q.m and not relative_interior_membership(Q, yk, slack=slack, implicit=implicit):
                problems.append(f"node {tree.ids[k]!r}: not in the relative interior of the polar")
    return problems



def _implicit_polar_rows(model: MarketModel, k: int, Q: HPolyhedron, tol: float = 1e-9) -> np.ndarray:
    """Row ``g`` of the polar is implicit iff ``-g`` lies in the cone."""
    H = model.cone_hrep_at(k)
    if H.m == 0:
        return np.ones(Q.m, dtype=bool)
    scale = np.maximum(1.0, np.max(np.abs(Q.A), axis=1))
    return np.all((-Q.A) @ H.A.T <= tol * scale[:, None], axis=1)
