"""No-arbitrage tests on finite trees and the dominance relation between cone models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotConicalError, NumericalError
from .event_tree import AdaptedVectorProcess
from .formulation import add_membership
from .geometry import HPolyhedron, halfspaces_to_generators
from .lp import LPBuilder, report_tol, solve_lp
from .markets import MarketModel, recession_model
from .pricing import PriceSystem, aux_values, find_consistent_price_system


@dataclass
class NAResult:
    holds: bool
    witness: AdaptedVectorProcess | None = None   # holdings x_t, partial sums of the trades
    value: float = 0.0
    aux: dict | None = None


@dataclass
class RobustResult:
    holds: bool
    certificate: PriceSystem | None = None


def check_na(model: MarketModel) -> NAResult:
    """Is the zero portfolio the only nonnegative attainable terminal outcome?

    Maximizes the total terminal holdings over trades ``z_t`` in ``C_t`` with
    nonnegative outcomes, capped at 1; a positive optimum is an arbitrage.
    """
    tree, d = model.tree, model.d
    bld = LPBuilder()
    z = [bld.add_vars(d, lb=-np.inf) for _ in range(tree.size)]
    aux = {k: add_membership(bld, model.sets[k], [(z[k], 1.0)]) for k in range(tree.size)}
    total_idx, total_coef = [], []
    for leaf in tree.leaves:
        path = tree.path(leaf)
        for i in range(d):
            idx = [z[k][i] for k in path]
            bld.add_row(idx, 1.0, ">=", 0.0)
            total_idx.extend(idx)
            total_coef.extend([1.0] * len(idx))
    bld.add_row(total_idx, total_coef, "<=", 1.0)
    bld.set_objective(total_idx, total_coef)
    sol = solve_lp(bld.build())
    if not sol.optimal:
        raise NumericalError(f"arbitrage LP returned {sol.status} ({sol.message})")
    value = float(sol.objective)
    if value <= report_tol():
        return NAResult(True, None, value)
    trades = AdaptedVectorProcess(tree, np.array([sol.x[zk] for zk in z]))
    return NAResult(False, trades.path_sums(), value, aux_values(aux, sol))


def check_robust_na(model: MarketModel, *, threshold: float | None = None) -> RobustResult:
    """Robust no-arbitrage of a cone model, decided by a strictly consistent price system."""
    if not model.conical:
        raise NotConicalError("robust no-arbitrage is defined here for conical models; "
                              "use check_robust_no_scalable_arbitrage")
    kw = {} if threshold is None else {"threshold": threshold}
    ps = find_consistent_price_system(model, strict=True, **kw)
    return RobustResult(ps is not None, ps)


def check_robust_no_scalable_arbitrage(model: MarketModel) -> RobustResult:
    return check_robust_na(recession_model(model))


def _in_span(v: np.ndarray, L: np.ndarray, tol: float) -> bool:
    if L.size == 0:
        return float(np.max(np.abs(v))) <= tol
    coef, *_ = np.linalg.lstsq(L.T, v, rcond=None)
    return float(np.max(np.abs(L.T @ coef - v))) <= tol


def check_dominance(model: MarketModel, candidate: MarketModel, tol: float = 1e-9) -> bool:
    """Does ``candidate`` dominate ``model`` node-wise?

    At each node ``C`` must lie in ``C~`` and every point of ``C`` outside its
    lineality space must lie in the relative interior of ``C~``.
    """
    if not (model.conical and candidate.conical):
        raise NotConicalError("dominance is defined for conical models")
    if model.tree.size != candidate.tree.size or model.d != candidate.d:
        raise NotConicalError("models live on different trees or dimensions")
    for k in range(model.tree.size):
        K = model.cone_at(k)
        gens = np.vstack([K.generators, K.lineality, -K.lineality])
        rows = candidate.cone_hrep_at(k).A
        if rows.size == 0:
            continue   # C~ is the whole space
        if gens.size and np.any(gens @ rows.T > tol):
            return False
        own = model.cone_hrep_at(k).A
        for g in rows:
            if _implicit_on(candidate, k, g, tol):
                continue
            if K.generators.size == 0 or np.all(K.generators @ g < -tol):
                continue   # the face is the lineality space itself
            face = HPolyhedron.cone(np.vstack([own, -g[None, :]]))
            F = halfspaces_to_generators(face, max_dim=None)
            if any(not _in_span(v, K.lineality, 1e-7) for v in np.vstack([F.generators, F.lineality])):
                return False
    return True


def _implicit_on(model: MarketModel, k: int, g: np.ndarray, tol: float) -> bool:
    """Is ``g . x = 0`` on the whole cone at node ``k``?"""
    K = model.cone_at(k)
    pts = np.vstack([K.generators, K.lineality])
    return bool(pts.size == 0 or np.all(np.abs(pts @ g) <= tol * max(1.0, float(np.max(np.abs(g))))))
