"""LP-free re-verification of solver outputs.

Each check takes the model and the numbers a solver produced (holdings,
auxiliary values of lifted sets, multipliers) and returns a list of
violations; an empty list means the certificate holds.
"""
from __future__ import annotations

import numpy as np

from .event_tree import AdaptedVectorProcess, martingale_defect
from .geometry import HPolyhedron

TOL = 1e-7


def _in_set(P: HPolyhedron, x: np.ndarray, u, tol: float) -> bool:
    if P.m == 0:
        return True
    u = np.zeros(P.n_aux) if u is None else np.asarray(u, dtype=float)
    if u.shape != (P.n_aux,):
        return False
    lhs = P.A @ x + (P.aux @ u if P.n_aux else 0.0)
    scale = 1.0 + np.abs(P.b) + np.abs(P.A) @ np.abs(x)
    return bool(np.all(lhs - P.b <= tol * scale))


def check_hedge(model, c: AdaptedVectorProcess, p: AdaptedVectorProcess | None, x: AdaptedVectorProcess,
                aux: dict | None = None, tol: float = TOL) -> list[str]:
    """Holdings ``x`` end at zero and each trade plus net claim is freely available."""
    tree = model.tree
    aux = aux or {}
    net = c.values - (0.0 if p is None else p.values)
    problems = []
    for k in tree.leaves:
        if np.max(np.abs(x.values[k])) > tol:
            problems.append(f"node {tree.ids[k]!r}: holdings do not end at zero")
    inc = x.increments().values
    for k in range(tree.size):
        if not _in_set(model.sets[k], inc[k] + net[k], aux.get(k), tol):
            problems.append(f"node {tree.ids[k]!r}: trade is not freely available")
    return problems


def check_arbitrage_witness(model, x: AdaptedVectorProcess, aux: dict | None = None, tol: float = TOL) -> list[str]:
    """Holdings built from available trades ending nonnegative and nonzero."""
    tree = model.tree
    aux = aux or {}
    problems = []
    inc = x.increments().values
    for k in range(tree.size):
        if not _in_set(model.sets[k], inc[k], aux.get(k), tol):
            problems.append(f"node {tree.ids[k]!r}: trade is not freely available")
    final = x.values[tree.leaves]
    if np.any(final < -tol):
        problems.append("terminal holdings have a negative entry")
    if np.max(final) <= tol:
        problems.append("terminal holdings are zero")
    return problems


def dual_objective_value(model, c, p, y: AdaptedVectorProcess, lam: dict | None) -> float:
    tree = model.tree
    w = c.values - (0.0 if p is None else p.values)
    total = 0.0
    for k in range(tree.size):
        P = model.sets[k]
        sigma = 0.0
        if lam is not None and k in lam and not P.is_cone:
            sigma = float(P.b @ lam[k])
        total += tree.prob[k] * (float(w[k] @ y.values[k]) - sigma)
    return total


def check_dual(model, c, p, y: AdaptedVectorProcess, lam: dict | None, value: float | None = None,
               tol: float = TOL) -> list[str]:
    """``y`` is a nonnegative martingale, ``lam`` prices its support function, and the value matches."""
    tree = model.tree
    problems = []
    scale = max(1.0, float(np.max(np.abs(y.values))))
    if np.any(y.values < -tol * scale):
        problems.append("negative component")
    if martingale_defect(tree, y) > tol * scale:
        problems.append("not a martingale")
    for k in range(tree.size):
        P = model.sets[k]
        if lam is None and model.conical:
            K = model.cone_at(k)
            G = np.vstack([K.generators, K.lineality, -K.lineality])
            if G.size and np.any(G @ y.values[k] > tol * scale):
                problems.append(f"node {tree.ids[k]!r}: outside the polar cone")
            continue
        if lam is None or k not in lam:
            problems.append(f"node {tree.ids[k]!r}: missing multipliers")
            continue
        l = np.asarray(lam[k], dtype=float)
        if np.any(l < -tol):
            problems.append(f"node {tree.ids[k]!r}: negative multiplier")
        if P.m and np.max(np.abs(P.A.T @ l - y.values[k])) > tol * scale * (1 + np.max(np.abs(l), initial=0)):
            problems.append(f"node {tree.ids[k]!r}: multipliers do not reproduce y")
        if P.n_aux and np.max(np.abs(P.aux.T @ l)) > tol * scale * (1 + np.max(np.abs(l), initial=0)):
            problems.append(f"node {tree.ids[k]!r}: multipliers leave auxiliary terms")
    if value is not None and not problems:
        got = max(dual_objective_value(model, c, p, y, lam), 0.0)
        if abs(got - value) > tol * max(1.0, abs(value)) * 10:
            problems.append(f"objective {got:.12g} differs from reported {value:.12g}")
    return problems
