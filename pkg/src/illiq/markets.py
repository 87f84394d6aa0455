"""Market models: one solvency polyhedron per tree node.

``C_t`` at a node is the set of portfolios that are freely available there
(the negative of the solvency region). Three constructors cover the model
classes of interest:

* bid-ask matrices (proportional costs, conical),
* convex piecewise-linear cost functions in cash,
* currency markets where each pairwise exchange has its own convex cost,
  kept in lifted form with the transfer amounts as auxiliary variables.

Proportional cost coefficients lambda over mid prices s fit the bid-ask form via
``pi[i, j] = (1 + lambda[i, j]) * s[j] / s[i]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import DimensionError, InputError, ModelError
from .event_tree import EventTree, parse_number
from .geometry import (
    ZERO_TOL,
    HPolyhedron,
    VCone,
    generators_to_halfspaces,
    halfspaces_to_generators,
    project,
)
from .lp import LPBuilder, solve_lp

# slope of the final piece standing in for a hard cap on a transfer
STEEP_SLOPE = 1e6


def _per_node(tree: EventTree, data: Any, what: str) -> list:
    """Resolve node-wise data given as a mapping (``"*"`` = default), callable or constant."""
    if callable(data):
        return [data(nid) for nid in tree.ids]
    if isinstance(data, Mapping):
        default = data.get("*", None)
        out = []
        for nid in tree.ids:
            if nid in data:
                out.append(data[nid])
            elif str(nid) in data:
                out.append(data[str(nid)])
            elif default is not None:
                out.append(default)
            else:
                raise InputError(f"{what}: no data for node {nid!r}")
        return out
    return [data] * tree.size


@dataclass(frozen=True)
class BidAskSpec:
    """Bid-ask matrices; ``pi[i, j]`` units of asset i buy one unit of asset j."""

    matrices: Any  # mapping node -> matrix, callable, or one matrix for every node


@dataclass(frozen=True)
class CostProcessSpec:
    """Cash cost ``S(x) = max_k (a_k . x - b_k)`` given by its affine pieces."""

    pieces: Any  # per node: sequence of (a_k, b_k)


@dataclass(frozen=True)
class CurrencyIlliquiditySpec:
    """Per node: ``{(i, j): [(slope, intercept), ...]}`` with ``S_ij(v) = max(slope v + intercept)``.

    Missing pairs mean the exchange is unavailable.
    """

    costs: Any


@dataclass(frozen=True, eq=False)
class MarketModel:
    tree: EventTree
    sets: tuple            # HPolyhedron per node, aligned with tree order
    kind: str
    d: int
    generators: tuple = None   # optional VCone per node (conical nodes)
    spec: Any = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def conical(self) -> bool:
        return all(P.is_cone for P in self.sets)

    @property
    def lifted(self) -> bool:
        return any(P.lifted for P in self.sets)

    def set_at(self, node_id) -> HPolyhedron:
        return self.sets[self.tree.idx(node_id)]

    def cone_at(self, k: int) -> VCone:
        """Generator form of the (conical) set at internal node ``k``."""
        key = ("cone", k)
        if key not in self._cache:
            P = self.sets[k]
            if not P.is_cone:
                raise InputError(f"set at node {self.tree.ids[k]!r} is not a cone")
            if self.generators is not None and self.generators[k] is not None:
                self._cache[key] = self.generators[k]
            else:
                self._cache[key] = halfspaces_to_generators(project(P), max_dim=None)
        return self._cache[key]

    def cone_hrep_at(self, k: int) -> HPolyhedron:
        """Plain halfspace form of the conical set at ``k``."""
        key = ("hrep", k)
        if key not in self._cache:
            P = self.sets[k]
            if not P.lifted:
                self._cache[key] = P
            else:
                self._cache[key] = generators_to_halfspaces(self.cone_at(k), max_dim=None)
        return self._cache[key]

    def projected_set(self, k: int) -> HPolyhedron:
        """Halfspace form in portfolio space (double description for lifted sets)."""
        key = ("proj", k)
        if key not in self._cache:
            P = self.sets[k]
            if P.lifted and self.d > 3:
                raise DimensionError("explicit projection is limited to d <= 3")
            self._cache[key] = project(P)
        return self._cache[key]

    def __repr__(self) -> str:
        return f"MarketModel(kind={self.kind!r}, d={self.d}, nodes={self.tree.size}, conical={self.conical})"


def _contains_negative_orthant(P: HPolyhedron) -> bool:
    d = P.d
    if not P.lifted:
        return bool(np.all(P.b >= -ZERO_TOL) and np.all(P.A >= -ZERO_TOL))
    for rhs in [P.b] + [P.A[:, i] for i in range(d)]:
        # 0 in C, then -e_i in the recession cone: exists u with aux u <= rhs
        bld = LPBuilder()
        u = bld.add_vars(P.n_aux, lb=-np.inf)
        bld.add_rows(u, P.aux, "<=", rhs if rhs is P.b else rhs)
        if solve_lp(bld.build()).status != "optimal":
            return False
    return True


def _make(tree: EventTree, sets: Sequence[HPolyhedron], kind: str, d: int,
          generators=None, spec=None, orthant_by_construction: bool = False) -> MarketModel:
    for k, P in enumerate(sets):
        if P.d != d:
            raise DimensionError(f"node {tree.ids[k]!r}: set has dimension {P.d}, expected {d}")
        if not orthant_by_construction and not _contains_negative_orthant(P):
            raise ModelError(f"node {tree.ids[k]!r}: solvency set does not contain the negative orthant")
    return MarketModel(tree=tree, sets=tuple(sets), kind=kind, d=d,
                       generators=None if generators is None else tuple(generators), spec=spec)


def bid_ask_generators(pi) -> np.ndarray:
    """Generators of ``-K_hat``: ``-e_i`` and ``e_j - pi[i, j] e_i`` for ``i != j``."""
    pi = np.asarray(pi, dtype=float)
    d = pi.shape[0]
    gens = [-np.eye(d)[i] for i in range(d)]
    for i in range(d):
        for j in range(d):
            if i != j:
                g = np.zeros(d)
                g[j] = 1.0
                g[i] -= pi[i, j]
                gens.append(g)
    return np.array(gens)


def _check_pi(pi, nid) -> np.ndarray:
    try:
        arr = np.array([[parse_number(v) for v in row] for row in pi], dtype=float)
    except TypeError as exc:
        raise InputError(f"node {nid!r}: bid-ask matrix must be a square array") from exc
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"node {nid!r}: bid-ask matrix must be square")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"node {nid!r}: bid-ask entries must be finite")
    off = ~np.eye(arr.shape[0], dtype=bool)
    if np.any(arr[off] <= 0):
        raise ModelError(f"node {nid!r}: nonpositive bid-ask entry")
    np.fill_diagonal(arr, 1.0)
    return arr


def from_bid_ask(tree: EventTree, spec: BidAskSpec | Any) -> MarketModel:
    data = spec.matrices if isinstance(spec, BidAskSpec) else spec
    mats = [_check_pi(m, nid) for m, nid in zip(_per_node(tree, data, "bid-ask"), tree.ids)]
    d = mats[0].shape[0]
    sets, gens = [], []
    memo: dict = {}
    for pi in mats:
        if pi.shape[0] != d:
            raise DimensionError("bid-ask matrices must share one dimension")
        key = pi.tobytes()
        if key not in memo:
            G = bid_ask_generators(pi)
            memo[key] = (generators_to_halfspaces(VCone(G), max_dim=None), VCone(G))
        sets.append(memo[key][0])
        gens.append(memo[key][1])
    return _make(tree, sets, "bid_ask", d, generators=gens, spec=mats)


def _pieces(raw, nid):
    out = []
    for piece in raw:
        if isinstance(piece, Mapping):
            a, b = piece["a"], piece.get("b", 0)
        else:
            a, b = piece
        out.append(([parse_number(v) for v in np.atleast_1d(a)], parse_number(b)))
    if not out:
        raise ModelError(f"node {nid!r}: cost function needs at least one piece")
    return out


def from_cost_process(tree: EventTree, spec: CostProcessSpec | Any) -> MarketModel:
    data = spec.pieces if isinstance(spec, CostProcessSpec) else spec
    sets = []
    d = None
    per_node = []
    for raw, nid in zip(_per_node(tree, data, "cost process"), tree.ids):
        pcs = _pieces(raw, nid)
        A = np.array([a for a, _ in pcs], dtype=float)
        b = np.array([bb for _, bb in pcs], dtype=float)
        if d is None:
            d = A.shape[1]
        if A.shape[1] != d:
            raise DimensionError(f"node {nid!r}: pieces must have {d} coefficients")
        if abs(np.max(-b)) > 1e-12:
            raise ModelError(f"node {nid!r}: S(0) != 0 (max of -b_k is {np.max(-b):g})")
        sets.append(HPolyhedron(A, b))
        per_node.append(pcs)
    return _make(tree, sets, "cost_process", d, spec=per_node)


def _currency_node(costs: Mapping, d: int, nid):
    pairs = []
    for key, pcs in costs.items():
        if isinstance(key, str):
            i, j = (int(v) for v in key.replace("(", "").replace(")", "").split(","))
        else:
            i, j = key
        if not (0 <= i < d and 0 <= j < d):
            raise DimensionError(f"node {nid!r}: pair {(i, j)} out of range")
        if i == j:
            continue
        plist = []
        for piece in pcs:
            s, t = (piece["slope"], piece.get("intercept", 0)) if isinstance(piece, Mapping) else piece
            s, t = parse_number(s), parse_number(t)
            if s < 0:
                raise ModelError(f"node {nid!r}: decreasing piece slope {s} for pair {(i, j)}")
            plist.append((s, t))
        if not plist:
            continue
        if abs(max(t for _, t in plist)) > 1e-12:
            raise ModelError(f"node {nid!r}: S^{i}{j}(0) != 0")
        pairs.append(((i, j), plist))
    pairs.sort()
    npair = len(pairs)
    # variables: x (d) | a (npair) | u (npair)
    rows, rhs = [], []
    for i in range(d):
        r = np.zeros(d + 2 * npair)
        r[i] = 1.0
        for p, ((a_from, a_to), _) in enumerate(pairs):
            if a_to == i:       # a^{ji}: units of i received
                r[d + p] -= 1.0
            if a_from == i:     # u^{ij}: units of i paid
                r[d + npair + p] += 1.0
        rows.append(r)
        rhs.append(0.0)
    for p, (_, plist) in enumerate(pairs):
        for s, t in plist:
            r = np.zeros(d + 2 * npair)
            r[d + p] = s
            r[d + npair + p] = -1.0
            rows.append(r)
            rhs.append(-t)
        r = np.zeros(d + 2 * npair)
        r[d + p] = -1.0
        rows.append(r)
        rhs.append(0.0)
    M = np.array(rows)
    P = HPolyhedron(M[:, :d], np.array(rhs), M[:, d:])
    max_slope = {pair: max(s for s, _ in plist) for pair, plist in pairs}
    return P, max_slope


def currency_recession_generators(d: int, max_slope: Mapping) -> VCone:
    gens = [-np.eye(d)[i] for i in range(d)]
    for (i, j), s in sorted(max_slope.items()):
        g = np.zeros(d)
        g[j] = 1.0
        g[i] -= s
        gens.append(g)
    return VCone(np.array(gens))


def from_currency_costs(tree: EventTree, spec: CurrencyIlliquiditySpec | Any, d: int | None = None) -> MarketModel:
    data = spec.costs if isinstance(spec, CurrencyIlliquiditySpec) else spec
    raw = _per_node(tree, data, "currency costs")
    if d is None:
        d = tree.d
    if d is None:
        raise DimensionError("currency model needs the asset count d")
    sets, gens, slopes = [], [], []
    for costs, nid in zip(raw, tree.ids):
        P, max_slope = _currency_node(costs, d, nid)
        sets.append(P)
        slopes.append(max_slope)
        gens.append(currency_recession_generators(d, max_slope) if P.is_cone else None)
    # a = u = 0 shows 0 is in C; disposal only loosens the first d rows
    model = _make(tree, sets, "currency_costs", d, generators=gens, spec=raw, orthant_by_construction=True)
    model._cache["max_slopes"] = slopes
    return model


def from_polyhedra(tree: EventTree, sets: Any, d: int | None = None) -> MarketModel:
    """Explicit per-node polyhedra (``HPolyhedron`` or ``{"A": .., "b": ..}``)."""
    out = []
    for raw, nid in zip(_per_node(tree, sets, "polyhedra"), tree.ids):
        if isinstance(raw, HPolyhedron):
            out.append(raw)
        else:
            A = [[parse_number(v) for v in row] for row in raw["A"]]
            b = [parse_number(v) for v in raw.get("b", [0] * len(A))]
            aux = raw.get("aux")
            out.append(HPolyhedron(A, b, None if aux is None else [[parse_number(v) for v in row] for row in aux]))
    d = out[0].d if d is None else d
    return _make(tree, out, "explicit_polyhedra", d)


def recession_model(model: MarketModel) -> MarketModel:
    """Node-wise recession cones; the identity on conical models."""
    if model.conical:
        return model
    sets = tuple(HPolyhedron(P.A, np.zeros(P.m), P.aux) for P in model.sets)
    gens = None
    if model.kind == "currency_costs":
        slopes = model._cache["max_slopes"]
        gens = tuple(currency_recession_generators(model.d, s) for s in slopes)
    rec = MarketModel(tree=model.tree, sets=sets, kind=model.kind + ":recession", d=model.d,
                      generators=gens, spec=model.spec)
    if "max_slopes" in model._cache:
        rec._cache["max_slopes"] = model._cache["max_slopes"]
    return rec


def permute_assets(model: MarketModel, perm: Sequence[int]) -> MarketModel:
    """Relabel assets: new asset ``k`` is old asset ``perm[k]``."""
    perm = list(perm)
    sets = tuple(HPolyhedron(P.A[:, perm], P.b, P.aux) for P in model.sets)
    gens = None
    if model.generators is not None:
        gens = tuple(None if g is None else VCone(g.generators[:, perm], g.lineality[:, perm]) for g in model.generators)
    return MarketModel(tree=model.tree, sets=sets, kind=model.kind, d=model.d, generators=gens, spec=None)


def with_tree(model: MarketModel, tree: EventTree) -> MarketModel:
    """Same sets on a relabelled copy of the tree (internal order must agree)."""
    return MarketModel(tree=tree, sets=model.sets, kind=model.kind, d=model.d,
                       generators=model.generators, spec=model.spec)
