"""Finite event trees and node-indexed vector processes.

A tree encodes the whole filtered probability space: nodes at depth ``t``
are the atoms of the time-``t`` sigma-algebra, and each node carries the
conditional probability of moving there from its parent.
"""
from __future__ import annotations

import math
import numbers
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CycleError,
    DimensionError,
    InputError,
    LeafHorizonError,
    NonPositiveProbabilityError,
    OrphanNodeError,
    ProbabilitySumError,
    TreeError,
)

PROB_TOL = 1e-12
MARTINGALE_TOL = 1e-9


def parse_number(value: Any) -> float:
    """Accept ints, floats, Fractions and ``"p/q"`` strings."""
    if isinstance(value, bool):
        raise InputError(f"expected a number, got {value!r}")
    if isinstance(value, (numbers.Real, np.number)) and not isinstance(value, np.bool_):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"cannot parse number {value!r}") from exc
    raise InputError(f"expected a number, got {value!r}")


def parse_fraction(value: Any) -> Fraction:
    """Exact version of :func:`parse_number` (floats convert exactly)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (numbers.Real, np.number)) and not isinstance(value, (bool, np.bool_)):
        return Fraction(value) if isinstance(value, (int, float)) else Fraction(float(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"cannot parse number {value!r}") from exc
    raise InputError(f"expected a number, got {value!r}")


@dataclass(frozen=True, eq=False)
class EventTree:
    """Validated, immutable event tree.

    Nodes are stored in breadth-first order; ``ids[k]`` is the user id of the
    node at internal position ``k``. Build instances with :func:`validate_tree`.
    """

    ids: tuple
    parent: np.ndarray        # internal index of the parent, -1 at the root
    time: np.ndarray
    cond_prob: np.ndarray
    prob: np.ndarray          # absolute node probabilities
    children: tuple           # tuple of tuples of internal indices
    T: int
    d: int | None = None
    index: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def root(self) -> int:
        return 0

    def is_leaf(self, k: int) -> bool:
        return not self.children[k]

    @property
    def leaves(self) -> list[int]:
        return [k for k in range(self.size) if not self.children[k]]

    @property
    def non_leaves(self) -> list[int]:
        return [k for k in range(self.size) if self.children[k]]

    def nodes_at(self, t: int) -> list[int]:
        return [k for k in range(self.size) if self.time[k] == t]

    def idx(self, node_id) -> int:
        try:
            return self.index[node_id]
        except KeyError:
            raise InputError(f"unknown node id {node_id!r}") from None

    def path(self, k: int) -> list[int]:
        """Internal indices from the root down to ``k`` (inclusive)."""
        out = []
        while k >= 0:
            out.append(k)
            k = int(self.parent[k])
        return out[::-1]

    def ancestors_matrix(self) -> np.ndarray:
        """0/1 matrix ``M[l, k] = 1`` iff node ``k`` lies on the path to leaf ``l``."""
        leaves = self.leaves
        M = np.zeros((len(leaves), self.size))
        for r, leaf in enumerate(leaves):
            M[r, self.path(leaf)] = 1.0
        return M

    def relabel(self, mapping: Mapping) -> "EventTree":
        """Same tree with node ids renamed through ``mapping``."""
        raw = [
            {
                "id": mapping[self.ids[k]],
                "parent": None if self.parent[k] < 0 else mapping[self.ids[self.parent[k]]],
                "time": int(self.time[k]),
                "p": float(self.cond_prob[k]),
            }
            for k in range(self.size)
        ]
        return validate_tree(raw, d=self.d)

    def to_raw(self) -> list[dict]:
        return [
            {
                "id": self.ids[k],
                "parent": None if self.parent[k] < 0 else self.ids[self.parent[k]],
                "time": int(self.time[k]),
                "p": float(self.cond_prob[k]),
            }
            for k in range(self.size)
        ]


def _field(node: Any, *names: str, default: Any = ...):
    if isinstance(node, Mapping):
        for name in names:
            if name in node:
                return node[name]
        if default is not ...:
            return default
        raise InputError(f"node {node!r} is missing field {names[0]!r}")
    raise InputError(f"node entries must be objects, got {node!r}")


def validate_tree(raw_nodes: Iterable, T: int | None = None, d: int | None = None) -> EventTree:
    """Validate a raw node list and build an :class:`EventTree`.

    Each entry is a mapping with ``id``, ``parent`` (``None`` for the root),
    ``time`` and the conditional probability under ``p`` or ``cond_prob``.
    The time field may be omitted; it is then inferred from the depth.
    """
    nodes = list(raw_nodes)
    if not nodes:
        raise TreeError("empty tree")
    by_id: dict = {}
    order: list = []
    for node in nodes:
        nid = _field(node, "id")
        if nid in by_id:
            raise TreeError(f"duplicate node id {nid!r}")
        by_id[nid] = node
        order.append(nid)

    roots = [nid for nid in order if _field(by_id[nid], "parent", default=None) is None]
    if not roots:
        raise CycleError("no root node (every node has a parent): cycle")
    if len(roots) > 1:
        raise TreeError(f"multiple roots: {roots!r}")
    root = roots[0]

    kids: dict = {nid: [] for nid in order}
    for nid in order:
        par = _field(by_id[nid], "parent", default=None)
        if par is None:
            continue
        if par not in by_id:
            raise OrphanNodeError(f"orphan node {nid!r}: parent {par!r} does not exist")
        kids[par].append(nid)

    bfs: list = []
    seen = {root}
    queue = deque([root])
    while queue:
        nid = queue.popleft()
        bfs.append(nid)
        for ch in kids[nid]:
            if ch in seen:  # pragma: no cover - impossible with single parents
                raise CycleError(f"cycle through node {ch!r}")
            seen.add(ch)
            queue.append(ch)
    if len(bfs) != len(order):
        missing = [nid for nid in order if nid not in seen]
        raise CycleError(f"cycle: nodes {missing!r} are unreachable from the root")

    index = {nid: k for k, nid in enumerate(bfs)}
    n = len(bfs)
    parent = np.full(n, -1, dtype=int)
    time = np.zeros(n, dtype=int)
    cond = np.ones(n)
    for k, nid in enumerate(bfs):
        node = by_id[nid]
        par = _field(node, "parent", default=None)
        parent[k] = -1 if par is None else index[par]
        depth = 0 if par is None else time[parent[k]] + 1
        t = _field(node, "time", "t", default=None)
        if t is not None and int(t) != depth:
            raise TreeError(f"node {nid!r}: time {t} does not match depth {depth}")
        time[k] = depth
        p_raw = _field(node, "p", "cond_prob", "prob", default=1 if par is None else ...)
        p = parse_number(p_raw)
        if not math.isfinite(p) or p <= 0:
            raise NonPositiveProbabilityError(f"node {nid!r}: nonpositive probability {p_raw!r}")
        if p > 1 + PROB_TOL:
            raise ProbabilitySumError(f"node {nid!r}: conditional probability {p_raw!r} exceeds 1")
        cond[k] = p

    if abs(cond[0] - 1.0) > PROB_TOL:
        raise ProbabilitySumError(f"root {root!r} must have probability 1, got {cond[0]}")

    horizon = int(time.max())
    if T is None:
        T = horizon
    children = tuple(tuple(index[c] for c in kids[nid]) for nid in bfs)
    for k, ch in enumerate(children):
        if ch:
            s = math.fsum(cond[c] for c in ch)
            if abs(s - 1.0) > PROB_TOL:
                raise ProbabilitySumError(
                    f"child-probability sum at node {bfs[k]!r} is {s!r}, expected 1"
                )
        elif time[k] != T:
            raise LeafHorizonError(f"leaf {bfs[k]!r} at time {time[k]} is not at horizon T={T}")
    if horizon > T:
        raise LeafHorizonError(f"node depth {horizon} exceeds horizon T={T}")

    prob = np.ones(n)
    for k in range(1, n):
        prob[k] = prob[parent[k]] * cond[k]
    if np.any(prob <= 0):
        raise NonPositiveProbabilityError("node probability underflows to zero")

    for arr in (parent, time, cond, prob):
        arr.setflags(write=False)
    return EventTree(
        ids=tuple(bfs), parent=parent, time=time, cond_prob=cond, prob=prob,
        children=children, T=int(T), d=d, index=index,
    )


def tree_from_branching(branching: Sequence[Sequence[float]] | Sequence[float], T: int,
                        d: int | None = None) -> EventTree:
    """Regular tree where every node splits with the same conditional probabilities.

    ``branching`` is either one probability vector used at every level or a
    list of ``T`` vectors, one per level.
    """
    if T == 0:
        return validate_tree([{"id": 0, "parent": None, "time": 0, "p": 1}], d=d)
    levels = list(branching)
    if levels and np.isscalar(levels[0]):
        levels = [levels] * T
    raw = [{"id": 0, "parent": None, "time": 0, "p": 1}]
    frontier = [0]
    nxt = 1
    for t in range(T):
        new = []
        for par in frontier:
            for p in levels[t]:
                raw.append({"id": nxt, "parent": par, "time": t + 1, "p": p})
                new.append(nxt)
                nxt += 1
        frontier = new
    return validate_tree(raw, d=d)


class AdaptedVectorProcess:
    """Node-indexed ``d``-vectors on an :class:`EventTree`.

    Values live in an ``(n_nodes, d)`` array aligned with the tree's internal
    order; lookups by user id go through ``proc[node_id]``.
    """

    __slots__ = ("tree", "values")

    def __init__(self, tree: EventTree, values):
        arr = np.array(values, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != tree.size:
            raise DimensionError(
                f"process needs shape ({tree.size}, d), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InputError("process values must be finite")
        arr.setflags(write=False)
        self.tree = tree
        self.values = arr

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @classmethod
    def zeros(cls, tree: EventTree, d: int) -> "AdaptedVectorProcess":
        return cls(tree, np.zeros((tree.size, d)))

    @classmethod
    def from_mapping(cls, tree: EventTree, mapping: Mapping, d: int,
                     default: Sequence[float] | None = None) -> "AdaptedVectorProcess":
        """Build from ``{node_id: vector}``; missing nodes take ``default``."""
        vals = np.zeros((tree.size, d))
        filled = np.zeros(tree.size, dtype=bool)
        for nid, vec in mapping.items():
            k = tree.idx(nid)
            v = np.array([parse_number(x) for x in np.atleast_1d(vec)], dtype=float)
            if v.shape != (d,):
                raise DimensionError(f"node {nid!r}: expected {d} entries, got {v.size}")
            vals[k] = v
            filled[k] = True
        if not filled.all():
            if default is None:
                missing = [tree.ids[k] for k in np.flatnonzero(~filled)]
                raise InputError(f"process has no value at nodes {missing!r}")
            vals[~filled] = np.asarray(default, dtype=float)
        return cls(tree, vals)

    @classmethod
    def at_leaves(cls, tree: EventTree, leaf_values: Mapping | np.ndarray, d: int):
        """Process supported on the leaves (zero elsewhere)."""
        vals = np.zeros((tree.size, d))
        leaves = tree.leaves
        if isinstance(leaf_values, Mapping):
            for nid, vec in leaf_values.items():
                k = tree.idx(nid)
                if not tree.is_leaf(k):
                    raise InputError(f"node {nid!r} is not a leaf")
                vals[k] = vec
        else:
            arr = np.asarray(leaf_values, dtype=float).reshape(len(leaves), d)
            vals[leaves] = arr
        return cls(tree, vals)

    def __getitem__(self, node_id) -> np.ndarray:
        return self.values[self.tree.idx(node_id)]

    def at(self, k: int) -> np.ndarray:
        return self.values[k]

    def to_mapping(self) -> dict:
        return {self.tree.ids[k]: self.values[k].tolist() for k in range(self.tree.size)}

    def leaf_values(self) -> np.ndarray:
        return self.values[self.tree.leaves]

    def increments(self) -> "AdaptedVectorProcess":
        """``x(node) - x(parent)`` with the parent of the root taken as 0."""
        par = self.tree.parent
        prev = np.where(par[:, None] >= 0, self.values[np.maximum(par, 0)], 0.0)
        return AdaptedVectorProcess(self.tree, self.values - prev)

    def path_sums(self) -> "AdaptedVectorProcess":
        """Running sum of the values along each root-to-node path."""
        out = np.array(self.values)
        for k in range(1, self.tree.size):  # BFS order: parents come first
            out[k] += out[self.tree.parent[k]]
        return AdaptedVectorProcess(self.tree, out)

    def _check(self, other: "AdaptedVectorProcess"):
        if other.tree is not self.tree and other.tree.ids != self.tree.ids:
            raise InputError("processes live on different trees")
        if other.d != self.d:
            raise DimensionError("process dimensions differ")

    def __add__(self, other: "AdaptedVectorProcess") -> "AdaptedVectorProcess":
        self._check(other)
        return AdaptedVectorProcess(self.tree, self.values + other.values)

    def __sub__(self, other: "AdaptedVectorProcess") -> "AdaptedVectorProcess":
        self._check(other)
        return AdaptedVectorProcess(self.tree, self.values - other.values)

    def __mul__(self, scalar: float) -> "AdaptedVectorProcess":
        return AdaptedVectorProcess(self.tree, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "AdaptedVectorProcess":
        return AdaptedVectorProcess(self.tree, -self.values)

    def __repr__(self) -> str:
        return f"AdaptedVectorProcess(n={self.tree.size}, d={self.d})"


def conditional_expectation(tree: EventTree, proc: AdaptedVectorProcess, node_id) -> np.ndarray:
    """Expectation of ``proc`` over the children of ``node_id``."""
    k = tree.idx(node_id)
    return _cond_exp(tree, proc.values, k)


def _cond_exp(tree: EventTree, values: np.ndarray, k: int) -> np.ndarray:
    ch = tree.children[k]
    if not ch:
        raise InputError(f"node {tree.ids[k]!r} is a leaf; no conditional expectation")
    ch = list(ch)
    return tree.cond_prob[ch] @ values[ch]


def martingale_defect(tree: EventTree, y: AdaptedVectorProcess) -> float:
    """Largest sup-norm gap between a node value and its conditional expectation."""
    worst = 0.0
    for k in tree.non_leaves:
        gap = np.max(np.abs(_cond_exp(tree, y.values, k) - y.values[k]))
        worst = max(worst, float(gap))
    return worst


def is_martingale(tree: EventTree, y: AdaptedVectorProcess, tol: float = MARTINGALE_TOL) -> bool:
    return martingale_defect(tree, y) <= tol


def expectation(tree: EventTree, values_at_nodes: np.ndarray, t: int) -> np.ndarray:
    """Unconditional expectation of the time-``t`` slice."""
    nodes = tree.nodes_at(t)
    return tree.prob[nodes] @ np.asarray(values_at_nodes)[nodes]
