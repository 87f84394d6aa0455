"""Small reference models used by the tests, the acceptance suite and the CLI examples."""
from __future__ import annotations

import numpy as np

from .event_tree import EventTree, tree_from_branching, validate_tree
from .geometry import orthant_plus, polygon_ball
from .markets import MarketModel, from_bid_ask, from_cost_process, from_polyhedra


def binomial_tree(p_up: float = 0.5, T: int = 1, d: int = 2) -> EventTree:
    return tree_from_branching([p_up, 1.0 - p_up], T=T, d=d)


def chain_tree(T: int = 1, d: int = 2) -> EventTree:
    """Deterministic tree: one node per period."""
    return validate_tree([{"id": t, "parent": None if t == 0 else t - 1, "time": t, "p": 1}
                          for t in range(T + 1)], T=T, d=d)


def frictionless_binomial(s0: float = 1.0, up: float = 2.0, down: float = 0.5, p_up: float = 0.5) -> MarketModel:
    """Cash plus one stock; ``S(x) = x_cash + s x_stock`` at every node."""
    tree = binomial_tree(p_up)
    prices = {tree.ids[0]: s0, tree.ids[1]: up, tree.ids[2]: down}
    return from_cost_process(tree, {nid: [([1.0, s], 0.0)] for nid, s in prices.items()})


def dominant_asset() -> MarketModel:
    """The stock never loses against cash (1 -> 2 or 1.5): an arbitrage."""
    return frictionless_binomial(1.0, 2.0, 1.5)


def bid_ask_binomial(s0: float = 1.0, up: float = 2.0, down: float = 0.5, spread: float = 1.0,
                     p_up: float = 0.5) -> MarketModel:
    """Cash and a stock with ask ``spread * s`` and bid ``s / spread``."""
    tree = binomial_tree(p_up)
    mats = {}
    for nid, s in zip(tree.ids, (s0, up, down)):
        mats[nid] = [[1.0, spread * s], [1.0 / (spread * s) * 1.0, 1.0]]
        mats[nid][1][0] = spread / s
    return from_bid_ask(tree, mats)


def ratio_interval_model(tree: EventTree, intervals) -> MarketModel:
    """Two-asset bid-ask model whose polar ratio ``y_2 / y_1`` ranges over ``[lo, hi]`` at each node.

    ``pi[0, 1] = hi`` and ``pi[1, 0] = 1 / lo``.
    """
    mats = {}
    for nid in tree.ids:
        lo, hi = intervals[nid]
        mats[nid] = [[1.0, float(hi)], [1.0 / float(lo), 1.0]]
    return from_bid_ask(tree, mats)


def touching_interval_model() -> MarketModel:
    """Consistent but not strictly consistent: the ratio can only be 1 everywhere."""
    tree = binomial_tree(0.5)
    ids = tree.ids
    return ratio_interval_model(tree, {ids[0]: (1.0, 1.0), ids[1]: (1.0, 2.0), ids[2]: (1.0, 3.0)})


def orthant_ball_model(T: int = 1, n_sides: int = 8, radius: float = 1.0) -> MarketModel:
    """Deterministic model with ``C_t = R^2_- + B`` for a polygonal ball ``B``.

    It admits arbitrage (``(T+1) B`` reaches the positive quadrant) while its
    recession model is the negative orthant at every node.
    """
    tree = chain_tree(T)
    C = orthant_plus(polygon_ball(n_sides, radius))
    return from_polyhedra(tree, {"*": C})


def two_piece_cost_model(tree: EventTree, prices, markup: float = 0.5, kink: float = 1.0) -> MarketModel:
    """Cash plus stocks with cost ``y + max(s.x, (s+m).x - k)`` per node.

    ``prices`` maps node ids to stock price vectors. The second piece makes
    large purchases dearer; sales stay at the first piece's price.
    """
    spec = {}
    for nid in tree.ids:
        s = np.atleast_1d(np.asarray(prices[nid], dtype=float))
        spec[nid] = [(np.concatenate([[1.0], s]), 0.0),
                     (np.concatenate([[1.0], s * (1 + markup)]), kink)]
    return from_cost_process(tree, spec)
