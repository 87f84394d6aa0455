from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from illiq.errors import (CycleError, LeafHorizonError, NonPositiveProbabilityError, OrphanNodeError,
                          ProbabilitySumError, TreeError)
from illiq.event_tree import (AdaptedVectorProcess, conditional_expectation, is_martingale, martingale_defect,
                              parse_number, tree_from_branching, validate_tree)
from instances import random_tree


def two_children(p1, p2):
    return [{"id": 0, "parent": None, "time": 0, "p": 1},
            {"id": 1, "parent": 0, "time": 1, "p": p1},
            {"id": 2, "parent": 0, "time": 1, "p": p2}]


def test_single_root():
    tree = validate_tree([{"id": 0, "parent": None, "time": 0, "p": 1}])
    assert tree.T == 0 and tree.leaves == [0]
    assert tree.prob[0] == 1.0


def test_two_children_probabilities():
    tree = validate_tree(two_children(0.5, 0.5))
    assert np.allclose(tree.prob[tree.leaves], [0.5, 0.5])


def test_probability_sum_error_names_the_node():
    with pytest.raises(ProbabilitySumError, match="child-probability sum"):
        validate_tree(two_children(0.5, 0.4))


def test_rational_strings_are_exact_enough():
    tree = validate_tree(two_children("1/3", "2/3"))
    assert tree.cond_prob[1] == pytest.approx(1 / 3, abs=1e-15)


@pytest.mark.parametrize("raw, err", [
    ([{"id": 0, "parent": None, "time": 0, "p": 1}, {"id": 1, "parent": 7, "time": 1, "p": 1}], OrphanNodeError),
    ([{"id": 0, "parent": None, "time": 0, "p": 1}, {"id": 1, "parent": 2, "time": 1, "p": 1},
      {"id": 2, "parent": 1, "time": 1, "p": 1}], CycleError),
    ([{"id": 0, "parent": None, "time": 0, "p": 1}, {"id": 1, "parent": 0, "time": 1, "p": 1},
      {"id": 2, "parent": 1, "time": 2, "p": 0.5}, {"id": 3, "parent": 1, "time": 2, "p": 0.5},
      {"id": 4, "parent": 0, "time": 1, "p": 0}], NonPositiveProbabilityError),
])
def test_structural_errors_are_distinct(raw, err):
    with pytest.raises(err):
        validate_tree(raw)


def test_leaf_before_horizon():
    raw = [{"id": 0, "parent": None, "time": 0, "p": 1},
           {"id": 1, "parent": 0, "time": 1, "p": 0.5}, {"id": 2, "parent": 0, "time": 1, "p": 0.5},
           {"id": 3, "parent": 1, "time": 2, "p": 1}]
    with pytest.raises(LeafHorizonError):
        validate_tree(raw)


def test_all_tree_errors_share_a_base():
    for cls in (OrphanNodeError, CycleError, ProbabilitySumError, LeafHorizonError, NonPositiveProbabilityError):
        assert issubclass(cls, TreeError)


def test_parse_number_accepts_numpy_scalars():
    assert parse_number(np.int64(3)) == 3.0
    assert parse_number(Fraction(1, 4)) == 0.25
    assert parse_number(" 3/8 ") == 0.375


@pytest.mark.parametrize("children, probs, expected", [
    ([(2, 0), (0, 2)], ("1/2", "1/2"), (1, 1)),
    ([(5, 5), (5, 5)], ("1/3", "2/3"), (5, 5)),
    ([(1, 0), (3, 0)], ("1/4", "3/4"), (2.5, 0)),
])
def test_conditional_expectation_examples(children, probs, expected):
    tree = validate_tree(two_children(*probs))
    proc = AdaptedVectorProcess(tree, [[0, 0], *children])
    assert np.allclose(conditional_expectation(tree, proc, 0), expected)


def test_conditional_expectation_rejects_leaf():
    tree = validate_tree(two_children(0.5, 0.5))
    with pytest.raises(ValueError):
        conditional_expectation(tree, AdaptedVectorProcess.zeros(tree, 2), 1)


def test_martingale_examples():
    tree = validate_tree(two_children(0.5, 0.5))
    assert is_martingale(tree, AdaptedVectorProcess(tree, [[1, 1], [2, 0], [0, 2]]))
    assert is_martingale(tree, AdaptedVectorProcess(tree, [[3, 4]] * 3))
    bad = AdaptedVectorProcess(tree, [[1, 1], [2, 0], [0, 1]])
    assert not is_martingale(tree, bad)
    assert martingale_defect(tree, bad) == pytest.approx(0.5)


def test_increments_and_path_sums_invert_each_other():
    tree = tree_from_branching([0.3, 0.7], T=2)
    x = AdaptedVectorProcess(tree, np.arange(tree.size * 2, dtype=float).reshape(-1, 2))
    assert np.allclose(x.increments().path_sums().values, x.values)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_leaf_probabilities_sum_to_one(seed):
    tree = random_tree(np.random.default_rng(seed))
    assert abs(tree.prob[tree.leaves].sum() - 1.0) <= 1e-12
    for t in range(tree.T + 1):
        assert abs(tree.prob[tree.nodes_at(t)].sum() - 1.0) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tower_property(seed):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, T=2)
    vals = rng.normal(size=(tree.size, 2))
    proc = AdaptedVectorProcess(tree, vals)
    one_level = {k: tree.cond_prob[list(tree.children[k])] @ vals[list(tree.children[k])] for k in tree.non_leaves}
    twice = sum(tree.cond_prob[j] * one_level[j] for j in tree.children[0])
    grandchildren = [g for j in tree.children[0] for g in tree.children[j]]
    direct = sum(tree.prob[g] * vals[g] for g in grandchildren)
    assert np.allclose(twice, direct)
    assert np.allclose(conditional_expectation(tree, proc, tree.ids[0]), one_level[0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_martingale_test_ignores_node_names(seed):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng)
    # build a martingale backwards from random leaf values
    vals = np.zeros((tree.size, 2))
    vals[tree.leaves] = rng.uniform(0, 2, (len(tree.leaves), 2))
    for k in reversed(tree.non_leaves):
        ch = list(tree.children[k])
        vals[k] = tree.cond_prob[ch] @ vals[ch]
    renamed = tree.relabel({nid: f"n{nid}" for nid in tree.ids})
    assert is_martingale(tree, AdaptedVectorProcess(tree, vals))
    assert is_martingale(renamed, AdaptedVectorProcess(renamed, vals))
    vals[tree.leaves[0]] += 0.1
    assert not is_martingale(renamed, AdaptedVectorProcess(renamed, vals))


def test_process_shape_and_lookup():
    tree = validate_tree(two_children(0.5, 0.5))
    proc = AdaptedVectorProcess.from_mapping(tree, {1: [1, 2]}, 2, default=[0, 0])
    assert proc[1].tolist() == [1.0, 2.0]
    with pytest.raises(ValueError):
        AdaptedVectorProcess(tree, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        AdaptedVectorProcess.from_mapping(tree, {1: [1, 2, 3]}, 2, default=[0, 0])
