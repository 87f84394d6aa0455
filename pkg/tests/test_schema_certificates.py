import copy
import json

import numpy as np
import pytest

from illiq.arbitrage import check_na
from illiq.catalog import dominant_asset, frictionless_binomial
from illiq.certificates import check_arbitrage_witness, check_dual, check_hedge
from illiq.errors import InputError
from illiq.event_tree import AdaptedVectorProcess
from illiq.pricing import dual_bound, superhedge_premium
from illiq.schema import build_model, build_process, canonical_digest, load_json, process_to_json

CALL = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]])


@pytest.fixture
def binomial_doc(fixtures_dir):
    return json.loads((fixtures_dir / "binomial.json").read_text())


def test_fraction_strings_are_accepted(binomial_doc):
    m = build_model(binomial_doc)
    assert m.tree.size == 3
    assert m.sets[2].contains([0.0, 1.0]) is False
    assert m.sets[2].contains([-0.5, 1.0])


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d["model"].update(kind="options"), "model/kind"),
    (lambda d: d["tree"]["nodes"][1].update(p="half"), "tree/nodes/1/p"),
    (lambda d: d.pop("tree"), "<top level>"),
])
def test_schema_errors_name_the_field(binomial_doc, mutate, field):
    mutate(binomial_doc)
    with pytest.raises(InputError, match=f"field {field}"):
        build_model(binomial_doc)


def test_currency_costs_need_the_dimension(fixtures_dir):
    doc = load_json(fixtures_dir / "currency.json")
    del doc["d"]
    with pytest.raises(InputError, match="field d"):
        build_model(doc)


def test_process_round_trip_and_unknown_node(binomial_doc):
    m = build_model(binomial_doc)
    p = build_process({"up": [1, "1/2"]}, m, "claim")
    assert np.allclose(p.values, [[0, 0], [1, 0.5], [0, 0]])
    again = build_process(process_to_json(p), m, "claim")
    assert np.array_equal(again.values, p.values)
    with pytest.raises(InputError, match="unknown node id"):
        build_process({"sideways": [1, 0]}, m, "claim")


def test_digest_ignores_key_order():
    assert canonical_digest({"a": 1, "b": [1, 2]}) == canonical_digest({"b": [1, 2], "a": 1})
    assert canonical_digest({"a": 1}) != canonical_digest({"a": 2})


def test_hedge_certificate_and_tampering():
    m = frictionless_binomial()
    c = AdaptedVectorProcess(m.tree, CALL)
    r = superhedge_premium(m, c)
    assert check_hedge(m, c, r.premium, r.hedge, r.aux) == []
    cheap = copy.deepcopy(r.premium)
    cheap.values[0, 0] -= 0.01
    assert check_hedge(m, c, cheap, r.hedge, r.aux)
    leftover = copy.deepcopy(r.hedge)
    leftover.values[1] += 0.1
    assert any("end at zero" in s for s in check_hedge(m, c, r.premium, leftover, r.aux))


def test_arbitrage_witness_tampering():
    m = dominant_asset()
    res = check_na(m)
    assert check_arbitrage_witness(m, res.witness) == []
    zero = AdaptedVectorProcess(m.tree, np.zeros((3, 2)))
    assert "terminal holdings are zero" in check_arbitrage_witness(m, zero)
    greedy = copy.deepcopy(res.witness)
    greedy.values[0] += [1.0, 1.0]      # free units at the root are not available
    assert check_arbitrage_witness(m, greedy)


def test_dual_certificate_and_tampering():
    m = frictionless_binomial()
    c = AdaptedVectorProcess(m.tree, CALL)
    r = dual_bound(m, c)
    assert check_dual(m, c, None, r.y, r.lam, r.sup_value) == []
    bent = copy.deepcopy(r.y)
    bent.values[1] *= 2.0
    assert "not a martingale" in check_dual(m, c, None, bent, r.lam)
