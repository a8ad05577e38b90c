import json

import numpy as np
import pytest

from riskmdp import mdpmodel, riskcore
from riskmdp.errors import ParseError, ValidationError
from riskmdp.mdpmodel import Model, StateLayer, Transition, make_pmf

MEAN = riskcore.spectral_spec([(1.0, 1.0)])


def minimal_doc():
    return {
        "format_version": 1,
        "mode": {"kind": "finite", "horizon": 1},
        "gamma": 1.0,
        "cost_bound": 1.0,
        "states": ["only"],
        "initial": [[0, 1.0]],
        "risk0": riskcore.spec_to_json(MEAN),
        "layers": [{
            "t": 1,
            "states": [{
                "actions": ["go"],
                "risk": riskcore.spec_to_json(MEAN),
                "transitions": [{"kernel": [[0, 1.0]], "costs": [0.5]}],
            }],
        }],
    }


def test_minimal_document_loads():
    m = mdpmodel.load_model(json.dumps(minimal_doc()))
    assert m.n_states == 1 and m.horizon == 1
    assert m.actions(1, 0) == ("go",)
    assert m.cost(1, 0, 0, 0) == 0.5


def test_row_sum_off_names_the_path():
    doc = minimal_doc()
    doc["layers"][0]["states"][0]["transitions"][0]["kernel"] = [[0, 0.98]]
    with pytest.raises(ValidationError) as err:
        mdpmodel.load_model(json.dumps(doc))
    diag = err.value.diagnostics[0]
    assert diag["path"] == "layers[0].states[0].transitions[0].kernel"
    assert "t=1" in diag["message"] and "'only'" in diag["message"] and "'go'" in diag["message"]


def test_bad_successor_index():
    doc = minimal_doc()
    doc["layers"][0]["states"][0]["transitions"][0]["kernel"] = [[3, 1.0]]
    assert mdpmodel.validate_document(json.dumps(doc))[0]["message"].endswith("successor index out of range")


def test_cost_bound_enforced():
    doc = minimal_doc()
    doc["layers"][0]["states"][0]["transitions"][0]["costs"] = [1.5]
    diags = mdpmodel.validate_document(json.dumps(doc))
    assert diags and diags[0]["path"].endswith("costs")


def test_stationary_needs_normalized_risk_and_discount():
    doc = minimal_doc()
    doc["mode"] = {"kind": "stationary"}
    doc["gamma"] = 0.5
    doc["layers"][0]["t"] = "all"
    doc["layers"][0]["states"][0]["risk"] = riskcore.spec_to_json(
        riskcore.kusuoka_spec([([(1.0, 1.0)], 0.1)]))
    diags = mdpmodel.validate_document(json.dumps(doc))
    assert any(d["path"].endswith("risk") for d in diags)
    doc["layers"][0]["states"][0]["risk"] = riskcore.spec_to_json(MEAN)
    doc["gamma"] = 1.0
    assert any(d["path"] == "gamma" for d in mdpmodel.validate_document(json.dumps(doc)))


def test_unknown_fields_rejected():
    doc = minimal_doc()
    doc["comment"] = "hi"
    with pytest.raises(ValidationError):
        mdpmodel.load_model(json.dumps(doc))


def test_not_json():
    with pytest.raises(ParseError):
        mdpmodel.load_model("{nope")


@pytest.mark.parametrize("horizon", [3, None])
def test_save_load_is_identity(horizon):
    m = mdpmodel.random_model(4, 3, 2, horizon, risk_kind="mixed")
    text = mdpmodel.save_model(m)
    assert mdpmodel.save_model(mdpmodel.load_model(text)) == text


def test_random_model_is_deterministic():
    a = mdpmodel.save_model(mdpmodel.random_model(0, 3, 2, 3))
    b = mdpmodel.save_model(mdpmodel.random_model(0, 3, 2, 3))
    c = mdpmodel.save_model(mdpmodel.random_model(1, 3, 2, 3))
    assert a == b and a != c


def test_random_model_invariants():
    m = mdpmodel.random_model(7, 4, 3, 2, varying_actions=True)
    for t in m.times():
        for x in range(m.n_states):
            for a in range(len(m.actions(t, x))):
                tr = m.transition(t, x, a)
                assert abs(tr.probs.sum() - 1) <= 1e-12
                assert np.all(np.abs(tr.costs) <= m.cost_bound)


def test_two_control_model_shape():
    m = mdpmodel.appendix_a_model()
    assert m.actions(1, 0) == ("0", "1")
    assert m.kernel(1, 0, 0).allclose(make_pmf([(1, 0.9), (2, 0.1)]))


def test_unrolling_a_stationary_model():
    m = mdpmodel.random_model(2, 2, 2, None, gamma=0.5)
    f = m.as_finite(3)
    assert f.horizon == 3 and f.layer(2) is m.layers[0]


def test_direct_construction_validates():
    bad = StateLayer(("a",), MEAN, (Transition.build([0], [0.5], [0.0]),))
    with pytest.raises(ValidationError):
        Model(("s",), 1.0, 1, make_pmf([(0, 1.0)]), MEAN, 1.0, ((bad,),))
