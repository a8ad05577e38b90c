import math

import numpy as np
import pytest

from riskmdp import bellman, distkit, mdpmodel, oracle, riskcore
from riskmdp.bellman import RandomizedPolicy
from riskmdp.distkit import make_pmf
from riskmdp.errors import BadWeights, InadmissibleAction, NoActions, PolicyIncomplete
from riskmdp.mdpmodel import Model, StateLayer, Transition

MEAN = riskcore.spectral_spec([(1.0, 1.0)])


def two_branch_model(gamma=0.5):
    go = StateLayer(("go",), MEAN, (Transition.build([1, 2], [0.3, 0.7], [1.0, 2.0]),))
    stay = StateLayer(("stay",), MEAN, (Transition.point(1),))
    stay2 = StateLayer(("stay",), MEAN, (Transition.point(2),))
    return Model(("x", "y1", "y2"), gamma, 1, make_pmf([(0, 1.0)]), MEAN, 2.0, ((go, stay, stay2),))


def test_outcome_law_two_branches():
    m = two_branch_model()
    mu = bellman.outcome_pmf(m, np.array([0.0, 4.0, 0.0]), 1, 0, 0)
    assert mu.allclose(make_pmf([(2.0, 0.7), (3.0, 0.3)]))


def test_outcome_with_zero_discount_is_cost_law():
    m = two_branch_model(gamma=0.0)
    mu = bellman.outcome_pmf(m, np.array([9.0, 9.0, 9.0]), 1, 0, 0)
    assert mu.allclose(make_pmf([(1.0, 0.3), (2.0, 0.7)]))


def test_inadmissible_action():
    with pytest.raises(InadmissibleAction):
        bellman.outcome_pmf(two_branch_model(), np.zeros(3), 1, 0, 4)


def test_half_half_mixture_on_two_controls():
    m = mdpmodel.appendix_a_model()
    mu = bellman.tilde_p(m, np.zeros(3), 1, 0, [0.5, 0.5])
    assert mu.allclose(oracle.appendix_a_laws()[2])
    with pytest.raises(BadWeights):
        bellman.tilde_p(m, np.zeros(3), 1, 0, [0.5, 0.6])


def test_vertex_values_of_two_controls():
    m = mdpmodel.appendix_a_model()
    for lam in ([1.0, 0.0], [0.0, 1.0]):
        assert math.isclose(bellman.g_op(m, np.zeros(3), 1, 0, lam), 1.4, abs_tol=1e-12)


def test_h0_examples():
    m = two_branch_model(gamma=1.0)
    assert bellman.h0(m, np.zeros(3)) == 0.0
    assert bellman.h0(m, np.array([3.0, 0.0, 0.0])) == 3.0
    sup = riskcore.spectral_spec([(0.0, 1.0)])
    m2 = Model(m.states, 1.0, 1, make_pmf([(1, 0.5), (2, 0.5)]), sup, 2.0, m.layers)
    assert bellman.h0(m2, np.array([0.0, 0.0, 2.0])) == 2.0


def test_simplex_min_single_action():
    mu = make_pmf([(0, 0.5), (3, 0.5)])
    lam, val = bellman.simplex_min([mu], riskcore.Entropic(1.0))
    assert lam.tolist() == [1.0] and val == riskcore.entropic(1.0, mu)
    with pytest.raises(NoActions):
        bellman.simplex_min([], MEAN)


def test_simplex_min_finds_interior_mixture():
    c0, c1, _ = oracle.appendix_a_laws()
    lam, val = bellman.simplex_min([c0, c1], oracle.appendix_a_spec())
    assert val <= 7 / 6 + 1e-6
    assert 0 < lam[0] < 1
    # the reported value is the risk of the reported mixture
    assert val == riskcore.evaluate(oracle.appendix_a_spec(), distkit.mix(lam, [c0, c1]))


def test_spectral_returns_vertex():
    rng = np.random.default_rng(0)
    pmfs = [make_pmf(zip(rng.normal(size=3), rng.dirichlet(np.ones(3)))) for _ in range(3)]
    spec = riskcore.spectral_spec([(0.3, 0.5), (1.0, 0.5)])
    lam, val = bellman.simplex_min(pmfs, spec)
    assert sorted(lam.tolist()) == [0.0, 0.0, 1.0]
    assert val == min(riskcore.evaluate(spec, p) for p in pmfs)


def test_vertex_ties_pick_lowest_index():
    mu = make_pmf([(1, 1.0)])
    lam, _ = bellman.simplex_min([mu, mu, mu], MEAN)
    assert lam.tolist() == [1.0, 0.0, 0.0]


def test_lattice_order_and_size():
    pts = bellman.lattice(3, 2)
    assert len(pts) == bellman.lattice_size(3, 2) == 6
    assert [tuple(p) for p in pts] == sorted(tuple(p) for p in pts)
    assert np.allclose(pts.sum(axis=1), 1.0)


def test_default_resolution():
    assert bellman.default_resolution(3) == 32
    assert bellman.default_resolution(6) == 8


def test_grid_search_agrees_with_dense_lattice():
    rng = np.random.default_rng(11)
    spec = oracle.appendix_a_spec()
    for _ in range(10):
        pmfs = [make_pmf(zip(rng.uniform(0, 5, 3), rng.dirichlet(np.ones(3)))) for _ in range(2)]
        _, val = bellman.simplex_min(pmfs, spec, mode="grid")
        _, dense = oracle.grid_simplex_min(pmfs, spec, 2000)
        assert val <= dense + 1e-9
        assert val >= dense - 1e-2


def test_s_op_below_random_lambdas():
    m = mdpmodel.random_model(3, 3, 3, 2, risk_kind="kusuoka")
    rng = np.random.default_rng(0)
    v = rng.normal(size=3)
    for x in range(3):
        val, lam = bellman.s_op(m, v, 1, x)
        assert math.isclose(val, bellman.g_op(m, v, 1, x, lam), abs_tol=1e-12)
        for _ in range(100):
            assert val <= bellman.g_op(m, v, 1, x, rng.dirichlet(np.ones(3))) + 1e-12


def test_h_policy_with_argmin_reproduces_s_op():
    m = mdpmodel.random_model(5, 3, 2, 2, risk_kind="mixed")
    v = np.array([0.3, -0.2, 0.9])
    vals, lams = zip(*(bellman.s_op(m, v, 1, x) for x in range(3)))
    pol = RandomizedPolicy({1: list(lams), 2: list(lams)})
    assert np.array_equal(bellman.h_policy(m, v, 1, pol), np.array(vals))


def test_operator_shift_monotonicity_and_contraction():
    rng = np.random.default_rng(4)
    for seed in range(30):
        m = mdpmodel.random_model(seed, 3, 2, 1, gamma=0.8, risk_kind="mixed")
        v1 = rng.uniform(-2, 2, 3)
        v2 = v1 + rng.uniform(0, 1, 3)
        c = float(rng.normal())
        for x in range(3):
            lam = rng.dirichlet(np.ones(2))
            g1 = bellman.g_op(m, v1, 1, x, lam)
            g2 = bellman.g_op(m, v2, 1, x, lam)
            assert g1 <= g2 + 1e-12
            assert abs(g2 - g1) <= 0.8 * np.max(np.abs(v2 - v1)) + 1e-10
            assert math.isclose(bellman.g_op(m, v1 + c, 1, x, lam), g1 + 0.8 * c, abs_tol=1e-10)
            # normalized measures keep the value within b + gamma * |v|
            assert abs(g1) <= m.cost_bound + 0.8 * np.max(np.abs(v1)) + 1e-12
        assert abs(bellman.h0(m, v1) - bellman.h0(m, v2)) <= 0.8 * np.max(np.abs(v2 - v1)) + 1e-10


def test_policy_json_roundtrip_and_checks():
    m = mdpmodel.random_model(1, 2, 3, 2)
    pol = RandomizedPolicy.random(m, np.random.default_rng(0))
    back = RandomizedPolicy.from_json(m, pol.to_json(m))
    for t in (1, 2):
        for x in range(2):
            assert np.allclose(back.weights(t, x), pol.weights(t, x), atol=0)
    bellman.check_policy(m, back, (1, 2))
    doc = pol.to_json(m)
    del doc["2"]
    with pytest.raises(PolicyIncomplete):
        bellman.check_policy(m, RandomizedPolicy.from_json(m, doc), (1, 2))
    with pytest.raises(PolicyIncomplete):
        RandomizedPolicy.from_json(m, {"1": {"s0": [["bogus", 1.0]], "s1": [["a0", 1.0]]}})
