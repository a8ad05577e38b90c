import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskmdp import distkit
from riskmdp.distkit import Pmf, make_pmf
from riskmdp.errors import (
    BadLevel,
    BadWeights,
    EmptySupport,
    LengthMismatch,
    MassNotOne,
    NegativeProb,
    NegativeScale,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


@st.composite
def pmfs(draw, max_atoms=6):
    k = draw(st.integers(1, max_atoms))
    values = draw(st.lists(finite, min_size=k, max_size=k))
    weights = draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k))
    total = sum(weights)
    return make_pmf([(v, w / total) for v, w in zip(values, weights)])


def test_duplicates_merge_and_sort():
    mu = make_pmf([(2, 0.25), (0, 0.5), (2, 0.25)])
    assert mu.values.tolist() == [0.0, 2.0]
    assert mu.probs.tolist() == [0.5, 0.5]


def test_near_duplicates_within_tolerance_merge():
    mu = make_pmf([(1.0, 0.5), (1.0 + 5e-13, 0.5)])
    assert len(mu) == 1 and mu.probs[0] == 1.0


def test_tiny_masses_are_pruned():
    mu = make_pmf([(0, 1.0 - 1e-16), (3, 1e-16)])
    assert mu.values.tolist() == [0.0]


def test_arrays_are_read_only():
    mu = make_pmf([(0, 1.0)])
    with pytest.raises(ValueError):
        mu.values[0] = 2.0


@pytest.mark.parametrize(
    "pairs, exc",
    [
        ([(0, 0.5), (1, 0.48)], MassNotOne),
        ([(0, 1.2), (1, -0.2)], NegativeProb),
        ([], EmptySupport),
    ],
)
def test_constructor_rejects_bad_input(pairs, exc):
    with pytest.raises(exc):
        make_pmf(pairs)


def test_from_arrays_length_mismatch():
    with pytest.raises(LengthMismatch):
        distkit.from_arrays([0, 1], [1.0])


def test_shift_and_scale():
    mu = make_pmf([(0, 0.5), (1, 0.5)])
    assert distkit.shift(mu, 2).values.tolist() == [2.0, 3.0]
    assert distkit.scale(mu, 0) == Pmf.dirac(0.0)
    assert distkit.scale(mu, 3).values.tolist() == [0.0, 3.0]
    with pytest.raises(NegativeScale):
        distkit.scale(mu, -1)


def test_mix_hand_computed():
    c0 = make_pmf([(0, 0.9), (5, 0.1)])
    c1 = make_pmf([(0, 0.5), (1.4, 0.5)])
    half = distkit.mix([0.5, 0.5], [c0, c1])
    assert half.allclose(make_pmf([(0, 0.7), (1.4, 0.25), (5, 0.05)]))


def test_mix_weight_validation():
    mu = Pmf.dirac(0.0)
    with pytest.raises(BadWeights):
        distkit.mix([0.7, 0.7], [mu, mu])
    with pytest.raises(LengthMismatch):
        distkit.mix([1.0], [mu, mu])


def test_cdf_is_right_continuous():
    mu = make_pmf([(0, 0.25), (1, 0.75)])
    assert distkit.cdf(mu, -1e-9) == 0.0
    assert distkit.cdf(mu, 0.0) == 0.25
    assert distkit.cdf(mu, 0.999) == 0.25
    assert distkit.cdf(mu, 1.0) == 1.0


def test_quantile_left_inverse():
    mu = make_pmf([(0, 0.25), (1, 0.75)])
    assert distkit.quantile(mu, 0.25) == 0.0
    assert distkit.quantile(mu, 0.2500001) == 1.0
    assert distkit.quantile(mu, 1.0) == 1.0
    with pytest.raises(BadLevel):
        distkit.quantile(mu, 0.0)


def test_fosd_direction():
    low = make_pmf([(0, 0.5), (1, 0.5)])
    high = make_pmf([(1, 0.5), (2, 0.5)])
    assert distkit.fosd_dominates(low, high)
    assert not distkit.fosd_dominates(high, low)


def test_json_roundtrip():
    mu = make_pmf([(0.1, 0.3), (2.5, 0.7)])
    assert distkit.pmf_from_json(mu.to_json()) == mu


@settings(max_examples=200, deadline=None)
@given(pmfs(), pmfs(), st.floats(0, 1))
def test_mixture_keeps_unit_mass_and_support(mu, nu, w):
    m = distkit.mix([w, 1 - w], [mu, nu])
    assert math.isclose(m.probs.sum(), 1.0, abs_tol=1e-12)
    assert np.all(np.diff(m.values) > distkit.MERGE_TOL)
    assert m.values[0] >= min(mu.values[0], nu.values[0]) - 1e-12
    assert m.values[-1] <= max(mu.values[-1], nu.values[-1]) + 1e-12


@settings(max_examples=200, deadline=None)
@given(pmfs(), st.floats(1e-6, 1.0))
def test_quantile_inverts_cdf(mu, u):
    q = distkit.quantile(mu, u)
    assert distkit.cdf(mu, q) >= u - 1e-12
    below = mu.values[mu.values < q]
    if below.size:
        assert distkit.cdf(mu, below[-1]) < u + 1e-12


@settings(max_examples=100, deadline=None)
@given(pmfs(), finite)
def test_shift_moves_mean(mu, c):
    assert math.isclose(distkit.mean(distkit.shift(mu, c)), distkit.mean(mu) + c, abs_tol=1e-9)
