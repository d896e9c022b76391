import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.interpolate import CubicHermiteSpline

from expansion_lab.core import CIRCLE, INTERVAL, DomainSpace
from expansion_lab.errors import InvariantViolation, ParameterError
from expansion_lab.maps import (
    FAMILIES,
    HermiteSpline,
    doubling_map,
    estimate_holder_constant,
    expanding_map,
    family_map,
    mobius_map,
    perturbed_doubling_map,
    rotation_map,
    sine_circle_map,
    spline_map,
    validate_map,
)

CIRCLE_D = DomainSpace(CIRCLE)
INTERVAL_D = DomainSpace(INTERVAL)


@st.composite
def hermite_data(draw):
    k = draw(st.integers(2, 8))
    gaps = draw(st.lists(st.floats(0.05, 1.0), min_size=k - 1, max_size=k - 1))
    knots = np.concatenate([[0.0], np.cumsum(gaps)])
    knots /= knots[-1]
    vals = draw(st.lists(st.floats(-2, 2), min_size=k, max_size=k))
    ders = draw(st.lists(st.floats(-3, 3), min_size=k, max_size=k))
    return knots, np.array(vals), np.array(ders)


@given(hermite_data(), st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_hermite_matches_scipy(data, xs):
    knots, vals, ders = data
    ours = HermiteSpline(knots, vals, ders)
    ref = CubicHermiteSpline(knots, vals, ders)
    xs = np.array(xs)
    assert np.allclose(ours(xs), ref(xs), atol=1e-12, rtol=1e-12)
    assert np.allclose(ours.derivative(xs), ref.derivative()(xs), atol=1e-11, rtol=1e-11)
    for x in xs[:3]:
        assert ours(float(x)) == pytest.approx(float(ref(x)), abs=1e-12)


@given(hermite_data())
def test_hermite_derivative_extrema(data):
    sp = HermiteSpline(*data)
    lo, hi = sp.derivative_extrema()
    grid = sp.derivative(np.linspace(0, 1, 2001))
    assert lo <= grid.min() + 1e-12
    assert hi >= grid.max() - 1e-12


def test_hermite_rejects_bad_knots():
    with pytest.raises(InvariantViolation):
        HermiteSpline([0, 0.5, 0.5, 1], [0, 0, 0, 0], [1, 1, 1, 1])


def test_expanding_and_doubling():
    f = doubling_map()
    assert f(0.3) == pytest.approx(0.6)
    assert f(0.7) == pytest.approx(0.4)
    assert f.branch_count == 2
    assert expanding_map(3).digit_base == 3
    with pytest.raises(ParameterError):
        expanding_map(1)


def test_perturbed_doubling_constants():
    f = perturbed_doubling_map(0.5)
    xs = np.linspace(0, 1, 10001)
    assert float(np.min(f.dlift(xs))) == pytest.approx(1.5, abs=1e-8)
    assert f.holder_const == pytest.approx(0.5 * 2 * math.pi / 1.5)
    with pytest.raises(ParameterError):
        perturbed_doubling_map(1.0)
    assert perturbed_doubling_map(0.0).name == "doubling"


@pytest.mark.parametrize("fmap", [
    doubling_map(), perturbed_doubling_map(0.5), perturbed_doubling_map(-0.8),
    rotation_map(0.3), sine_circle_map(0.6, 0.1), expanding_map(3), mobius_map(2.5),
    mobius_map(0.4),
])
def test_shipped_maps_pass_validation(fmap):
    validate_map(fmap)


@pytest.mark.parametrize("fmap", [perturbed_doubling_map(0.5), sine_circle_map(0.6), mobius_map(2.5)])
def test_holder_bound_on_random_pairs(fmap):
    rng = np.random.default_rng(5)
    x = rng.random(5000)
    y = x + rng.uniform(-fmap.epsilon, fmap.epsilon, 5000)
    if not fmap.domain.is_circle:
        y = np.clip(y, 0, 1)
    d = fmap.domain.dist(x, y)
    gap = np.abs(np.log(np.abs(fmap.dlift(x % 1 if fmap.domain.is_circle else x)))
                 - np.log(np.abs(fmap.dlift(y % 1 if fmap.domain.is_circle else y))))
    assert np.all(gap <= fmap.holder_const * d ** fmap.alpha + 1e-12)


@given(st.floats(0, 1, exclude_max=True))
def test_inverse_branches_round_trip(y):
    for fmap in (doubling_map(), perturbed_doubling_map(0.7), expanding_map(3)):
        for b in range(fmap.branch_count):
            x = fmap.inverse_branch(y, b)
            assert fmap.domain.dist(fmap(x), y) <= 1e-12


def test_mobius_closed_form():
    r = 1.7
    f = mobius_map(r)
    x = 0.3
    assert f(x) == pytest.approx(r * x / (1 + (r - 1) * x), rel=1e-15)
    assert f.derivative(x) == pytest.approx(r / (1 + (r - 1) * x) ** 2, rel=1e-15)
    assert f(0.0) == 0.0 and f(1.0) == 1.0


def test_spline_map_interval():
    f = spline_map(INTERVAL_D, [0, 0.5, 1], [0, 0.3, 1], [0.5, 1.0, 1.5])
    assert f(0.5) == pytest.approx(0.3)
    assert f.holder_const > 0
    validate_map(f)


def test_spline_map_circle_degree_two():
    f = spline_map(CIRCLE_D, [0, 0.5, 1], [0, 1, 2], [2, 2, 2])
    assert f.degree == 2
    assert f(0.75) == pytest.approx(0.5)


@pytest.mark.parametrize("knots,values,derivs,invariant", [
    ([0, 0.5, 1], [0, 0.5, 1], [1, 0, 1], "local_diffeomorphism"),
    ([0, 0.5, 1], [0, 0.7, 1.5], [1, 1, 1], "circle_degree"),
    ([0, 0.5, 1], [0, 1, 2], [2, 2, 3], "circle_periodicity"),
    ([0.1, 0.5, 1], [0, 0.5, 1], [1, 1, 1], "spline_knots"),
])
def test_spline_rejections(knots, values, derivs, invariant):
    with pytest.raises(InvariantViolation) as exc:
        spline_map(CIRCLE_D, knots, values, derivs)
    assert exc.value.invariant == invariant


def test_holder_estimate_on_known_function():
    # log f' = log(2 + 0.5 cos 2 pi x) has Lipschitz constant <= 0.5 * 2 pi / 1.5
    dlift = perturbed_doubling_map(0.5).dlift
    est = estimate_holder_constant(dlift, CIRCLE_D, 1.0, 0.1)
    assert 0.5 * 2 * math.pi / 2.5 < est <= 1.25 * 0.5 * 2 * math.pi / 1.5 * 1.001


def test_family_registry():
    assert {"doubling", "perturbed_doubling", "rotation", "mobius"} <= set(FAMILIES)
    f = family_map("perturbed_doubling", CIRCLE_D, {"eps": 0.2}, holder_const=9.0)
    assert f.holder_const == 9.0
    with pytest.raises(InvariantViolation):
        family_map("nope", CIRCLE_D, {})
    with pytest.raises(InvariantViolation):
        family_map("mobius", CIRCLE_D, {"r": 2.0})


def test_validate_catches_bad_holder_constant():
    from dataclasses import replace

    f = replace(perturbed_doubling_map(0.5), holder_const=0.01)
    with pytest.raises(InvariantViolation) as exc:
        validate_map(f)
    assert exc.value.invariant == "holder_log_derivative"
