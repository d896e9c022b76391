import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from expansion_lab import catalog
from expansion_lab.core import Word
from expansion_lab.errors import ParameterError, PreconditionError
from expansion_lab.preballs import (
    build_preball,
    check_bounded_distortion,
    check_regularity,
    distortion_constant,
    random_subinterval_pairs,
    uniform_radius,
    verify_contraction,
)


def test_distortion_constant_closed_form():
    assert distortion_constant(0.0, 1.0, 0.05, 0.5) == 1.0
    assert distortion_constant(2.0, 0.5, 0.04, 0.25) == pytest.approx(
        math.exp(2.0 * 0.2 / (1 - 0.5)))
    with pytest.raises(ParameterError):
        distortion_constant(1.0, 1.0, 0.1, 1.0)


@given(st.floats(0, 5), st.floats(0.1, 1), st.floats(1e-3, 0.5), st.floats(0.05, 0.95))
def test_distortion_constant_monotone(C1, alpha, delta, lam):
    K = distortion_constant(C1, alpha, delta, lam)
    assert K >= 1
    assert distortion_constant(C1 + 0.1, alpha, delta, lam) >= K
    assert distortion_constant(C1, alpha, delta * 1.1, lam) >= K


@pytest.mark.parametrize("n", [1, 5, 12])
def test_doubling_preball_exact(n):
    system = catalog.doubling_system()
    pb = build_preball(system, Word.constant(0, n), 0.3, n, 0.05)
    assert pb.K == 1.0
    assert pb.left == pytest.approx(0.05 / 2 ** n, rel=1e-12)
    assert pb.right == pytest.approx(0.05 / 2 ** n, rel=1e-12)
    assert pb.lam == pytest.approx(0.5)
    rep = check_bounded_distortion(pb, random_subinterval_pairs(pb, 50, np.random.default_rng(n)))
    assert abs(rep.max_observed_ratio - 1) <= 1e-12
    assert rep.passed


@given(st.floats(0, 1, exclude_max=True), st.integers(1, 10), st.floats(1e-3, 0.1),
       st.floats(-0.6, 0.6))
def test_preball_maps_onto_ball(x, n, delta, eps):
    system = catalog.perturbed_doubling(eps)
    pb = build_preball(system, Word.constant(0, n), x, n, delta)
    lo_off, hi_off = pb.image_offsets()
    assert lo_off == pytest.approx(-delta, abs=1e-9)
    assert hi_off == pytest.approx(delta, abs=1e-9)
    assert pb.lo <= pb.x <= pb.hi
    # monotone on V
    ys = np.linspace(pb.lo, pb.hi, 33)
    assert np.all(np.diff(pb.forward(ys)) > 0)


@given(st.floats(0, 1, exclude_max=True), st.integers(1, 12))
def test_contraction_and_diameter(x, n):
    system = catalog.perturbed_doubling(0.5)
    lam = 1 / 1.5
    delta = 0.05
    pb = build_preball(system, Word.constant(0, n), x, n, delta, sigma=lam)
    assert pb.certified
    rep = verify_contraction(pb, samples=24)
    assert rep.passed
    assert pb.diameter <= 2 * delta * lam ** n * (1 + 1e-12)


def test_uniform_local_rate_default():
    pb = build_preball(catalog.perturbed_doubling(0.05), Word.constant(0, 8), 0.2, 8, 0.01)
    assert 0.48 < pb.lam < 0.53
    assert pb.certified
    assert verify_contraction(pb).passed


def test_perturbed_distortion_within_K():
    system = catalog.perturbed_doubling(0.5)
    rng = np.random.default_rng(0)
    for n in range(1, 13):
        pb = build_preball(system, Word.constant(0, n), float(rng.random()), n, 0.05,
                           sigma=1 / 1.5)
        assert pb.K == pytest.approx(distortion_constant(pb.C1, 1.0, 0.05, 1 / 1.5))
        rep = check_bounded_distortion(pb, random_subinterval_pairs(pb, 100, rng))
        assert rep.passed
        assert rep.max_observed_ratio >= 1


def test_regularity_bounds():
    pb = build_preball(catalog.perturbed_doubling(0.5), Word.constant(0, 6), 0.41, 6, 0.05,
                       sigma=1 / 1.5)
    reg = check_regularity(pb)
    assert reg.passed
    assert reg.ratio <= reg.L_bound


def test_interval_example_preball(interval_example):
    word = catalog.staying_branch(interval_example, 0.5, 10)
    pb = build_preball(interval_example, word, 0.5, 10, 0.02)
    lo_off, hi_off = pb.image_offsets()
    assert lo_off == pytest.approx(-pb.image_left, abs=1e-10)
    assert hi_off == pytest.approx(pb.image_right, abs=1e-10)
    assert pb.certified
    assert verify_contraction(pb).passed


def test_interval_ball_truncated_at_endpoint():
    system = catalog.mobius_pair()
    pb = build_preball(system, Word.constant(0, 3), 0.99, 3, 0.1)
    assert pb.image_right == pytest.approx(1 - pb.image_center)
    assert pb.hi <= 1.0 + 1e-15


def test_strict_mode_requires_hyperbolic_time():
    system = catalog.rotation_doubling_system()
    with pytest.raises(PreconditionError):
        build_preball(system, Word((0, 0)), 0.2, 2, 0.01, sigma=0.5, strict=True)
    with pytest.raises(PreconditionError):
        build_preball(system, Word((1,)), 0.2, 1, 0.5, sigma=0.5, strict=True)


def test_pairs_must_lie_in_preball():
    pb = build_preball(catalog.doubling_system(), Word.constant(0, 2), 0.3, 2, 0.05)
    with pytest.raises(ParameterError):
        check_bounded_distortion(pb, [((0.0, 0.9), (pb.lo, pb.hi))])


def test_uniform_radius_doubling():
    r = uniform_radius(catalog.doubling_system())
    assert 0 < r <= 0.25
