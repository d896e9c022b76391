import math

import numpy as np
import pytest

from expansion_lab import catalog
from expansion_lab.catalog import IntervalExampleParams
from expansion_lab.classify import classify_action
from expansion_lab.core import CIRCLE, DomainSpace, GeneratorSystem, log_inverse_lipschitz
from expansion_lab.errors import InfeasibleExampleError, ParameterError
from expansion_lab.maps import doubling_map

L2 = math.log(2)


def test_doubling_fixture():
    s = catalog.doubling_system()
    f = s.generators[0]
    assert f(0.3) == pytest.approx(0.6)
    assert f.derivative(0.77) == 2.0
    assert log_inverse_lipschitz(f, 0.123) == pytest.approx(-L2)
    assert f.alpha == 1.0 and f.holder_const == 0.0 and f.branch_count == 2


def test_doubling_classified_uniform():
    r = classify_action(catalog.doubling_system(), 20, 50, seed=0)
    assert r.uniformly_expanding
    assert (r.uniform_fit.C, r.uniform_fit.lam) == pytest.approx((1.0, 2.0))


def test_perturbed_eps_zero_is_doubling():
    xs = np.linspace(0, 1, 101)
    a = catalog.perturbed_doubling(0.0).generators[0]
    b = catalog.doubling_system().generators[0]
    assert np.array_equal(a.lift(xs), b.lift(xs)) and np.array_equal(a.dlift(xs), b.dlift(xs))


def test_perturbed_half_min_derivative():
    f = catalog.perturbed_doubling(0.5).generators[0]
    assert float(np.min(f.dlift(np.linspace(0, 1, 2 ** 14)))) == pytest.approx(1.5, abs=1e-7)
    assert float(f.dlift(0.5)) == pytest.approx(1.5)
    with pytest.raises(ParameterError):
        catalog.perturbed_doubling(1.2)


# -- interval example -------------------------------------------------------------

def test_endpoints_fixed_exactly(interval_example):
    for g in interval_example.generators:
        assert g(0.0) == 0.0 and g(1.0) == 1.0


def test_endpoint_derivatives(interval_example):
    f0, f1 = interval_example.generators
    assert float(f0.dlift(0.0)) == pytest.approx(0.5, abs=1e-9)
    assert float(f0.dlift(1.0)) == pytest.approx(1.0, abs=1e-9)
    assert float(f1.dlift(0.0)) == pytest.approx(3.0, abs=1e-9)
    assert float(f1.dlift(1.0)) <= 1 + 1e-9


def test_conditions_all_pass(interval_example):
    rep = catalog.verify_example_conditions(interval_example)
    assert rep.all_pass, rep.to_dict()
    assert set(rep.results) == {"1", "2", "3", "4a", "4b", "4c"}
    assert "2^p = 3^q" in rep.results["3"].detail


def test_condition_margins(interval_example):
    p = IntervalExampleParams()
    f0, f1 = interval_example.generators
    xs = np.linspace(p.c1, p.c2, 2 ** 12 + 1)
    assert np.min(np.maximum(f0.dlift(xs), f1.dlift(xs))) >= 1.05
    assert np.min(f1.dlift(np.linspace(p.a, p.c1, 2 ** 12 + 1))) >= 1.05
    assert np.min(f0.dlift(np.linspace(p.c2, p.b, 2 ** 12 + 1))) >= 1.05


def test_no_interior_fixed_points(interval_example):
    xs = np.arange(1, 2 ** 14) / 2 ** 14
    for g in interval_example.generators:
        gap = g.lift(xs) - xs
        assert np.all(gap != 0)
        assert len(set(np.sign(gap))) == 1


def test_doubling_pair_fails_condition_one():
    pair = GeneratorSystem(DomainSpace(CIRCLE), [doubling_map(), doubling_map()])
    rep = catalog.verify_example_conditions(pair)
    assert not rep.results["1"].passed
    assert not rep.all_pass


def test_params_ordering_rejected():
    with pytest.raises(ParameterError):
        IntervalExampleParams(c1=0.6, c2=0.5)
    with pytest.raises(ParameterError):
        IntervalExampleParams(a=0.0)


def test_infeasible_params_name_condition():
    with pytest.raises(InfeasibleExampleError) as exc:
        catalog.paper_interval_example(IntervalExampleParams(c1=0.25))
    assert exc.value.condition == "4a"


# -- claims 1) and 2) -----------------------------------------------------------------

def test_reach_inside_is_zero(interval_example):
    r = catalog.reach_trapping_region(interval_example, 0.5)
    assert r.m == 0 and r.generator is None


def test_reach_near_zero_linearisation(interval_example):
    x = 1e-6
    r = catalog.reach_trapping_region(interval_example, x)
    assert r.generator == 1
    estimate = math.log(0.2 / x) / math.log(3.0)
    assert abs(r.m - estimate) <= 3
    assert 0.2 <= r.point <= 0.8


def test_reach_near_one_uses_f0(interval_example):
    r = catalog.reach_trapping_region(interval_example, 1 - 1e-6)
    assert r.generator == 0
    y = 1 - 1e-6
    f0 = interval_example.generators[0]
    for _ in range(r.m):
        y = float(f0.lift(y))
    assert y == r.point


def test_reach_seeded_points(interval_example):
    rng = np.random.default_rng(99)
    for x in rng.uniform(1e-9, 1 - 1e-9, 200):
        r = catalog.reach_trapping_region(interval_example, float(x))
        assert 0.2 <= r.point <= 0.8


def test_staying_branch(interval_example):
    p = IntervalExampleParams()
    word, logs = catalog.staying_branch(interval_example, 0.37, 10 ** 5, return_logs=True)
    assert np.all(logs > 0)
    assert -np.mean(logs) <= -np.min(logs) < 0
    from expansion_lab.core import compose_orbit

    orb = compose_orbit(interval_example, word, 0.37, 10 ** 5)
    assert orb.points.min() >= p.a and orb.points.max() <= p.b
    assert np.allclose(orb.log_derivs, logs, atol=1e-12)


def test_staying_branch_requires_trapping_region(interval_example):
    with pytest.raises(ParameterError):
        catalog.staying_branch(interval_example, 0.1, 10)


def test_figure_csv(interval_example):
    lines = catalog.figure_csv(interval_example, 5).splitlines()
    assert lines[0] == "x,f0,f1"
    assert len(lines) == 6
