import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from expansion_lab import catalog
from expansion_lab.classify import (
    CoverElement,
    backward_expanding_check,
    brute_force_min,
    build_branch_from_cover,
    check_uniform_expansion,
    classify_action,
    diffeo_obstruction_check,
    exceptional_points,
    parse_strategy,
    search_expanding_branch,
)
from expansion_lab.core import CIRCLE, DomainSpace, GeneratorSystem, Word, compose_orbit
from expansion_lab.errors import CoverIncompleteError, ParameterError, PreconditionError
from expansion_lab.maps import doubling_map, mobius_map, rotation_map, sine_circle_map

L2 = math.log(2)


def test_parse_strategy():
    assert parse_strategy("greedy") == ("greedy", 0)
    assert parse_strategy("beam") == ("beam", 8)
    assert parse_strategy("beam:3") == ("beam", 3)
    assert parse_strategy("exhaustive:5") == ("exhaustive", 5)
    with pytest.raises(ParameterError):
        parse_strategy("dfs")
    with pytest.raises(ParameterError):
        parse_strategy("exhaustive")


# -- uniform expansion ------------------------------------------------------------------

def test_uniform_doubling():
    fit = check_uniform_expansion(catalog.doubling_system(), "constant", 32, 30)
    assert fit.C == pytest.approx(1.0, abs=1e-12)
    assert fit.lam == pytest.approx(2.0, abs=1e-12)
    assert fit.passed


def test_uniform_rotation_fails():
    fit = check_uniform_expansion(catalog.rotation_system(), "constant", 32, 30)
    assert fit.lam == pytest.approx(1.0, abs=1e-12)
    assert not fit.passed


def test_uniform_fit_alternating_matches_regression():
    system = GeneratorSystem(DomainSpace(CIRCLE), [sine_circle_map(0.6), doubling_map()])
    n, grid = 20, 16
    fit = check_uniform_expansion(system, "alternating", grid, n)
    word = Word.periodic([0, 1], n)
    slopes = []
    for x in (np.arange(grid) + 0.5) / grid:
        orb = compose_orbit(system, word, float(x), n)
        S = np.concatenate([[0.0], np.cumsum(orb.log_derivs)])
        i = np.arange(n + 1)
        slopes.append(np.sum((i - i.mean()) * (S - S.mean())) / np.sum((i - i.mean()) ** 2))
    assert math.log(fit.lam) == pytest.approx(min(slopes), abs=1e-9)


def test_uniform_parameter_errors():
    with pytest.raises(ParameterError):
        check_uniform_expansion(catalog.doubling_system(), "constant", 1, 5)


# -- branch search ------------------------------------------------------------------------

@pytest.mark.parametrize("strategy", ["greedy", "beam:4", "exhaustive:3"])
def test_doubling_any_strategy(strategy):
    w, e = search_expanding_branch(catalog.doubling_system(), 0.3, 12, strategy)
    assert w.indices == (0,) * 12
    assert e == pytest.approx(-L2)


@pytest.mark.parametrize("strategy", ["greedy", "beam", "exhaustive:4"])
def test_rotation_doubling_picks_doubling(strategy):
    w, e = search_expanding_branch(catalog.rotation_doubling_system(), 0.3, 12, strategy)
    assert set(w.indices) == {1}
    assert e == pytest.approx(-L2)


def test_interval_example_branch_stays(interval_example):
    p = catalog.IntervalExampleParams()
    for x in np.linspace(p.a, p.b, 7):
        w, e = search_expanding_branch(interval_example, float(x), 300)
        orb = compose_orbit(interval_example, w, float(x), 300)
        assert e < 0
        assert orb.points.min() >= p.a and orb.points.max() <= p.b
        _, logs = catalog.staying_branch(interval_example, float(x), 300, return_logs=True)
        assert -np.mean(logs) < 0


def _three_maps():
    from expansion_lab.core import INTERVAL

    return GeneratorSystem(DomainSpace(INTERVAL), [mobius_map(1.6), mobius_map(0.7), mobius_map(2.2)])


@settings(max_examples=20)
@given(st.floats(0.01, 0.99), st.integers(1, 8))
def test_exhaustive_equals_brute_force(x, depth):
    system = _three_maps() if depth <= 6 else catalog.mobius_pair()
    _, e = search_expanding_branch(system, x, depth, f"exhaustive:{depth}")
    assert e == pytest.approx(brute_force_min(system, x, depth), abs=1e-12)


def test_exhaustive_node_cap():
    with pytest.raises(ParameterError):
        search_expanding_branch(_three_maps(), 0.5, 20, "exhaustive:13")


def test_beam_at_least_as_good_as_greedy(interval_example):
    for x in (0.1, 0.5, 0.9):
        _, g = search_expanding_branch(interval_example, x, 6, "greedy")
        _, b = search_expanding_branch(interval_example, x, 6, "beam:64")
        assert b <= g + 1e-12


# -- classification -------------------------------------------------------------------------

def test_classify_doubling():
    r = classify_action(catalog.doubling_system(), 50, 100, seed=1)
    assert r.uniformly_expanding and r.nonuniformly_expanding and r.expandable
    assert r.strong_a == pytest.approx(L2)
    assert r.uniform_fit.lam == pytest.approx(2.0)


def test_classify_identity():
    r = classify_action(catalog.identity_system(), 50, 100, seed=1)
    assert not (r.uniformly_expanding or r.nonuniformly_expanding or r.expandable)
    assert r.strong_a is None


def test_classify_interval_example(interval_example):
    r = classify_action(interval_example, 1000, 1000, seed=7)
    assert r.expandable_fraction >= 0.99
    assert r.expandable
    assert not r.nonuniformly_expanding
    assert r.exceptional_points == [0.0, 1.0]
    assert np.all(np.isfinite(r.exponents))


def test_classify_deterministic():
    a = classify_action(catalog.perturbed_doubling(0.3), 30, 50, seed=3).to_dict()
    b = classify_action(catalog.perturbed_doubling(0.3), 30, 50, seed=3).to_dict()
    assert a == b


@settings(max_examples=15)
@given(st.integers(0, 4), st.integers(0, 2 ** 32))
def test_implication_chain(which, seed):
    systems = [catalog.doubling_system, catalog.identity_system, catalog.rotation_system,
               catalog.mobius_pair, catalog.rotation_doubling_system]
    r = classify_action(systems[which](), 20, 40, seed=seed)
    assert (not r.uniformly_expanding) or r.nonuniformly_expanding
    assert (not r.nonuniformly_expanding) or r.expandable


def test_exceptional_points():
    assert exceptional_points(catalog.doubling_system()) == []
    assert exceptional_points(catalog.mobius_pair()) == [0.0, 1.0]


# -- backward expansion ---------------------------------------------------------------------

def test_backward_doubling():
    assert backward_expanding_check(catalog.doubling_system(), 0.4, 3) == Word((0,))


def test_backward_interval_example_at_one(interval_example):
    assert backward_expanding_check(interval_example, 1.0, 10) is None


def test_backward_rotation_none():
    assert backward_expanding_check(catalog.rotation_system(), 0.2, 10) is None


@given(st.floats(0.0, 0.999))
def test_backward_round_trip(x):
    from expansion_lab.core import composed_log_derivative

    system = catalog.mobius_pair()
    w = backward_expanding_check(system, x, 6)
    if w is not None:
        assert composed_log_derivative(system, w, x) > 0


# -- branches from covers ---------------------------------------------------------------------

def test_cover_single_doubling():
    system = catalog.doubling_system()
    br = build_branch_from_cover(system, [CoverElement((0.0, 1.0), (0,), 0.5)], 0.3)
    assert br.exponent_bound == pytest.approx(-L2)
    assert br.word(20).indices == (0,) * 20


def test_cover_mixed_lengths():
    system = catalog.rotation_doubling_system()
    cover = [CoverElement((0.0, 0.5), (1,), 0.5), CoverElement((0.5, 1.0), (0, 1), 0.5)]
    br = build_branch_from_cover(system, cover, 0.7)
    assert br.exponent_bound == pytest.approx(0.5 * math.log(0.5))
    w, logs = br.word(10 ** 4, return_logs=True)
    assert -np.mean(logs) <= 0.5 * math.log(0.5) + 1e-3


def test_cover_matches_staying_branch(interval_example):
    cover = catalog.induced_cover(interval_example)
    for x in (0.21, 0.5, 0.79):
        br = build_branch_from_cover(interval_example, cover, x)
        assert br.word(2000).indices == catalog.staying_branch(interval_example, x, 2000).indices
        assert br.exponent_bound < 0


def test_cover_gap_raises(interval_example):
    cover = catalog.induced_cover(interval_example)
    with pytest.raises(CoverIncompleteError):
        build_branch_from_cover(interval_example, cover, 0.05)
    bad = [CoverElement((0.0, 0.4), (0,), 0.9)]
    br = build_branch_from_cover(catalog.doubling_system(), bad, 0.1)
    with pytest.raises(CoverIncompleteError):
        br.word(100)


def test_cover_block_bound_enforced():
    system = catalog.rotation_doubling_system()
    br = build_branch_from_cover(system, [CoverElement((0.0, 1.0), (0,), 0.5)], 0.3)
    with pytest.raises(CoverIncompleteError):
        br.word(3)


# -- diffeomorphism obstruction -------------------------------------------------------------------

def test_obstruction_mobius():
    rep = diffeo_obstruction_check(catalog.mobius_pair(), n=20, mc_samples=10 ** 5, seed=11)
    assert abs(rep.integral_estimate - 1) <= 3 * rep.stderr
    assert rep.passed
    assert not rep.uniformly_positive


def test_obstruction_identity_exact():
    rep = diffeo_obstruction_check(catalog.identity_system(), n=20, mc_samples=1000, seed=0)
    assert rep.integral_estimate == 1.0
    assert rep.passed


def test_obstruction_rejects_doubling():
    with pytest.raises(PreconditionError):
        diffeo_obstruction_check(catalog.doubling_system(), n=5, mc_samples=10, seed=0)
