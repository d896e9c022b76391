import json

import numpy as np
import pytest

from expansion_lab import catalog
from expansion_lab.core import Word, compose_orbit
from expansion_lab.errors import InvariantViolation
from expansion_lab.io import (
    SystemFileError,
    dumps,
    load_system,
    read_orbit_csv,
    save_system,
    system_from_dict,
    system_to_dict,
)


@pytest.mark.parametrize("make", [
    catalog.doubling_system, lambda: catalog.perturbed_doubling(0.5), catalog.mobius_pair,
    catalog.paper_interval_example,
])
def test_system_round_trip(tmp_path, make):
    system = make()
    path = tmp_path / "s.json"
    save_system(system, path)
    back = load_system(path)
    xs = np.linspace(0, 1, 37, endpoint=False)
    for g, h in zip(system.generators, back.generators):
        assert np.array_equal(g.lift(xs), h.lift(xs))
        assert np.array_equal(g.dlift(xs), h.dlift(xs))
    assert system_to_dict(back) == system_to_dict(system)


def test_spline_generator_from_dict():
    data = {"domain": "interval", "mode": "semigroup",
            "generators": [{"spline": {"knots": [0, 0.5, 1], "values": [0, 0.4, 1],
                                       "derivs": [0.8, 1.0, 1.4]}, "alpha": 1.0, "epsilon": 0.1}]}
    s = system_from_dict(data)
    assert s.generators[0](0.5) == pytest.approx(0.4)


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "domain": "circle",\n  "generators": [}\n')
    with pytest.raises(SystemFileError) as exc:
        load_system(path)
    assert exc.value.line == 3


@pytest.mark.parametrize("data,invariant", [
    ({"domain": "circle"}, "system_schema"),
    ({"domain": "circle", "generators": [{}]}, "generator_spec"),
    ({"domain": "circle", "generators": [{"family": "rotation", "params": {}}]}, "family_params"),
    ({"domain": "circle", "generators": [{"family": "doubling", "holder_const": 0,
                                          "alpha": 1, "epsilon": 0.1},
                                         {"family": "perturbed_doubling", "params": {"eps": 0.5},
                                          "holder_const": 0.001}]}, "holder_log_derivative"),
])
def test_invalid_systems_name_invariant(data, invariant):
    with pytest.raises(InvariantViolation) as exc:
        system_from_dict(data)
    assert exc.value.invariant == invariant


def test_orbit_csv_round_trip(tmp_path):
    orb = compose_orbit(catalog.perturbed_doubling(0.3), Word.constant(0, 10), 0.2, 10)
    path = tmp_path / "o.csv"
    path.write_text(orb.to_csv())
    back = read_orbit_csv(path)
    assert np.array_equal(back.points, orb.points)
    assert np.array_equal(back.log_derivs, orb.log_derivs)
    assert orb.to_csv().splitlines()[0] == "step,x,log_deriv"


def test_dumps_deterministic_and_handles_numpy():
    obj = {"b": np.float64(1.5), "a": np.arange(3), "c": float("inf"), "d": np.bool_(True)}
    text = dumps(obj)
    assert text == dumps(obj)
    assert json.loads(text) == {"a": [0, 1, 2], "b": 1.5, "c": "inf", "d": True}
