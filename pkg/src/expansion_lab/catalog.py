"""Ready-made systems, including the two-generator interval example.

The interval example is a semigroup generated by two increasing
diffeomorphisms ``f0, f1`` of ``[0, 1]`` fixing only the endpoints, with
``f0'(0) = 1/2``, ``f0'(1) = 1``, ``f1'(0) = 3``, ``f1'(1) = 0.9`` and a
trapping region ``[a, b]`` on which one of the two generators always
expands.  Both maps are built from piecewise-linear derivative profiles
(see :func:`expansion_lab.maps.derivative_profile_map`).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .core import CIRCLE, INTERVAL, DomainSpace, GeneratorSystem, Word
from .errors import ExampleInvalidError, InfeasibleExampleError, ParameterError
from .maps import (
    derivative_profile_map,
    doubling_map,
    identity_map,
    mobius_map,
    perturbed_doubling_map,
    register_family,
    rotation_map,
)

CONDITION_GRID = 2 ** 12
FIXED_POINT_GRID = 2 ** 14


def doubling_system() -> GeneratorSystem:
    return GeneratorSystem(DomainSpace(CIRCLE), [doubling_map()])


def perturbed_doubling(eps: float) -> GeneratorSystem:
    return GeneratorSystem(DomainSpace(CIRCLE), [perturbed_doubling_map(eps)])


def rotation_system(gamma: float = (math.sqrt(5) - 1) / 2) -> GeneratorSystem:
    return GeneratorSystem(DomainSpace(CIRCLE), [rotation_map(gamma)])


def identity_system(kind: str = CIRCLE) -> GeneratorSystem:
    dom = DomainSpace(kind)
    return GeneratorSystem(dom, [identity_map(dom)])


def rotation_doubling_system(gamma: float = (math.sqrt(5) - 1) / 2) -> GeneratorSystem:
    return GeneratorSystem(DomainSpace(CIRCLE), [rotation_map(gamma), doubling_map()])


def mobius_pair(r0: float = 1.3, r1: float = 0.8) -> GeneratorSystem:
    """Two Moebius-type diffeomorphisms of ``[0, 1]``."""
    return GeneratorSystem(DomainSpace(INTERVAL), [mobius_map(r0), mobius_map(r1)])


# -- interval example -----------------------------------------------------------

@dataclass(frozen=True)
class IntervalExampleParams:
    a: float = 0.2
    c1: float = 0.35
    c2: float = 0.55
    b: float = 0.8
    df0_at_0: float = 0.5
    df1_at_0: float = 3.0
    df1_at_1: float = 0.9

    def __post_init__(self):
        if not 0 < self.a < self.c1 < self.c2 < self.b < 1:
            raise ParameterError(
                f"need 0 < a < c1 < c2 < b < 1, got {self.a}, {self.c1}, {self.c2}, {self.b}")
        if not (0 < self.df0_at_0 < 1 and self.df1_at_0 > 1 and 0 < self.df1_at_1 <= 1):
            raise ParameterError("endpoint derivatives violate Df0(0)<1, Df1(0)>1, Df1(1)<=1")


def _profile(knots, slopes, free):
    """Solve the free slope so the derivative profile integrates to 1."""
    knots = np.asarray(knots, dtype=float)
    h = np.diff(knots)

    def integral(s):
        return float(np.sum(h * (s[:-1] + s[1:]) / 2))

    s0 = np.array(slopes, dtype=float)
    s0[free] = 0.0
    s1 = s0.copy()
    s1[free] = 1.0
    i0, i1 = integral(s0), integral(s1)
    s0[free] = (1.0 - i0) / (i1 - i0)
    return knots, s0


def _example_map(which: int, p: IntervalExampleParams):
    dom = DomainSpace(INTERVAL)
    if which == 0:
        knots = [0, p.a, p.c1 - (p.c1 - p.a) / 3, p.c1, p.c2, p.b, 1 - 0.05 * (1 - p.b), 1]
        slopes = [p.df0_at_0, 0.6, 0.9, 1.2, 1.2, None, 1.3, 1.0]
        free = 5
    else:
        knots = [0, p.a / 2, p.a, p.c1, p.c2, p.b, 1]
        slopes = [p.df1_at_0, 2.0, 1.4, 1.15, None, 0.55, p.df1_at_1]
        free = 4
    slopes = [0.0 if s is None else s for s in slopes]
    knots, slopes = _profile(knots, slopes, free)
    if slopes[free] <= 0:
        raise InfeasibleExampleError("1", f"f{which}: no positive derivative profile for these params")
    values = np.concatenate([[0.0], np.cumsum(np.diff(knots) * (slopes[:-1] + slopes[1:]) / 2)])
    # pin the fixed points exactly
    values[0], values[-1] = 0.0, 1.0
    from .maps import spline_map
    fmap = spline_map(dom, knots, values, slopes, alpha=1.0, epsilon=0.1, name=f"f{which}")
    fields_ = {k: v for k, v in asdict(p).items()}
    return _with_source(fmap, {"family": f"paper_f{which}", "params": fields_})


def _with_source(fmap, source):
    from dataclasses import replace
    return replace(fmap, source=source)


register_family("paper_f0", lambda domain, **kw: _example_map(0, IntervalExampleParams(**kw)))
register_family("paper_f1", lambda domain, **kw: _example_map(1, IntervalExampleParams(**kw)))


def paper_interval_example(params: Optional[IntervalExampleParams] = None,
                           check: bool = True) -> GeneratorSystem:
    """The two-generator interval system; conditions are re-verified."""
    params = params or IntervalExampleParams()
    system = GeneratorSystem(DomainSpace(INTERVAL), [_example_map(0, params), _example_map(1, params)])
    if check:
        report = verify_example_conditions(system, params)
        for name, res in report.results.items():
            if not res.passed:
                raise InfeasibleExampleError(name, res.detail)
    return system


@dataclass
class ConditionResult:
    passed: bool
    detail: str
    witness: Optional[dict] = None


@dataclass
class ConditionReport:
    results: Dict[str, ConditionResult] = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.results.values())

    def to_dict(self):
        return {"all_pass": self.all_pass,
                "conditions": {k: asdict(v) for k, v in self.results.items()}}


def _interior_fixed_points(g, grid=FIXED_POINT_GRID):
    xs = np.arange(1, grid) / grid
    gap = g.lift(xs) - xs
    idx = np.nonzero((gap[:-1] == 0) | (np.sign(gap[:-1]) != np.sign(gap[1:])))[0]
    return [float(xs[i]) for i in idx[:5]]


def _non_resonance(d0: float, d1: float):
    if abs(d0 - 0.5) < 1e-12 and abs(d1 - 3.0) < 1e-12:
        return True, "log(1/2)/log(3) is irrational: 2^p = 3^q has no solution in positive integers"
    ratio = math.log(d0) / math.log(d1)
    approx = Fraction(ratio).limit_denominator(1000)
    close = abs(float(approx) - ratio) < 1e-9
    return (not close), f"ratio {ratio!r}; nearest p/q (q<=1000) {approx} (numerical heuristic)"


def verify_example_conditions(system: GeneratorSystem,
                              params: Optional[IntervalExampleParams] = None) -> ConditionReport:
    """Numerical check of conditions (1)-(4) of the interval example."""
    p = params or IntervalExampleParams()
    rep = ConditionReport()
    if system.domain.kind != INTERVAL or system.d != 2 or not system.is_diffeomorphism_system:
        msg = "not a pair of diffeomorphisms of the unit interval"
        for name in ("1", "2", "3", "4a", "4b", "4c"):
            rep.results[name] = ConditionResult(False, msg)
        return rep
    f0, f1 = system.generators
    d = lambda g, x: float(g.dlift(x))

    ends = {f"f{i}({e})": float(g.lift(float(e))) for i, g in enumerate((f0, f1)) for e in (0, 1)}
    interior = {f"f{i}": _interior_fixed_points(g) for i, g in enumerate((f0, f1))}
    ok1 = all(abs(v - float(k[-2])) <= 1e-12 for k, v in ends.items()) \
        and not any(interior.values())
    rep.results["1"] = ConditionResult(
        ok1, "fixed points only at 0 and 1 (sign changes of f(x)-x on a 2^14 grid; numerical proxy)",
        {"endpoint_values": ends, "interior_fixed_points": interior})

    vals = {"Df0(0)": d(f0, 0.0), "Df0(1)": d(f0, 1.0), "Df1(0)": d(f1, 0.0), "Df1(1)": d(f1, 1.0)}
    ok2 = (vals["Df0(0)"] < 1 - 1e-9 and abs(vals["Df0(1)"] - 1) <= 1e-9
           and vals["Df1(0)"] > 1 + 1e-9 and vals["Df1(1)"] <= 1 + 1e-9)
    rep.results["2"] = ConditionResult(ok2, "Df0(0)<1, Df0(1)=1, Df1(0)>1, Df1(1)<=1", vals)

    ok3, why = _non_resonance(vals["Df0(0)"], vals["Df1(0)"])
    rep.results["3"] = ConditionResult(ok3, why)

    g = lambda lo, hi: np.linspace(lo, hi, CONDITION_GRID + 1)
    img0 = f0.lift(g(p.c1, p.b))
    img1 = f1.lift(g(p.a, p.c2))
    lo_img = min(img0.min(), img1.min())
    hi_img = max(img0.max(), img1.max())
    ok4a = bool(lo_img >= p.a and hi_img <= p.b)
    rep.results["4a"] = ConditionResult(
        ok4a, "f0([c1,b]) u f1([a,c2]) in [a,b]",
        {"image_min": float(lo_img), "image_max": float(hi_img)})

    m1 = float(np.min(f1.dlift(g(p.a, p.c1))))
    m0 = float(np.min(f0.dlift(g(p.c2, p.b))))
    rep.results["4b"] = ConditionResult(bool(m1 > 1 and m0 > 1), "Df1>1 on [a,c1], Df0>1 on [c2,b]",
                                        {"min_Df1_a_c1": m1, "min_Df0_c2_b": m0})

    xs = g(p.c1, p.c2)
    mm = float(np.min(np.maximum(f0.dlift(xs), f1.dlift(xs))))
    rep.results["4c"] = ConditionResult(bool(mm > 1), "min over [c1,c2] of max(Df0, Df1) > 1",
                                        {"min_max_derivative": mm})
    return rep


@dataclass
class TrapResult:
    generator: Optional[int]
    m: int
    point: float


def reach_trapping_region(system: GeneratorSystem, x: float,
                          params: Optional[IntervalExampleParams] = None,
                          budget: int = 100_000) -> TrapResult:
    """First ``(i, m)`` with ``f_i^m(x)`` in ``[a, b]``, iterating each generator alone."""
    p = params or IntervalExampleParams()
    if not 0 < x < 1:
        raise ParameterError("x must lie in (0, 1)")
    if p.a <= x <= p.b:
        return TrapResult(None, 0, x)
    f0, f1 = system.generators[0].lift, system.generators[1].lift
    y0 = y1 = float(x)
    for m in range(1, budget + 1):
        y0, y1 = f0(y0), f1(y1)
        if p.a <= y0 <= p.b:
            return TrapResult(0, m, y0)
        if p.a <= y1 <= p.b:
            return TrapResult(1, m, y1)
    raise ExampleInvalidError(
        f"budget {budget} exhausted from x={x!r}: f0^m={y0!r}, f1^m={y1!r}")


def staying_branch(system: GeneratorSystem, x: float, horizon: int,
                   params: Optional[IntervalExampleParams] = None, return_logs: bool = False):
    """Branch keeping the orbit of ``x`` in ``[a, b]`` with every step expanding.

    ``[a, c1]`` uses ``f1``, ``[c2, b]`` uses ``f0``, and in between the
    generator with the larger derivative (ties go to ``f0``).
    """
    p = params or IntervalExampleParams()
    if not p.a <= x <= p.b:
        raise ParameterError(f"x={x} is not in [a, b]")
    gens = system.generators
    lifts = [g.lift for g in gens]
    dl = [g.dlift for g in gens]
    letters = np.empty(horizon, dtype=np.int8)
    logs = np.empty(horizon) if return_logs else None
    a, c1, c2, b = p.a, p.c1, p.c2, p.b
    y = float(x)
    for n in range(horizon):
        if y <= c1:
            j = 1
            dv = dl[1](y)
        elif y >= c2:
            j = 0
            dv = dl[0](y)
        else:
            d0, d1 = dl[0](y), dl[1](y)
            j, dv = (1, d1) if d1 > d0 else (0, d0)
        if not dv > 1.0:
            raise ExampleInvalidError(f"step {n}: no expanding generator at y={y!r}")
        y = lifts[j](y)
        if not a <= y <= b:
            raise ExampleInvalidError(f"step {n}: orbit left [a, b] at y={y!r}")
        letters[n] = j
        if return_logs:
            logs[n] = math.log(dv)
    word = Word(letters.tolist())
    return (word, logs) if return_logs else word


def induced_cover(system: GeneratorSystem, params: Optional[IntervalExampleParams] = None,
                  margin: float = 1e-9):
    """Cover of ``[a, b]`` matching the staying-branch rule, for
    :func:`expansion_lab.classify.build_branch_from_cover`."""
    from .classify import CoverElement

    p = params or IntervalExampleParams()
    f0, f1 = system.generators
    gap = lambda x: float(f1.dlift(x) - f0.dlift(x))
    # split points of [c1, c2] where f1' - f0' changes sign
    xs = np.linspace(p.c1, p.c2, 257)
    gs = np.array([gap(x) for x in xs])
    cuts = [p.c1]
    for i in range(len(xs) - 1):
        if gs[i] * gs[i + 1] < 0:
            cuts.append(brentq(gap, xs[i], xs[i + 1]))
    cuts.append(p.c2)
    pieces: List[Tuple[float, float, int]] = [(p.a, p.c1, 1)]
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        pieces.append((lo, hi, 1 if gap(0.5 * (lo + hi)) > 0 else 0))
    pieces.append((p.c2, p.b, 0))
    cover = []
    for lo, hi, j in pieces:
        pts = np.linspace(lo, hi, 1025)
        sigma = float(np.max(1 / system.generators[j].dlift(pts))) + margin
        cover.append(CoverElement((lo, hi), (j,), sigma))
    return cover


def figure_csv(system: GeneratorSystem, points: int = 257) -> str:
    """``x, f0(x), f1(x), ...`` samples for external plotting."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x"] + [f"f{i}" for i in range(system.d)])
    for x in np.linspace(0, 1, points):
        w.writerow([repr(float(x))] + [repr(float(g(float(x)))) for g in system.generators])
    return buf.getvalue()
