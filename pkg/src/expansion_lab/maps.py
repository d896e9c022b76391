"""Closed-form map families and the cubic Hermite spline backend."""
from __future__ import annotations

import math
from bisect import bisect_right
from typing import Callable, Dict

import numpy as np

from .core import CIRCLE, INTERVAL, DomainSpace, SmoothMap1D
from .errors import InvariantViolation, ParameterError

TWO_PI = 2.0 * math.pi

HOLDER_GRID = 2 ** 14
HOLDER_INFLATION = 1.25


class HermiteSpline:
    """Piecewise cubic Hermite interpolant with exact derivative.

    Scalars take a pure-Python path (``bisect`` + Horner), which is several
    times faster than numpy for the long scalar orbit loops.
    """

    def __init__(self, knots, values, derivs):
        t = np.asarray(knots, dtype=float)
        y = np.asarray(values, dtype=float)
        m = np.asarray(derivs, dtype=float)
        if t.ndim != 1 or len(t) < 2 or not (len(t) == len(y) == len(m)):
            raise InvariantViolation("spline_shape", "knots, values and derivs must be equal-length 1D")
        if np.any(np.diff(t) <= 0):
            raise InvariantViolation("spline_knots", "knots must be strictly increasing")
        h = np.diff(t)
        slope = np.diff(y) / h
        self.knots = t
        self.values = y
        self.derivs = m
        self.c0 = y[:-1]
        self.c1 = m[:-1]
        self.c2 = (3 * slope - 2 * m[:-1] - m[1:]) / h
        self.c3 = (m[:-1] + m[1:] - 2 * slope) / h ** 2
        self._t = t.tolist()
        self._coef = list(zip(self.c0.tolist(), self.c1.tolist(), self.c2.tolist(), self.c3.tolist()))
        self._last = len(t) - 2

    def _seg(self, x):
        j = bisect_right(self._t, x) - 1
        return 0 if j < 0 else (self._last if j > self._last else j)

    def __call__(self, x):
        if type(x) is float or np.ndim(x) == 0:
            j = self._seg(x)
            u = x - self._t[j]
            c0, c1, c2, c3 = self._coef[j]
            return c0 + u * (c1 + u * (c2 + u * c3))
        x = np.asarray(x, dtype=float)
        j = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, self._last)
        u = x - self.knots[j]
        return self.c0[j] + u * (self.c1[j] + u * (self.c2[j] + u * self.c3[j]))

    def derivative(self, x):
        if type(x) is float or np.ndim(x) == 0:
            j = self._seg(x)
            u = x - self._t[j]
            _, c1, c2, c3 = self._coef[j]
            return c1 + u * (2 * c2 + 3 * c3 * u)
        x = np.asarray(x, dtype=float)
        j = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, self._last)
        u = x - self.knots[j]
        return self.c1[j] + u * (2 * self.c2[j] + 3 * self.c3[j] * u)

    def derivative_extrema(self):
        """Exact (min, max) of the derivative over the knot range."""
        lo, hi = math.inf, -math.inf
        for j, (_, c1, c2, c3) in enumerate(self._coef):
            h = self._t[j + 1] - self._t[j]
            cands = [0.0, h]
            if c3 != 0:
                u = -c2 / (3 * c3)
                if 0 < u < h:
                    cands.append(u)
            for u in cands:
                v = c1 + u * (2 * c2 + 3 * c3 * u)
                lo, hi = min(lo, v), max(hi, v)
        return lo, hi


def estimate_holder_constant(dlift, domain: DomainSpace, alpha: float, epsilon: float,
                             grid: int = HOLDER_GRID, inflation: float = HOLDER_INFLATION) -> float:
    """Grid estimate of the Hoelder constant of ``log|f'|``, inflated.

    Pairs ``(x, x + s)`` with ``x`` on a ``grid``-point mesh and ``s`` on a
    geometric ladder from ``epsilon/100`` to ``epsilon``.
    """
    xs = np.arange(grid) / grid
    logd = lambda x: np.log(np.abs(dlift(x)))
    base = logd(xs)
    best = 0.0
    for s in np.geomspace(epsilon / 100, epsilon, 24):
        ys = xs + s
        if domain.is_circle:
            ys = ys - np.floor(ys)
            mask = slice(None)
        else:
            mask = ys <= 1.0
        diff = np.abs(logd(ys[mask]) - base[mask])
        if diff.size:
            best = max(best, float(diff.max()) / s ** alpha)
    return inflation * best


def spline_map(domain: DomainSpace, knots, values, derivs, alpha: float = 1.0,
               epsilon: float = 0.1, holder_const=None, name: str = "spline") -> SmoothMap1D:
    """Build a map from Hermite data of its lift on ``[0, 1]``.

    On the circle ``values[-1] - values[0]`` must be a nonzero integer (the
    degree) and the end derivatives must agree.  Maps whose derivative
    vanishes anywhere are rejected.
    """
    sp = HermiteSpline(knots, values, derivs)
    if sp.knots[0] != 0.0 or sp.knots[-1] != 1.0:
        raise InvariantViolation("spline_knots", "knots must span exactly [0, 1]")
    dmin, dmax = sp.derivative_extrema()
    if dmin * dmax <= 0 or min(abs(dmin), abs(dmax)) < 1e-12:
        raise InvariantViolation("local_diffeomorphism", "spline derivative vanishes or changes sign")
    jump = sp.values[-1] - sp.values[0]
    if domain.is_circle:
        degree = int(round(jump))
        if degree == 0 or abs(jump - degree) > 1e-12:
            raise InvariantViolation("circle_degree", f"lift increment {jump} is not a nonzero integer")
        if abs(sp.derivs[0] - sp.derivs[-1]) > 1e-12:
            raise InvariantViolation("circle_periodicity", "end derivatives differ")
    else:
        degree = 1 if jump > 0 else -1
        if min(sp.values[0], sp.values[-1]) < 0 or max(sp.values[0], sp.values[-1]) > 1:
            raise InvariantViolation("interval_image", "spline does not map [0,1] into itself")
    if holder_const is None:
        holder_const = estimate_holder_constant(sp.derivative, domain, alpha, epsilon)
    return SmoothMap1D(
        domain=domain, lift=sp, dlift=sp.derivative, alpha=alpha,
        holder_const=float(holder_const), epsilon=epsilon, degree=degree, name=name,
        source={"spline": {"knots": sp.knots.tolist(), "values": sp.values.tolist(),
                           "derivs": sp.derivs.tolist()},
                "alpha": alpha, "epsilon": epsilon, "holder_const": float(holder_const)},
    )


def derivative_profile_map(domain: DomainSpace, knots, slopes, **kw) -> SmoothMap1D:
    """Map whose derivative is the piecewise-linear interpolant of ``slopes``.

    The lift is the exact antiderivative, a piecewise quadratic, stored as a
    Hermite spline (its cubic coefficients vanish).
    """
    knots = np.asarray(knots, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    values = np.concatenate([[0.0], np.cumsum(np.diff(knots) * (slopes[:-1] + slopes[1:]) / 2)])
    return spline_map(domain, knots, values, slopes, **kw)


# -- closed-form families -----------------------------------------------------

def _const(c):
    def f(x):
        if np.ndim(x) == 0:
            return c
        return np.full(np.shape(x), c, dtype=float)
    return f


def expanding_map(m: int = 2, domain: DomainSpace = DomainSpace(CIRCLE)) -> SmoothMap1D:
    """``x -> m x mod 1`` for an integer ``|m| >= 2``."""
    m = int(m)
    if abs(m) < 2:
        raise ParameterError("expanding map needs |m| >= 2")
    return SmoothMap1D(domain, lambda x: m * x, _const(float(m)), alpha=1.0,
                       holder_const=0.0, epsilon=0.25, degree=m,
                       name="doubling" if m == 2 else f"times{m}", digit_base=m,
                       source={"family": "expanding", "params": {"m": m}})


def doubling_map() -> SmoothMap1D:
    return expanding_map(2)


def perturbed_doubling_map(eps: float) -> SmoothMap1D:
    """``x -> 2x + eps sin(2 pi x) / (2 pi) mod 1`` for ``|eps| < 1``."""
    eps = float(eps)
    if not abs(eps) < 1:
        raise ParameterError(f"eps={eps} outside (-1, 1)")
    if eps == 0:
        m = doubling_map()
        return m
    c1 = abs(eps) * TWO_PI / (2 - abs(eps))
    return SmoothMap1D(
        DomainSpace(CIRCLE),
        lambda x: 2 * x + eps * np.sin(TWO_PI * x) / TWO_PI,
        lambda x: 2 + eps * np.cos(TWO_PI * x),
        alpha=1.0, holder_const=c1, epsilon=0.25, degree=2, name=f"perturbed_doubling({eps})",
        source={"family": "perturbed_doubling", "params": {"eps": eps}},
    )


def rotation_map(gamma: float) -> SmoothMap1D:
    gamma = float(gamma)
    return SmoothMap1D(DomainSpace(CIRCLE), lambda x: x + gamma, _const(1.0), alpha=1.0,
                       holder_const=0.0, epsilon=0.25, degree=1, name=f"rotation({gamma:.6g})",
                       source={"family": "rotation", "params": {"gamma": gamma}})


def identity_map(domain: DomainSpace = DomainSpace(CIRCLE)) -> SmoothMap1D:
    return SmoothMap1D(domain, lambda x: x * 1.0, _const(1.0), alpha=1.0, holder_const=0.0,
                       epsilon=0.25, degree=1, name="identity",
                       source={"family": "identity", "params": {}})


def sine_circle_map(amp: float, shift: float = 0.0) -> SmoothMap1D:
    """Degree-one map ``x + shift + amp sin(2 pi x) / (2 pi)``, ``|amp| < 1``."""
    amp, shift = float(amp), float(shift)
    if not abs(amp) < 1:
        raise ParameterError("sine circle map needs |amp| < 1")
    return SmoothMap1D(
        DomainSpace(CIRCLE),
        lambda x: x + shift + amp * np.sin(TWO_PI * x) / TWO_PI,
        lambda x: 1 + amp * np.cos(TWO_PI * x),
        alpha=1.0, holder_const=abs(amp) * TWO_PI / (1 - abs(amp)), epsilon=0.25, degree=1,
        name=f"sine_circle({amp:.6g},{shift:.6g})",
        source={"family": "sine_circle", "params": {"amp": amp, "shift": shift}},
    )


def mobius_map(r: float) -> SmoothMap1D:
    """Interval diffeomorphism ``r x / (1 + (r - 1) x)`` fixing 0 and 1."""
    r = float(r)
    if r <= 0:
        raise ParameterError("mobius map needs r > 0")
    return SmoothMap1D(
        DomainSpace(INTERVAL),
        lambda x: r * x / (1 + (r - 1) * x),
        lambda x: r / (1 + (r - 1) * x) ** 2,
        alpha=1.0, holder_const=2 * abs(r - 1) / min(1.0, r), epsilon=0.25, degree=1,
        name=f"mobius({r:.6g})", source={"family": "mobius", "params": {"r": r}},
    )


FAMILIES: Dict[str, Callable[..., SmoothMap1D]] = {
    "expanding": lambda domain, m=2: expanding_map(m),
    "doubling": lambda domain: doubling_map(),
    "perturbed_doubling": lambda domain, eps: perturbed_doubling_map(eps),
    "rotation": lambda domain, gamma: rotation_map(gamma),
    "identity": lambda domain: identity_map(domain),
    "sine_circle": lambda domain, amp, shift=0.0: sine_circle_map(amp, shift),
    "mobius": lambda domain, r: mobius_map(r),
}


def register_family(name: str, builder: Callable[..., SmoothMap1D]) -> None:
    FAMILIES[name] = builder


def family_map(name: str, domain: DomainSpace, params=None, **overrides) -> SmoothMap1D:
    """Instantiate a registered family, optionally overriding Hoelder data."""
    if name not in FAMILIES:
        raise InvariantViolation("family", f"unknown family {name!r}")
    try:
        fmap = FAMILIES[name](domain, **(params or {}))
    except TypeError as exc:
        raise InvariantViolation("family_params", f"{name}: {exc}") from None
    if fmap.domain != domain:
        raise InvariantViolation("common_domain", f"family {name} lives on {fmap.domain.kind}")
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        from dataclasses import replace
        fmap = replace(fmap, **overrides)
    return fmap


def validate_map(fmap: SmoothMap1D, grid: int = 4096, tol: float = 1e-9) -> None:
    """Grid check of the load-time map invariants; raises on the first failure."""
    xs = np.arange(grid + (0 if fmap.domain.is_circle else 1)) / grid
    dv = np.abs(fmap.dlift(xs))
    if not np.all(np.isfinite(dv)) or dv.min() <= 1e-300:
        raise InvariantViolation("local_diffeomorphism", f"{fmap.name}: |f'| vanishes on the grid")
    # sup of -log theta is finite iff |f'| is bounded
    logd = np.log(dv)
    for s in np.geomspace(fmap.epsilon / 100, fmap.epsilon, 6) * (1 - 1e-9):
        ys = xs + s
        if fmap.domain.is_circle:
            ys = ys - np.floor(ys)
            keep = np.ones_like(xs, dtype=bool)
        else:
            keep = ys <= 1.0
        gap = np.abs(np.log(np.abs(fmap.dlift(ys[keep]))) - logd[keep])
        bound = fmap.holder_const * s ** fmap.alpha
        if gap.size and gap.max() > bound * (1 + tol) + tol:
            raise InvariantViolation(
                "holder_log_derivative",
                f"{fmap.name}: |log f'(x) - log f'(y)| = {gap.max():.3g} > C1 d^alpha = {bound:.3g}")
    ys = np.linspace(0.05, 0.95, 5)
    for y in ys:
        for b in range(fmap.branch_count):
            x = fmap.inverse_branch(float(y), b)
            if fmap.domain.dist(fmap(x), y) > 1e-12:
                raise InvariantViolation("inverse_branch", f"{fmap.name}: branch {b} misses y={y}")
