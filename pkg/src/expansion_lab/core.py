"""Domains, maps, words and orbit composition.

Points of the circle are represented in ``[0, 1)``, points of the unit
interval in ``[0, 1]``.  Every map carries a *lift*: a real function whose
reduction mod 1 is the map (for the interval the lift is the map itself).
Working with lifts keeps interval arithmetic on the circle free of
wrap-around bookkeeping; see :meth:`SmoothMap1D.lift_ext`.

Generator indices in words are 0-based, matching ``Omega = {0, ..., d-1}^N``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import (
    DegenerateDerivativeError,
    InvalidWordError,
    InvariantViolation,
    OrbitLengthError,
)

CIRCLE = "circle"
INTERVAL = "interval"
SEMIGROUP = "semigroup"
SEQUENCE = "sequence"

DERIV_FLOOR = 1e-300


@dataclass(frozen=True)
class DomainSpace:
    kind: str = CIRCLE

    def __post_init__(self):
        if self.kind not in (CIRCLE, INTERVAL):
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @property
    def is_circle(self) -> bool:
        return self.kind == CIRCLE

    def canonical(self, x):
        """Map a real (or array) to its canonical representative."""
        if self.is_circle:
            r = np.mod(x, 1.0)
            # mod of a tiny negative number rounds up to exactly 1.0
            if np.ndim(r) == 0:
                r = float(r)
                return 0.0 if r >= 1.0 else r
            r = np.asarray(r, dtype=float)
            r[r >= 1.0] = 0.0
            return r
        if np.ndim(x) == 0:
            return min(max(float(x), 0.0), 1.0)
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)

    def dist(self, x, y):
        d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        if self.is_circle:
            d = np.mod(d, 1.0)
            d = np.minimum(d, 1.0 - d)
        return float(d) if np.ndim(d) == 0 else d

    def uniform(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.random(size)


def solve_monotone(F, dF, target, lo, hi, tol=1e-13, maxiter=200):
    """Solve ``F(x) = target`` for a strictly monotone ``F`` on ``[lo, hi]``.

    Safeguarded Newton: a Newton step is taken when it stays inside the
    current bracket, otherwise the bracket is bisected.
    """
    flo = F(lo) - target
    fhi = F(hi) - target
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise ValueError("target is not bracketed")
    increasing = fhi > 0
    x = 0.5 * (lo + hi)
    for _ in range(maxiter):
        fx = F(x) - target
        if fx == 0.0:
            return x
        if (fx > 0) == increasing:
            hi = x
        else:
            lo = x
        d = dF(x)
        x_new = x - fx / d if d != 0 else 0.5 * (lo + hi)
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= tol * max(1.0, abs(x)) or hi - lo <= tol:
            return x_new
        x = x_new
    return x


@dataclass(frozen=True, eq=False)
class SmoothMap1D:
    """A C^{1+alpha} local diffeomorphism of the circle or the interval.

    Parameters
    ----------
    lift, dlift : callable
        Vectorised lift on ``[0, 1]`` and its derivative.
    degree : int
        Signed degree ``lift(1) - lift(0)`` on the circle; ``+1`` or ``-1``
        (orientation) on the interval.
    holder_const : float
        Hoelder constant of ``log|f'|`` at scales below ``epsilon``.
    digit_base : int, optional
        Set for ``x -> m x mod 1`` maps; enables exact symbolic orbits.
    source : dict
        JSON-serialisable description (family + params, or spline data).
    """

    domain: DomainSpace
    lift: Callable
    dlift: Callable
    alpha: float = 1.0
    holder_const: float = 0.0
    epsilon: float = 0.1
    degree: int = 1
    name: str = "map"
    digit_base: Optional[int] = None
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise InvariantViolation("holder_alpha", f"alpha={self.alpha} not in (0, 1]")
        if self.holder_const < 0:
            raise InvariantViolation("holder_const", "must be >= 0")
        if self.epsilon <= 0:
            raise InvariantViolation("locality_scale", "epsilon must be > 0")
        if self.degree == 0:
            raise InvariantViolation("branch_count", "degree must be nonzero")

    @property
    def branch_count(self) -> int:
        return abs(self.degree)

    @property
    def orientation(self) -> int:
        return 1 if self.degree > 0 else -1

    def __call__(self, x):
        return self.domain.canonical(self.lift(x))

    def derivative(self, x):
        return self.dlift(x)

    def lift_ext(self, x):
        """Lift extended to the whole real line (circle) or ``[0, 1]``."""
        if not self.domain.is_circle:
            return self.lift(x)
        if np.ndim(x) == 0:
            k = math.floor(x)
            return self.lift(x - k) + self.degree * k
        x = np.asarray(x, dtype=float)
        k = np.floor(x)
        return self.lift(x - k) + self.degree * k

    def dlift_ext(self, x):
        if not self.domain.is_circle:
            return self.dlift(x)
        if np.ndim(x) == 0:
            return self.dlift(x - math.floor(x))
        x = np.asarray(x, dtype=float)
        return self.dlift(x - np.floor(x))

    def log_theta(self, x):
        """``log theta(x) = -log|f'(x)|``, vectorised, no degeneracy check."""
        return -np.log(np.abs(self.dlift(x)))

    def inverse_branch(self, y: float, branch: int = 0) -> float:
        """Preimage ``x`` of ``y`` on inverse branch ``branch``."""
        if not 0 <= branch < self.branch_count:
            raise ValueError(f"branch {branch} out of range [0, {self.branch_count})")
        l0 = float(self.lift(0.0))
        l1 = float(self.lift(1.0))
        if self.domain.is_circle:
            if self.degree > 0:
                t = y + math.ceil(l0 - y) + branch
            else:
                t = y + math.floor(l0 - y) - branch
        else:
            t = y
            if not min(l0, l1) <= t <= max(l0, l1):
                raise ValueError(f"{y} is outside the image of {self.name}")
        x = solve_monotone(self.lift, self.dlift, t, 0.0, 1.0)
        return self.domain.canonical(x)


@dataclass(frozen=True)
class Word:
    """Finite sequence of 0-based generator indices; ``start`` is the fiber."""

    indices: tuple = ()
    start: int = 0

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    def __len__(self):
        return len(self.indices)

    def __getitem__(self, i):
        return self.indices[i]

    @classmethod
    def constant(cls, letter: int, n: int) -> "Word":
        return cls((letter,) * n)

    @classmethod
    def periodic(cls, pattern: Sequence[int], n: int) -> "Word":
        pattern = tuple(pattern)
        return cls(tuple(pattern[i % len(pattern)] for i in range(n)))

    @classmethod
    def sequence(cls, n: int, start: int = 0) -> "Word":
        """The forced word ``start, start+1, ...`` of a non-autonomous system."""
        return cls(tuple(range(start, start + n)), start)

    def __str__(self):
        return "".join(str(i) for i in self.indices) if all(i < 10 for i in self.indices) \
            else ",".join(str(i) for i in self.indices)


WordLike = Union[Word, Sequence[int]]


def as_word(w: WordLike) -> Word:
    return w if isinstance(w, Word) else Word(tuple(w))


@dataclass(frozen=True)
class GeneratorSystem:
    domain: DomainSpace
    generators: tuple
    mode: str = SEMIGROUP

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if not self.generators:
            raise InvariantViolation("generator_count", "need at least one generator")
        if self.mode not in (SEMIGROUP, SEQUENCE):
            raise InvariantViolation("mode", f"unknown mode {self.mode!r}")
        for g in self.generators:
            if g.domain != self.domain:
                raise InvariantViolation("common_domain", f"{g.name} lives on {g.domain.kind}")

    @property
    def d(self) -> int:
        return len(self.generators)

    def __getitem__(self, i) -> SmoothMap1D:
        return self.generators[i]

    def check_word(self, word: Word, n: Optional[int] = None) -> None:
        n = len(word) if n is None else n
        if n > len(word):
            raise OrbitLengthError(f"word of length {len(word)} is shorter than n={n}")
        for pos in range(n):
            letter = word.indices[pos]
            if not 0 <= letter < self.d:
                raise InvalidWordError(f"letter {letter} at position {pos} not in [0, {self.d})")
            if self.mode == SEQUENCE and letter != word.start + pos:
                raise InvalidWordError(
                    f"sequence mode forces letter {word.start + pos} at position {pos}, got {letter}")

    def default_word(self, n: int, start: int = 0) -> Word:
        """Constant word of the first generator, or the forced sequence word."""
        if self.mode == SEQUENCE:
            return Word.sequence(n, start)
        return Word.constant(0, n)

    @property
    def is_diffeomorphism_system(self) -> bool:
        return all(g.branch_count == 1 for g in self.generators)


@dataclass(frozen=True, eq=False)
class OrbitRecord:
    x0: float
    word: Word
    points: np.ndarray
    log_derivs: np.ndarray

    @property
    def n(self) -> int:
        return len(self.log_derivs)

    def log_theta(self) -> np.ndarray:
        return -self.log_derivs

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "x", "log_deriv"])
        for i, x in enumerate(self.points):
            w.writerow([i, repr(float(x)), repr(float(self.log_derivs[i])) if i < self.n else ""])
        return buf.getvalue()


def compose_orbit(system: GeneratorSystem, word: WordLike, x0: float, n: int) -> OrbitRecord:
    """Orbit ``x_i = f^i_w(x0)`` and per-step ``log|f'_{w_{i+1}}(x_i)|``.

    Note that integer-slope maps such as the doubling map lose one bit per
    step in floating point; their float orbits collapse onto 0 after ~53
    steps.  Long statistics for such maps go through the symbolic path in
    :mod:`expansion_lab.ergodicity`.
    """
    word = as_word(word)
    if n < 0:
        raise OrbitLengthError("n must be >= 0")
    system.check_word(word, n)
    x = system.domain.canonical(float(x0))
    points = np.empty(n + 1)
    logs = np.empty(n)
    points[0] = x
    gens = system.generators
    for i in range(n):
        g = gens[word.indices[i]]
        dv = abs(float(g.dlift(x)))
        if dv < DERIV_FLOOR:
            raise DegenerateDerivativeError(f"|{g.name}'({x})| below {DERIV_FLOOR}")
        logs[i] = math.log(dv)
        x = system.domain.canonical(float(g.lift(x)))
        points[i + 1] = x
    return OrbitRecord(float(points[0]), word, points, logs)


def composed_lift(system: GeneratorSystem, word: WordLike, x, n: Optional[int] = None):
    """``F^n_w(x)`` with extended lifts (no reduction mod 1); vectorised."""
    word = as_word(word)
    n = len(word) if n is None else n
    y = x if np.ndim(x) == 0 else np.asarray(x, dtype=float)
    for i in range(n):
        y = system.generators[word.indices[i]].lift_ext(y)
    return y


def composed_log_derivative(system: GeneratorSystem, word: WordLike, x, n: Optional[int] = None):
    """``log|(f^n_w)'(x)|`` by the chain rule; vectorised over ``x``."""
    word = as_word(word)
    n = len(word) if n is None else n
    y = np.asarray(x, dtype=float)
    total = np.zeros_like(y)
    for i in range(n):
        g = system.generators[word.indices[i]]
        total = total + np.log(np.abs(g.dlift_ext(y)))
        y = g.lift_ext(y)
    return total if np.ndim(x) else float(total)


Observable = Union[Callable, str, np.ndarray]


def birkhoff_sum(orbit: OrbitRecord, observable: Observable, n: Optional[int] = None,
                 start: int = 0) -> float:
    """``sum_{i=start}^{start+n-1} phi(x_i)``.

    ``observable`` is a vectorised function of the point, or one of the
    strings ``"log_deriv"`` / ``"log_theta"`` for the step cocycles
    ``log|f'_{w_{i+1}}(x_i)|`` and its negative.
    """
    n = orbit.n - start if n is None else n
    if n < 0 or start < 0 or start + n > orbit.n:
        raise OrbitLengthError(f"window [{start}, {start + n}) exceeds orbit length {orbit.n}")
    if isinstance(observable, str):
        if observable == "log_deriv":
            vals = orbit.log_derivs[start:start + n]
        elif observable == "log_theta":
            vals = -orbit.log_derivs[start:start + n]
        else:
            raise ValueError(f"unknown observable {observable!r}")
    elif callable(observable):
        vals = np.broadcast_to(observable(orbit.points[start:start + n]), (n,))
    else:
        vals = np.asarray(observable, dtype=float)[start:start + n]
    return math.fsum(vals)


def log_inverse_lipschitz(fmap: SmoothMap1D, x: float) -> float:
    """``log theta(x) = -log|f'(x)|``."""
    dv = abs(float(fmap.dlift(fmap.domain.canonical(x))))
    if dv < DERIV_FLOOR:
        raise DegenerateDerivativeError(f"|{fmap.name}'({x})| below {DERIV_FLOOR}")
    return -math.log(dv)
