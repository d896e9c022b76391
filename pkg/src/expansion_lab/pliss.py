"""Hyperbolic times: direct definition, Pliss extraction, exponent estimates.

All comparisons are made in the log domain.  ``values[i]`` is the log of
the inverse Lipschitz constant at the i-th orbit point, so expansion shows
up as negative values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core import OrbitRecord
from .errors import OrbitLengthError, ParameterError

TIE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class LogPhiSequence:
    """``values[i] = log phi(F^i(k, x))``.

    ``mode="pointwise"`` uses ``log theta = -log|f'|`` as is; ``"inflated"``
    adds the margin ``eta`` to every value to emulate a uniform local
    Lipschitz constant.
    """

    values: np.ndarray
    mode: str = "pointwise"
    eta: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ParameterError("values must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise ParameterError("values must be finite")
        if self.eta < 0:
            raise ParameterError("eta must be >= 0")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    @classmethod
    def from_orbit(cls, orbit: OrbitRecord, mode: str = "pointwise", eta: float = 0.0):
        if mode not in ("pointwise", "inflated"):
            raise ParameterError(f"unknown mode {mode!r}")
        eta = eta if mode == "inflated" else 0.0
        return cls(-orbit.log_derivs + eta, mode, eta)


@dataclass
class HyperbolicTimeReport:
    sigma: float
    times: List[int]
    n: int
    exponent_estimate: float
    advisory: bool = False
    notes: List[str] = field(default_factory=list)

    @property
    def density(self) -> float:
        return len(self.times) / self.n if self.n else 0.0

    def to_dict(self):
        return {"sigma": self.sigma, "times": list(self.times), "density": self.density,
                "exponent_estimate": self.exponent_estimate, "n": self.n,
                "advisory": self.advisory, "notes": list(self.notes)}


def _values(seq) -> np.ndarray:
    return seq.values if isinstance(seq, LogPhiSequence) else np.asarray(seq, dtype=float)


def _check_sigma(sigma):
    if not 0 < sigma < 1:
        raise ParameterError(f"sigma={sigma} not in (0, 1)")


def is_hyperbolic_time(seq, n: int, sigma: float) -> bool:
    """True iff ``sum_{i=n-l}^{n-1} values[i] <= l log(sigma)`` for ``l = 1..n``."""
    v = _values(seq)
    _check_sigma(sigma)
    if not 1 <= n <= len(v):
        raise OrbitLengthError(f"n={n} outside [1, {len(v)}]")
    tail = np.cumsum(v[n - 1::-1])
    ell = np.arange(1, n + 1)
    return bool(np.all(tail <= ell * math.log(sigma) + TIE_SLACK))


def _exponent(v: np.ndarray) -> float:
    return float(np.mean(v)) if len(v) else 0.0


def hyperbolic_times_bruteforce(seq, sigma: float) -> HyperbolicTimeReport:
    """All sigma-hyperbolic times by the quadratic definitional scan."""
    v = _values(seq)
    _check_sigma(sigma)
    times = [n for n in range(1, len(v) + 1) if is_hyperbolic_time(v, n, sigma)]
    return HyperbolicTimeReport(sigma, times, len(v), _exponent(v))


def pliss_times(a_seq: Sequence[float], c: float, A: float) -> List[int]:
    """Indices ``n_j`` whose backward partial sums of ``a`` are all nonnegative.

    ``n`` (1-based, ``1 <= n <= N``) is returned iff
    ``sum_{i=m}^{n-1} a_i >= 0`` for every ``0 <= m < n``; equivalently the
    prefix sum ``P_n`` is at least every earlier prefix sum, so one forward
    pass with a running maximum finds them all.  If ``sum a >= c N`` and
    ``a_i <= A`` there are at least ``(c / A) N`` of them.
    """
    a = np.asarray(a_seq, dtype=float)
    if c <= 0:
        raise ParameterError("c must be > 0")
    if len(a) and A < a.max():
        raise ParameterError(f"A={A} is below max a_i={a.max()}")
    prefix = np.concatenate([[0.0], np.cumsum(a)])
    running = np.maximum.accumulate(prefix)[:-1]
    return (np.nonzero(prefix[1:] >= running - TIE_SLACK)[0] + 1).tolist()


def pliss_bound_holds(a_seq, c: float, A: float) -> Optional[bool]:
    """Density bound ``t >= (c/A) N``; None when the hypothesis fails."""
    a = np.asarray(a_seq, dtype=float)
    N = len(a)
    if math.fsum(a) < c * N:
        return None
    t = len(pliss_times(a, c, A))
    return t * A >= c * N


def hyperbolic_times(seq, a: float) -> HyperbolicTimeReport:
    """Hyperbolic times for ``sigma = exp(-a/2)`` via the Pliss extraction."""
    if a <= 0:
        raise ParameterError("a must be > 0")
    v = _values(seq)
    sigma = math.exp(-a / 2)
    notes = []
    advisory = False
    if len(v) == 0:
        return HyperbolicTimeReport(sigma, [], 0, 0.0, True, ["empty sequence"])
    if -math.fsum(v) < a * len(v) * (1 - 1e-12) - TIE_SLACK:
        advisory = True
        notes.append("mean of -log phi is below a; Pliss density bound not guaranteed")
    shifted = -v - a / 2
    A = float(shifted.max())
    if A <= 0:
        # every a_i <= 0 < c: no index can have nonnegative backward sums
        # except through exact zeros
        A = max(A, TIE_SLACK)
    times = pliss_times(shifted, a / 2, A)
    return HyperbolicTimeReport(sigma, times, len(v), _exponent(v), advisory, notes)


def expansion_exponent(seq, window: Optional[int] = None) -> float:
    """Finite-horizon proxy for ``limsup (1/n) sum values``.

    The sequence is cut into consecutive windows of length ``window``
    aligned at its end (a short leading remainder is dropped) and the
    largest window average is returned.  Default window ``ceil(n/4)``.
    This is an estimate, not the limit.
    """
    v = _values(seq)
    n = len(v)
    if n == 0:
        raise OrbitLengthError("empty sequence")
    window = math.ceil(n / 4) if window is None else int(window)
    if not 1 <= window <= n:
        raise OrbitLengthError(f"window={window} outside [1, {n}]")
    blocks = n // window
    tail = v[n - blocks * window:].reshape(blocks, window)
    return float(tail.mean(axis=1).max())
