"""Hyperbolic preballs: inverse-branch pullback and distortion checks.

A preball is stored as its base point ``x`` and the two half-widths
``left`` / ``right`` in lift coordinates, so ``V = [x - left, x + right]``
may cross 0 on the circle without any endpoint-order ambiguity.  Forward
images are computed with extended lifts and distances along them are
plain differences; this equals the circle distance while the arcs involved
are shorter than 1/2, which holds for every ``delta < 1/4``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    GeneratorSystem,
    OrbitRecord,
    Word,
    WordLike,
    as_word,
    compose_orbit,
    composed_lift,
    solve_monotone,
)
from .errors import ParameterError, PreconditionError, ReduceDeltaError
from .pliss import LogPhiSequence, is_hyperbolic_time

NEWTON_TOL = 1e-13


def distortion_constant(C1: float, alpha: float, delta: float, lam: float) -> float:
    """``K = exp(C1 delta^alpha / (1 - lam^alpha))``."""
    if not 0 < lam < 1:
        raise ParameterError(f"lambda={lam} must lie in (0, 1)")
    if C1 < 0 or not 0 < alpha <= 1 or delta <= 0:
        raise ParameterError("need C1 >= 0, alpha in (0, 1], delta > 0")
    return math.exp(C1 * delta ** alpha / (1 - lam ** alpha))


@dataclass(frozen=True, eq=False)
class Preball:
    system: GeneratorSystem
    word: Word
    x: float
    n: int
    delta: float
    lam: float
    left: float
    right: float
    image_center: float
    image_left: float
    image_right: float
    orbit: OrbitRecord
    K: float
    alpha: float
    C1: float
    certified: bool
    notes: tuple = ()

    @property
    def lo(self) -> float:
        return self.x - self.left

    @property
    def hi(self) -> float:
        return self.x + self.right

    @property
    def diameter(self) -> float:
        return self.left + self.right

    def forward(self, y, i: Optional[int] = None):
        """``F^i`` of lift-coordinate points (default ``i = n``)."""
        return composed_lift(self.system, self.word, y, self.n if i is None else i)

    def image_offsets(self) -> Tuple[float, float]:
        """Forward images of the endpoints relative to ``F^n(x)``; these
        should be ``(-image_left, +image_right)`` for orientation-preserving
        compositions."""
        f = self.forward(np.array([self.lo, self.x, self.hi]))
        return float(f[0] - f[1]), float(f[2] - f[1])

    def to_dict(self):
        return {"x": self.x, "n": self.n, "word": list(self.word.indices[:self.n]),
                "delta": self.delta, "lambda": self.lam, "interval": [self.lo, self.hi],
                "left": self.left, "right": self.right, "image_center": self.image_center,
                "image_radius": self.delta, "image_half_widths": [self.image_left, self.image_right],
                "distortion_K": self.K, "alpha": self.alpha, "holder_const": self.C1,
                "certified_hyperbolic_time": self.certified, "notes": list(self.notes)}


def _pull_step(g, x: float, left: float, right: float) -> Tuple[float, float]:
    """Half-widths of ``g^{-1}`` of ``[g(x) - left, g(x) + right]`` around ``x``."""
    dom = g.domain
    gx = g.lift_ext(x)
    lo_t, hi_t = gx - left, gx + right
    if not dom.is_circle:
        g0, g1 = sorted((float(g.lift(0.0)), float(g.lift(1.0))))
        if lo_t < g0 - 1e-15 or hi_t > g1 + 1e-15:
            raise ReduceDeltaError("ball leaves the image of the inverse branch", 0.0)
        lo_t, hi_t = max(lo_t, g0), min(hi_t, g1)
    dv = abs(float(g.dlift_ext(x)))

    def preimage(target, direction):
        # direction=+1 searches to the right of x
        if target == gx:
            return x
        w = max(abs(target - gx) / dv, 1e-300)
        a, b = (x, x + direction * w)
        for _ in range(200):
            if not dom.is_circle:
                b = min(max(b, 0.0), 1.0)
            fb = g.lift_ext(b)
            if (fb - target) * (g.lift_ext(a) - target) <= 0:
                break
            if not dom.is_circle and b in (0.0, 1.0):
                raise ReduceDeltaError("ball leaves the image of the inverse branch", 0.0)
            w *= 2.0
            b = x + direction * w
        lo_b, hi_b = min(a, b), max(a, b)
        return solve_monotone(g.lift_ext, g.dlift_ext, target, lo_b, hi_b, tol=NEWTON_TOL)

    if g.orientation > 0:
        p, q = preimage(lo_t, -1), preimage(hi_t, +1)
    else:
        p, q = preimage(hi_t, -1), preimage(lo_t, +1)
    return x - p, q - x


def _pullback(system, word, orbit, n, left, right):
    widths = [(left, right)]
    for i in range(n - 1, -1, -1):
        g = system.generators[word.indices[i]]
        left, right = _pull_step(g, float(orbit.points[i]), left, right)
        widths.append((left, right))
    return widths[::-1]


def _image_half_widths(system, y: float, delta: float) -> Tuple[float, float]:
    if system.domain.is_circle:
        return delta, delta
    return min(delta, y), min(delta, 1.0 - y)


def largest_feasible_delta(system, word, x, n, delta_max, iters=40) -> float:
    word = as_word(word)
    orbit = compose_orbit(system, word, x, n)
    y = float(orbit.points[n])
    lo, hi = 0.0, delta_max
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        try:
            _pullback(system, word, orbit, n, *_image_half_widths(system, y, mid))
            lo = mid
        except ReduceDeltaError:
            hi = mid
    return lo


def _uniform_log_phi(system, word, orbit, widths, samples=33) -> np.ndarray:
    """``max log theta`` over each intermediate image ``f^i(V)`` (sampled)."""
    out = np.empty(orbit.n)
    for i in range(orbit.n):
        g = system.generators[word.indices[i]]
        left, right = widths[i]
        xi = float(orbit.points[i])
        pts = np.linspace(xi - left, xi + right, samples)
        out[i] = float(np.max(-np.log(np.abs(g.dlift_ext(pts)))))
    return out


def build_preball(system: GeneratorSystem, word: WordLike, x: float, n: int, delta: float,
                  sigma: Optional[float] = None, strict: bool = False) -> Preball:
    """Pull ``B(f^n(x), delta)`` back along the orbit of ``x``.

    With ``sigma`` given, ``lambda = sigma``; in ``strict`` mode ``n`` must
    be a sigma-hyperbolic time of the pointwise ``log theta`` sequence.
    Without ``sigma``, ``lambda`` is the smallest rate for which ``n`` is a
    hyperbolic time of the sup of ``theta`` over each intermediate image
    (the uniform local constant); if that rate is not below 1 the preball
    is returned uncertified with ``K = inf``.
    """
    word = as_word(word)
    if delta <= 0:
        raise ParameterError("delta must be > 0")
    eps = min(g.epsilon for g in system.generators)
    notes = []
    if delta > eps:
        if strict:
            raise PreconditionError(f"delta={delta} exceeds the locality scale {eps}")
        notes.append(f"delta exceeds locality scale {eps}")
    orbit = compose_orbit(system, word, x, n)
    seq = LogPhiSequence.from_orbit(orbit)
    certified = False
    if sigma is not None and n >= 1:
        certified = is_hyperbolic_time(seq, n, sigma)
        if strict and not certified:
            raise PreconditionError(f"n={n} is not a {sigma:.6g}-hyperbolic time of x={x}")
        if not certified:
            notes.append("n is not a hyperbolic time; contraction not guaranteed")
    y = float(orbit.points[n])
    img_l, img_r = _image_half_widths(system, y, delta)
    try:
        widths = _pullback(system, word, orbit, n, img_l, img_r)
    except ReduceDeltaError:
        best = largest_feasible_delta(system, word, x, n, delta)
        raise ReduceDeltaError("ball straddles an inverse-branch boundary", best) from None
    alpha = min(g.alpha for g in system.generators)
    C1 = max(g.holder_const for g in system.generators)
    if sigma is not None:
        lam = sigma
    elif n == 0:
        lam = 0.5
    else:
        phi = _uniform_log_phi(system, word, orbit, widths)
        ell = np.arange(1, n + 1)
        lam = math.exp(float(np.max(np.cumsum(phi[::-1]) / ell)))
        certified = lam < 1
        if not certified:
            notes.append("uniform local rate is not contracting")
    K = distortion_constant(C1, alpha, delta, lam) if lam < 1 else math.inf
    left, right = widths[0]
    return Preball(system, word, float(orbit.points[0]), n, delta, lam, left, right, y,
                   img_l, img_r, orbit, K, alpha, C1, certified, tuple(notes))


def uniform_radius(system: GeneratorSystem, centers: int = 2 ** 12) -> float:
    """Constructive uniform radius: largest ``delta <= eps`` such that every
    generator is injective on every ball of radius ``delta * sup theta``,
    searched over ``centers`` grid centres, then halved."""
    eps = min(g.epsilon for g in system.generators)
    if not system.domain.is_circle:
        # monotone interval maps are injective on every ball
        return eps / 2
    cs = np.arange(centers) / centers
    sup_theta = max(float(np.max(1 / np.abs(g.dlift(cs)))) for g in system.generators)

    def ok(delta):
        rho = min(delta * sup_theta, 0.5)
        return all(np.all(np.abs(g.lift_ext(cs + rho) - g.lift_ext(cs - rho)) < 1.0)
                   for g in system.generators)

    lo, hi = 0.0, eps
    if ok(hi):
        return hi / 2
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo / 2


# -- verification ---------------------------------------------------------------

@dataclass
class ContractionReport:
    max_margin: float
    passed: bool
    samples: int
    worst: Optional[dict] = None
    ratios: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self):
        return {"max_margin": self.max_margin, "pass": self.passed, "samples": self.samples,
                "worst": self.worst}


def verify_contraction(pb: Preball, samples: int = 64, tol: float = 1e-10,
                       keep_ratios: bool = False) -> ContractionReport:
    """Check ``d(f^i y, f^i z) <= lam^{n-i} d(f^n y, f^n z)`` on a sample grid.

    ``max_margin`` is the largest ``lhs - rhs`` over all pairs and ``i``.
    """
    if samples < 2:
        raise ParameterError("samples must be >= 2")
    ys = np.linspace(pb.lo, pb.hi, samples)
    traj = np.empty((pb.n + 1, samples))
    traj[0] = ys
    for i in range(pb.n):
        traj[i + 1] = pb.system.generators[pb.word.indices[i]].lift_ext(traj[i])
    iu, ju = np.triu_indices(samples, 1)
    dn = np.abs(traj[pb.n, iu] - traj[pb.n, ju])
    worst_margin, worst = -math.inf, None
    ratios = []
    for i in range(pb.n + 1):
        di = np.abs(traj[i, iu] - traj[i, ju])
        margin = di - pb.lam ** (pb.n - i) * dn
        k = int(np.argmax(margin))
        if margin[k] > worst_margin:
            worst_margin = float(margin[k])
            worst = {"i": i, "y": float(ys[iu[k]]), "z": float(ys[ju[k]])}
        if keep_ratios:
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios.append(di / dn)
    return ContractionReport(worst_margin, worst_margin <= tol, samples, worst,
                             np.array(ratios) if keep_ratios else None)


@dataclass
class RegularityRecord:
    R: float
    r: float
    ratio: float
    L_bound: float
    lower_ok: bool
    upper_ok: bool
    ratio_ok: bool
    birkhoff_log_theta: float

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok and self.ratio_ok

    def to_dict(self):
        return {"R": self.R, "r": self.r, "ratio": self.ratio, "L_bound": self.L_bound,
                "lower_ok": self.lower_ok, "upper_ok": self.upper_ok, "ratio_ok": self.ratio_ok,
                "S_n_log_theta": self.birkhoff_log_theta, "pass": self.passed}


def check_regularity(pb: Preball, rtol: float = 1e-9) -> RegularityRecord:
    """Inner/outer radii of ``V`` around ``x`` against ``delta K^{+-1} e^{S_n phi}``.

    Each side is compared with its own image half-width, which is ``delta``
    except where an interval ball is truncated at 0 or 1.
    """
    S = -math.fsum(pb.orbit.log_derivs)
    K = pb.K
    scale = math.exp(S)
    sides = [(pb.left, pb.image_left), (pb.right, pb.image_right)]
    flips = sum(pb.system.generators[w].orientation < 0 for w in pb.word.indices[:pb.n])
    if flips % 2:
        sides = [(pb.left, pb.image_right), (pb.right, pb.image_left)]
    lower_ok = all(pre >= img * scale / K * (1 - rtol) for pre, img in sides)
    upper_ok = all(pre <= img * scale * K * (1 + rtol) for pre, img in sides)
    R, r = max(pb.left, pb.right), min(pb.left, pb.right)
    ratio = R / r if r > 0 else math.inf
    L = K * K
    symmetric = pb.image_left == pb.image_right
    ratio_ok = (ratio <= L * (1 + rtol)) if symmetric else True
    return RegularityRecord(R, r, ratio, L, lower_ok, upper_ok, ratio_ok, S)


@dataclass
class DistortionReport:
    K_bound: float
    max_observed_ratio: float
    passed: bool
    pairs_checked: int
    skipped: int
    regularity: RegularityRecord
    notes: List[str] = field(default_factory=list)

    def to_dict(self):
        return {"K_bound": self.K_bound, "max_observed_ratio": self.max_observed_ratio,
                "pass": self.passed, "pairs_checked": self.pairs_checked,
                "skipped": self.skipped, "regularity": self.regularity.to_dict(),
                "notes": list(self.notes)}


def random_subinterval_pairs(pb: Preball, count: int, rng: np.random.Generator):
    """``count`` random pairs of subintervals of ``V`` (lift coordinates)."""
    u = np.sort(rng.random((count, 2, 2)), axis=2)
    iv = pb.lo + u * pb.diameter
    return [((a[0], a[1]), (b[0], b[1])) for a, b in iv]


def check_bounded_distortion(pb: Preball, subinterval_pairs: Sequence, rtol: float = 1e-9
                             ) -> DistortionReport:
    """Verify ``m(f^n A)/m(f^n B) <= K m(A)/m(B)`` for every ``(A, B)``."""
    worst = 0.0
    skipped = 0
    checked = 0
    notes = []
    lo, hi = pb.lo - 1e-15, pb.hi + 1e-15
    for (a0, a1), (b0, b1) in subinterval_pairs:
        if min(a0, a1, b0, b1) < lo or max(a0, a1, b0, b1) > hi:
            raise ParameterError("subinterval pair is not contained in the preball")
        mA, mB = abs(a1 - a0), abs(b1 - b0)
        if mB == 0 or mA == 0:
            skipped += 1
            continue
        fa = pb.forward(np.array([a0, a1]))
        fb = pb.forward(np.array([b0, b1]))
        ratio = (abs(fa[1] - fa[0]) / abs(fb[1] - fb[0])) / (mA / mB)
        worst = max(worst, ratio)
        checked += 1
    if skipped:
        notes.append(f"{skipped} degenerate pairs skipped")
    reg = check_regularity(pb)
    return DistortionReport(pb.K, worst, worst <= pb.K * (1 + rtol), checked, skipped, reg, notes)
