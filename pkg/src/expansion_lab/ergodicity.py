"""Covering, exactness, minimality, equidistribution and invariant sets.

Images of intervals are tracked exactly as unions of intervals: on the
circle an arc is pushed through the extended lift (monotone on the whole
line) and then cut at integers, so no sampling is involved.  A grid cell
counts as hit when an image overlaps it in positive length.
"""
from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .classify import exceptional_points, _greedy_batch
from .core import SEQUENCE, GeneratorSystem, Word, WordLike, as_word
from .errors import ParameterError
from .rng import task_rng

EPS_GRID = 2.0 ** -10
DEFAULT_BUDGET = 10 ** 4
MERGE_SLACK = 1e-15

Interval = Tuple[float, float]


# -- interval sets ----------------------------------------------------------------

def normalize(intervals, circle: bool) -> List[Interval]:
    """Reduce to ``[0, 1]`` (cutting arcs at integers) and merge overlaps."""
    pieces = []
    for lo, hi in intervals:
        if hi < lo:
            lo, hi = hi, lo
        if circle:
            if hi - lo >= 1.0:
                return [(0.0, 1.0)]
            k = math.floor(lo)
            lo, hi = lo - k, hi - k
            if hi > 1.0:
                pieces.append((lo, 1.0))
                pieces.append((0.0, hi - 1.0))
            else:
                pieces.append((lo, hi))
        else:
            lo, hi = max(lo, 0.0), min(hi, 1.0)
            if hi > lo:
                pieces.append((lo, hi))
    pieces.sort()
    out: List[Interval] = []
    for lo, hi in pieces:
        if out and lo <= out[-1][1] + MERGE_SLACK:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return out


def ball(domain, center: float, radius: float) -> List[Interval]:
    if radius <= 0:
        raise ParameterError("radius must be > 0")
    return normalize([(center - radius, center + radius)], domain.is_circle)


def image(system: GeneratorSystem, j: int, intervals: Sequence[Interval]) -> List[Interval]:
    """Exact image of an interval union under generator ``j``."""
    g = system.generators[j]
    out = []
    for lo, hi in intervals:
        a, b = float(g.lift_ext(lo)), float(g.lift_ext(hi))
        out.append((min(a, b), max(a, b)))
    return normalize(out, system.domain.is_circle)


def measure(intervals: Sequence[Interval]) -> float:
    return math.fsum(hi - lo for lo, hi in intervals)


def _cells_n(eps_grid: float) -> int:
    n = int(round(1.0 / eps_grid))
    if n < 1 or abs(n * eps_grid - 1.0) > 1e-9:
        raise ParameterError("eps_grid must be 1/N for a positive integer N")
    return n


def mark_cells(mask: np.ndarray, intervals: Sequence[Interval]) -> None:
    """Set cells overlapping any interval in positive length."""
    N = len(mask)
    for lo, hi in intervals:
        if hi <= lo:
            continue
        i0 = max(int(math.floor(lo * N)), 0)
        i1 = min(int(math.ceil(hi * N)), N)
        mask[i0:i1] = True


def exempt_cells(system: GeneratorSystem, N: int) -> np.ndarray:
    """Cells containing an isolated common fixed point at which every
    generator has ``|f'| <= 1``; such cells need not be hit."""
    mask = np.zeros(N, dtype=bool)
    for p in exceptional_points(system):
        if all(abs(float(g.dlift(p))) <= 1.0 + 1e-12 for g in system.generators):
            for c in {min(int(math.floor(p * N)), N - 1), int(math.ceil(p * N)) - 1}:
                mask[c % N] = True
    return mask


# -- covering lemma ---------------------------------------------------------------

@dataclass
class CoveringResult:
    n: Optional[int]
    max_coverage: float
    steps: int
    radius: float
    center: float
    eps_grid: float

    def to_dict(self):
        return {"n": self.n, "max_coverage": self.max_coverage, "steps": self.steps,
                "center": self.center, "radius": self.radius, "eps_grid": self.eps_grid}


def covering_time(system: GeneratorSystem, word: Optional[WordLike], center: float, radius: float,
                  eps_grid: float = EPS_GRID, budget: int = 1000) -> CoveringResult:
    """First ``n`` with ``f^n_w(B(center, radius))`` hitting every grid cell.

    ``word=None`` uses the system's default word (constant first generator,
    or the forced sequence).  ``n`` is None if the word (or ``budget``) runs
    out; ``max_coverage`` then reports the best covered fraction.
    """
    N = _cells_n(eps_grid)
    word = system.default_word(budget) if word is None else as_word(word)
    steps = min(len(word), budget)
    system.check_word(word, steps)
    exempt = exempt_cells(system, N)
    cur = ball(system.domain, center, radius)
    best = 0.0
    for n in range(steps + 1):
        mask = exempt.copy()
        mark_cells(mask, cur)
        frac = float(mask.mean())
        best = max(best, frac)
        if mask.all():
            return CoveringResult(n, 1.0, n, radius, center, eps_grid)
        if n < steps:
            cur = image(system, word.indices[n], cur)
    return CoveringResult(None, best, steps, radius, center, eps_grid)


# -- exactness and minimality -----------------------------------------------------

@dataclass
class CoverState:
    eps_grid: float
    covered: np.ndarray
    exempt: np.ndarray
    images: List[Tuple[tuple, List[Interval]]] = field(default_factory=list)
    words_explored: int = 0

    @property
    def complete(self) -> bool:
        return bool(np.all(self.covered | self.exempt))

    @property
    def coverage(self) -> float:
        return float(np.mean(self.covered | self.exempt))

    @property
    def interior_coverage(self) -> float:
        """Covered fraction of the cells away from the two ends of [0, 1]."""
        return float(np.mean((self.covered | self.exempt)[1:-1]))

    def merge(self, other: "CoverState") -> "CoverState":
        """Union of two states over the same grid (associative, commutative)."""
        if len(self.covered) != len(other.covered):
            raise ParameterError("grids differ")
        return CoverState(self.eps_grid, self.covered | other.covered, self.exempt | other.exempt,
                          self.images + other.images, self.words_explored + other.words_explored)

    def to_dict(self, include_images: bool = False):
        out = {"eps_grid": self.eps_grid, "complete": self.complete, "coverage": self.coverage,
               "exempt_cells": np.nonzero(self.exempt)[0].tolist(),
               "uncovered_cells": int(np.sum(~(self.covered | self.exempt))),
               "words_explored": self.words_explored,
               "contributing_words": [list(w) for w, _ in self.images]}
        if include_images:
            out["images"] = [{"word": list(w), "intervals": [list(i) for i in ivs]}
                             for w, ivs in self.images]
        return out


def _key(intervals, N: int) -> tuple:
    """Grid signature of an image; words with equal signatures are merged."""
    return tuple((int(math.floor(lo * N)), int(math.ceil(hi * N))) for lo, hi in intervals)


def _bfs_cover(system, start, budget, eps_grid, exempt_rule, stop_when_complete=True):
    """Breadth-first over words (length, then lexicographic).

    A word whose image hits exactly the same grid cells as an earlier one
    is not expanded further.  Recorded images stay exact, so a complete
    state is still a genuine cover; only the search order is coarsened.
    """
    N = _cells_n(eps_grid)
    exempt = exempt_cells(system, N) if exempt_rule else np.zeros(N, dtype=bool)
    state = CoverState(eps_grid, np.zeros(N, dtype=bool), exempt)
    seen = set()
    queue = deque([((), start)])
    letters = range(system.d) if system.mode != SEQUENCE else None
    while queue and state.words_explored < budget:
        word, ivs = queue.popleft()
        k = _key(ivs, N)
        if k in seen:
            continue
        seen.add(k)
        state.words_explored += 1
        before = int(state.covered.sum())
        mark_cells(state.covered, ivs)
        if int(state.covered.sum()) > before:
            state.images.append((word, ivs))
        if stop_when_complete and state.complete:
            break
        nxt = letters if letters is not None else ([len(word)] if len(word) < system.d else [])
        for j in nxt:
            queue.append((word + (j,), image(system, j, ivs)))
    return state


def exactness_check(system: GeneratorSystem, ball_interval: Union[Interval, Sequence[Interval]],
                    budget: int = DEFAULT_BUDGET, eps_grid: float = EPS_GRID,
                    exempt: bool = True) -> CoverState:
    """Accumulate ``f^n_w(B)`` over words until the grid is covered.

    ``ball_interval`` is ``(lo, hi)`` or a list of them.  Cells around an
    isolated common fixed point where no generator expands are exempt
    (measure-zero obstruction) unless ``exempt=False``.
    """
    ivs = _as_intervals(system, ball_interval)
    return _bfs_cover(system, ivs, budget, eps_grid, exempt)


def _as_intervals(system, obj) -> List[Interval]:
    if len(obj) == 2 and np.ndim(obj[0]) == 0:
        obj = [tuple(obj)]
    ivs = normalize([(float(a), float(b)) for a, b in obj], system.domain.is_circle)
    if not ivs:
        raise ParameterError("open set is empty")
    return ivs


def default_balls(count: int = 8) -> List[Interval]:
    """Dyadic family: balls of radius ``1/(4 count)`` at ``(2k+1)/(2 count)``."""
    r = 1.0 / (4 * count)
    return [((2 * k + 1) / (2 * count) - r, (2 * k + 1) / (2 * count) + r) for k in range(count)]


def backward_minimality_check(system: GeneratorSystem, open_set, budget: int = DEFAULT_BUDGET,
                              eps_grid: float = EPS_GRID) -> Optional[List[tuple]]:
    """Finite list of words ``h`` whose images ``h(U)`` cover the grid, or None.

    Only words that added new cells are returned, in search order; the empty
    word stands for ``U`` itself.
    """
    ivs = _as_intervals(system, open_set)
    state = _bfs_cover(system, ivs, budget, eps_grid, exempt_rule=False)
    if not state.complete:
        return None
    return [w for w, _ in state.images]


# -- equidistribution -------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Observable with known Lebesgue integral and sup norm."""

    name: str
    func: Callable
    integral: float
    sup_norm: float
    constant: Optional[float] = None

    __test__ = False  # not a pytest class

    def __call__(self, x):
        return self.func(x)


def trig(kind: str, k: int) -> TestFunction:
    if k < 1:
        raise ParameterError("frequency must be >= 1")
    f = np.cos if kind == "cos" else np.sin
    return TestFunction(f"{kind}:{k}", lambda x: f(2 * np.pi * k * np.asarray(x)), 0.0, 1.0)


def constant(c: float = 1.0) -> TestFunction:
    return TestFunction(f"const:{c:g}", lambda x: np.full(np.shape(x), c), float(c), abs(c), c)


def indicator(a: float, b: float) -> TestFunction:
    if not 0 <= a < b <= 1:
        raise ParameterError("need 0 <= a < b <= 1")
    return TestFunction(f"ind:{a:g}:{b:g}",
                        lambda x: ((np.asarray(x) >= a) & (np.asarray(x) < b)).astype(float),
                        b - a, 1.0)


def parse_test_function(text: str) -> TestFunction:
    """``cos:k``, ``sin:k``, ``const:c`` or ``ind:a:b``."""
    parts = text.split(":")
    try:
        if parts[0] in ("cos", "sin") and len(parts) == 2:
            return trig(parts[0], int(parts[1]))
        if parts[0] == "const" and len(parts) in (1, 2):
            return constant(float(parts[1]) if len(parts) == 2 else 1.0)
        if parts[0] == "ind" and len(parts) == 3:
            return indicator(float(parts[1]), float(parts[2]))
    except ValueError:
        pass
    raise ParameterError(f"cannot parse test function {text!r}")


DIGIT_WINDOW = 64
CHUNK = 1 << 16


@dataclass
class ErgodicityReport:
    functions: List[str]
    deviations: Dict[str, float]
    per_point: Dict[str, List[float]]
    horizon: int
    init_points: List[float]
    policy: str
    seed: int
    tolerance: Dict[str, float]
    orbit_method: str
    running: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    running_steps: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return all(self.deviations[f] <= self.tolerance[f] for f in self.functions)

    def to_dict(self):
        return {"functions": self.functions, "deviations": self.deviations,
                "per_point_deviations": self.per_point, "tolerance": self.tolerance,
                "horizon": self.horizon, "init_points": self.init_points,
                "policy": self.policy, "seed": self.seed, "orbit_method": self.orbit_method,
                "pass": self.passed}

    def to_csv(self) -> str:
        """Running Birkhoff averages: columns point,step,function,average."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["point", "step", "function", "average"])
        if self.running_steps is None:
            return buf.getvalue()
        for name in self.functions:
            arr = self.running[name]
            for p in range(arr.shape[0]):
                for s, v in zip(self.running_steps, arr[p]):
                    w.writerow([p, int(s), name, repr(float(v))])
        return buf.getvalue()


def _digit_orbits(m: int, rng, P: int, horizon: int):
    """Exact shift orbits of ``x -> m x mod 1``, yielded in chunks.

    Each point is a random base-``m`` expansion; ``x_i`` is the window of
    64 digits starting at ``i``, evaluated in floating point, so rounding
    never feeds back into the dynamics.
    """
    weights = float(m) ** -np.arange(1, DIGIT_WINDOW + 1)
    digits = rng.integers(0, m, size=(P, horizon + DIGIT_WINDOW - 1), dtype=np.int64)
    x0 = digits[:, :DIGIT_WINDOW].astype(float) @ weights
    yield x0
    for s in range(0, horizon, CHUNK):
        e = min(s + CHUNK, horizon)
        block = digits[:, s:e + DIGIT_WINDOW - 1].astype(float)
        yield np.stack([np.convolve(row, weights[::-1], mode="valid") for row in block])


def _float_orbits(system, policy, word, xs, horizon, seed):
    yield xs.copy()
    pts = xs.copy()
    P = len(pts)
    dom = system.domain
    gens = system.generators
    rng = task_rng(seed, 1) if policy == "random" else None
    for s in range(0, horizon, CHUNK):
        e = min(s + CHUNK, horizon)
        out = np.empty((P, e - s))
        if policy == "random":
            letters = rng.integers(0, system.d, size=(e - s, P))
        for i in range(s, e):
            out[:, i - s] = pts
            if policy == "fixed":
                pts = dom.canonical(gens[word.indices[i]].lift(pts))
            elif policy == "random":
                row = letters[i - s]
                new = np.empty_like(pts)
                for j, g in enumerate(gens):
                    msk = row == j
                    if msk.any():
                        new[msk] = g.lift(pts[msk])
                pts = dom.canonical(new)
            else:
                letters_g, _ = _greedy_batch(system, pts, 1)
                new = np.empty_like(pts)
                for j, g in enumerate(gens):
                    msk = letters_g[:, 0] == j
                    if msk.any():
                        new[msk] = g.lift(pts[msk])
                pts = dom.canonical(new)
        yield out


def equidistribution_test(system: GeneratorSystem, branch_policy: str = "fixed",
                          test_functions: Sequence[Union[str, TestFunction]] = ("cos:1",),
                          horizon: int = 10 ** 5, init_points: int = 10, seed: int = 0,
                          word: Optional[WordLike] = None,
                          tolerance: Optional[float] = None,
                          running_points: int = 200) -> ErgodicityReport:
    """Compare time averages of test functions with their integrals.

    ``branch_policy`` is ``"fixed"`` (``word``, default the system's
    default word), ``"greedy"`` or ``"random"`` (letters from the seeded
    stream).  For a single generator ``x -> m x mod 1`` under the fixed
    policy the orbit is generated exactly from random digits; otherwise it
    is iterated in floating point.  The default tolerance per function is
    ``10 n^{-1/2} ||phi||_inf``.  Constant observables have deviation 0 by
    normalisation.
    """
    if horizon < 1 or init_points < 1:
        raise ParameterError("horizon and init_points must be >= 1")
    if branch_policy not in ("fixed", "greedy", "random"):
        raise ParameterError(f"unknown branch policy {branch_policy!r}")
    fns = [parse_test_function(t) if isinstance(t, str) else t for t in test_functions]
    names = [f.name for f in fns]
    if len(set(names)) != len(names):
        raise ParameterError("duplicate test functions")
    if branch_policy == "fixed":
        word = system.default_word(horizon) if word is None else as_word(word)
        system.check_word(word, horizon)
    gens = system.generators
    digit = (branch_policy == "fixed" and len(set(word.indices[:horizon])) == 1
             and gens[word.indices[0]].digit_base is not None and system.domain.is_circle)
    if digit:
        chunks = _digit_orbits(gens[word.indices[0]].digit_base, task_rng(seed, 0),
                               init_points, horizon)
        method = "digit-shift"
    else:
        xs = task_rng(seed, 0).random(init_points)
        chunks = _float_orbits(system, branch_policy, word, xs, horizon, seed)
        method = "float"
    x0 = next(chunks)
    stride = max(1, horizon // running_points)
    checkpoints = np.arange(stride, horizon + 1, stride)
    sums = {f.name: np.zeros(init_points) for f in fns}
    running = {f.name: np.empty((init_points, len(checkpoints))) for f in fns}
    done = 0
    for block in chunks:
        L = block.shape[1]
        for f in fns:
            if f.constant is not None:
                continue
            vals = f(block)
            cs = np.cumsum(vals, axis=1) + sums[f.name][:, None]
            sel = (checkpoints > done) & (checkpoints <= done + L)
            running[f.name][:, sel] = cs[:, checkpoints[sel] - done - 1] / checkpoints[sel]
            sums[f.name] = sums[f.name] + np.array([math.fsum(r) for r in vals])
        done += L
    deviations, per_point, tol = {}, {}, {}
    for f in fns:
        if f.constant is not None:
            dev = np.zeros(init_points)
            running[f.name][:] = f.constant
        else:
            dev = np.abs(sums[f.name] / horizon - f.integral)
        per_point[f.name] = [float(v) for v in dev]
        deviations[f.name] = float(dev.max())
        tol[f.name] = (10.0 * f.sup_norm / math.sqrt(horizon)) if tolerance is None else float(tolerance)
    return ErgodicityReport(names, deviations, per_point, horizon, [float(v) for v in x0],
                            branch_policy, seed, tol, method, running, checkpoints)


# -- forward-invariant closure ----------------------------------------------------

@dataclass
class ClosureResult:
    cells: np.ndarray
    fraction: float
    iterations: int
    converged: bool
    eps_grid: float

    def to_dict(self):
        return {"cells": self.cells.tolist(), "fraction": self.fraction,
                "iterations": self.iterations, "converged": self.converged,
                "eps_grid": self.eps_grid}


def _cell_images(system, idx: np.ndarray, N: int) -> np.ndarray:
    """Mask of cells hit by the images of cells ``idx`` under all generators."""
    out = np.zeros(N, dtype=bool)
    lo = idx / N
    hi = (idx + 1) / N
    diff = np.zeros(N + 1, dtype=np.int64)
    for g in system.generators:
        a = np.asarray(g.lift_ext(lo), dtype=float)
        b = np.asarray(g.lift_ext(hi), dtype=float)
        a, b = np.minimum(a, b), np.maximum(a, b)
        if system.domain.is_circle:
            if np.any(b - a >= 1.0):
                return np.ones(N, dtype=bool)
            i0 = np.floor(a * N).astype(np.int64)
            i1 = np.ceil(b * N).astype(np.int64)     # exclusive
            shift = np.floor_divide(i0, N) * N
            i0 -= shift
            i1 -= shift
            wrap = i1 > N
            np.add.at(diff, i0, 1)
            np.add.at(diff, np.minimum(i1, N), -1)
            np.add.at(diff, np.zeros(int(wrap.sum()), dtype=np.int64), 1)
            np.add.at(diff, i1[wrap] - N, -1)
        else:
            i0 = np.clip(np.floor(a * N).astype(np.int64), 0, N)
            i1 = np.clip(np.ceil(b * N).astype(np.int64), 0, N)
            keep = i1 > i0
            np.add.at(diff, i0[keep], 1)
            np.add.at(diff, i1[keep], -1)
    out |= np.cumsum(diff[:-1]) > 0
    return out


def invariant_set_closure(system: GeneratorSystem, seed_cells: Sequence[int],
                          eps_grid: float = EPS_GRID, max_iters: int = 10 ** 4) -> ClosureResult:
    """Smallest union of grid cells containing the seed and all its images.

    This is an outer approximation of the smallest forward-invariant set
    containing the seed cells.  ``converged`` is False when ``max_iters``
    rounds did not reach a fixed point (partial result).
    """
    N = _cells_n(eps_grid)
    seed_idx = np.unique(np.asarray(list(seed_cells), dtype=np.int64))
    if seed_idx.size == 0:
        raise ParameterError("seed_cells must be nonempty")
    if seed_idx.min() < 0 or seed_idx.max() >= N:
        raise ParameterError(f"cells must lie in [0, {N})")
    have = np.zeros(N, dtype=bool)
    have[seed_idx] = True
    frontier = seed_idx
    it = 0
    converged = False
    while it < max_iters:
        it += 1
        new = _cell_images(system, frontier, N) & ~have
        if not new.any():
            converged = True
            break
        have |= new
        frontier = np.nonzero(new)[0]
    cells = np.nonzero(have)[0]
    return ClosureResult(cells, float(have.mean()), it, converged, eps_grid)
