"""Expansion search and classification of semigroup actions.

Exponents here are finite-horizon Birkhoff averages of ``log theta =
-log|f'|``; negative means expanding.  None of the verdicts certifies an
asymptotic (limsup) statement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from .core import (
    SEQUENCE,
    GeneratorSystem,
    Word,
    WordLike,
    as_word,
    composed_log_derivative,
)
from .errors import CoverIncompleteError, ParameterError, PreconditionError
from .pliss import hyperbolic_times
from .rng import task_rng

A_THRESHOLD = -1e-6
DEFAULT_BEAM = 8
MAX_NODES = 10 ** 6


def parse_strategy(strategy) -> Tuple[str, int]:
    """``"greedy"``, ``"beam"``, ``"beam:4"``, ``"exhaustive:6"`` or a tuple."""
    if isinstance(strategy, tuple):
        return strategy
    name, _, arg = str(strategy).partition(":")
    if name == "greedy":
        return ("greedy", 0)
    if name == "beam":
        return ("beam", int(arg) if arg else DEFAULT_BEAM)
    if name == "exhaustive":
        if not arg:
            raise ParameterError("exhaustive strategy needs a depth, e.g. exhaustive:6")
        return ("exhaustive", int(arg))
    raise ParameterError(f"unknown strategy {strategy!r}")


def _log_theta_all(system, pts):
    """(d, P) array of ``log theta_j`` at each point."""
    return np.stack([-np.log(np.abs(g.dlift(pts))) for g in system.generators])


def _greedy_batch(system: GeneratorSystem, xs, horizon: int):
    """Greedy branches for many starting points at once.

    Returns letters ``(P, horizon)`` and per-step ``log theta`` values.
    Ties go to the lowest generator index (``argmin`` returns the first).
    """
    pts = np.array(xs, dtype=float)
    P = len(pts)
    letters = np.empty((P, horizon), dtype=np.int32)
    logs = np.empty((P, horizon))
    dom = system.domain
    rows = np.arange(P)
    for n in range(horizon):
        if system.mode == SEQUENCE:
            j = np.full(P, n)
            lt = -np.log(np.abs(system.generators[n].dlift(pts)))
        else:
            table = _log_theta_all(system, pts)
            j = np.argmin(table, axis=0)
            lt = table[j, rows]
        letters[:, n] = j
        logs[:, n] = lt
        new = np.empty_like(pts)
        for g_idx, g in enumerate(system.generators):
            m = j == g_idx
            if m.any():
                new[m] = g.lift(pts[m])
        pts = dom.canonical(new)
    return letters, logs


def _beam(system, x, horizon, width):
    dom = system.domain
    words = [()]
    sums = np.zeros(1)
    pts = np.array([float(x)])
    d = system.d
    for _ in range(horizon):
        table = _log_theta_all(system, pts)            # (d, B)
        cand = (sums[None, :] + table).T.reshape(-1)   # index = b*d + j
        order = np.lexsort((np.arange(len(cand)), cand))[:width]
        b_idx, j_idx = np.divmod(order, d)
        new_pts = np.empty(len(order))
        for j, g in enumerate(system.generators):
            m = j_idx == j
            if m.any():
                new_pts[m] = g.lift(pts[b_idx[m]])
        words = [words[b] + (int(j),) for b, j in zip(b_idx, j_idx)]
        sums = cand[order]
        pts = dom.canonical(new_pts)
    return Word(words[0]), float(sums[0])


def _exhaustive_block(system, x, depth):
    """Lexicographically first minimiser over all ``d^depth`` words."""
    d = system.d
    pts = np.array([float(x)])
    sums = np.zeros(1)
    for _ in range(depth):
        table = _log_theta_all(system, pts)            # (d, N)
        sums = (sums[None, :] + table).T.reshape(-1)   # lexicographic order
        pts = np.stack([g.lift(pts) for g in system.generators]).T.reshape(-1)
        pts = system.domain.canonical(pts)
    k = int(np.argmin(sums))
    letters = []
    for _ in range(depth):
        k, j = divmod(k, d)
        letters.append(j)
    return tuple(reversed(letters)), float(sums.min()), float(pts[int(np.argmin(sums))])


def search_expanding_branch(system: GeneratorSystem, x: float, horizon: int,
                            strategy="greedy") -> Tuple[Word, float]:
    """Word minimising the horizon-``n`` Birkhoff average of ``log theta``.

    Returns ``(word, exponent)`` where ``exponent`` is that average.
    """
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    kind, arg = parse_strategy(strategy)
    if system.mode == SEQUENCE:
        w = Word.sequence(horizon)
        return w, float(composed_log_derivative(system, w, float(x)) * -1 / horizon)
    if kind == "greedy":
        letters, logs = _greedy_batch(system, [x], horizon)
        return Word(letters[0].tolist()), float(math.fsum(logs[0]) / horizon)
    if kind == "beam":
        if arg < 1:
            raise ParameterError("beam width must be >= 1")
        w, s = _beam(system, x, horizon, arg)
        return w, s / horizon
    depth = arg
    if depth < 1 or system.d ** depth > MAX_NODES:
        raise ParameterError(f"exhaustive depth {depth} gives more than {MAX_NODES} nodes")
    letters: List[int] = []
    total = 0.0
    y = float(x)
    while len(letters) < horizon:
        block = min(depth, horizon - len(letters))
        w, s, y = _exhaustive_block(system, y, block)
        letters.extend(w)
        total += s
    return Word(letters), total / horizon


def brute_force_min(system: GeneratorSystem, x: float, depth: int) -> float:
    """Independent oracle: minimum average over every word of length ``depth``."""
    from itertools import product

    best = math.inf
    for w in product(range(system.d), repeat=depth):
        best = min(best, -composed_log_derivative(system, w, float(x)) / depth)
    return best


# -- uniform expansion ------------------------------------------------------------

@dataclass
class UniformFit:
    C: float
    lam: float
    passed: bool

    def to_dict(self):
        return {"C": self.C, "lambda": self.lam, "pass": self.passed}


def _words_for(system, strategy, xs, n) -> List[Word]:
    if isinstance(strategy, (Word, list, tuple)) and not (
            isinstance(strategy, tuple) and strategy and isinstance(strategy[0], str)):
        w = as_word(strategy)
        return [w] * len(xs)
    if system.mode == SEQUENCE:
        return [Word.sequence(n)] * len(xs)
    if strategy == "constant":
        return [Word.constant(0, n)] * len(xs)
    if strategy == "alternating":
        return [Word.periodic(range(system.d), n)] * len(xs)
    if parse_strategy(strategy)[0] == "greedy":
        letters, _ = _greedy_batch(system, xs, n)
        return [Word(r.tolist()) for r in letters]
    return [search_expanding_branch(system, x, n, strategy)[0] for x in xs]


def _cumulative_log_derivs(system, words, xs, n):
    """(P, n+1) array of ``log|(f^i_w)'(x)|`` for ``i = 0..n``."""
    out = np.zeros((len(xs), n + 1))
    for p, (w, x) in enumerate(zip(words, xs)):
        y = float(x)
        acc = 0.0
        for i in range(n):
            g = system.generators[w.indices[i]]
            acc += math.log(abs(float(g.dlift_ext(y))))
            y = g.lift_ext(y)
            out[p, i + 1] = acc
    return out


def check_uniform_expansion(system: GeneratorSystem, word_strategy="constant",
                            grid_size: int = 64, n: int = 50, tol: float = 1e-9) -> UniformFit:
    """Fit ``|(f^i_w)'(x)| >= C lam^i`` over a grid of ``x`` and ``i <= n``.

    ``log lam`` is the smallest least-squares slope of ``i -> log|(f^i)'(x)|``
    over the grid; ``C`` is then the largest constant making the bound hold
    at every grid point and every ``i``.
    """
    if grid_size < 2 or n < 1:
        raise ParameterError("need grid_size >= 2 and n >= 1")
    xs = (np.arange(grid_size) + 0.5) / grid_size
    words = _words_for(system, word_strategy, xs, n)
    S = _cumulative_log_derivs(system, words, xs, n)
    i = np.arange(n + 1)
    slopes = np.polyfit(i, S.T, 1)[0]
    log_lam = float(np.min(slopes))
    log_C = float(np.min(S - log_lam * i[None, :]))
    lam = math.exp(log_lam)
    return UniformFit(math.exp(log_C), lam, lam > 1 + tol)


# -- classification ---------------------------------------------------------------

def exceptional_points(system: GeneratorSystem, grid: int = 2 ** 12) -> List[float]:
    """Isolated common fixed points of all generators (found on a grid)."""
    dom = system.domain
    xs = np.arange(grid + (0 if dom.is_circle else 1)) / grid
    disp = []
    for g in system.generators:
        dlt = g.lift(xs) - xs
        if dom.is_circle:
            dlt = np.mod(dlt + 0.5, 1.0) - 0.5
        disp.append(dlt)
    disp = np.array(disp)
    if np.all(np.abs(disp) < 1e-12):
        return []
    cands = set()
    if not dom.is_circle:
        for e in (0.0, 1.0):
            if all(abs(float(g.lift(e)) - e) <= 1e-12 for g in system.generators):
                cands.add(e)
    d0 = disp[0]
    for k in np.nonzero(d0[:-1] * d0[1:] < 0)[0]:
        if max(abs(d0[k]), abs(d0[k + 1])) > 0.25:
            continue  # wrap discontinuity of the circle displacement
        g0 = system.generators[0]
        x = brentq(lambda t: float(g0.lift(t)) - t - round(float(g0.lift(t)) - t),
                   float(xs[k]), float(xs[k + 1]), xtol=1e-15)
        if all(abs(dom.dist(g(x), x)) < 1e-10 for g in system.generators):
            cands.add(float(dom.canonical(x)))
    return sorted(cands)


@dataclass
class PointRecord:
    x: float
    word_prefix: str
    exponent: float
    hyperbolic_density: float

    def to_dict(self):
        return {"x": self.x, "word_prefix": self.word_prefix, "exponent": self.exponent,
                "hyperbolic_density": self.hyperbolic_density}


@dataclass
class ClassificationReport:
    records: List[PointRecord]
    sample_size: int
    horizon: int
    strategy: str
    seed: int
    a_threshold: float
    expandable: bool
    expandable_fraction: float
    nonuniformly_expanding: bool
    common_word_fraction: float
    witness_word_prefix: Optional[str]
    uniformly_expanding: bool
    uniform_fit: Optional[UniformFit]
    strong_a: Optional[float]
    exceptional_points: List[float] = field(default_factory=list)
    tolerance: float = 0.01

    @property
    def exponents(self) -> np.ndarray:
        return np.array([r.exponent for r in self.records])

    def to_dict(self, include_records: bool = True):
        out = {
            "sample_size": self.sample_size, "horizon": self.horizon, "strategy": self.strategy,
            "seed": self.seed, "a_threshold": self.a_threshold, "tolerance": self.tolerance,
            "verdicts": {
                "uniformly_expanding": self.uniformly_expanding,
                "uniform_fit": self.uniform_fit.to_dict() if self.uniform_fit else None,
                "nonuniformly_expanding": self.nonuniformly_expanding,
                "common_word_fraction": self.common_word_fraction,
                "witness_word_prefix": self.witness_word_prefix,
                "expandable": self.expandable,
                "expandable_fraction": self.expandable_fraction,
                "strong_a": self.strong_a,
            },
            "exceptional_points": self.exceptional_points,
        }
        if include_records:
            out["records"] = [r.to_dict() for r in self.records]
        return out


def _sample_points(system, count, seed, exceptional):
    rng = task_rng(seed, 0)
    xs = rng.random(count)
    for _ in range(100):
        bad = np.zeros(count, dtype=bool)
        for e in exceptional:
            bad |= np.abs(system.domain.dist(xs, e)) < 1e-9
        if not bad.any():
            break
        xs[bad] = rng.random(int(bad.sum()))
    return xs


def _word_prefix(w: Word, k: int = 64) -> str:
    return "".join(str(i) if i < 10 else f"({i})" for i in w.indices[:k])


def classify_action(system: GeneratorSystem, sample_count: int = 1000, horizon: int = 1000,
                    strategy="greedy", a_threshold: float = A_THRESHOLD, seed: int = 0,
                    tol: float = 0.01, candidates: int = 8) -> ClassificationReport:
    """Classify a system by its finite-horizon expansion along branches.

    * expandable: a fraction ``>= 1 - tol`` of seeded Lebesgue samples has a
      branch with exponent below ``a_threshold``;
    * non-uniformly expanding: one common word (tried: the branches found
      for the first ``candidates`` samples) works for ``>= 1 - tol``;
    * uniformly expanding: additionally the uniform fit along that word has
      rate above 1.
    The implication chain uniform => non-uniform => expandable is enforced.
    """
    if sample_count < 1:
        raise ParameterError("sample_count must be >= 1")
    kind, arg = parse_strategy(strategy)
    exc = exceptional_points(system)
    xs = _sample_points(system, sample_count, seed, exc)
    if kind == "greedy" or system.mode == SEQUENCE:
        letters, logs = _greedy_batch(system, xs, horizon)
        words = [Word(r.tolist()) for r in letters]
        exps = logs.mean(axis=1)
        seqs = list(logs)
    else:
        words, exps, seqs = [], [], []
        for x in xs:
            w, e = search_expanding_branch(system, float(x), horizon, strategy)
            words.append(w)
            exps.append(e)
            seqs.append(None)
        exps = np.array(exps)
    records = []
    for x, w, e, s in zip(xs, words, exps, seqs):
        dens = 0.0
        if e < 0:
            if s is None:
                s = -_step_log_derivs(system, w, float(x))
            dens = hyperbolic_times(s, -float(e)).density
        records.append(PointRecord(float(x), _word_prefix(w), float(e), dens))
    neg = exps < a_threshold
    frac = float(neg.mean())
    expandable = frac >= 1 - tol
    strong_a = float(-exps.max()) if bool(np.all(exps < 0)) else None

    best_frac, witness = 0.0, None
    for w in words[:candidates]:
        common = -composed_log_derivative(system, w, xs) / horizon
        f = float(np.mean(common < a_threshold))
        if f > best_frac:
            best_frac, witness = f, w
        if system.mode == SEQUENCE:
            break
    nonuniform = expandable and best_frac >= 1 - tol
    fit = None
    uniform = False
    if nonuniform and witness is not None:
        fit = check_uniform_expansion(system, witness, grid_size=64, n=min(horizon, 200))
        uniform = fit.passed
    return ClassificationReport(
        records, sample_count, horizon, f"{kind}:{arg}" if kind != "greedy" else "greedy",
        seed, a_threshold, expandable, frac, nonuniform, best_frac,
        _word_prefix(witness) if witness is not None else None, uniform, fit, strong_a, exc, tol)


def _step_log_derivs(system, w: Word, x: float) -> np.ndarray:
    out = np.empty(len(w))
    y = x
    for i, j in enumerate(w.indices):
        g = system.generators[j]
        out[i] = math.log(abs(float(g.dlift(y))))
        y = system.domain.canonical(float(g.lift(y)))
    return out


# -- backward expansion -----------------------------------------------------------

def backward_expanding_check(system: GeneratorSystem, x: float, max_len: int = 8,
                             max_nodes: int = MAX_NODES) -> Optional[Word]:
    """Shortest (then lexicographically first) ``h`` with ``|h'(x)| > 1``."""
    if max_len < 1:
        raise ParameterError("max_len must be >= 1")
    d = system.d
    pts = np.array([float(x)])
    logs = np.zeros(1)
    for length in range(1, max_len + 1):
        if d ** length > max_nodes:
            break
        table = np.stack([np.log(np.abs(g.dlift(pts))) for g in system.generators])
        logs = (logs[None, :] + table).T.reshape(-1)
        pts = system.domain.canonical(
            np.stack([g.lift(pts) for g in system.generators]).T.reshape(-1))
        hits = np.nonzero(logs > 1e-12)[0]
        if hits.size:
            k = int(hits[0])
            letters = []
            for _ in range(length):
                k, j = divmod(k, d)
                letters.append(j)
            return Word(tuple(reversed(letters)))
    return None


# -- branches from covers ---------------------------------------------------------

@dataclass(frozen=True)
class CoverElement:
    interval: Tuple[float, float]
    word: tuple
    sigma: float

    def contains(self, y: float) -> bool:
        return self.interval[0] <= y <= self.interval[1]


@dataclass
class CoverBranch:
    """Lazily extended branch built by following a cover.

    ``exponent_bound`` is ``(1/k) log(max sigma)`` with ``k`` the longest
    cover word: the limsup of the Birkhoff averages of ``log theta`` along
    the branch does not exceed it.
    """

    system: GeneratorSystem
    cover: Sequence[CoverElement]
    x: float
    exponent_bound: float

    def blocks(self) -> Iterator[Tuple[int, tuple, float]]:
        """Yield ``(cover index, letters, block sum of log theta)`` forever."""
        y = float(self.x)
        dom = self.system.domain
        while True:
            for idx, el in enumerate(self.cover):
                if el.contains(y):
                    break
            else:
                raise CoverIncompleteError(f"point {y!r} lies in no cover element")
            s = 0.0
            for j in el.word:
                g = self.system.generators[j]
                s -= math.log(abs(float(g.dlift(y))))
                y = dom.canonical(float(g.lift(y)))
            if s > math.log(el.sigma) + 1e-12:
                raise CoverIncompleteError(
                    f"cover element {idx} violates its bound: block sum {s} > log sigma")
            yield idx, el.word, s

    def word(self, n: int, return_logs: bool = False):
        """First ``n`` letters (blocks are cut at ``n``)."""
        letters: List[int] = []
        for _, w, _ in self.blocks():
            letters.extend(w)
            if len(letters) >= n:
                break
        w = Word(letters[:n])
        if return_logs:
            return w, _step_log_derivs(self.system, w, self.x)
        return w


def build_branch_from_cover(system: GeneratorSystem, cover: Sequence[CoverElement],
                            x: float) -> CoverBranch:
    cover = list(cover)
    if not cover:
        raise CoverIncompleteError("empty cover")
    for el in cover:
        if not 0 < el.sigma < 1:
            raise ParameterError("every sigma must lie in (0, 1)")
        if not el.word:
            raise ParameterError("cover words must be nonempty")
    k = max(len(el.word) for el in cover)
    sigma = max(el.sigma for el in cover)
    if not any(el.contains(float(x)) for el in cover):
        raise CoverIncompleteError(f"start point {x!r} lies in no cover element")
    return CoverBranch(system, cover, float(x), math.log(sigma) / k)


# -- diffeomorphism obstruction ---------------------------------------------------

@dataclass
class ObstructionReport:
    n: int
    samples: int
    integral_estimate: float
    stderr: float
    z_score: float
    passed: bool
    mean_log_rate: float
    min_log_rate: float
    fraction_positive_rate: float
    uniformly_positive: bool
    word: List[int]
    seed: int

    def to_dict(self):
        return {"n": self.n, "samples": self.samples, "integral_estimate": self.integral_estimate,
                "stderr": self.stderr, "z_score": self.z_score, "pass": self.passed,
                "mean_log_rate": self.mean_log_rate, "min_log_rate": self.min_log_rate,
                "fraction_positive_rate": self.fraction_positive_rate,
                "uniformly_positive": self.uniformly_positive, "word": self.word,
                "seed": self.seed}


def diffeo_obstruction_check(system: GeneratorSystem, word: Optional[WordLike] = None,
                             n: int = 20, mc_samples: int = 100_000, seed: int = 0,
                             z_max: float = 4.0) -> ObstructionReport:
    """Monte-Carlo check of ``int |(f^n_w)'| dm = 1`` for diffeomorphisms.

    With ``word=None`` a random word of length ``n`` is drawn from the
    seeded stream (task 1); sample points use task 2.
    """
    if not system.is_diffeomorphism_system:
        raise PreconditionError("every generator must be a global diffeomorphism (one branch)")
    if word is None:
        word = Word(task_rng(seed, 1).integers(0, system.d, size=n).tolist())
    word = as_word(word)
    system.check_word(word, n)
    xs = task_rng(seed, 2).random(mc_samples)
    logd = composed_log_derivative(system, word, xs, n)
    vals = np.exp(logd)
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(mc_samples)) if mc_samples > 1 else math.inf
    if stderr == 0.0:
        z = 0.0 if mean == 1.0 else math.inf
    else:
        z = (mean - 1.0) / stderr
    rates = logd / n if n else np.zeros_like(logd)
    return ObstructionReport(
        n, mc_samples, mean, stderr, float(z), abs(z) <= z_max or mean == 1.0,
        float(np.mean(rates)), float(np.min(rates)), float(np.mean(rates > 0)),
        bool(np.min(rates) > 0), list(word.indices[:n]), seed)
