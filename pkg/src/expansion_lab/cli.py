"""Command-line front end.

Every report starts with a reproducibility header (tool version, RNG,
seed, full parameter bag).  Exit codes: 0 pass, 1 fail verdict, 2 input
error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional

from . import catalog, classify, ergodicity, pliss, preballs
from .core import Word, compose_orbit
from .errors import ExpansionLabError, InvariantViolation
from .io import SystemFileError, __version__, dumps, load_system, read_orbit_csv, system_to_dict
from .rng import RNG_NAME, task_rng, thread_cap

EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


# -- argument helpers -------------------------------------------------------------

def parse_word(text: Optional[str], system, n: int) -> Word:
    """``0,1,1`` | ``const:J`` | ``periodic:0,1``; None gives the default word."""
    if text is None:
        return system.default_word(n)
    if text.startswith("const:"):
        return Word.constant(int(text[6:]), n)
    if text.startswith("periodic:"):
        return Word.periodic([int(t) for t in text[9:].split(",")], n)
    try:
        return Word(tuple(int(t) for t in text.split(",") if t.strip()))
    except ValueError:
        raise InputError(f"cannot parse word {text!r}") from None


def _interval(text: str):
    try:
        lo, hi = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}") from None
    return (lo, hi)


def _params(items):
    """``k=v`` pairs (values parsed as JSON when possible)."""
    out = {}
    for item in items or []:
        k, sep, v = item.partition("=")
        if not sep:
            raise InputError(f"expected key=value, got {item!r}")
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def _load(path):
    if path is None:
        raise InputError("--system is required")
    p = Path(path)
    if not p.is_file():
        raise InputError(f"system file not found: {path}")
    return load_system(p)


def _system_digest(path) -> Optional[str]:
    if path is None:
        return None
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- subcommands ------------------------------------------------------------------
# each returns (report dict, csv text or None, passed)

def cmd_simulate(args):
    system = _load(args.system)
    word = parse_word(args.word, system, args.n)
    orbit = compose_orbit(system, word, args.x0, args.n)
    rep = {"x0": orbit.x0, "n": orbit.n, "word": list(orbit.word.indices[:orbit.n]),
           "points": orbit.points, "log_derivs": orbit.log_derivs,
           "log_derivative_sum": float(sum(orbit.log_derivs))}
    return rep, orbit.to_csv(), True


def cmd_pliss(args):
    if args.orbit:
        orbit = read_orbit_csv(args.orbit)
    else:
        system = _load(args.system)
        orbit = compose_orbit(system, parse_word(args.word, system, args.n), args.x0, args.n)
    seq = pliss.LogPhiSequence.from_orbit(orbit, args.mode, args.eta)
    if args.sigma is not None:
        rep = pliss.hyperbolic_times_bruteforce(seq, args.sigma)
        rep.notes.append("definitional scan")
    elif args.a is not None:
        rep = pliss.hyperbolic_times(seq, args.a)
    else:
        raise InputError("give --a or --sigma")
    out = rep.to_dict()
    out["expansion_exponent"] = pliss.expansion_exponent(seq)
    return out, None, not rep.advisory


def cmd_preball(args):
    system = _load(args.system)
    word = parse_word(args.word, system, args.n)
    pb = preballs.build_preball(system, word, args.x0, args.n, args.delta, sigma=args.sigma)
    con = preballs.verify_contraction(pb, samples=args.samples)
    pairs = preballs.random_subinterval_pairs(pb, args.pairs, task_rng(args.seed, 0))
    dist = preballs.check_bounded_distortion(pb, pairs)
    rep = {"preball": pb.to_dict(), "contraction": con.to_dict(), "distortion": dist.to_dict()}
    return rep, None, bool(con.passed and dist.passed)


def cmd_classify(args):
    system = _load(args.system)
    rep = classify.classify_action(system, args.samples, args.horizon, args.strategy,
                                   a_threshold=args.a, seed=args.seed, tol=args.tol)
    lines = ["index,x,exponent,hyperbolic_density"]
    for i, r in enumerate(rep.records):
        lines.append(f"{i},{r.x!r},{r.exponent!r},{r.hyperbolic_density!r}")
    return rep.to_dict(), "\n".join(lines) + "\n", rep.expandable


def cmd_ergodicity(args):
    system = _load(args.system)
    mode = args.mode
    if mode == "cover":
        word = parse_word(args.word, system, args.budget) if args.word else None
        res = ergodicity.covering_time(system, word, args.center, args.radius,
                                       args.eps_grid, args.budget)
        return res.to_dict(), None, res.n is not None
    if mode == "exact":
        balls = args.ball or ergodicity.default_balls()
        states = [ergodicity.exactness_check(system, b, args.budget, args.eps_grid)
                  for b in balls]
        rep = {"balls": [list(b) for b in balls], "states": [s.to_dict() for s in states],
               "complete": all(s.complete for s in states)}
        return rep, None, rep["complete"]
    if mode == "minimal":
        U = args.open_set or [(0.45, 0.55)]
        words = ergodicity.backward_minimality_check(system, U, args.budget, args.eps_grid)
        rep = {"open_set": [list(u) for u in U], "cover_words": words,
               "found": words is not None}
        return rep, None, words is not None
    if mode == "equi":
        word = parse_word(args.word, system, args.horizon) if args.word else None
        rep = ergodicity.equidistribution_test(
            system, args.policy, args.functions, args.horizon, args.points, args.seed,
            word=word, tolerance=args.tolerance)
        return rep.to_dict(), rep.to_csv(), rep.passed
    if mode == "invariant":
        res = ergodicity.invariant_set_closure(system, args.cells, args.eps_grid, args.max_iters)
        return res.to_dict(), None, res.converged
    raise InputError(f"unknown mode {mode!r}")


EXAMPLES = {
    "doubling": lambda p: catalog.doubling_system(),
    "perturbed": lambda p: catalog.perturbed_doubling(float(p.get("eps", 0.5))),
    "paper-interval": lambda p: catalog.paper_interval_example(
        catalog.IntervalExampleParams(**p), check=False),
    "rotation": lambda p: catalog.rotation_system(**p),
    "mobius": lambda p: catalog.mobius_pair(**p),
}


def cmd_example(args):
    params = _params(args.param)
    try:
        system = EXAMPLES[args.name](params)
    except TypeError as exc:
        raise InputError(f"bad parameters for {args.name}: {exc}") from None
    rep = {"name": args.name, "system": system_to_dict(system)}
    passed = True
    if args.verify:
        if args.name == "paper-interval":
            cond = catalog.verify_example_conditions(system, catalog.IntervalExampleParams(**params))
            rep["conditions"] = cond.to_dict()
            passed = cond.all_pass
        else:
            rep["conditions"] = None
    csv_text = catalog.figure_csv(system) if args.figure else None
    return rep, csv_text, passed


STOCHASTIC = {"classify", "preball"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="expansion-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, system=True, seed=False):
        if system:
            sp.add_argument("--system", help="system-definition JSON file")
        sp.add_argument("--seed", type=int, required=seed, default=None,
                        help="master seed (required for stochastic runs)")
        sp.add_argument("--out", help="output directory (default: JSON to stdout)")
        sp.add_argument("--format", choices=("json", "csv", "both"), default="both")

    sp = sub.add_parser("simulate", help="orbit and log-derivatives along a word")
    common(sp)
    sp.add_argument("--x0", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--word")

    sp = sub.add_parser("pliss", help="hyperbolic times of an orbit")
    common(sp)
    sp.add_argument("--orbit", help="orbit CSV (step,x,log_deriv) instead of --system")
    sp.add_argument("--x0", type=float, default=0.1)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--word")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--a", type=float, default=None, help="rate a > 0 (sigma = exp(-a/2))")
    g.add_argument("--sigma", type=float, help="scan definition directly at this sigma")
    sp.add_argument("--mode", choices=("pointwise", "inflated"), default="pointwise")
    sp.add_argument("--eta", type=float, default=0.0)

    sp = sub.add_parser("preball", help="build and verify a hyperbolic preball")
    common(sp, seed=True)
    sp.add_argument("--x0", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--word")
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--samples", type=int, default=64)
    sp.add_argument("--pairs", type=int, default=100)

    sp = sub.add_parser("classify", help="classify expansion type")
    common(sp, seed=True)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--horizon", type=int, default=1000)
    sp.add_argument("--strategy", default="greedy", help="greedy | beam[:k] | exhaustive:depth")
    sp.add_argument("--a", type=float, default=classify.A_THRESHOLD, help="exponent threshold")
    sp.add_argument("--tol", type=float, default=0.01)

    sp = sub.add_parser("ergodicity", help="covering / exactness / equidistribution tests")
    common(sp)
    sp.add_argument("mode", choices=("cover", "exact", "minimal", "equi", "invariant"))
    sp.add_argument("--eps-grid", type=float, default=ergodicity.EPS_GRID)
    sp.add_argument("--budget", type=int, default=ergodicity.DEFAULT_BUDGET)
    sp.add_argument("--word")
    sp.add_argument("--center", type=float, default=0.5)
    sp.add_argument("--radius", type=float, default=0.01)
    sp.add_argument("--ball", type=_interval, action="append", help="LO,HI (repeatable)")
    sp.add_argument("--open-set", type=_interval, action="append", help="LO,HI (repeatable)")
    sp.add_argument("--policy", choices=("fixed", "greedy", "random"), default="fixed")
    sp.add_argument("--functions", nargs="+", default=["cos:1", "sin:1", "cos:2", "const:1"])
    sp.add_argument("--horizon", type=int, default=10 ** 5)
    sp.add_argument("--points", type=int, default=10)
    sp.add_argument("--tolerance", type=float)
    sp.add_argument("--cells", type=int, nargs="+", default=[0])
    sp.add_argument("--max-iters", type=int, default=10 ** 4)

    sp = sub.add_parser("example", help="emit a catalog system (and verify it)")
    common(sp, system=False)
    sp.add_argument("--name", choices=sorted(EXAMPLES), required=True)
    sp.add_argument("--param", action="append", help="key=value (repeatable)")
    sp.add_argument("--verify", action="store_true")
    sp.add_argument("--figure", action="store_true", help="also emit x,f0,f1 CSV")
    return p


COMMANDS = {"simulate": cmd_simulate, "pliss": cmd_pliss, "preball": cmd_preball,
            "classify": cmd_classify, "ergodicity": cmd_ergodicity, "example": cmd_example}


def _header(args) -> dict:
    params = {k: v for k, v in sorted(vars(args).items())
              if k not in ("out", "format", "command", "seed")}
    name = args.command + (f"-{args.mode}" if args.command == "ergodicity" else "")
    return {"tool": "expansion-lab", "version": __version__, "command": name,
            "seed": args.seed, "rng": RNG_NAME, "threads": thread_cap(), "params": params,
            "system_sha256": _system_digest(getattr(args, "system", None))
            if getattr(args, "system", None) and Path(args.system).is_file() else None}


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_INPUT
    if args.command == "ergodicity" and args.mode == "equi" or args.command in STOCHASTIC:
        if args.seed is None:
            print("error: --seed is required for stochastic runs", file=sys.stderr)
            return EXIT_INPUT
    try:
        report, csv_text, passed = COMMANDS[args.command](args)
    except SystemFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantViolation as exc:
        print(f"error: invariant {exc.invariant!r} violated: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ExpansionLabError, OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    header = _header(args)
    doc = {"header": header, "report": report, "pass": bool(passed)}
    name = header["command"]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.format in ("json", "both"):
            (out / f"{name}.json").write_text(dumps(doc))
        if csv_text is not None and args.format in ("csv", "both"):
            (out / f"{name}.csv").write_text(csv_text)
    else:
        stdout.write(dumps(doc) if args.format != "csv" or csv_text is None else csv_text)
    return EXIT_PASS if passed else EXIT_FAIL


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
