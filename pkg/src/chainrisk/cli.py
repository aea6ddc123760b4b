"""Command-line interface: ``chainrisk {bound,simulate,verify,rates,orlicz,cover}``.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ChainRiskError, ConfigurationError

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    val = int(text, 0)
    if not 0 <= val < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return val


def _pos_int(text: str) -> int:
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return val


def _nonneg_int(text: str) -> int:
    val = int(text)
    if val < 0:
        raise argparse.ArgumentTypeError("must be a nonnegative integer")
    return val


def _gamma(text: str) -> float:
    val = float(text)
    if not 0 < val < 1:
        raise argparse.ArgumentTypeError("gamma must lie in (0, 1)")
    return val


def _common(p: argparse.ArgumentParser, *, config=True, preset=True):
    if config:
        p.add_argument("--config", metavar="PATH", help="experiment config JSON")
    if preset:
        from .harness import PRESETS
        p.add_argument("--preset", choices=PRESETS, help="built-in configuration")
    p.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    p.add_argument("--seed", type=_u64, metavar="U64", help="master seed override")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chainrisk",
                     description="Excess-risk bounds for empirical risk minimization and "
                                 "Monte-Carlo checks of the underlying inequalities.",
                     epilog="exit codes: 0 success, 1 a check failed, 2 usage or config error")
    parser.add_argument("--version", action="version", version=f"chainrisk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bound", help="evaluate an excess-risk bound as JSON")
    _common(p)
    p.add_argument("--n", type=int, required=True, help="sample size")
    p.add_argument("--gamma", type=_gamma, help="failure probability")

    p = sub.add_parser("simulate", help="run a Monte-Carlo sweep and check bound dominance")
    _common(p)
    p.add_argument("--n", type=_pos_int, nargs="+", help="override the grid of sample sizes")
    p.add_argument("--gamma", type=_gamma, help="failure probability")
    p.add_argument("--trials", type=_pos_int, help="trials per sample size")
    p.add_argument("--workers", type=_pos_int, help="worker processes (default $CHAINRISK_WORKERS or 1)")

    p = sub.add_parser("verify", help="run the inequality validators")
    _common(p, config=False, preset=False)
    p.add_argument("--reps", type=_nonneg_int, default=1000, help="Monte-Carlo repetitions per check")
    p.add_argument("--gamma", type=_gamma, default=0.1, help="failure probability")
    p.add_argument("--workers", type=_pos_int, help="worker processes (default $CHAINRISK_WORKERS or 1)")

    p = sub.add_parser("rates", help="fit the median rate from a results CSV")
    p.add_argument("csv", metavar="CSV", help="results.csv written by simulate")
    p.add_argument("--gamma", type=_gamma, default=0.1, help="quantile level 1-gamma")
    p.add_argument("--out", metavar="PATH", help="write output here instead of stdout")

    p = sub.add_parser("orlicz", help="estimate a psi_q norm from samples")
    p.add_argument("--dist", choices=("gaussian", "laplace", "rademacher", "uniform"),
                   default="gaussian", help="sampling distribution")
    p.add_argument("--q", type=float, default=2.0, help="Orlicz exponent q >= 1")
    p.add_argument("--n", type=_pos_int, default=100_000, help="number of samples")
    p.add_argument("--seed", type=_u64, default=0, metavar="U64", help="random seed")
    p.add_argument("--out", metavar="PATH", help="write output here instead of stdout")

    p = sub.add_parser("cover", help="greedy cover of points sampled in a unit ball")
    p.add_argument("--ball", type=_pos_int, required=True, metavar="D", help="ball dimension")
    p.add_argument("--eps", type=float, required=True, help="cover radius")
    p.add_argument("--points", type=_pos_int, default=10_000, help="number of sampled points")
    p.add_argument("--seed", type=_u64, default=0, metavar="U64", help="random seed")
    p.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    return parser


def _emit(payload: dict, out: str | None):
    text = json.dumps(payload, indent=2, default=_default)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _default(obj):
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _load_config(args, **overrides):
    from .harness import ExperimentConfig, preset

    if args.config and args.preset:
        raise ConfigurationError("use either --config or --preset, not both")
    if args.preset:
        cfg = preset(args.preset, **overrides)
    elif args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config: {exc}") from exc
        data = json.loads(text) if text.strip() else {}
        data.update({k: v for k, v in overrides.items() if v is not None})
        cfg = ExperimentConfig.from_dict(data)
    else:
        raise ConfigurationError("a --config or --preset is required")
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
    return cfg


def cmd_bound(args) -> int:
    from .bounds import constrained_bound, penalized_bound

    if args.n < 1:
        raise ConfigurationError("--n must be >= 1")
    cfg = _load_config(args, gamma=args.gamma)
    prm = cfg.bound_params()
    if cfg.bound == "penalized":
        rep = penalized_bound(prm, cfg.lam(args.n), cfg.reference().slope_norm, cfg.gamma, args.n)
    elif cfg.bound == "constrained":
        rep = constrained_bound(prm, float(cfg.estimator["L"]), cfg.gamma, args.n)
    else:
        raise ConfigurationError("config has no bound to evaluate")
    _emit(rep.to_dict(), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .harness import dominance_check, run_experiment

    cfg = _load_config(args, gamma=args.gamma, trials=args.trials, n_grid=args.n)
    result = run_experiment(cfg, workers=args.workers)
    if args.out:
        paths = result.save(args.out)
        print(f"wrote {paths['csv']}, {paths['summary']}, {paths['config']}", file=sys.stderr)
    else:
        _emit(result.summary(), None)
    if cfg.bound == "none" or cfg.trials < 30:
        return EXIT_OK
    report = dominance_check(result)
    for line in report.lines():
        print(line, file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_CHECK


def run_verify(reps: int, seed: int = 0, gamma: float = 0.1, workers=None) -> list:
    """Every validator at ``reps`` repetitions; returns ``(name, passed, detail)`` tuples."""
    from .concentration import (validate_finite_max_moment, validate_finite_max_subgaussian,
                                validate_orlicz_tails, validate_sup_bound_mc)
    from .covering import entropy_ball, greedy_cover, sample_ball
    from .estimators import lsenorm_check
    from .problems import make_rng

    if reps < 1:
        raise ConfigurationError("--reps must be >= 1")
    out = []
    tails = validate_orlicz_tails(n=max(100 * reps, 10_000), seed=seed)
    out.append(("orlicz tails", tails["passed"], f"{len(tails['rows'])} grid points"))
    for q in (1, 2):
        chk = validate_finite_max_subgaussian(50, gamma, q, reps, seed, workers)
        out.append((chk.name, chk.passed, f"{chk.frequency:.4f} <= {chk.threshold:.4f}"))
    chk = validate_finite_max_moment(50, gamma, 1.0, reps, seed, workers=workers)
    out.append((chk.name, chk.passed, f"{chk.frequency:.4f} <= {chk.threshold:.4f}"))
    chk = validate_sup_bound_mc(500, gamma, reps, seed, workers=workers)
    out.append((chk.name, chk.passed, f"{chk.frequency:.4f} <= {chk.threshold:.4f}"))

    rng = make_rng(seed, 0x15E)
    held = 0
    for _ in range(100):
        rows, cols = rng.integers(1, 21), rng.integers(1, 11)
        _, _, ok = lsenorm_check(rng.standard_normal((rows, cols)), rng.standard_normal(rows),
                                 float(np.exp(rng.uniform(-5, 5))))
        held += ok
    out.append(("lsenorm", held == 100, f"{held}/100 hold"))

    bad = []
    for d in (1, 2, 3):
        pts = sample_ball(d, 5000, make_rng(seed, 0xC0, d))
        for eps in (0.25, 0.5, 1.0):
            size = greedy_cover(pts, eps).size
            if math.log(size) > entropy_ball(eps, 1.0, d) + 1e-12:
                bad.append((d, eps, size))
    out.append(("covering", not bad, "ok" if not bad else f"violations {bad}"))
    return out


def cmd_verify(args) -> int:
    if args.reps == 0:
        raise ConfigurationError("--reps must be >= 1")
    seed = 0 if args.seed is None else args.seed
    results = run_verify(args.reps, seed, args.gamma, args.workers)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if args.out:
        _emit({"seed": seed, "reps": args.reps,
               "checks": [{"name": n, "passed": bool(ok), "detail": d} for n, ok, d in results]},
              args.out)
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_CHECK


def cmd_rates(args) -> int:
    from .harness import read_results_csv, summarize_rows

    try:
        rows = read_results_csv(args.csv)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigurationError(f"cannot read results CSV: {exc}") from exc
    grid = sorted({r["n"] for r in rows})
    per_n, rate = summarize_rows(rows, grid, args.gamma)
    _emit({"per_n": per_n, "rate_fit": rate.to_dict() if rate else None}, args.out)
    return EXIT_OK


def cmd_orlicz(args) -> int:
    from .orlicz import orlicz_norm_empirical
    from .problems import make_rng

    if args.q < 1:
        raise ConfigurationError("--q must be >= 1")
    rng = make_rng(args.seed)
    draw = {"gaussian": lambda: rng.standard_normal(args.n),
            "laplace": lambda: rng.laplace(0.0, 1.0, args.n),
            "rademacher": lambda: np.where(rng.random(args.n) < 0.5, -1.0, 1.0),
            "uniform": lambda: rng.uniform(-1.0, 1.0, args.n)}[args.dist]
    est = orlicz_norm_empirical(draw(), q=args.q)
    _emit({"dist": args.dist, "q": est.q, "n": est.n_samples, "value": est.value,
           "method": est.method, "seed": args.seed}, args.out)
    return EXIT_OK


def cmd_cover(args) -> int:
    from .covering import entropy_ball, greedy_cover, sample_ball
    from .problems import make_rng

    if args.eps <= 0:
        raise ConfigurationError("--eps must be positive")
    pts = sample_ball(args.ball, args.points, make_rng(args.seed))
    size = int(greedy_cover(pts, args.eps).size)
    bound = entropy_ball(args.eps, 1.0, args.ball)
    ok = math.log(size) <= bound + 1e-12
    _emit({"d": args.ball, "eps": args.eps, "points": args.points, "size": size,
           "ln_size": math.log(size), "entropy_ball": bound, "within_bound": ok}, args.out)
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {"bound": cmd_bound, "simulate": cmd_simulate, "verify": cmd_verify,
            "rates": cmd_rates, "orlicz": cmd_orlicz, "cover": cmd_cover}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * getattr(args, "verbose", 0)
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, json.JSONDecodeError) as exc:
        print(f"chainrisk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ChainRiskError as exc:
        print(f"chainrisk: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, ValueError) else EXIT_CHECK


def entry() -> None:
    sys.exit(main())
