"""Seeded Monte-Carlo sweeps over the sample size with bound-dominance checks."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .bounds import LinearParams, constrained_bound, penalized_bound
from .errors import ChainRiskError, ConfigurationError, ExperimentError
from .estimators import constrained_lse, measure_excess_risk, ridge_fit
from .parallel import pmap
from .problems import LossSpec, ProblemSpec, derive_seed, population_reference, sample

log = logging.getLogger(__name__)

CSV_COLUMNS = ("n", "trial", "seed", "excess_risk", "slope_norm", "alpha", "failed")
LAMBDA_RULES = ("fixed", "sqrt_d_over_n", "d_over_n")
MAX_FAILURE_RATE = 0.01
MIN_QUANTILE_TRIALS = 30


@dataclass
class ExperimentConfig:
    """One sweep: problem, estimator, grid of sample sizes and a bound to compare with.

    ``estimator`` is ``{"kind": "constrained", "L": ...}`` or
    ``{"kind": "ridge", "lambda_rule": ..., "lam": ...}``.  ``exploit_kappa``
    set to False evaluates bounds as if the design had no eigenvalue floor.
    """

    problem: ProblemSpec
    estimator: dict
    n_grid: list
    trials: int = 500
    gamma: float = 0.1
    master_seed: int = 0
    bound: str = "constrained"
    loss: LossSpec = field(default_factory=LossSpec)
    exploit_kappa: bool = True
    workers: int | None = None

    def __post_init__(self):
        self.n_grid = [int(n) for n in self.n_grid]
        kind = self.estimator.get("kind")
        if kind == "constrained":
            if float(self.estimator.get("L", 0)) <= 0:
                raise ConfigurationError("constrained estimator needs L > 0")
        elif kind == "ridge":
            rule = self.estimator.get("lambda_rule", "fixed")
            if rule not in LAMBDA_RULES:
                raise ConfigurationError(f"lambda_rule must be one of {LAMBDA_RULES}")
            if rule == "fixed" and float(self.estimator.get("lam", -1)) < 0:
                raise ConfigurationError("fixed lambda rule needs lam >= 0")
        else:
            raise ConfigurationError(f"unknown estimator {kind!r}")
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ConfigurationError("n_grid must hold positive sample sizes")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigurationError("n_grid must be strictly increasing")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if not 0 < self.gamma < 1:
            raise ConfigurationError("gamma must lie in (0, 1)")
        if self.master_seed < 0 or self.master_seed >= 2**64:
            raise ConfigurationError("master_seed must be a 64-bit unsigned integer")
        if self.bound not in ("constrained", "penalized", "none"):
            raise ConfigurationError("bound must be constrained, penalized or none")
        if self.bound == "constrained" and kind != "constrained":
            raise ConfigurationError("the constrained bound needs the constrained estimator")
        if self.bound == "penalized" and kind != "ridge":
            raise ConfigurationError("the penalized bound needs the ridge estimator")

    def lam(self, n: int) -> float:
        rule = self.estimator.get("lambda_rule", "fixed")
        d = self.problem.dim
        if rule == "sqrt_d_over_n":
            return math.sqrt(d / n)
        if rule == "d_over_n":
            return d / n
        return float(self.estimator["lam"])

    def to_dict(self) -> dict:
        return {"problem": self.problem.to_dict(), "estimator": dict(self.estimator),
                "n_grid": list(self.n_grid), "trials": self.trials, "gamma": self.gamma,
                "master_seed": self.master_seed, "bound": self.bound,
                "loss": {"kind": self.loss.kind, "clip": self.loss.clip},
                "exploit_kappa": self.exploit_kappa}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            loss = data.get("loss", {})
            return cls(problem=ProblemSpec.from_dict(data["problem"]),
                       estimator=dict(data["estimator"]), n_grid=list(data["n_grid"]),
                       trials=int(data.get("trials", 500)), gamma=float(data.get("gamma", 0.1)),
                       master_seed=int(data.get("master_seed", 0)),
                       bound=data.get("bound", "none"),
                       loss=LossSpec(loss.get("kind", "squared"), loss.get("clip")),
                       exploit_kappa=bool(data.get("exploit_kappa", True)),
                       workers=data.get("workers"))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"malformed experiment config: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config is not valid JSON: {exc}") from exc

    # -- derived pieces ---------------------------------------------------
    def reference(self):
        if self.estimator["kind"] == "constrained":
            return population_reference(self.problem, float(self.estimator["L"]))
        return population_reference(self.problem, None)

    def bound_params(self) -> LinearParams:
        p = self.problem
        return LinearParams(p.dim, p.b_x, p.b_y, p.kappa if self.exploit_kappa else 0.0)

    def bound_at(self, n: int) -> float | None:
        if self.bound == "none":
            return None
        prm = self.bound_params()
        if self.bound == "constrained":
            return constrained_bound(prm, float(self.estimator["L"]), self.gamma, n).total
        L_star = self.reference().slope_norm
        return penalized_bound(prm, self.lam(n), L_star, self.gamma, n).total


def _fit(config: ExperimentConfig, data):
    if config.estimator["kind"] == "constrained":
        return constrained_lse(data, float(config.estimator["L"]),
                               float(config.estimator.get("tol", 1e-8)))
    f = ridge_fit(data, config.lam(data.n))
    f.info["alpha"] = 0.0
    return f


def _run_trial(args) -> dict:
    config, reference, n, trial = args
    seed = derive_seed(config.master_seed, n, trial)
    row = {"n": n, "trial": trial, "seed": seed}
    try:
        data = sample(config.problem, n, seed)
        f = _fit(config, data)
        method = "analytic" if config.loss.kind == "squared" else "mc"
        risk = measure_excess_risk(f, config.problem, reference, config.loss, method,
                                   seed=seed)
        row.update(excess_risk=risk.value, slope_norm=f.slope_norm,
                   alpha=float(f.info.get("alpha", 0.0)), failed=False)
    except (ChainRiskError, np.linalg.LinAlgError) as exc:
        log.debug("trial n=%d #%d failed: %s", n, trial, exc)
        row.update(excess_risk=math.nan, slope_norm=math.nan, alpha=math.nan, failed=True)
    return row


def conservative_quantile(values, level: float) -> float:
    """The ``ceil(level * k)``-th order statistic of ``k`` values."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ExperimentError("no values to take a quantile of")
    j = min(max(math.ceil(level * v.size - 1e-9), 1), v.size)
    return float(v[j - 1])


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2}


def rate_fit(n_values, medians) -> RateFit:
    """Least-squares line through ``(ln n, ln median)``."""
    n_values = np.asarray(n_values, dtype=float)
    medians = np.asarray(medians, dtype=float)
    if n_values.size < 3 or n_values.size != medians.size:
        raise ExperimentError("rate fit needs at least 3 grid points")
    if np.any(medians <= 0) or np.any(n_values <= 0) or not np.all(np.isfinite(medians)):
        raise ExperimentError("rate fit needs positive, finite medians")
    res = stats.linregress(np.log(n_values), np.log(medians))
    return RateFit(float(res.slope), float(res.intercept), float(res.rvalue**2))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    per_n: list
    rate: RateFit | None = None

    @property
    def failed(self) -> int:
        return sum(1 for r in self.rows if r["failed"])

    def column(self, name: str, n: int | None = None) -> np.ndarray:
        return np.array([r[name] for r in self.rows
                         if not r["failed"] and (n is None or r["n"] == n)])

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r["n"], r["trial"], r["seed"], repr(float(r["excess_risk"])),
                        repr(float(r["slope_norm"])), repr(float(r["alpha"])), int(r["failed"])])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"per_n": self.per_n,
                "rate_fit": self.rate.to_dict() if self.rate else None,
                "failed_trials": self.failed,
                "config": self.config.to_dict(),
                "version": __version__}

    def save(self, outdir) -> dict:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"csv": out / "results.csv", "summary": out / "summary.json",
                 "config": out / "config.json"}
        paths["csv"].write_text(self.csv_text())
        paths["summary"].write_text(json.dumps(_json_safe(self.summary()), indent=2))
        paths["config"].write_text(json.dumps(self.config.to_dict(), indent=2))
        return paths


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def read_results_csv(path) -> list:
    """Rows of a results CSV with the types they had in memory."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append({"n": int(rec["n"]), "trial": int(rec["trial"]), "seed": int(rec["seed"]),
                         "excess_risk": float(rec["excess_risk"]),
                         "slope_norm": float(rec["slope_norm"]), "alpha": float(rec["alpha"]),
                         "failed": bool(int(rec["failed"]))})
    return rows


def summarize_rows(rows, n_grid, gamma: float, bounds=None):
    """Per-n medians and conservative quantiles plus the median rate fit."""
    per_n = []
    for i, n in enumerate(n_grid):
        vals = [r["excess_risk"] for r in rows if r["n"] == n and not r["failed"]]
        if not vals:
            raise ExperimentError(f"every trial failed at n = {n}")
        bound = None if bounds is None else bounds[i]
        q = conservative_quantile(vals, 1.0 - gamma)
        per_n.append({"n": n, "trials": len(vals), "median": float(np.median(vals)),
                      "quantile": q, "bound": bound,
                      "dominated": None if bound is None else bool(q <= bound)})
    rate = None
    if len(n_grid) >= 3:
        meds = [p["median"] for p in per_n]
        rate = rate_fit(n_grid, meds) if all(m > 0 for m in meds) else None
    return per_n, rate


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Run every ``(n, trial)`` pair with its own derived seed and summarize.

    Output is identical for any number of workers.
    """
    reference = config.reference()
    items = [(config, reference, n, t) for n in config.n_grid for t in range(config.trials)]
    rows = pmap(_run_trial, items, workers if workers is not None else config.workers, 8)
    failed = sum(r["failed"] for r in rows)
    if failed > MAX_FAILURE_RATE * len(rows):
        raise ExperimentError(f"{failed} of {len(rows)} trials failed (cap is 1%)")
    if failed:
        log.warning("%d failed trials excluded", failed)
    bounds = None if config.bound == "none" else [config.bound_at(n) for n in config.n_grid]
    per_n, rate = summarize_rows(rows, config.n_grid, config.gamma, bounds)
    return ExperimentResult(config, rows, per_n, rate)


@dataclass
class DominanceReport:
    rows: list
    passed: bool
    warnings: list = field(default_factory=list)

    def lines(self) -> list:
        out = []
        for r in self.rows:
            flag = "ok" if r["dominated"] else "VIOLATED"
            out.append(f"n={r['n']}: quantile {r['quantile']:.4g} vs bound {r['bound']:.4g} {flag}")
        return out + [f"warning: {w}" for w in self.warnings]


def dominance_check(result: ExperimentResult) -> DominanceReport:
    """Compare the empirical ``(1 - gamma)``-quantile with the bound at each ``n``."""
    cfg = result.config
    if cfg.bound == "none":
        raise ConfigurationError("no bound configured")
    if cfg.trials < MIN_QUANTILE_TRIALS:
        raise ConfigurationError(
            f"quantile checks need at least {MIN_QUANTILE_TRIALS} trials, got {cfg.trials}")
    notes, rows = [], []
    for p in result.per_n:
        k = p["trials"]
        j = min(max(math.ceil((1 - cfg.gamma) * k - 1e-9), 1), k)
        # P(order statistic j lies below the true quantile) for continuous data
        below = float(stats.binom.sf(j - 1, k, 1 - cfg.gamma))
        row = dict(p, order_statistic=j, prob_below_true_quantile=below)
        if p["bound"] is None or math.isinf(p["bound"]):
            notes.append(f"bound at n={p['n']} is infinite; passes trivially")
            row["dominated"] = True
        rows.append(row)
    for w in notes:
        warnings.warn(w, stacklevel=2)
    return DominanceReport(rows, all(r["dominated"] for r in rows), notes)


# -- presets --------------------------------------------------------------------

def preset(name: str, **overrides) -> ExperimentConfig:
    """Ready-made configurations for the headline regimes."""
    from .problems import gaussian_problem, rademacher_problem, skewed_problem

    if name == "constrained-gaussian":
        base = dict(problem=gaussian_problem(np.eye(3), [0.5, 0.0, 0.0]),
                    estimator={"kind": "constrained", "L": 1.0},
                    n_grid=[100, 400, 1600, 6400], bound="constrained")
    elif name == "ridge-sqrt":
        base = dict(problem=gaussian_problem(np.eye(3), [0.5, 0.0, 0.0]),
                    estimator={"kind": "ridge", "lambda_rule": "sqrt_d_over_n"},
                    n_grid=[200, 800, 3200, 12800], bound="penalized", exploit_kappa=False)
    elif name == "ridge-dn":
        base = dict(problem=rademacher_problem([1.0], [0.5]),
                    estimator={"kind": "ridge", "lambda_rule": "d_over_n"},
                    n_grid=[200, 800, 3200, 12800], bound="penalized")
    elif name == "mbg-skew":
        base = dict(problem=skewed_problem(overrides.pop("p", 0.01)),
                    estimator={"kind": "constrained", "L": 0.5},
                    n_grid=[400, 1600, 6400, 25600], bound="constrained")
    else:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    base.update({"trials": 500, "gamma": 0.1, "master_seed": 0})
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**base)


PRESETS = ("constrained-gaussian", "ridge-sqrt", "ridge-dn", "mbg-skew")
