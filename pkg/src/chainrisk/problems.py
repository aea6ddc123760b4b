"""Generative regression problems, samplers and closed-form risk oracles.

Three design families are supported:

* ``gaussian``: ``X ~ N(mean, cov)``.
* ``skewed_bernoulli``: the skewed three-coordinate design ``X = [W, Z, 1]``
  with ``W ~ N(0, 1)`` and ``Z`` taking ``-p`` w.p. ``1 - p`` and ``1 - p``
  w.p. ``p``.  The kurtosis of ``Z`` grows like ``1/p``.
* ``rademacher``: ``X = mean + scale * s`` with independent signs ``s``.
  Needed for designs whose eigenvalue floor ``kappa`` exceeds what a Gaussian
  can reach.

Responses are ``Y = target_slope @ X + target_bias + noise_sd * N(0, 1)``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigurationError, DegenerateMomentError, UnsupportedOracleError

GAUSSIAN_PSI2 = math.sqrt(8.0 / 3.0)  # ||N(0,1)||_psi2
BOUNDED_PSI2 = 1.0 / math.sqrt(math.log(2.0))  # ||W||_psi2 <= c * BOUNDED_PSI2 when |W| <= c

DESIGN_KINDS = ("gaussian", "skewed_bernoulli", "rademacher")


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *keys)``.

    Streams for different keys are statistically independent, so per-trial
    streams can be built from (master seed, trial index) in any order.
    """
    if seed < 0 or any(k < 0 for k in keys):
        raise ConfigurationError("seeds and stream keys must be nonnegative integers")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit seed for the stream ``(seed, *keys)``."""
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class Design:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class ProblemSpec:
    """A regression distribution with its declared sub-Gaussian constants.

    ``b_x`` bounds ``||X - EX||_psi2``, ``b_y`` bounds ``||Y - EY||_psi2`` and
    ``kappa`` satisfies ``kappa * b_x**2 <= lambda_min(cov)``.
    """

    dim: int
    design: Design
    target_slope: np.ndarray
    target_bias: float = 0.0
    noise_sd: float = 1.0
    b_x: float = 0.0
    b_y: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        self.target_slope = np.asarray(self.target_slope, dtype=float).reshape(-1)
        self.target_bias = float(self.target_bias)
        self.noise_sd = float(self.noise_sd)
        self.b_x, self.b_y, self.kappa = float(self.b_x), float(self.b_y), float(self.kappa)
        self._validate()

    def _validate(self):
        d = self.dim
        if not isinstance(d, (int, np.integer)) or d < 1:
            raise ConfigurationError(f"dim must be a positive integer, got {d!r}")
        if self.design.kind not in DESIGN_KINDS:
            raise ConfigurationError(f"unknown design kind {self.design.kind!r}")
        if self.target_slope.shape != (d,):
            raise ConfigurationError("target_slope must have length dim")
        if not np.all(np.isfinite(self.target_slope)) or not math.isfinite(self.target_bias):
            raise ConfigurationError("target parameters must be finite")
        if self.noise_sd < 0 or self.b_x < 0 or self.b_y < 0 or self.kappa < 0:
            raise ConfigurationError("noise_sd, b_x, b_y and kappa must be nonnegative")

        p = self.design.params
        if self.design.kind == "gaussian":
            mean = np.asarray(p.get("mean", np.zeros(d)), dtype=float)
            cov = np.asarray(p.get("cov", np.eye(d)), dtype=float)
            if mean.shape != (d,) or cov.shape != (d, d):
                raise ConfigurationError("gaussian mean/cov shapes do not match dim")
            if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
                raise ConfigurationError("covariance matrix is not symmetric")
            eig = np.linalg.eigvalsh(cov)
            if eig[0] < -1e-12 * max(1.0, eig[-1]):
                raise ConfigurationError("covariance matrix is not positive semidefinite")
        elif self.design.kind == "skewed_bernoulli":
            prob = p.get("p")
            if d != 3:
                raise ConfigurationError("skewed_bernoulli design requires dim = 3")
            if prob is None or not 0.0 < float(prob) < 1.0:
                raise ConfigurationError("skewed_bernoulli requires p in (0, 1)")
        else:
            scale = np.asarray(p.get("scale", np.ones(d)), dtype=float)
            mean = np.asarray(p.get("mean", np.zeros(d)), dtype=float)
            if scale.shape != (d,) or mean.shape != (d,) or np.any(scale < 0):
                raise ConfigurationError("rademacher scale/mean must be length dim, scale >= 0")

        lam_min = float(np.linalg.eigvalsh(self.cov_x)[0])
        if self.kappa * self.b_x**2 > lam_min + 1e-12 * max(1.0, lam_min):
            raise ConfigurationError(
                f"kappa * b_x^2 = {self.kappa * self.b_x**2:.6g} exceeds smallest "
                f"covariance eigenvalue {lam_min:.6g}"
            )

    # -- moments -----------------------------------------------------------
    @property
    def mean_x(self) -> np.ndarray:
        kind, p = self.design.kind, self.design.params
        if kind == "skewed_bernoulli":
            return np.array([0.0, 0.0, 1.0])
        return np.asarray(p.get("mean", np.zeros(self.dim)), dtype=float)

    @property
    def cov_x(self) -> np.ndarray:
        kind, p = self.design.kind, self.design.params
        if kind == "gaussian":
            return np.asarray(p.get("cov", np.eye(self.dim)), dtype=float)
        if kind == "skewed_bernoulli":
            prob = float(p["p"])
            return np.diag([1.0, prob * (1.0 - prob), 0.0])
        scale = np.asarray(p.get("scale", np.ones(self.dim)), dtype=float)
        return np.diag(scale**2)

    @property
    def mean_y(self) -> float:
        return float(self.target_slope @ self.mean_x + self.target_bias)

    @property
    def var_y(self) -> float:
        a = self.target_slope
        return float(a @ self.cov_x @ a + self.noise_sd**2)

    @property
    def problem_id(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        params = {k: (np.asarray(v).tolist() if isinstance(v, (list, np.ndarray)) else v)
                  for k, v in self.design.params.items()}
        return {
            "dim": int(self.dim),
            "design": {"kind": self.design.kind, "params": params},
            "target_slope": self.target_slope.tolist(),
            "target_bias": self.target_bias,
            "noise_sd": self.noise_sd,
            "b_x": self.b_x,
            "b_y": self.b_y,
            "kappa": self.kappa,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemSpec":
        try:
            design = data["design"]
            return cls(
                dim=int(data["dim"]),
                design=Design(design["kind"], dict(design.get("params", {}))),
                target_slope=np.asarray(data["target_slope"], dtype=float),
                target_bias=data.get("target_bias", 0.0),
                noise_sd=data.get("noise_sd", 1.0),
                b_x=data["b_x"],
                b_y=data["b_y"],
                kappa=data.get("kappa", 0.0),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed problem spec: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ProblemSpec":
        return cls.from_dict(json.loads(text))


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    seed: int
    problem_id: str = ""

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.x.shape[0] != self.y.shape[0] or self.y.shape[0] < 1:
            raise ConfigurationError("dataset needs n >= 1 matching rows")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ConfigurationError("dataset rows must be finite")

    @property
    def n(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True)
class LossSpec:
    """Loss function with its Lipschitz / strong-convexity constants."""

    kind: str = "squared"
    clip: float | None = None  # lambda for cross-entropy predictions

    def __post_init__(self):
        if self.kind not in ("squared", "absolute", "cross_entropy"):
            raise ConfigurationError(f"unknown loss {self.kind!r}")
        if self.kind == "cross_entropy" and (self.clip is None or not 0.0 < self.clip < 0.5):
            raise ConfigurationError("cross_entropy needs clip in (0, 1/2)")

    @property
    def lipschitz_R(self) -> float | None:
        if self.kind == "absolute":
            return 1.0
        if self.kind == "cross_entropy":
            return 1.0 / self.clip
        return None

    @property
    def strong_convexity_kappa(self) -> float | None:
        if self.kind == "squared":
            return 2.0
        if self.kind == "cross_entropy":
            return (1.0 - self.clip) ** -2
        return None

    def __call__(self, y, yhat):
        y = np.asarray(y, dtype=float)
        yhat = np.asarray(yhat, dtype=float)
        if self.kind == "squared":
            return (y - yhat) ** 2
        if self.kind == "absolute":
            return np.abs(y - yhat)
        from scipy.special import xlogy

        z = np.clip(yhat, self.clip, 1.0 - self.clip)
        return xlogy(y, y) - xlogy(y, z) + xlogy(1.0 - y, 1.0 - y) - xlogy(1.0 - y, 1.0 - z)


# -- constructors with declared constants -----------------------------------

def gaussian_problem(cov, target_slope, *, mean=None, target_bias=0.0, noise_sd=1.0) -> ProblemSpec:
    """Gaussian design with certified (not minimal) sub-Gaussian constants.

    ``b_x = sqrt(8/3 tr cov)`` always bounds ``||X - EX||_psi2`` because
    ``prod(1 - 2 l_i / b^2)^(-1/2) <= (1 - sum 2 l_i / b^2)^(-1/2) = 2``.
    ``Y - EY`` is Gaussian, so ``b_y`` is its exact psi2 norm.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    d = cov.shape[0]
    mean = np.zeros(d) if mean is None else np.asarray(mean, dtype=float)
    a = np.asarray(target_slope, dtype=float)
    b_x = GAUSSIAN_PSI2 * math.sqrt(max(np.trace(cov), 0.0))
    b_y = GAUSSIAN_PSI2 * math.sqrt(float(a @ cov @ a) + noise_sd**2)
    lam_min = max(float(np.linalg.eigvalsh(cov)[0]), 0.0)
    kappa = lam_min / b_x**2 if b_x > 0 else 0.0
    return ProblemSpec(d, Design("gaussian", {"mean": mean.tolist(), "cov": cov.tolist()}),
                       a, target_bias, noise_sd, b_x, b_y, kappa)


def skewed_problem(p: float, *, target_slope=(0.0, 0.0, 0.5), target_bias=0.5,
                   noise_sd=1.0) -> ProblemSpec:
    """Skewed design ``[W, Z, 1]``; defaults reproduce ``Y = 1 + noise``.

    ``b_x`` combines ``||W||_psi2`` with the bound ``|Z| <= 1`` through the
    triangle inequality, so it does not depend on ``p``.  ``kappa = 0``
    since the constant coordinate has no variance.
    """
    a = np.asarray(target_slope, dtype=float)
    b_x = GAUSSIAN_PSI2 + BOUNDED_PSI2
    b_y = GAUSSIAN_PSI2 * math.hypot(a[0], noise_sd) + abs(a[1]) * BOUNDED_PSI2
    return ProblemSpec(3, Design("skewed_bernoulli", {"p": float(p)}), a, target_bias,
                       noise_sd, b_x, b_y, 0.0)


def rademacher_problem(scale, target_slope, *, mean=None, target_bias=0.0,
                       noise_sd=1.0) -> ProblemSpec:
    """Sign design; ``||X - EX|| = ||scale||`` surely, so ``b_x`` is exact."""
    scale = np.asarray(scale, dtype=float).reshape(-1)
    d = scale.size
    mean = np.zeros(d) if mean is None else np.asarray(mean, dtype=float)
    a = np.asarray(target_slope, dtype=float)
    b_x = BOUNDED_PSI2 * float(np.linalg.norm(scale))
    b_y = BOUNDED_PSI2 * float(np.abs(a * scale).sum()) + GAUSSIAN_PSI2 * noise_sd
    kappa = float(np.min(scale**2)) / b_x**2 if b_x > 0 else 0.0
    return ProblemSpec(d, Design("rademacher", {"scale": scale.tolist(), "mean": mean.tolist()}),
                       a, target_bias, noise_sd, b_x, b_y, kappa)


# -- sampling ---------------------------------------------------------------

def sample_design(spec: ProblemSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    kind, p = spec.design.kind, spec.design.params
    if kind == "gaussian":
        cov = spec.cov_x
        lam, vec = np.linalg.eigh(cov)
        root = vec * np.sqrt(np.clip(lam, 0.0, None))
        return spec.mean_x + rng.standard_normal((n, spec.dim)) @ root.T
    if kind == "skewed_bernoulli":
        prob = float(p["p"])
        w = rng.standard_normal(n)
        z = np.where(rng.random(n) < prob, 1.0 - prob, -prob)
        return np.column_stack([w, z, np.ones(n)])
    scale = np.asarray(p.get("scale", np.ones(spec.dim)), dtype=float)
    signs = np.where(rng.random((n, spec.dim)) < 0.5, -1.0, 1.0)
    return spec.mean_x + signs * scale


def sample_xy(spec: ProblemSpec, n: int, rng: np.random.Generator):
    x = sample_design(spec, n, rng)
    y = x @ spec.target_slope + spec.target_bias
    if spec.noise_sd > 0:
        y = y + spec.noise_sd * rng.standard_normal(n)
    return x, y


def sample(spec: ProblemSpec, n: int, seed: int) -> Dataset:
    """Draw ``n`` i.i.d. pairs; bit-identical for identical ``(spec, n, seed)``."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    x, y = sample_xy(spec, int(n), make_rng(seed))
    return Dataset(x, y, int(seed), spec.problem_id)


# -- oracles ----------------------------------------------------------------

def _risk_offset(spec: ProblemSpec, f) -> float:
    """``E|f(X) - Y|^2 - noise_sd^2`` for an affine ``f`` (squared loss)."""
    diff = np.asarray(f.slope, dtype=float) - spec.target_slope
    shift = float(np.asarray(f.slope) @ spec.mean_x + f.bias - spec.mean_y)
    return float(diff @ spec.cov_x @ diff + shift**2)


def analytic_excess_risk(spec: ProblemSpec, f, reference, loss: LossSpec | None = None) -> float:
    """Squared-loss risk difference ``L(f) - L(reference)`` in closed form."""
    if loss is not None and loss.kind != "squared":
        raise UnsupportedOracleError(f"no closed form for {loss.kind} loss; use Monte Carlo")
    return _risk_offset(spec, f) - _risk_offset(spec, reference)


def population_reference(spec: ProblemSpec, radius: float | None = None, tol: float = 1e-12):
    """Risk minimizer over affine functions with ``||slope|| <= radius``.

    ``radius=None`` means unconstrained; the minimum-norm minimizer is
    returned when the covariance is singular.
    """
    from .estimators import AffineFunction, _norm_constrained_quadratic

    cov = spec.cov_x
    cross = cov @ spec.target_slope
    slope, _ = _norm_constrained_quadratic(cov, cross, radius, tol=tol)
    return AffineFunction(slope, spec.mean_y - float(slope @ spec.mean_x))


def kurtosis_about_origin(samples) -> float:
    """``E[W^4] / E[W^2]^2`` estimated from samples."""
    w = np.asarray(samples, dtype=float).reshape(-1)
    m2 = float(np.mean(w**2))
    if m2 == 0.0:
        raise DegenerateMomentError("second moment is zero")
    return float(np.mean(w**4)) / m2**2


def direction_kurtosis(spec: ProblemSpec, direction, offset: float = 0.0) -> float:
    """Exact kurtosis about the origin of ``direction @ (X - EX) + offset``."""
    c = np.asarray(direction, dtype=float)
    kind, p = spec.design.kind, spec.design.params
    if kind == "gaussian":
        s2 = float(c @ spec.cov_x @ c)
        m2, m4 = s2 + offset**2, 3 * s2**2 + 6 * s2 * offset**2 + offset**4
    elif kind == "skewed_bernoulli":
        prob = float(p["p"])
        # independent parts: N(0, c0^2), c1 Z, constant offset
        mom_g = [1.0, 0.0, c[0] ** 2, 0.0, 3 * c[0] ** 4]
        zvals = np.array([-prob, 1.0 - prob]) * c[1] + offset
        zprob = np.array([1.0 - prob, prob])
        mom_z = [float(zprob @ zvals**k) for k in range(5)]
        m2 = mom_g[2] + mom_z[2]
        m4 = mom_g[4] + 6 * mom_g[2] * mom_z[2] + mom_z[4]
    else:
        scale = np.asarray(p.get("scale", np.ones(spec.dim)), dtype=float)
        v = (c * scale) ** 2
        s2 = float(v.sum())
        fourth = 3 * s2**2 - 2 * float((v**2).sum())
        m2 = s2 + offset**2
        m4 = fourth + 6 * s2 * offset**2 + offset**4
    if m2 <= 0.0:
        raise DegenerateMomentError("direction has zero second moment")
    return m4 / m2**2


def check_declared_constants(spec: ProblemSpec, n_samples: int = 100_000, seed: int = 0,
                             slack: float = 0.10) -> dict:
    """Compare declared ``b_x``, ``b_y`` with empirical psi2 norms."""
    from .orlicz import orlicz_norm_empirical

    x, y = sample_xy(spec, n_samples, make_rng(seed))
    emp_x = orlicz_norm_empirical(x - spec.mean_x, q=2).value
    emp_y = orlicz_norm_empirical(y - spec.mean_y, q=2).value
    return {
        "b_x": spec.b_x, "empirical_b_x": emp_x,
        "b_y": spec.b_y, "empirical_b_y": emp_y,
        "ok": emp_x <= (1 + slack) * spec.b_x and emp_y <= (1 + slack) * spec.b_y,
    }
