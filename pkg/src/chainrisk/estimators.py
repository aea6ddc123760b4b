"""Affine least-squares estimators: ridge, norm-constrained LSE, risk measurement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ConvergenceError, RankDeficiencyError, UnsupportedOracleError
from .problems import Dataset, LossSpec, ProblemSpec, analytic_excess_risk, make_rng, sample_xy

PIVOT_RTOL = 1e-12


@dataclass
class AffineFunction:
    """``x -> slope @ x + bias``.  ``info`` carries fit diagnostics."""

    slope: np.ndarray
    bias: float = 0.0
    info: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.slope = np.asarray(self.slope, dtype=float).reshape(-1)
        self.bias = float(self.bias)
        if not (np.all(np.isfinite(self.slope)) and math.isfinite(self.bias)):
            raise ValueError("affine function entries must be finite")

    def __call__(self, x) -> np.ndarray:
        return np.atleast_2d(np.asarray(x, dtype=float)) @ self.slope + self.bias

    @property
    def slope_norm(self) -> float:
        return float(np.linalg.norm(self.slope))


def centered_moments(data: Dataset):
    """``(x_bar, y_bar, cov_hat, cross_hat, var_y_hat)`` with 1/n normalization."""
    xbar = data.x.mean(axis=0)
    ybar = float(data.y.mean())
    xc = data.x - xbar
    yc = data.y - ybar
    n = data.n
    return xbar, ybar, xc.T @ xc / n, xc.T @ yc / n, float(yc @ yc) / n


def _norm_constrained_quadratic(cov, cross, radius, tol: float = 1e-8, max_iter: int = 400):
    """Minimize ``a' cov a - 2 cross' a`` subject to ``||a|| <= radius``.

    Returns ``(a, lam)`` where ``lam`` is the Lagrange multiplier.  The
    unconstrained case (``radius=None`` or an interior minimizer) uses the
    minimum-norm solution on the numerical range of ``cov``; otherwise
    ``lam`` is bisected until ``radius - tol <= ||a(lam)|| <= radius``.
    """
    w, v = np.linalg.eigh(np.asarray(cov, dtype=float))
    w = np.clip(w, 0.0, None)
    c = v.T @ np.asarray(cross, dtype=float)
    keep = w > PIVOT_RTOL * max(float(w[-1]), 0.0) if w[-1] > 0 else np.zeros_like(w, dtype=bool)

    def coords(lam):
        out = np.zeros_like(c)
        if lam == 0.0:
            out[keep] = c[keep] / w[keep]
        else:
            out = c / (w + lam)
        return out

    free = coords(0.0)
    if radius is None or np.linalg.norm(free) <= radius:
        return v @ free, 0.0
    if radius <= 0:
        return np.zeros_like(c), math.inf

    lo, hi = 0.0, float(np.linalg.norm(c)) / radius
    for it in range(max_iter):
        mid = 0.5 * (lo + hi)
        norm = np.linalg.norm(coords(mid))
        if norm > radius:
            lo = mid
        else:
            hi = mid
            if norm >= radius - tol:
                break
    else:
        norm = np.linalg.norm(coords(hi))
        if norm < radius - tol:
            raise ConvergenceError("lambda bisection did not converge",
                                   lam_lo=lo, lam_hi=hi, norm=float(norm), radius=radius)
    return v @ coords(hi), hi


def ridge_fit(data: Dataset, lam: float) -> AffineFunction:
    """Closed-form ridge regression on centered data.

    ``slope = (lam I + cov_hat)^-1 cross_hat`` via Cholesky,
    ``bias = y_bar - slope @ x_bar``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    xbar, ybar, cov, cross, _ = centered_moments(data)
    if lam == 0.0:
        eig = np.linalg.eigvalsh(cov)
        if eig[-1] <= 0 or eig[0] < PIVOT_RTOL * eig[-1]:
            raise RankDeficiencyError(
                f"centered Gram matrix is singular (eigenvalues {eig[0]:.3g} .. {eig[-1]:.3g})")
    system = cov + lam * np.eye(cov.shape[0])
    slope = linalg.cho_solve(linalg.cho_factor(system), cross)
    return AffineFunction(slope, ybar - float(slope @ xbar), {"lam": lam})


def _objective(slope, cov, cross, var_y) -> float:
    """Empirical squared risk of ``slope`` with its optimal bias."""
    return float(var_y - 2.0 * cross @ slope + slope @ cov @ slope)


def constrained_lse(data: Dataset, L: float, tol: float = 1e-8) -> AffineFunction:
    """Least squares over affine functions with ``||slope|| <= L``.

    Solves the KKT system along the ridge path.  A singular centered Gram
    matrix is handled through the minimum-norm unconstrained solution.
    ``info["alpha"]`` is the duality gap, so the result is an alpha-ERM.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    xbar, ybar, cov, cross, var_y = centered_moments(data)
    slope, lam = _norm_constrained_quadratic(cov, cross, L, tol=tol)
    primal = _objective(slope, cov, cross, var_y)
    # dual value at lam: var_y - cross' (cov + lam I)^+ cross - lam L^2
    w, v = np.linalg.eigh(cov)
    c = v.T @ cross
    denom = np.clip(w, 0.0, None) + lam
    live = denom > PIVOT_RTOL * max(float(w[-1]), 1e-300)
    dual = var_y - float(np.sum(c[live] ** 2 / denom[live])) - lam * L * L
    alpha = max(primal - dual, 0.0)
    return AffineFunction(slope, ybar - float(slope @ xbar),
                          {"lam": lam, "alpha": alpha, "L": L, "objective": primal})


def empirical_risk(f: AffineFunction, data: Dataset, loss: LossSpec | None = None) -> float:
    loss = LossSpec() if loss is None else loss
    return float(np.mean(loss(data.y, f(data.x))))


@dataclass(frozen=True)
class ExcessRisk:
    value: float
    stderr: float = 0.0
    method: str = "analytic"


def measure_excess_risk(f: AffineFunction, spec: ProblemSpec, reference: AffineFunction,
                        loss: LossSpec | None = None, method: str = "analytic",
                        n_eval: int = 1_000_000, seed: int = 0) -> ExcessRisk:
    """``L(f) - L(reference)``, in closed form or by Monte Carlo.

    The Monte-Carlo estimate uses paired losses on ``n_eval`` fresh draws.
    """
    loss = LossSpec() if loss is None else loss
    if method == "analytic":
        if loss.kind != "squared":
            raise UnsupportedOracleError(f"no closed form for {loss.kind} loss; pass method='mc'")
        return ExcessRisk(analytic_excess_risk(spec, f, reference, loss), 0.0, "analytic")
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    x, y = sample_xy(spec, n_eval, make_rng(seed, 0xE7A1))
    diff = loss(y, f(x)) - loss(y, reference(x))
    return ExcessRisk(float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(n_eval)), "mc")


def lsenorm_check(A, b, r: float):
    """Check ``||(r I + A'A)^-1 A' b|| <= ||b|| / (2 sqrt(r))``."""
    if r <= 0:
        raise ValueError("r must be positive")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    system = r * np.eye(A.shape[1]) + A.T @ A
    lhs = float(np.linalg.norm(linalg.solve(system, A.T @ b, assume_a="pos")))
    rhs = float(np.linalg.norm(b)) / (2.0 * math.sqrt(r))
    return lhs, rhs, lhs <= rhs + 1e-12
