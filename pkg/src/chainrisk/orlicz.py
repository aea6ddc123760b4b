"""psi_q-Orlicz norms and the concentration inequalities built on them.

``||W||_psi_q = inf{B > 0 : E exp(||W||^q / B^q) <= 2}``.  Everything here
is a plain function of floats and arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError

LN2 = math.log(2.0)


@dataclass(frozen=True)
class OrliczEstimate:
    q: float
    value: float
    method: str = "empirical_bisection"
    n_samples: int = 0


def gaussian_psi2(sd: float = 1.0) -> float:
    """Exact psi2 norm of ``N(0, sd^2)``: solves ``(1 - 2 sd^2 / B^2)^(-1/2) = 2``."""
    return math.sqrt(8.0 / 3.0) * abs(sd)


def _magnitudes(samples) -> np.ndarray:
    w = np.asarray(samples, dtype=float)
    if w.size == 0:
        raise DomainError("need at least one sample")
    if not np.all(np.isfinite(w)):
        raise DomainError("samples must be finite")
    if w.ndim <= 1:
        return np.abs(w.reshape(-1))
    return np.linalg.norm(w.reshape(w.shape[0], -1), axis=1)


def _log_mean_exp(mags: np.ndarray, q: float, b: float) -> float:
    return float(logsumexp((mags / b) ** q) - math.log(mags.size))


def orlicz_norm_empirical(samples, q: float = 2.0, tol: float = 1e-6,
                          max_iter: int = 200) -> OrliczEstimate:
    """Smallest ``B`` with empirical ``mean(exp(||w/B||^q)) <= 2``.

    Rows of a 2-d array are treated as vectors (Euclidean norm).  The
    defining mean is evaluated in log-sum-exp form.  Bisection runs on the
    bracket ``[(mean ||w||^q / ln 2)^(1/q), max ||w|| / (ln 2)^(1/q)]``: the
    right end is always feasible and Jensen's inequality rules out anything
    left of the left end.
    """
    if q < 1:
        raise DomainError("q must be >= 1")
    if not 0 < tol <= 0.1:
        raise DomainError("tol must lie in (0, 0.1]")
    mags = _magnitudes(samples)
    n = mags.size
    top = float(mags.max())
    if top == 0.0:
        return OrliczEstimate(q, 0.0, "empirical_bisection", n)
    # the norm is homogeneous, so bisect on samples scaled to max 1
    mags = mags / top

    hi = 1.0 / LN2 ** (1.0 / q)
    lo = (float(np.mean(mags**q)) / LN2) ** (1.0 / q)
    target = math.log(2.0)
    if _log_mean_exp(mags, q, lo) <= target:
        return OrliczEstimate(q, lo * top, "empirical_bisection", n)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if _log_mean_exp(mags, q, mid) <= target:
            hi = mid
        else:
            lo = mid
        # psi_q mean at hi lies in [1 - tol, 1]
        if math.expm1(_log_mean_exp(mags, q, hi)) >= 1.0 - tol or hi - lo <= 1e-15 * hi:
            break
    return OrliczEstimate(q, hi * top, "empirical_bisection", n)


def psi_mean(samples, q: float, b: float) -> float:
    """Empirical ``mean(exp(||w/b||^q) - 1)``."""
    mags = _magnitudes(samples)
    return math.expm1(_log_mean_exp(mags, q, b))


def tail_bound(norm: float, q: float, t: float) -> float:
    """``P{||W|| >= t} <= min(1, 2 exp(-(t/norm)^q))``."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    if norm < 0:
        raise DomainError("norm must be nonnegative")
    if norm == 0.0:
        return 0.0 if t > 0 else 1.0
    return min(1.0, 2.0 * math.exp(-((t / norm) ** q)))


def tail_quantile(norm: float, q: float, prob: float) -> float:
    """Smallest ``t`` with ``tail_bound(norm, q, t) <= prob``."""
    if not 0 < prob <= 1:
        raise DomainError("prob must lie in (0, 1]")
    return norm * math.log(2.0 / prob) ** (1.0 / q)


def moment_bound(norm: float, q: float, s: float) -> float:
    """``E||W||^s <= 2 (s/(e q))^(s/q) ||W||_psi_q^s``."""
    if s <= 0:
        raise DomainError("s must be positive")
    if norm < 0:
        raise DomainError("norm must be nonnegative")
    return 2.0 * (s / (math.e * q)) ** (s / q) * norm**s


def sum_independent_norm_bound(norms, q: int, d: int = 1) -> float:
    """psi_q bound for a sum of independent centered vectors in ``R^d``.

    Returns ``4 d^(1/q) sqrt(sum ||W_i||^2)``; only ``q`` in {1, 2} is covered.
    The squared norms follow the constant used in the Hoelder step of the
    argument (the unsquared variant is not homogeneous).
    """
    if q not in (1, 2):
        raise DomainError("only q in {1, 2} is supported")
    if d < 1:
        raise DomainError("d must be a positive integer")
    norms = np.asarray(list(norms), dtype=float)
    if norms.size == 0:
        return 0.0
    if not np.all(np.isfinite(norms)) or np.any(norms < 0):
        raise DomainError("norms must be finite and nonnegative")
    return 4.0 * d ** (1.0 / q) * math.sqrt(float(np.sum(norms**2)))


def bernstein_mgf_bound(s: float, v: float, c: float) -> float:
    """Log-MGF bound ``s^2 v^2 / (2 (1 - |s| c))`` valid for ``|s| < 1/c``.

    Requires ``E|W|^k <= (k!/2) v^2 c^(k-2)`` for every integer ``k >= 2``.
    """
    if c < 0:
        raise DomainError("c must be nonnegative")
    if abs(s) * c >= 1.0:
        raise DomainError(f"|s| = {abs(s)} is outside (0, 1/c) with c = {c}")
    return s * s * v * v / (2.0 * (1.0 - abs(s) * c))


@dataclass(frozen=True)
class ProductMomentConstants:
    c: float
    v_factor: float  # (2 c R)^2
    scale: float  # c^2 B R

    def moment_bound(self, k: int, second_moment: float) -> float:
        """Bound on ``E|W Z|^k`` for ``k >= 2``."""
        return math.factorial(k) / 2 * second_moment * self.v_factor * self.scale ** (k - 2)


def product_moment_constants(B: float, R: float, p: float, q: float,
                             kurtosis: float) -> ProductMomentConstants:
    """Truncation constants for moments of a product ``W Z``.

    ``||W||_psi_q <= B``, ``||Z||_psi_p <= R`` with ``1/p + 1/q <= 1`` give
    ``E|WZ|^k <= (k!/2) E[W^2] (2cR)^2 (c^2 B R)^(k-2)`` where
    ``c^min(p,q) = 2 ln(64 K)`` and ``K`` is the kurtosis of ``W``.
    ``p`` or ``q`` may be ``inf`` (bounded variables), giving ``c = 1``.
    """
    if kurtosis < 1:
        raise DomainError("kurtosis about the origin is always >= 1")
    if p < 1 or q < 1 or 1.0 / p + 1.0 / q > 1.0 + 1e-12:
        raise DomainError("need p, q >= 1 with 1/p + 1/q <= 1")
    if B < 0 or R < 0:
        raise DomainError("B and R must be nonnegative")
    m = min(p, q)
    c = 1.0 if math.isinf(m) else (2.0 * math.log(64.0 * kurtosis)) ** (1.0 / m)
    return ProductMomentConstants(c, (2.0 * c * R) ** 2, c * c * B * R)
