"""Maximal inequalities and chaining bounds for empirical processes.

Evaluators return plain numbers or :class:`~chainrisk.bounds.BoundReport`;
the ``validate_*`` functions estimate how often the inequalities fail on
simulated data and compare that frequency with ``gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundReport
from .covering import EntropyFunction, entropy_integral
from .errors import DomainError
from .orlicz import gaussian_psi2, orlicz_norm_empirical, tail_bound, tail_quantile
from .parallel import pmap
from .problems import make_rng


@dataclass
class ProcessBoundInput:
    """Constants for the process-supremum bounds.

    ``S`` is the psi_q increment coefficient (``inf`` needs ``delta`` at the
    upper radius), ``T`` the Lipschitz envelope bound, ``theta`` the moment
    parameter and ``beta`` the class radius around the anchor function.
    """

    entropy: EntropyFunction
    gamma: float
    eps: float = 0.0
    delta: float = 0.0
    q: int = 2
    S: float = math.inf
    T: float = 0.0
    theta: float = 1.0
    beta: float = 0.0

    def _check(self, upper: float):
        if not 0 < self.gamma < 1:
            raise DomainError("gamma must lie in (0, 1)")
        if self.q not in (1, 2):
            raise DomainError("q must be 1 or 2")
        if not 0 <= self.delta <= upper:
            raise DomainError(f"need 0 <= delta <= {upper}")
        if self.S < 0 or self.T < 0:
            raise DomainError("S and T must be nonnegative")
        if math.isinf(self.S) and self.delta != upper:
            raise DomainError("S = inf is only allowed when delta equals the upper radius")


def finite_max_bound_subgaussian(sigma: float, m: int, gamma: float, q: int = 2) -> float:
    """``sigma ln(2m/gamma)^(1/q)``: exceeded by the max of ``m`` psi_q variables w.p. <= gamma."""
    if m < 1:
        raise DomainError("m must be >= 1")
    if gamma <= 0 or sigma < 0:
        raise DomainError("need gamma > 0 and sigma >= 0")
    return sigma * math.log(2.0 * m / gamma) ** (1.0 / q)


def finite_max_bound_moment(theta: float, m: int, gamma: float) -> float:
    """``theta ln(m/gamma)`` for variables with ``E exp(W/theta) <= 1``."""
    if m < 1:
        raise DomainError("m must be >= 1")
    if theta <= 0 or gamma <= 0:
        raise DomainError("theta and gamma must be positive")
    return theta * math.log(m / gamma)


def chaining_tail_bound(inp: ProcessBoundInput) -> float:
    """``4 S int_delta^(beta/2) (H(z) + ln(4 beta/(z gamma)))^(1/q) dz + 4 delta T``."""
    upper = inp.beta / 2.0
    inp._check(upper)
    tail = 4.0 * inp.delta * inp.T
    if inp.S == 0 or inp.delta == upper:
        return tail
    integral = entropy_integral(inp.entropy, inp.delta, upper, inp.q, inp.gamma, 4.0,
                                h_coef=1.0, scale=inp.beta)
    return 4.0 * inp.S * integral + tail


def sup_process_bound(inp: ProcessBoundInput) -> BoundReport:
    """``theta (H(eps) + ln(2/gamma)) + 8 S int_delta^eps (2H + ln(16 eps/(z gamma)))^(1/q) + 8 delta T``."""
    inp._check(inp.eps)
    if inp.theta <= 0:
        raise DomainError("theta must be positive")
    h_eps = inp.entropy(inp.eps) if inp.eps > 0 else math.inf
    moment = inp.theta * (h_eps + math.log(2.0 / inp.gamma))
    if inp.S == 0 or inp.delta == inp.eps:
        integral = 0.0
    else:
        integral = 8.0 * inp.S * entropy_integral(inp.entropy, inp.delta, inp.eps, inp.q,
                                                  inp.gamma, 16.0)
    return BoundReport.compose(
        inputs={"gamma": inp.gamma, "eps": inp.eps, "delta": inp.delta, "q": inp.q,
                "S": inp.S, "T": inp.T, "theta": inp.theta, "entropy": inp.entropy},
        details={"H_eps": h_eps},
        moment_term=moment, integral_term=integral, delta_T_term=8.0 * inp.delta * inp.T)


# -- Monte-Carlo validators -----------------------------------------------------

def binomial_threshold(gamma: float, reps: int, sigmas: float = 3.0) -> float:
    return gamma + sigmas * math.sqrt(gamma * (1.0 - gamma) / reps)


@dataclass
class McCheck:
    name: str
    violations: int
    reps: int
    gamma: float
    details: dict = field(default_factory=dict)

    @property
    def frequency(self) -> float:
        return self.violations / self.reps

    @property
    def threshold(self) -> float:
        return binomial_threshold(self.gamma, self.reps)

    @property
    def passed(self) -> bool:
        return self.frequency <= self.threshold

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: violation frequency {self.frequency:.4f} "
                f"<= {self.threshold:.4f} ({self.violations}/{self.reps})")


def _check_reps(reps: int):
    if reps < 1:
        raise DomainError("reps must be >= 1")


def _max_draw(args):
    family, m, seed, rep, scale = args
    rng = make_rng(seed, rep)
    if family == "gaussian":
        w = rng.standard_normal(m)
    elif family == "laplace":
        w = rng.laplace(0.0, 1.0, m)
    elif family == "log_uniform":
        w = scale * (np.log(rng.random(m)) + math.log(2.0))
    elif family == "shifted_gaussian":
        w = scale * (rng.standard_normal(m) - 0.5)
    else:
        raise DomainError(f"unknown family {family!r}")
    return float(w.max())


# psi_q norms of the test families: N(0,1) has sqrt(8/3); Laplace(1) has 2
_PSI_FAMILIES = {2: ("gaussian", gaussian_psi2(1.0)), 1: ("laplace", 2.0)}


def validate_finite_max_subgaussian(m: int = 50, gamma: float = 0.1, q: int = 2,
                                    reps: int = 5000, seed: int = 0,
                                    workers: int | None = None) -> McCheck:
    """Max of ``m`` i.i.d. variables with known psi_q norm against its bound."""
    _check_reps(reps)
    family, sigma = _PSI_FAMILIES[q]
    bound = finite_max_bound_subgaussian(sigma, m, gamma, q)
    maxima = pmap(_max_draw, [(family, m, seed, i, 1.0) for i in range(reps)], workers, 64)
    hits = int(np.sum(np.asarray(maxima) > bound))
    return McCheck(f"finite max psi_{q} ({family})", hits, reps, gamma,
                   {"bound": bound, "sigma": sigma, "m": m})


def validate_finite_max_moment(m: int = 50, gamma: float = 0.1, theta: float = 1.0,
                               reps: int = 5000, seed: int = 0, family: str = "log_uniform",
                               workers: int | None = None) -> McCheck:
    """Max of ``m`` variables with ``E exp(W/theta) = 1`` against ``theta ln(m/gamma)``.

    ``log_uniform``: ``W = theta (ln U + ln 2)``; ``shifted_gaussian``:
    ``W = theta (G - 1/2)``.
    """
    _check_reps(reps)
    bound = finite_max_bound_moment(theta, m, gamma)
    maxima = pmap(_max_draw, [(family, m, seed, i, theta) for i in range(reps)], workers, 64)
    hits = int(np.sum(np.asarray(maxima) > bound))
    return McCheck(f"finite max moment ({family})", hits, reps, gamma,
                   {"bound": bound, "theta": theta, "m": m})


def validate_orlicz_tails(n: int = 1_000_000, seed: int = 0,
                          grid=(0.5, 1.0, 1.5, 2.0, 2.5, 3.0)) -> dict:
    """Empirical Gaussian tails against ``2 exp(-(t/||W||)^2)``."""
    w = np.abs(make_rng(seed).standard_normal(n))
    norm = gaussian_psi2(1.0)
    rows = []
    for t in grid:
        emp = float(np.mean(w >= t))
        se = math.sqrt(max(emp * (1 - emp), 1.0 / n) / n)
        bound = tail_bound(norm, 2.0, t)
        rows.append({"t": t, "empirical": emp, "bound": bound, "ok": emp <= bound + 3 * se})
    return {"rows": rows, "passed": all(r["ok"] for r in rows)}


# -- supremum of the linear least-squares process ---------------------------------

def gaussian_linear_theta(r: float, noise_sd: float, s_max: float) -> float:
    """Smallest per-sample ``theta`` meeting the moment condition for the slope class.

    For ``X ~ N(0, I)``, ``Y = a*'X + noise`` and ``u = a - a*`` with
    ``||u|| = s``, ``E exp((r/theta) E Z - Z/theta) <= 1`` reads
    ``r x / theta <= ln(1 + 2 c x) / 2`` with ``x = s^2`` and
    ``c = 1/theta - 2 noise_sd^2/theta^2``.  The right side is concave in
    ``x``, so checking ``x = s_max^2`` and the slope at 0 suffices.
    """
    if not 0 <= r < 1:
        raise DomainError("r must lie in [0, 1)")
    x = s_max**2

    def ok(theta):
        c = 1.0 / theta - 2.0 * noise_sd**2 / theta**2
        return c >= 0 and r * x / theta <= 0.5 * math.log1p(2.0 * c * x) + 1e-15

    lo = max(2.0 * noise_sd**2 / (1.0 - r), 1e-12)
    if ok(lo):
        return lo
    hi = 2.0 * lo
    while not ok(hi):
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def grid_net(d: int, radius: float, spacing: float) -> np.ndarray:
    """Grid points ``spacing * Z^d`` inside the Euclidean ball of ``radius``."""
    k = int(math.floor(radius / spacing))
    axis = spacing * np.arange(-k, k + 1)
    pts = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), -1).reshape(-1, d)
    return pts[np.einsum("ij,ij->i", pts, pts) <= radius**2 * (1 + 1e-12)]


@dataclass
class LinearProcessSetup:
    """Slope class ``{x -> a'x : ||a|| <= L}`` under ``X ~ N(0, I_d)``.

    The metric is ``||a - b|| / L``, so the class has radius 1 around ``0``.
    """

    d: int = 2
    L: float = 1.0
    a_star: tuple = (0.5, 0.0)
    noise_sd: float = 1.0
    r: float = 0.5
    eps: float = 0.02


def _envelope_T(setup: LinearProcessSetup, n: int, gamma: float, seed: int,
                n_ref: int = 1_000_000) -> dict:
    """High-probability bound on ``E M + mean M_i`` with ``M = L||X||(2|Y| + 2L||X||)``."""
    rng = make_rng(seed, 0x7E)
    a = np.asarray(setup.a_star, dtype=float)
    x = rng.standard_normal((n_ref, setup.d))
    y = x @ a + setup.noise_sd * rng.standard_normal(n_ref)
    nx = np.linalg.norm(x, axis=1)
    m = setup.L * nx * (2.0 * np.abs(y) + 2.0 * setup.L * nx)
    mean = float(m.mean()) + 3.0 * float(m.std()) / math.sqrt(n_ref)
    psi1 = orlicz_norm_empirical(m - m.mean(), q=1).value
    spread = tail_quantile(4.0 * psi1 / math.sqrt(n), 1.0, gamma / 2.0)
    return {"T": 2.0 * mean + spread, "mean": mean, "psi1": psi1}


def _sup_rep(args):
    setup, n, net, seed, rep = args
    rng = make_rng(seed, rep)
    x = rng.standard_normal((n, setup.d))
    noise = setup.noise_sd * rng.standard_normal(n)
    cov = x.T @ x / n
    g = x.T @ noise / n
    u = net - np.asarray(setup.a_star, dtype=float)
    # Z(f, f*) = (u'X)^2 - 2 noise u'X
    emp = np.einsum("ij,jk,ik->i", u, cov, u) - 2.0 * u @ g
    lam = setup.r * np.einsum("ij,ij->i", u, u) - emp
    return float(lam.max())


def validate_sup_bound_mc(n: int = 500, gamma: float = 0.1, reps: int = 2000, seed: int = 0,
                          setup: LinearProcessSetup | None = None,
                          workers: int | None = None) -> McCheck:
    """Frequency with which ``sup_f r E(f, f*) - E_n(f, f*)`` exceeds its bound.

    The supremum runs over a grid net of resolution ``eps/4`` in the class
    metric, so it slightly underestimates the true supremum.
    """
    _check_reps(reps)
    setup = LinearProcessSetup() if setup is None else setup
    if np.linalg.norm(setup.a_star) > setup.L:
        raise DomainError("the reference slope must lie in the class")
    s_max = setup.L + float(np.linalg.norm(setup.a_star))
    theta = gaussian_linear_theta(setup.r, setup.noise_sd, s_max)
    env = _envelope_T(setup, n, gamma, seed)
    entropy = EntropyFunction.ball(setup.d, 1.0)
    inp = ProcessBoundInput(entropy, gamma, eps=setup.eps, delta=setup.eps, q=2, S=math.inf,
                            T=env["T"], theta=theta / n)
    report = sup_process_bound(inp)
    spacing = 2.0 * (setup.eps / 4.0) * setup.L / math.sqrt(setup.d)
    net = grid_net(setup.d, setup.L, spacing)
    sups = np.asarray(pmap(_sup_rep, [(setup, n, net, seed, i) for i in range(reps)], workers, 16))
    hits = int(np.sum(sups > report.total))
    return McCheck("sup process", hits, reps, gamma,
                   {"bound": report.total, "terms": report.terms, "theta": theta,
                    "T": env["T"], "net_size": int(net.shape[0]),
                    "max_sup": float(sups.max()), "median_sup": float(np.median(sups))})
