"""High-probability excess-risk bounds for empirical risk minimization.

The generic chaining bound is evaluated from a set of condition constants
(:class:`ConditionConstants`).  The linear least-squares bounds compose it
with fully explicit constants, so every number reported here is concrete.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .covering import EntropyFunction, entropy_integral
from .errors import DomainError, GammaBudgetError
from .problems import LossSpec, ProblemSpec

TERM_NAMES = ("moment_term", "integral_term", "delta_T_term", "approx_term", "floor_term")


@dataclass
class ConditionConstants:
    """Constants of the five conditions of the generic bound.

    ``B_apx`` bounds approximation plus optimization error, ``T`` the
    Lipschitz envelope, ``S`` the psi_q increment coefficient (``inf`` drops
    the entropy integral and needs ``delta == eps``), ``r`` and ``theta``
    the moment condition, ``r0`` the excess-risk floor radius.
    """

    gamma: float
    theta: float
    entropy: EntropyFunction
    eps: float
    delta: float
    T: float = 0.0
    S: float = math.inf
    q: int = 2
    r: float = 1.0
    B_apx: float = 0.0
    r0: float = 0.0

    def validate(self):
        if not 0 < self.gamma < 1:
            raise DomainError("gamma must lie in (0, 1)")
        if not 0 < self.r <= 1:
            raise DomainError("r must lie in (0, 1]")
        if self.theta <= 0:
            raise DomainError("theta must be positive")
        if not 0 <= self.delta <= self.eps:
            raise DomainError("need 0 <= delta <= eps")
        if self.q not in (1, 2):
            raise DomainError("q must be 1 or 2")
        if self.S < 0 or self.T < 0 or self.B_apx < 0 or self.r0 < 0:
            raise DomainError("S, T, B_apx and r0 must be nonnegative")
        if math.isinf(self.S) and self.delta != self.eps:
            raise DomainError("S = inf is only allowed with delta == eps")


@dataclass
class BoundReport:
    """A bound with its additive breakdown.

    ``total = (moment + integral + delta_T + approx) / r + floor``.
    """

    total: float
    moment_term: float
    integral_term: float
    delta_T_term: float
    approx_term: float
    floor_term: float = 0.0
    r: float = 1.0
    inputs: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @classmethod
    def compose(cls, r: float = 1.0, inputs=None, details=None, **terms) -> "BoundReport":
        vals = {k: float(terms.get(k, 0.0)) for k in TERM_NAMES}
        inner = vals["moment_term"] + vals["integral_term"] + vals["delta_T_term"] + vals["approx_term"]
        total = inner / r + vals["floor_term"]
        return cls(total, **vals, r=r, inputs=dict(inputs or {}), details=dict(details or {}))

    @property
    def terms(self) -> dict:
        return {k: getattr(self, k) for k in TERM_NAMES}

    def to_dict(self) -> dict:
        return {"total": self.total, "terms": self.terms, "r": self.r,
                "inputs": _jsonable(self.inputs), "details": _jsonable(self.details)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, EntropyFunction):
        return {"kind": obj.kind, **{k: v for k, v in obj.params.items() if k in ("d", "R")}}
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "item"):
        return obj.item()
    return obj


class GammaBudget:
    """Ledger of failure probabilities spent out of a total ``gamma``."""

    def __init__(self, total: float):
        if not 0 < total < 1:
            raise DomainError("gamma must lie in (0, 1)")
        self.total = total
        self.entries: list[tuple[str, float]] = []

    @property
    def spent(self) -> float:
        return math.fsum(a for _, a in self.entries)

    @property
    def remaining(self) -> float:
        return self.total - self.spent

    def allocate(self, name: str, amount: float) -> float:
        if amount <= 0:
            raise DomainError("allocations must be positive")
        if self.spent + amount > self.total * (1 + 1e-12):
            raise GammaBudgetError(
                f"allocating {amount:.4g} to {name!r} exceeds gamma = {self.total:.4g} "
                f"({self.spent:.4g} already spent)")
        self.entries.append((name, amount))
        return amount


# -- generic bound ------------------------------------------------------------

def erm_bound(c: ConditionConstants, n: int) -> BoundReport:
    """Generic chaining bound on the excess risk of an (approximate) ERM.

    ``(1/r) (theta (H(eps) + ln(4/gamma)) / n
             + 32 S / sqrt(n) int_delta^eps (2 H(z) + ln(32 eps / (z gamma)))^(1/q) dz
             + 8 delta T + B_apx) + r0 / n``
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    c.validate()
    h_eps = c.entropy(c.eps) if c.eps > 0 else math.inf
    moment = c.theta * (h_eps + math.log(4.0 / c.gamma)) / n
    if c.delta == c.eps or c.S == 0:
        integral = 0.0
    else:
        integral = 32.0 * c.S / math.sqrt(n) * entropy_integral(
            c.entropy, c.delta, c.eps, c.q, c.gamma, 32.0)
    inputs = {k: v for k, v in asdict(c).items() if k != "entropy"}
    inputs["entropy"] = c.entropy
    inputs["n"] = n
    return BoundReport.compose(
        r=c.r, inputs=inputs, details={"H_eps": h_eps},
        moment_term=moment, integral_term=integral, delta_T_term=8.0 * c.delta * c.T,
        approx_term=c.B_apx, floor_term=c.r0 / n)


# -- moment condition constants ------------------------------------------------

def moment_param_bounded(B_range: float, r: float, r0: float, n: int) -> float:
    """``theta = n B^2 / (2 (1 - r) r0)`` for losses with ``|Z| <= B``."""
    if not 0 < r < 1:
        raise DomainError("r must lie in (0, 1); theta diverges at r = 1")
    if r0 <= 0:
        raise DomainError("r0 must be positive; theta diverges at r0 = 0")
    return n * B_range**2 / (2.0 * (1.0 - r) * r0)


def balanced_r0(B_range: float, n: int, entropy_eps: float, const: float = 1.0) -> float:
    """Floor radius ``const * B sqrt(n H)`` that balances the moment and floor terms."""
    return const * B_range * math.sqrt(n * entropy_eps)


def moment_param_general(B: float, R: float, C: float, r: float, t: float, p: float,
                         q: float, kurt_sup: float, n: int, r0: float):
    """Moment parameter from a Bernstein condition with constant ``C``.

    ``||W_f||_psi_q <= B`` and ``||Z_f / W_f||_psi_p <= R``.  Returns
    ``(theta, K_n)`` with
    ``K_n = 4 ln(4 min(kurt_sup^(1/4), n B R / r0))`` and
    ``theta = 4 t K_n^(2/min(p,q)) max(4 R^2 C / ((t-1)(1-r)), B R)``.
    With ``min(p, q) = inf`` the ``K_n`` factor is 1.
    """
    if not 0 < r < 1:
        raise DomainError("r must lie in (0, 1)")
    if t <= 1:
        raise DomainError("t must exceed 1")
    if p < 1 or q < 1 or 1.0 / p + 1.0 / q > 1.0 + 1e-12:
        raise DomainError("need p, q >= 1 with 1/p + 1/q <= 1")
    if r0 <= 0 or B <= 0 or R <= 0 or C <= 0 or n < 1:
        raise DomainError("B, R, C, r0 must be positive and n >= 1")
    if kurt_sup < 1:
        raise DomainError("kurtosis about the origin is always >= 1")
    K_n = 4.0 * math.log(4.0 * min(kurt_sup**0.25, n * B * R / r0))
    if K_n <= 0:
        raise DomainError(f"K_n = {K_n:.4g} is not positive; r0 is too large")
    m = min(p, q)
    factor = 1.0 if math.isinf(m) else K_n ** (2.0 / m)
    theta = 4.0 * t * factor * max(4.0 * R * R * C / ((t - 1.0) * (1.0 - r)), B * R)
    return theta, K_n


def bernstein_constant(loss: LossSpec, mode: str = "strongly_convex", *, B: float | None = None,
                       n: int | None = None, r0: float | None = None) -> float:
    """Bernstein constant ``C`` with ``E[W_f^2] <= C E[Z_f]``.

    ``lipschitz``: ``2 n B^2 / r0`` (needs ``B``, ``n``, ``r0``);
    ``strongly_convex``: ``4 / kappa`` from the loss' strong convexity.
    """
    if mode == "lipschitz":
        if B is None or n is None or r0 is None or B <= 0 or n < 1 or r0 <= 0:
            raise DomainError("lipschitz mode needs positive B, n and r0")
        return 2.0 * n * B * B / r0
    if mode == "strongly_convex":
        kappa = loss.strong_convexity_kappa
        if kappa is None or kappa <= 0:
            raise DomainError(f"{loss.kind} loss has no strong convexity constant")
        return 4.0 / kappa
    raise DomainError(f"unknown mode {mode!r}")


def expected_bound(b: float, c: float, m: int, n: int) -> float:
    """Expected excess risk ``b + m! c / n`` from tails ``b + c ln^m(1/gamma) / n``."""
    if m < 1 or n < 1:
        raise DomainError("m and n must be >= 1")
    return b + math.factorial(m) * c / n


# -- linear least squares --------------------------------------------------------

@dataclass(frozen=True)
class LinearParams:
    """Distribution constants used by the linear bounds."""

    dim: int
    b_x: float
    b_y: float
    kappa: float = 0.0

    @classmethod
    def coerce(cls, obj) -> "LinearParams":
        if isinstance(obj, cls):
            return obj
        if isinstance(obj, ProblemSpec):
            return cls(obj.dim, obj.b_x, obj.b_y, obj.kappa)
        if isinstance(obj, dict):
            return cls(int(obj["dim"]), float(obj["b_x"]), float(obj["b_y"]),
                       float(obj.get("kappa", 0.0)))
        raise DomainError(f"cannot read linear problem constants from {type(obj).__name__}")


def rlip_log(d: int, n: int, gamma: float, kappa: float) -> float:
    return 10.0 * (11.0 * math.log(23.0 / kappa) * math.log(3.0 * n / min(d, n)) + 6.0) \
        * math.log(6.0 / gamma)


def r_lip(L: float, gamma: float, d: int, n: int, kappa: float, B_X: float, B_Y: float) -> float:
    """Data-independent slope bound refined by the covariance eigenvalue floor.

    ``min(L^2, (B_Y^2 / B_X^2 + d L^2 / n) rlip_log / kappa)^(1/2)``, or ``L``
    when ``kappa = 0``.
    """
    if not 0 < gamma < 1:
        raise DomainError("gamma must lie in (0, 1)")
    if kappa > 1:
        raise DomainError("kappa is an eigenvalue ratio and cannot exceed 1")
    if kappa <= 0 or B_X <= 0:
        return L
    refined = (B_Y**2 / B_X**2 + d * L * L / n) * rlip_log(d, n, gamma, kappa) / kappa
    return math.sqrt(min(L * L, refined))


def c_gamma(n: int, d: int, gamma: float) -> float:
    """``(ln(e n/m) + ln ln(e/gamma)) ln(e n/m) ln(1/gamma)`` with ``m = min(d, n)``."""
    if not 0 < gamma < 1:
        raise DomainError("gamma must lie in (0, 1)")
    inner = math.log(math.e * n / min(d, n))
    return (inner + math.log(math.log(math.e / gamma))) * inner * math.log(1.0 / gamma)


def linear_erm_bound_explicit(problem, L: float, gamma: float, n: int,
                              B_apx: float = 0.0, *, r: float = 0.5, t: float = 9.0,
                              budget: GammaBudget | None = None) -> BoundReport:
    """Explicit high-probability bound for affine least squares with ``||a_n|| <= L``.

    Composes :func:`erm_bound` with concrete constants: ``L_hat = r_lip(L, gamma/4)``,
    ``t_n = 2 max(L_hat B_X, B_Y) sqrt(ln(32/gamma))``, ``W_f`` scale
    ``4 max(L_hat B_X, t_n)``, ratio scale ``R = 2 (L_hat B_X + B_Y)``,
    ``T = 128 t_n^2``, ``eps = delta = min(d, n)/n`` and entropy
    ``(d+1)(ln(3/z) + ln ln(32/gamma))``.
    """
    prm = LinearParams.coerce(problem)
    if not 0 < gamma < 1:
        raise DomainError("gamma must lie in (0, 1)")
    if L <= 0 or n < 1:
        raise DomainError("L must be positive and n >= 1")
    d = prm.dim
    budget = GammaBudget(gamma) if budget is None else budget
    budget.allocate("slope bound", gamma / 2)
    budget.allocate("slope refinement", gamma / 4)
    g4 = gamma / 4

    L_hat = r_lip(L, g4, d, n, prm.kappa, prm.b_x, prm.b_y)
    log32 = math.log(32.0 / gamma)
    t0 = 2.0 * max(L_hat * prm.b_x, prm.b_y)
    t_n = t0 * math.sqrt(log32)
    R = 2.0 * (L_hat * prm.b_x + prm.b_y)
    W_scale = 4.0 * max(L_hat * prm.b_x, t_n)
    m = min(d, n)
    r0 = m * W_scale * R
    C = bernstein_constant(LossSpec("squared"))
    theta, K_n = moment_param_general(W_scale, R, C, r, t, 2, 2, math.inf, n, r0)
    T = 128.0 * t_n**2
    eps = m / n
    H = EntropyFunction.ball(d + 1, log32)

    budget.allocate("generic bound", g4)
    c = ConditionConstants(gamma=g4, theta=theta, entropy=H, eps=eps, delta=eps, T=T,
                           S=math.inf, q=2, r=r, B_apx=B_apx, r0=r0)
    rep = erm_bound(c, n)
    rep.inputs.update({"problem": asdict(prm), "L": L, "gamma": gamma, "t": t})
    rep.details.update({"L_hat": L_hat, "t0": t0, "t_n": t_n, "R": R, "W_scale": W_scale,
                        "K_n": K_n, "theta": theta, "T": T, "eps": eps, "r0": r0,
                        "gamma_budget": list(budget.entries)})
    return rep


def constrained_apx(b_y: float, gamma: float, n: int) -> float:
    """Optimization-error allowance ``B_Y^2 ln(32/gamma) / n`` at level ``gamma/16``."""
    return b_y**2 * math.log(32.0 / gamma) / n


def constrained_bound(problem, L: float, gamma: float, n: int) -> BoundReport:
    """Bound for least squares constrained to ``||slope|| <= L``."""
    prm = LinearParams.coerce(problem)
    rep = linear_erm_bound_explicit(prm, L, gamma, n, constrained_apx(prm.b_y, gamma, n))
    rep.details["estimator"] = "constrained"
    return rep


def penalized_slope_bound(L_star: float, b_y: float, gamma: float, lam: float) -> float:
    """``L_lambda = max(L*^2, B_Y^2 ln(4/gamma) / (4 lam))^(1/2)``."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    return math.sqrt(max(L_star**2, b_y**2 * math.log(4.0 / gamma) / (4.0 * lam)))


def penalized_bound(problem, lam: float, L_star: float, gamma: float, n: int) -> BoundReport:
    """Bound for ridge regression with penalty ``lam ||a||^2``.

    The penalty at the reference, ``lam L*^2``, is the approximation term and
    is also reported as ``details["penalty_term"]``.
    """
    prm = LinearParams.coerce(problem)
    L_lam = penalized_slope_bound(L_star, prm.b_y, gamma, lam)
    penalty = lam * L_star**2
    rep = linear_erm_bound_explicit(prm, L_lam, gamma, n, penalty)
    rep.details.update({"estimator": "ridge", "lam": lam, "L_lambda": L_lam,
                        "penalty_term": penalty})
    return rep
