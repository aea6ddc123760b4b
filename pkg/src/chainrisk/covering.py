"""Covering numbers, metric entropy and truncated entropy integrals."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DomainError


def entropy_ball(eps: float, R: float, d: int) -> float:
    """Entropy bound ``d ln(3R/eps)`` for a radius-``R`` ball in ``R^d``.

    Any norm works; beyond ``eps = 3R`` one center suffices.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    if eps >= 3.0 * R:
        return 0.0
    return d * math.log(3.0 * R / eps)


@dataclass
class EntropyFunction:
    """A nonincreasing entropy function ``z -> H(z) >= 0``.

    kinds: ``ball`` (params d, R), ``tabulated`` (params z, H; step
    interpolation from the left grid point, which keeps it an upper bound),
    ``zero``, and ``custom`` (params fn, optional breakpoints).
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == "tabulated":
            z = np.asarray(self.params["z"], dtype=float)
            h = np.asarray(self.params["H"], dtype=float)
            order = np.argsort(z)
            z, h = z[order], h[order]
            if z.size == 0 or z[0] <= 0:
                raise DomainError("tabulated grid needs positive z values")
            if np.any(h < 0) or np.any(np.diff(h) > 1e-12):
                raise DomainError("tabulated entropy must be nonnegative and nonincreasing")
            self.params = {"z": z, "H": h}
        elif self.kind == "ball":
            if self.params.get("d", 0) < 0 or self.params.get("R", 0) <= 0:
                raise DomainError("ball entropy needs d >= 0 and R > 0")
        elif self.kind not in ("zero", "custom"):
            raise DomainError(f"unknown entropy kind {self.kind!r}")

    @classmethod
    def ball(cls, d: int, R: float = 1.0) -> "EntropyFunction":
        return cls("ball", {"d": d, "R": float(R)})

    @classmethod
    def zero(cls) -> "EntropyFunction":
        return cls("zero")

    @classmethod
    def tabulated(cls, z, H) -> "EntropyFunction":
        return cls("tabulated", {"z": z, "H": H})

    @classmethod
    def custom(cls, fn: Callable[[float], float], breakpoints=()) -> "EntropyFunction":
        return cls("custom", {"fn": fn, "breakpoints": tuple(breakpoints)})

    @classmethod
    def from_csv(cls, path) -> "EntropyFunction":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        try:
            z = [float(r["z"]) for r in rows]
            h = [float(r["H"]) for r in rows]
        except KeyError as exc:
            raise DomainError("entropy CSV needs columns z and H") from exc
        return cls.tabulated(z, h)

    def __call__(self, z: float) -> float:
        if z <= 0:
            return math.inf
        if self.kind == "zero":
            return 0.0
        if self.kind == "ball":
            return entropy_ball(z, self.params["R"], self.params["d"])
        if self.kind == "tabulated":
            grid = self.params["z"]
            i = int(np.searchsorted(grid, z, side="right")) - 1
            return math.inf if i < 0 else float(self.params["H"][i])
        return float(self.params["fn"](z))

    def breakpoints(self) -> list[float]:
        if self.kind == "ball":
            return [3.0 * self.params["R"]]
        if self.kind == "tabulated":
            return [float(v) for v in self.params["z"]]
        if self.kind == "custom":
            return list(self.params["breakpoints"])
        return []

    def finite_above(self, delta: float) -> bool:
        """Whether ``H`` is finite on ``(delta, inf)``."""
        if self.kind == "tabulated":
            return delta >= self.params["z"][0]
        if self.kind == "custom":
            return math.isfinite(self(delta if delta > 0 else 1e-300))
        return True

    def is_nonincreasing(self, grid) -> bool:
        vals = np.array([self(z) for z in np.sort(np.asarray(grid, dtype=float))])
        if np.any(vals < 0):
            return False
        later = vals[1:]
        return bool(np.all((later <= vals[:-1] + 1e-12) | (later == vals[:-1])))


def _integrand(H: EntropyFunction, q: float, log_num: float, h_coef: float):
    def g(z):
        return (h_coef * H(z) + math.log(log_num / z)) ** (1.0 / q)
    return g


def entropy_integral(H: EntropyFunction, delta: float, eps: float, q: float, gamma: float,
                     kappa_log: float = 32.0, *, h_coef: float = 2.0,
                     scale: float | None = None, rtol: float = 1e-11) -> float:
    """``int_delta^eps (h_coef H(z) + ln(kappa_log * scale / (z gamma)))^(1/q) dz``.

    ``scale`` defaults to ``eps``.  The substitution ``z = eps exp(-u)``
    turns the logarithmic singularity at ``z = 0`` into an exponentially
    decaying tail, so ``delta = 0`` is handled directly.  Returns ``inf``
    when ``H`` is infinite somewhere on ``(delta, eps]``.
    """
    if not 0 <= delta <= eps:
        raise DomainError("need 0 <= delta <= eps")
    if not 0 < gamma < 1:
        raise DomainError("gamma must lie in (0, 1)")
    if delta == eps:
        return 0.0
    scale = eps if scale is None else scale
    log_num = kappa_log * scale / gamma
    if log_num < eps:
        raise DomainError("log term would be negative on the integration range")
    if not H.finite_above(delta):
        return math.inf

    g = _integrand(H, q, log_num, h_coef)

    def in_u(u):
        z = eps * math.exp(-u)
        return g(z) * z if z > 0 else 0.0

    u_hi = math.inf if delta == 0 else math.log(eps / delta)
    cuts = sorted({math.log(eps / b) for b in H.breakpoints() if delta < b < eps})
    edges = [0.0, *cuts, u_hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(in_u, a, b, epsabs=0.0, epsrel=rtol, limit=500)
        total += val
    return total


def greedy_cover(points, eps: float, metric="euclidean") -> np.ndarray:
    """Indices of an internal ``eps``-cover built greedily in input order.

    ``metric`` is ``"euclidean"``, a p-norm order (``1``, ``2``, ``np.inf``)
    or a callable ``metric(point, points) -> distances``.  Centers are
    pairwise more than ``eps`` apart, so the output is also a packing.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise DomainError("need a nonempty point set")
    if callable(metric):
        dist = metric
    else:
        order = 2 if metric == "euclidean" else metric
        def dist(p, others):
            return np.linalg.norm(others - p, ord=order, axis=1)

    uncovered = np.arange(pts.shape[0])
    centers = []
    while uncovered.size:
        c = uncovered[0]
        centers.append(c)
        far = dist(pts[c], pts[uncovered]) > eps
        uncovered = uncovered[far]
    return np.asarray(centers, dtype=int)


def cover_radius(points, centers, metric="euclidean") -> float:
    """Largest distance from a point to its nearest center."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    order = 2 if metric == "euclidean" else metric
    ctr = pts[np.asarray(centers)]
    worst = 0.0
    for chunk in np.array_split(np.arange(pts.shape[0]), max(1, pts.shape[0] // 2048)):
        d = np.linalg.norm(pts[chunk, None, :] - ctr[None, :, :], ord=order, axis=2)
        worst = max(worst, float(d.min(axis=1).max()))
    return worst


def sample_ball(d: int, n: int, rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
    """``n`` points uniform in the Euclidean ball of ``radius`` in ``R^d``."""
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / d)
    return g * r[:, None]
