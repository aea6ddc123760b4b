"""Acceptance criteria, one test per criterion, each logging a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from chainrisk.bounds import (
    LinearParams,
    constrained_bound,
    expected_bound,
    moment_param_bounded,
)
from chainrisk.concentration import (
    validate_finite_max_moment,
    validate_finite_max_subgaussian,
    validate_sup_bound_mc,
)
from chainrisk.covering import (
    EntropyFunction,
    entropy_ball,
    entropy_integral,
    greedy_cover,
    sample_ball,
)
from chainrisk.estimators import lsenorm_check
from chainrisk.harness import dominance_check, preset, run_experiment
from chainrisk.orlicz import gaussian_psi2, moment_bound, orlicz_norm_empirical, tail_bound
from chainrisk.problems import kurtosis_about_origin, make_rng, sample
from oracles import entropy_integral_oracle


def _slope_band(lo, hi):
    return lambda s: lo <= s <= hi


# 1 ------------------------------------------------------------------------------

def test_acc01_orlicz_toolbox(record):
    t0 = time.perf_counter()
    w = make_rng(2024).standard_normal(1_000_000)
    est = orlicz_norm_empirical(w, q=2).value
    absw = np.abs(w)
    tails = [(t, float(np.mean(absw >= t)), tail_bound(est, 2, t))
             for t in (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)]
    moments = [(s, float(np.mean(absw**s)), moment_bound(est, 2, s)) for s in (1, 2, 4)]
    elapsed = time.perf_counter() - t0
    ok = (abs(est - gaussian_psi2(1.0)) <= 0.02
          and all(e <= b for _, e, b in tails)
          and all(e <= b for _, e, b in moments)
          and elapsed < 30)
    record("1 Orlicz toolbox", ok,
           f"psi2 {est:.4f} vs {gaussian_psi2(1.0):.4f}; worst tail ratio "
           f"{max(e / b for _, e, b in tails):.3f}; worst moment ratio "
           f"{max(e / b for _, e, b in moments):.3f}; {elapsed:.1f}s")
    assert ok


# 2 ------------------------------------------------------------------------------

def test_acc02_finite_class_maxima(record):
    t0 = time.perf_counter()
    checks = [validate_finite_max_subgaussian(m=50, gamma=0.1, q=q, reps=5000, seed=21)
              for q in (1, 2)]
    checks.append(validate_finite_max_moment(m=50, gamma=0.1, theta=1.0, reps=5000, seed=22))
    elapsed = time.perf_counter() - t0
    ok = all(c.passed for c in checks) and elapsed < 60
    record("2 finite-class maximal inequalities", ok,
           "; ".join(f"{c.name} {c.frequency:.4f}<={c.threshold:.4f}" for c in checks)
           + f"; {elapsed:.1f}s")
    assert ok


# 3 ------------------------------------------------------------------------------

def test_acc03_sup_process_bound(record):
    t0 = time.perf_counter()
    chk = validate_sup_bound_mc(n=500, gamma=0.1, reps=2000, seed=31)
    elapsed = time.perf_counter() - t0
    ok = chk.passed and elapsed < 180
    record("3 sup-process bound", ok,
           f"frequency {chk.frequency:.4f} <= {chk.threshold:.4f}; bound "
           f"{chk.details['bound']:.4g}, largest net sup {chk.details['max_sup']:.4g}, "
           f"net size {chk.details['net_size']}; {elapsed:.1f}s")
    assert ok


# 4, 5 -------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def constrained_runs():
    t0 = time.perf_counter()
    dom = run_experiment(preset("constrained-gaussian"))
    t1 = time.perf_counter()
    rate = run_experiment(preset("constrained-gaussian", n_grid=[200, 800, 3200, 12800],
                                 bound="none"))
    t2 = time.perf_counter()
    return dom, t1 - t0, rate, t2 - t1


def test_acc04_constrained_dominance(record, constrained_runs):
    res, elapsed, _, _ = constrained_runs
    rep = dominance_check(res)
    ok = rep.passed and res.config.trials == 500 and elapsed < 300
    worst = max(r["quantile"] / r["bound"] for r in rep.rows)
    record("4 constrained LSE bound dominance", ok,
           f"n grid {res.config.n_grid}; largest quantile/bound {worst:.3g}; {elapsed:.1f}s")
    assert ok


def test_acc05_constrained_rate(record, constrained_runs):
    _, _, res, elapsed = constrained_runs
    slope = res.rate.slope
    ok = -1.25 <= slope <= -0.75 and elapsed < 300
    record("5 constrained LSE rate", ok, f"median slope {slope:.3f}; {elapsed:.1f}s")
    assert ok


# 6 ------------------------------------------------------------------------------

def test_acc06_ridge_regimes(record):
    t0 = time.perf_counter()
    dn = run_experiment(preset("ridge-dn"))
    sq = run_experiment(preset("ridge-sqrt"))
    elapsed = time.perf_counter() - t0
    dom_dn, dom_sq = dominance_check(dn), dominance_check(sq)
    ok = (dn.config.problem.kappa >= 0.5
          and -1.25 <= dn.rate.slope <= -0.75
          and sq.rate.slope <= -0.4
          and dom_dn.passed and dom_sq.passed
          and elapsed < 300)
    record("6 ridge regimes", ok,
           f"lambda=d/n (kappa {dn.config.problem.kappa:.3f}) slope {dn.rate.slope:.3f}; "
           f"lambda=sqrt(d/n) slope {sq.rate.slope:.3f}; dominance "
           f"{dom_dn.passed}/{dom_sq.passed}; {elapsed:.1f}s")
    assert ok


# 7 ------------------------------------------------------------------------------

def test_acc07_mbg_stress(record):
    t0 = time.perf_counter()
    parts, bounds, slopes = [], [], []
    for p in (0.1, 0.01):
        cfg = preset("mbg-skew", p=p)
        x = sample(cfg.problem, 1_000_000, 71).x
        kurt = kurtosis_about_origin(x @ np.array([0.0, 0.5, 0.0]))
        floor = 0.5 * (1 - p) ** 2 / p
        bounds.append(constrained_bound(cfg.bound_params(), 0.5, 0.1, 6400).total)
        res = run_experiment(cfg)
        slopes.append(res.rate.slope)
        parts.append((p, kurt, floor))
    elapsed = time.perf_counter() - t0
    change = abs(bounds[0] - bounds[1]) / min(bounds)
    ok = (all(k >= f for _, k, f in parts) and change < 0.2
          and all(s <= -0.8 for s in slopes) and elapsed < 300)
    record("7 M_bg stress", ok,
           "; ".join(f"p={p}: kurtosis {k:.1f} >= {f:.1f}" for p, k, f in parts)
           + f"; bound change {100 * change:.1f}%; slopes "
           + ", ".join(f"{s:.3f}" for s in slopes) + f"; {elapsed:.1f}s")
    assert ok


# 8 ------------------------------------------------------------------------------

def test_acc08_lsenorm(record):
    rng = make_rng(81)
    held = 0
    for _ in range(100):
        rows, cols = int(rng.integers(1, 21)), int(rng.integers(1, 11))
        A = rng.standard_normal((rows, cols)) * math.exp(rng.uniform(-2, 2))
        b = rng.standard_normal(rows)
        held += lsenorm_check(A, b, math.exp(rng.uniform(-5, 5)))[2]
    lhs, rhs, _ = lsenorm_check([[1.0]], [1.0], 1.0)
    ok = held == 100 and abs(lhs - 0.5) <= 1e-12 and abs(rhs - 0.5) <= 1e-12
    record("8 lsenorm inequality", ok,
           f"{held}/100 random cases hold; scalar case {lhs:.15f} vs {rhs:.15f}")
    assert ok


# 9 ------------------------------------------------------------------------------

INTEGRAL_CASES = [
    (EntropyFunction.ball(1, 1.0), 0.0, 1.0, 2, 0.5, 32.0),
    (EntropyFunction.ball(2, 1.0), 0.0, 0.5, 1, 0.1, 16.0),
    (EntropyFunction.ball(3, 0.5), 0.01, 1.0, 2, 0.05, 32.0),
    (EntropyFunction.zero(), 0.0, 2.0, 1, 0.2, 4.0),
    (EntropyFunction.tabulated([0.05, 0.2, 0.6], [4.0, 2.0, 0.5]), 0.05, 1.0, 2, 0.1, 32.0),
]


def test_acc09_covering(record):
    bad = []
    for d in (1, 2, 3):
        pts = sample_ball(d, 20_000, make_rng(91, d))
        for eps in (0.25, 0.5, 1.0):
            size = greedy_cover(pts, eps).size
            if math.log(size) > entropy_ball(eps, 1.0, d):
                bad.append((d, eps, size))
    errs = []
    for H, delta, eps, q, gamma, k in INTEGRAL_CASES:
        got = entropy_integral(H, delta, eps, q, gamma, k)
        # the oracle's default order is 20 nodes per panel; ten times that here
        ref = entropy_integral_oracle(H, delta, eps, q, gamma, k, order=200,
                                      breaks=H.breakpoints())
        errs.append(abs(got - ref) / ref)
    ok = not bad and max(errs) <= 1e-6
    record("9 covering and entropy integrals", ok,
           f"cover violations {bad or 'none'}; max relative quadrature error {max(errs):.2e}")
    assert ok


# 10 -----------------------------------------------------------------------------

def test_acc10_expectation_conversion(record):
    worst = 0.0
    for m in (1, 2, 3):
        for n, c in ((10, 1.0), (100, 5.0), (1000, 0.3)):
            scale = c / n
            val, _ = integrate.quad(lambda t: math.exp(-((t / scale) ** (1.0 / m))), 0, math.inf,
                                    limit=200)
            target = expected_bound(0.0, c, m, n)
            worst = max(worst, abs(val - target) / target)
    ok = worst <= 0.01
    record("10 expectation conversion", ok, f"max relative error {worst:.2e}")
    assert ok


# 11 -----------------------------------------------------------------------------

def test_acc11_moment_condition(record):
    cfg = preset("constrained-gaussian")
    n = cfg.n_grid[-1]
    rep = constrained_bound(cfg.bound_params(), 1.0, cfg.gamma, n)
    r, r0 = 0.5, rep.details["r0"]
    theta_general = rep.details["theta"]
    theta_bounded = moment_param_bounded(rep.details["W_scale"] * rep.details["R"], r, r0, n)

    # 50 members of the class with excess risk above the floor r0/n
    rng = make_rng(111)
    a_star = np.asarray(cfg.problem.target_slope)
    net = []
    while len(net) < 50:
        a = sample_ball(3, 1, rng)[0]
        b = rng.uniform(-0.5, 0.5)
        excess = float(np.sum((a - a_star) ** 2) + b * b)
        if excess > r0 / n:
            net.append((a, b, excess))

    x = rng.standard_normal((1_000_000, 3))
    noise = rng.standard_normal(1_000_000)
    worst = {}
    for label, theta in (("bounded", theta_bounded), ("general", theta_general)):
        top = -math.inf
        for a, b, excess in net:
            u = x @ (a - a_star) + b
            z = u * u - 2.0 * noise * u
            vals = np.exp((r * excess - z) / theta)
            slack = vals.mean() - 1.0 - 3.0 * vals.std() / math.sqrt(vals.size)
            top = max(top, slack)
        worst[label] = top
    ok = all(v <= 0 for v in worst.values())
    record("11 moment-condition certification", ok,
           f"n={n}, theta bounded {theta_bounded:.4g}, general {theta_general:.4g}; "
           + ", ".join(f"max(E-1-3SE) {k} {v:.2e}" for k, v in worst.items()))
    assert ok
