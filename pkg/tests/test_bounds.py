import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from chainrisk.bounds import (
    BoundReport,
    ConditionConstants,
    GammaBudget,
    LinearParams,
    balanced_r0,
    bernstein_constant,
    c_gamma,
    constrained_apx,
    constrained_bound,
    erm_bound,
    expected_bound,
    linear_erm_bound_explicit,
    moment_param_bounded,
    moment_param_general,
    penalized_bound,
    penalized_slope_bound,
    r_lip,
    rlip_log,
)
from chainrisk.covering import EntropyFunction
from chainrisk.errors import DomainError, GammaBudgetError
from chainrisk.problems import LossSpec, gaussian_problem
from oracles import entropy_integral_oracle

UNIT3 = LinearParams(3, 1.0, 1.0, 0.0)


def _cc(**kw):
    base = dict(gamma=0.1, theta=2.0, entropy=EntropyFunction.ball(2, 1.0), eps=0.5, delta=0.1,
                T=1.0, S=0.5, q=2, r=0.5, B_apx=0.01, r0=3.0)
    base.update(kw)
    return ConditionConstants(**base)


def test_erm_bound_direct_case():
    c = ConditionConstants(gamma=0.1, theta=3.0, entropy=EntropyFunction.zero(), eps=0.2,
                           delta=0.2, T=5.0, S=math.inf, r=0.5)
    rep = erm_bound(c, 100)
    assert rep.total == pytest.approx((3.0 * math.log(40) / 100 + 8 * 0.2 * 5.0) / 0.5, rel=1e-14)
    assert math.isfinite(rep.total)


def test_erm_bound_integral_against_oracle():
    c = _cc()
    rep = erm_bound(c, 400)
    integral = entropy_integral_oracle(c.entropy, 0.1, 0.5, 2, 0.1, 32.0, order=40)
    assert rep.integral_term == pytest.approx(32 * 0.5 / 20 * integral, rel=1e-6)
    assert rep.moment_term == pytest.approx(2.0 * (2 * math.log(6) + math.log(40)) / 400)


def test_erm_bound_floor_shift():
    a = erm_bound(_cc(r0=0.0), 50)
    b = erm_bound(_cc(r0=7.0), 50)
    assert b.total - a.total == pytest.approx(7.0 / 50, rel=1e-12)


def test_report_invariant_and_dict():
    rep = erm_bound(_cc(), 100)
    inner = rep.moment_term + rep.integral_term + rep.delta_T_term + rep.approx_term
    assert rep.total == pytest.approx(inner / rep.r + rep.floor_term, rel=1e-12)
    d = rep.to_dict()
    assert set(d["terms"]) == {"moment_term", "integral_term", "delta_T_term", "approx_term",
                               "floor_term"}
    assert d["inputs"]["n"] == 100 and d["inputs"]["S"] == 0.5
    report = BoundReport.compose(r=0.25, moment_term=1.0, floor_term=2.0)
    assert report.total == 6.0


def test_erm_bound_errors_and_infinity():
    with pytest.raises(DomainError):
        erm_bound(_cc(S=math.inf), 10)
    with pytest.raises(DomainError):
        erm_bound(_cc(), 0)
    with pytest.raises(DomainError):
        erm_bound(_cc(r=1.5), 10)
    tab = EntropyFunction.tabulated([0.2, 1.0], [1.0, 0.0])
    assert erm_bound(_cc(entropy=tab, delta=0.0), 10).total == math.inf


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["theta", "S", "T", "B_apx", "r0"]), st.floats(1.05, 5.0))
def test_erm_bound_monotone_up(field, factor):
    base = _cc()
    bigger = _cc(**{field: getattr(base, field) * factor})
    assert erm_bound(bigger, 100).total >= erm_bound(base, 100).total


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.99), st.integers(1, 10_000))
def test_erm_bound_monotone_down(r, n):
    assert erm_bound(_cc(r=min(1.0, r * 1.01)), n).total <= erm_bound(_cc(r=r), n).total
    assert erm_bound(_cc(r=r), n + 1).total <= erm_bound(_cc(r=r), n).total


def test_moment_param_bounded():
    assert moment_param_bounded(0.0, 0.5, 1.0, 10) == 0.0
    assert moment_param_bounded(1.0, 0.5, 10.0, 100) == pytest.approx(10.0)
    with pytest.raises(DomainError):
        moment_param_bounded(1.0, 0.5, 0.0, 10)
    with pytest.raises(DomainError):
        moment_param_bounded(1.0, 1.0, 1.0, 10)


@pytest.mark.parametrize("n,H", [(100, 2.0), (10_000, 5.0), (50, 0.3)])
def test_balanced_r0_equalizes_terms(n, H):
    B, r = 1.5, 0.5
    r0 = balanced_r0(B, n, H)
    theta = moment_param_bounded(B, r, r0, n)
    ratio = (theta * H / n) / (r0 / n)
    assert 0.5 <= ratio <= 2.0


def test_moment_param_general_bounded_case():
    theta, _ = moment_param_general(1.0, 2.0, 1.0, 0.5, 2.0, math.inf, math.inf, math.inf, 100, 1.0)
    assert theta == pytest.approx(4 * 2 * max(4 * 4 * 1 / (1 * 0.5), 2.0))


def test_moment_param_general_numeric():
    # nBR/r0 = 100: K_n = 4 ln 400; 4t max(4R^2C/((t-1)(1-r)), BR) = 8 * 8
    theta, K = moment_param_general(1, 1, 1, 0.5, 2.0, 2, 2, math.inf, 100, 1.0)
    assert K == pytest.approx(4 * math.log(400))
    assert theta == pytest.approx(64 * K)
    # the kurtosis branch: kurt_sup = 100 gives K_n = 4 ln(4 * 100^(1/4))
    theta, K = moment_param_general(1, 1, 1, 0.5, 2.0, 2, 2, 100.0, 100, 1.0)
    assert K == pytest.approx(4 * math.log(4 * math.sqrt(10)))
    assert theta == pytest.approx(64 * K)


def test_moment_param_general_errors():
    args = dict(B=1, R=1, C=1, r=0.5, t=2.0, p=2, q=2, kurt_sup=10, n=10, r0=1.0)
    for bad in [dict(t=1.0), dict(r=1.0), dict(p=1.5, q=1.5), dict(r0=0.0), dict(kurt_sup=0.5)]:
        with pytest.raises(DomainError):
            moment_param_general(**{**args, **bad})


def test_bernstein_constant_examples():
    assert bernstein_constant(LossSpec("squared")) == 2.0
    assert bernstein_constant(LossSpec("cross_entropy", 0.25)) == pytest.approx(2.25)
    assert bernstein_constant(LossSpec("absolute"), "lipschitz", B=1.0, n=100, r0=10.0) == 20.0
    with pytest.raises(DomainError):
        bernstein_constant(LossSpec("absolute"))


def test_expected_bound_examples():
    assert expected_bound(1.5, 0.0, 3, 10) == 1.5
    assert expected_bound(1.0, 3.0, 2, 10) == pytest.approx(1.6)


def test_r_lip_examples():
    assert r_lip(2.0, 0.1, 3, 100, 0.0, 1.0, 1.0) == 2.0
    assert r_lip(100.0, 0.1, 2, 10**9, 0.3, 1.0, 0.01) < 100.0
    with pytest.raises(DomainError):
        r_lip(1.0, 0.1, 2, 100, 2.0, 1.0, 1.0)
    # regression value from the printed formula; the min picks L here
    assert rlip_log(1, 10**4, 0.1, 1.0) == pytest.approx(
        10 * (11 * math.log(23) * math.log(3e4) + 6) * math.log(60), rel=1e-14)
    assert r_lip(10.0, 0.1, 1, 10**4, 1.0, 1.0, 1.0) == 10.0
    assert r_lip(1000.0, 0.1, 1, 10**6, 1.0, 1.0, 1.0) == pytest.approx(
        math.sqrt(2 * rlip_log(1, 10**6, 0.1, 1.0)), rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 100), st.floats(0.01, 100))
def test_r_lip_monotone_in_L(a, b):
    lo, hi = sorted((a, b))
    args = (0.1, 3, 500, 0.3, 1.0, 1.0)
    assert r_lip(lo, *args) <= r_lip(hi, *args)


def test_c_gamma_examples():
    g = 0.1
    assert c_gamma(5, 5, g) == pytest.approx((1 + math.log(math.log(math.e / g))) * math.log(1 / g))
    assert c_gamma(100, 3, 1 - 1e-12) == pytest.approx(0.0, abs=1e-9)
    vals = [c_gamma(n, 3, 0.1) for n in (3, 10, 100, 1000)]
    assert vals == sorted(vals)


def test_gamma_budget():
    b = GammaBudget(0.1)
    b.allocate("a", 0.05)
    b.allocate("b", 0.05)
    assert b.remaining == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(GammaBudgetError):
        b.allocate("c", 0.001)
    with pytest.raises(GammaBudgetError):
        linear_erm_bound_explicit(UNIT3, 1.0, 0.1, 100, budget=GammaBudget(0.05))


def test_linear_bound_regression_and_budget():
    rep = constrained_bound(UNIT3, 1.0, 0.1, 100)
    assert math.isfinite(rep.total) and rep.total > 0
    assert rep.total == pytest.approx(34457.43130271164, rel=1e-9)
    assert sum(a for _, a in rep.details["gamma_budget"]) == pytest.approx(0.1)
    assert rep.total == pytest.approx(sum((v for k, v in rep.terms.items() if k != "floor_term")) / 0.5
                                      + rep.floor_term, rel=1e-12)


def test_linear_bound_b_apx_shift():
    a = linear_erm_bound_explicit(UNIT3, 1.0, 0.1, 500)
    b = linear_erm_bound_explicit(UNIT3, 1.0, 0.1, 500, 0.3)
    assert b.total - a.total == pytest.approx(0.6, rel=1e-9)


@pytest.mark.parametrize("n", [10**3, 10**4, 10**5])
def test_linear_bound_decade_ratio(n):
    spec = gaussian_problem(np.eye(3), [0.5, 0.0, 0.0])
    ratio = constrained_bound(spec, 1.0, 0.1, n).total / constrained_bound(spec, 1.0, 0.1, 10 * n).total
    assert 6.0 <= ratio <= 10.5


def test_constrained_bound_loglog_slope():
    ns = np.logspace(3, 6, 7)
    vals = [constrained_bound(UNIT3, 1.0, 0.1, int(n)).total for n in ns]
    slope = stats.linregress(np.log(ns), np.log(vals)).slope
    assert -1.2 <= slope <= -0.8


def test_penalized_dn_regime_slope_eventually():
    # the eigenvalue-floor refinement only bites once n is far beyond desk scale
    prm = LinearParams(1, 1.0, 1.0, 0.5)
    ns = np.logspace(8, 11, 7)
    vals = [penalized_bound(prm, 1 / n, 0.5, 0.1, int(n)).total for n in ns]
    slope = stats.linregress(np.log(ns), np.log(vals)).slope
    assert -1.2 <= slope <= -0.8


def test_constrained_noiseless_has_no_apx():
    assert constrained_apx(0.0, 0.1, 100) == 0.0
    rep = constrained_bound(LinearParams(3, 1.0, 0.0, 0.0), 1.0, 0.1, 100)
    assert rep.approx_term == 0.0


def test_constrained_bound_monotone_in_L():
    prm = LinearParams(2, 1.0, 1.0, 0.2)
    vals = [constrained_bound(prm, L, 0.1, 1000).total for L in (0.1, 0.5, 1.0, 5.0, 50.0)]
    assert vals == sorted(vals)


def test_penalized_bound_structure():
    assert penalized_slope_bound(0.5, 1.0, 0.1, 1e9) == 0.5
    rep = penalized_bound(UNIT3, 1e6, 0.5, 0.1, 100)
    assert rep.details["L_lambda"] == 0.5
    assert rep.details["penalty_term"] == pytest.approx(1e6 * 0.25)
    assert rep.approx_term == rep.details["penalty_term"]
    assert rep.approx_term / rep.r > 0.5 * rep.total
    with pytest.raises(DomainError):
        penalized_bound(UNIT3, 0.0, 0.5, 0.1, 100)


def test_linear_params_coerce():
    spec = gaussian_problem(np.eye(2), [0.1, 0.2])
    prm = LinearParams.coerce(spec)
    assert prm.dim == 2 and prm.kappa == spec.kappa
    assert LinearParams.coerce({"dim": 2, "b_x": 1, "b_y": 2}) == LinearParams(2, 1.0, 2.0, 0.0)
    with pytest.raises(DomainError):
        LinearParams.coerce(3)
