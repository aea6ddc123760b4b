import json
import math
import warnings

import numpy as np
import pytest

from chainrisk import harness
from chainrisk.errors import ConfigurationError, ExperimentError, RankDeficiencyError
from chainrisk.harness import (
    ExperimentConfig,
    conservative_quantile,
    dominance_check,
    preset,
    rate_fit,
    read_results_csv,
    run_experiment,
    summarize_rows,
)
from chainrisk.parallel import pmap, resolve_workers
from chainrisk.problems import gaussian_problem, skewed_problem


def _small(**kw):
    base = dict(problem=gaussian_problem(np.eye(2), [0.4, 0.1]),
                estimator={"kind": "constrained", "L": 1.0}, n_grid=[50, 100, 200],
                trials=40, bound="constrained")
    base.update(kw)
    return ExperimentConfig(**base)


def test_noiseless_interpolation():
    cfg = ExperimentConfig(problem=gaussian_problem(np.eye(3), [0.3, -0.2, 0.1], noise_sd=0.0),
                           estimator={"kind": "constrained", "L": 1.0}, n_grid=[10], trials=1)
    res = run_experiment(cfg)
    assert abs(res.rows[0]["excess_risk"]) <= 1e-10


def test_rerun_gives_identical_csv():
    assert run_experiment(_small()).csv_text() == run_experiment(_small()).csv_text()
    other = run_experiment(_small(master_seed=1)).csv_text()
    assert other != run_experiment(_small()).csv_text()


@pytest.mark.parametrize("workers", [4, 8])
def test_worker_count_does_not_change_results(workers):
    cfg = _small(trials=30)
    assert run_experiment(cfg, workers=1).csv_text() == run_experiment(cfg, workers=workers).csv_text()


def test_csv_and_json_round_trip(tmp_path):
    res = run_experiment(_small())
    paths = res.save(tmp_path)
    assert read_results_csv(paths["csv"]) == res.rows
    summary = json.loads(paths["summary"].read_text())
    per_n, rate = summarize_rows(read_results_csv(paths["csv"]), res.config.n_grid,
                                 res.config.gamma, [p["bound"] for p in res.per_n])
    assert per_n == res.per_n == summary["per_n"]
    assert rate.to_dict() == summary["rate_fit"]
    assert set(summary) >= {"per_n", "rate_fit", "config", "version"}
    again = ExperimentConfig.from_json(paths["config"].read_text())
    assert again.to_dict() == res.config.to_dict()
    header = paths["csv"].read_text().splitlines()[0]
    assert header == "n,trial,seed,excess_risk,slope_norm,alpha,failed"


def test_rate_fit_synthetic():
    n = np.array([100, 400, 1600, 6400])
    assert rate_fit(n, 3.0 / n).slope == pytest.approx(-1.0, abs=1e-12)
    assert rate_fit(n, 3.0 / np.sqrt(n)).slope == pytest.approx(-0.5, abs=1e-12)
    assert rate_fit(n, 3.0 / n).r2 == pytest.approx(1.0)
    with pytest.raises(ExperimentError):
        rate_fit(n, [1.0, 0.0, 1.0, 1.0])
    with pytest.raises(ExperimentError):
        rate_fit(n[:2], [1.0, 1.0])


def test_conservative_quantile():
    vals = np.arange(1, 11)
    assert conservative_quantile(vals, 0.9) == 9.0
    assert conservative_quantile(vals, 0.91) == 10.0
    assert conservative_quantile(np.arange(1, 501), 0.9) == 450.0
    assert conservative_quantile([5.0], 0.9) == 5.0


def test_dominance_refuses_few_trials():
    res = run_experiment(_small(trials=10))
    with pytest.raises(ConfigurationError):
        dominance_check(res)
    with pytest.raises(ConfigurationError):
        dominance_check(run_experiment(_small(bound="none", trials=30)))


def test_dominance_infinite_bound_warns(monkeypatch):
    res = run_experiment(_small(trials=30))
    for p in res.per_n:
        p["bound"] = math.inf
        p["dominated"] = True
    with pytest.warns(UserWarning, match="infinite"):
        rep = dominance_check(res)
    assert rep.passed and rep.warnings


def test_dominance_flags_and_note():
    rep = dominance_check(run_experiment(_small(trials=40)))
    assert rep.passed
    for row in rep.rows:
        assert row["dominated"] == (row["quantile"] <= row["bound"])
        assert 0 < row["prob_below_true_quantile"] < 1


def test_failed_trials_excluded(monkeypatch, caplog):
    real = harness._fit
    calls = {"k": 0}

    def flaky(config, data):
        calls["k"] += 1
        if calls["k"] == 1:
            raise RankDeficiencyError("injected")
        return real(config, data)

    monkeypatch.setattr(harness, "_fit", flaky)
    cfg = _small(n_grid=[50], trials=150, bound="none")
    res = run_experiment(cfg, workers=1)
    assert res.failed == 1
    assert res.per_n[0]["trials"] == 149
    assert "failed" in caplog.text


def test_failure_cap():
    cfg = ExperimentConfig(problem=skewed_problem(0.1),
                           estimator={"kind": "ridge", "lambda_rule": "fixed", "lam": 0.0},
                           n_grid=[50], trials=10, bound="none")
    with pytest.raises(ExperimentError):
        run_experiment(cfg)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        _small(n_grid=[100, 50])
    with pytest.raises(ConfigurationError):
        _small(estimator={"kind": "lasso"})
    with pytest.raises(ConfigurationError):
        _small(bound="penalized")
    with pytest.raises(ConfigurationError):
        _small(gamma=1.0)
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_json("{not json")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_json('{"problem": {}}')


def test_lambda_rules():
    cfg = preset("ridge-sqrt")
    assert cfg.lam(300) == pytest.approx(0.1)
    assert preset("ridge-dn").lam(200) == pytest.approx(1 / 200)


def test_presets_build():
    for name in harness.PRESETS:
        cfg = preset(name)
        assert cfg.trials == 500 and cfg.gamma == 0.1
        assert math.isfinite(cfg.bound_at(cfg.n_grid[0]))
    assert preset("mbg-skew", p=0.1).problem.design.params["p"] == 0.1
    with pytest.raises(ConfigurationError):
        preset("nope")


def test_resolve_workers(monkeypatch):
    monkeypatch.setenv("CHAINRISK_WORKERS", "3")
    assert resolve_workers(None) == 3
    assert resolve_workers(2) == 2
    monkeypatch.delenv("CHAINRISK_WORKERS")
    assert resolve_workers(None) == 1
    with pytest.raises(ValueError):
        resolve_workers(0)
    assert pmap(abs, [-1, -2, 3], workers=2) == [1, 2, 3]
