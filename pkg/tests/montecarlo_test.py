from __future__ import annotations

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from qlsreg.exceptions import ExcessiveNonConvergence
from qlsreg.montecarlo import Study1Config
from qlsreg.montecarlo import Study1Job
from qlsreg.montecarlo import Study2Config
from qlsreg.montecarlo import aggregate
from qlsreg.montecarlo import run_study1
from qlsreg.montecarlo import run_study2
from qlsreg.montecarlo import study1_replication


def _small_study1(**kwargs):
    settings = {
        'family': 'log-no',
        'q': [0.25],
        'n': [40],
        'replications': 3,
        'candidates': ['log-no', 'log-t'],
        'seed': 7,
    }
    settings.update(kwargs)
    return Study1Config(**settings)


def test_aggregate_single_replication():
    estimates = np.array([[1.2, 0.4]])
    truths = np.array([1.0, 0.5])
    stats = aggregate(estimates, truths, estimates - 1, estimates + 1)
    np.testing.assert_allclose(stats.bias, [0.2, -0.1])
    np.testing.assert_allclose(stats.mse, [0.04, 0.01])
    np.testing.assert_array_equal(stats.cp, [1.0, 1.0])


def test_aggregate_without_intervals():
    stats = aggregate(np.zeros((4, 2)), np.zeros(2))
    assert np.all(np.isnan(stats.cp))


@pytest.mark.parametrize(
    'kwargs',
    (
        {'replications': 0},
        {'n': [5]},
        {'q': [1.0]},
        {'family': 'gamma'},
    ),
)
def test_invalid_study_config(kwargs):
    with pytest.raises(ValidationError):
        _small_study1(**kwargs)


@pytest.mark.parametrize('kwargs', ({'r': [4]}, {'alpha': [0.0]}))
def test_invalid_test_study_config(kwargs):
    with pytest.raises(ValidationError):
        Study2Config(**kwargs)


def test_default_extra_parameters():
    cfg = Study1Config(family='log-t')
    assert cfg.kernel_family().extra == (3.0,)
    families = cfg.candidate_families()
    assert len(families) == 8
    assert families[1].extra == (3.0,)


def test_replication_is_deterministic():
    config = _small_study1().model_dump(exclude={'compute_config'})
    job = Study1Job(n=40, q=0.25, rep=1)
    first = study1_replication(job, config)
    second = study1_replication(job, config)
    np.testing.assert_array_equal(first.estimates, second.estimates)
    other = study1_replication(Study1Job(n=40, q=0.25, rep=2), config)
    assert not np.array_equal(first.estimates, other.estimates)


def test_study1_report():
    report = run_study1(_small_study1())
    estimation = report.estimation
    assert set(estimation.parameter) == {'beta0', 'beta1', 'tau0', 'tau1'}
    assert {'bias', 'mse', 'cp'} <= set(estimation.columns)
    assert np.all(estimation.mse >= estimation.bias**2 - 1e-12)
    assert set(report.residuals.kind) == {'GCS', 'RQ'}
    assert set(report.criteria.criterion) == {'AIC', 'BIC', 'AICc'}
    rates = report.criteria.success_rate
    assert np.all((rates >= 0) & (rates <= 1))
    assert report.drops.dropped.sum() == 0
    assert report.size.empty


def test_study1_single_replication_bias():
    cfg = _small_study1(replications=1, candidates=[])
    report = run_study1(cfg)
    outcome = study1_replication(
        Study1Job(n=40, q=0.25, rep=0),
        cfg.model_dump(exclude={'compute_config'}),
    )
    truths = np.array([*cfg.beta, *cfg.tau])
    np.testing.assert_allclose(
        report.estimation.bias,
        outcome.estimates - truths,
    )
    estimation = report.estimation
    np.testing.assert_allclose(estimation.mse, estimation.bias**2)
    assert report.criteria.empty


def test_fixed_design_still_redraws_responses():
    cfg = _small_study1(redraw_covariates=False, candidates=[])
    config = cfg.model_dump(exclude={'compute_config'})
    first = study1_replication(Study1Job(n=40, q=0.25, rep=0), config)
    second = study1_replication(Study1Job(n=40, q=0.25, rep=1), config)
    assert not np.array_equal(first.estimates, second.estimates)


def test_study2_level_one_always_rejects():
    cfg = Study2Config(
        q=[0.5],
        n=[40],
        r=[1],
        alpha=[1.0],
        delta=[0.0],
        replications=2,
    )
    report = run_study2(cfg)
    assert {'Wald', 'Score', 'LR', 'Gradient'} <= set(report.size.statistic)
    np.testing.assert_array_equal(report.size.rate, 1.0)
    assert report.size.used.between(1, 2).all()
    assert report.estimation.empty


def test_study2_power_table():
    cfg = Study2Config(
        q=[0.5],
        n=[60],
        r=[1],
        alpha=[0.05],
        delta=[0.0, 4.0],
        replications=3,
    )
    report = run_study2(cfg)
    assert sorted(report.power.delta.unique()) == [0.0, 4.0]
    strong = report.power[report.power.delta == 4.0]
    assert not strong.empty
    np.testing.assert_array_equal(strong.rate, 1.0)
    assert {'rate', 'used'} <= set(report.power.columns)
    assert (report.power.used <= 3).all()


def _power_curves(report):
    return {
        statistic: rows.sort_values('delta').rate.to_numpy()
        for statistic, rows in report.power.groupby('statistic')
    }


def test_study2_power_grows_with_delta():
    cfg = Study2Config(
        q=[0.5],
        n=[60],
        r=[1],
        alpha=[0.05],
        delta=[0.0, 2.0, 6.0],
        replications=10,
        seed=11,
    )
    for statistic, curve in _power_curves(run_study2(cfg)).items():
        assert curve[-1] == 1.0, statistic
        assert np.all(np.diff(curve) >= -0.2), statistic


def test_excessive_drops():
    # An infinite dispersion makes every response draw invalid
    cfg = _small_study1(
        candidates=[],
        tau=(2000.0, 0.0),
        max_drop_share=0.0,
    )
    with pytest.raises(ExcessiveNonConvergence):
        run_study1(cfg)


def test_report_serialization(tmp_path):
    report = run_study1(_small_study1(replications=2, candidates=[]))
    paths = report.write_csv(tmp_path / 'out')
    names = sorted(path.name for path in paths)
    assert names == ['drops.csv', 'estimation.csv', 'residuals.csv']
    again = pd.read_csv(
        tmp_path / 'out' / 'estimation.csv',
        float_precision='round_trip',
    )
    np.testing.assert_allclose(again.bias, report.estimation.bias, rtol=0)
    assert set(report.to_dict()) == {'estimation', 'residuals', 'drops'}


@pytest.mark.slow()
def test_lognormal_estimation_acceptance():
    cfg = Study1Config(
        family='log-no',
        q=[0.25],
        n=[200],
        replications=1000,
        seed=2024,
    )
    report = run_study1(cfg)
    beta0 = report.estimation[report.estimation.parameter == 'beta0']
    assert beta0.bias.item() == pytest.approx(0.00639, abs=0.02)
    assert 0.7 * 0.03417 <= beta0.mse.item() <= 1.3 * 0.03417
    assert 0.93 <= beta0.cp.item() <= 0.965
    criteria = report.criteria.set_index('criterion').success_rate
    assert criteria['AIC'] == pytest.approx(0.732, abs=0.04)
    assert criteria['AIC'] == criteria['BIC'] == criteria['AICc']
    residuals = report.residuals.set_index(['kind', 'statistic']).value
    assert residuals[('GCS', 'mean')] == pytest.approx(1.00018, abs=0.01)
    assert residuals[('GCS', 'median')] == pytest.approx(0.69487, abs=0.01)
    assert residuals[('RQ', 'mean')] == pytest.approx(0.00016, abs=0.01)
    assert residuals[('RQ', 'sd')] == pytest.approx(1.00243, abs=0.01)


@pytest.mark.slow()
def test_power_curve_acceptance():
    cfg = Study2Config(
        family='log-no',
        q=[0.5],
        n=[100],
        r=[1],
        alpha=[0.01],
        delta=[0.0, 1.0, 2.0, 3.0, 4.0],
        replications=1000,
        seed=2024,
    )
    for statistic, curve in _power_curves(run_study2(cfg)).items():
        assert np.all(np.diff(curve) >= -0.02), statistic
        assert curve[-1] >= 0.99, statistic
