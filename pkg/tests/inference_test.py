from __future__ import annotations

import numpy as np
import pytest

from qlsreg.exceptions import DegenerateAICc
from qlsreg.exceptions import NonConvergence
from qlsreg.inference import Hypothesis
from qlsreg.inference import coefficient_hypotheses
from qlsreg.inference import confidence_intervals
from qlsreg.inference import gradient_test
from qlsreg.inference import information_criteria
from qlsreg.inference import lr_test
from qlsreg.inference import run_battery
from qlsreg.inference import score_test
from qlsreg.inference import wald_test
from qlsreg.kernels import KernelFamily
from qlsreg.regress import FitOptions
from qlsreg.regress import fit
from tests.conftest import make_model


KINDS = ('Wald', 'Score', 'ScoreObserved', 'LR', 'Gradient')


@pytest.fixture()
def fitted(heteroscedastic_model):
    return heteroscedastic_model, fit(heteroscedastic_model)


def _at_mle(result, index):
    return Hypothesis(indices=(index,), values=(result.theta[index],))


def test_hypothesis_defaults():
    h = Hypothesis(indices=(1, 2))
    assert h.values == (0.0, 0.0)
    assert h.r == 2
    assert h.as_dict() == {1: 0.0, 2: 0.0}


@pytest.mark.parametrize(
    'kwargs',
    (
        {'indices': ()},
        {'indices': (1, 1)},
        {'indices': (1, 2), 'values': (0.0,)},
    ),
)
def test_invalid_hypotheses(kwargs):
    with pytest.raises(ValueError):
        Hypothesis(**kwargs)


def test_hypothesis_out_of_range(fitted):
    model, result = fitted
    with pytest.raises(ValueError, match='out of range'):
        wald_test(model, Hypothesis(indices=(7,)), full=result)


def test_statistics_vanish_at_the_mle(fitted):
    model, result = fitted
    h = _at_mle(result, 1)
    assert lr_test(model, h, full=result).statistic == pytest.approx(
        0.0,
        abs=1e-8,
    )
    assert wald_test(model, h, full=result).statistic == pytest.approx(0.0)
    assert score_test(model, h, full=result).statistic == pytest.approx(
        0.0,
        abs=1e-8,
    )
    assert gradient_test(model, h, full=result).statistic == pytest.approx(
        0.0,
        abs=1e-8,
    )


def test_wald_single_coefficient(fitted):
    model, result = fitted
    outcome = wald_test(model, Hypothesis(indices=(1,)), full=result)
    expected = (result.theta[1] / result.std_errors()[1]) ** 2
    assert outcome.statistic == pytest.approx(expected, rel=1e-10)
    assert outcome.df == 1
    assert 0 <= outcome.p_value <= 1


def test_battery_kinds_and_agreement():
    family = KernelFamily(name='log-no')
    model = make_model(family, q=0.25, beta=(1.5, 0.0), tau=(1.0, 0.0))
    battery = run_battery(model, Hypothesis(indices=(1, 3)))
    assert [t.kind for t in battery] == list(KINDS)
    assert all(t.df == 2 for t in battery)
    statistics = np.array([t.statistic for t in battery])
    assert np.all(statistics >= 0)
    # Asymptotically equivalent statistics stay on the same scale
    assert statistics.max() < 2.0 * statistics.min() + 5.0


def test_lr_invariant_to_scaling(fitted):
    model, _ = fitted
    h = Hypothesis(indices=(1,))
    original = lr_test(model, h)
    scaled = lr_test(model.with_response(7.0 * model.y), h)
    assert scaled.statistic == pytest.approx(original.statistic, abs=1e-6)


def test_strong_alternative_rejects():
    family = KernelFamily(name='log-no')
    model = make_model(family, q=0.5, n=200, beta=(1.5, 4.0))
    battery = run_battery(model, Hypothesis(indices=(1,)))
    kinds = [t.kind for t in battery]
    assert {'Wald', 'Score', 'LR', 'Gradient'} <= set(kinds)
    # An indefinite observed information drops the statistic, never zeroes it
    assert all(t.rejects(0.01) for t in battery)
    assert not any(t.clamped for t in battery)


def test_statistics_rank_alternatives_alike():
    family = KernelFamily(name='log-no')
    deltas = (0.0, 0.3, 0.6, 1.0)
    table = {kind: [] for kind in ('Wald', 'Score', 'LR', 'Gradient')}
    for delta in deltas:
        model = make_model(family, q=0.5, n=200, beta=(1.5, delta))
        battery = run_battery(model, Hypothesis(indices=(1,)))
        for t in battery:
            if t.kind in table:
                table[t.kind].append(t.statistic)
    orders = {tuple(np.argsort(values)) for values in table.values()}
    assert orders == {tuple(range(len(deltas)))}


def test_rejects_at_level_one(fitted):
    model, result = fitted
    outcome = wald_test(model, _at_mle(result, 1), full=result)
    assert outcome.rejects(1.0)


def test_non_converged_fit_is_refused(fitted):
    model, _ = fitted
    stopped = fit(model, FitOptions(max_iter=1))
    with pytest.raises(NonConvergence):
        lr_test(model, Hypothesis(indices=(1,)), full=stopped)


def test_record(fitted):
    model, result = fitted
    outcome = wald_test(model, Hypothesis(indices=(1,)), full=result)
    record = outcome.to_record()
    assert set(record) == {'kind', 'statistic', 'df', 'p_value', 'clamped'}


def test_confidence_intervals(fitted):
    _, result = fitted
    narrow = confidence_intervals(result, 0.9)
    wide = confidence_intervals(result, 0.99)
    assert narrow.shape == (4, 2)
    assert np.all(wide[:, 0] < narrow[:, 0])
    assert np.all(wide[:, 1] > narrow[:, 1])
    np.testing.assert_allclose(narrow.mean(axis=1), result.theta)
    with pytest.raises(ValueError):
        confidence_intervals(result, 1.0)


def test_information_criteria_arithmetic():
    values = information_criteria(-100.0, n=50, p=4)
    assert values.aic == pytest.approx(208.0)
    assert values.bic == pytest.approx(200.0 + 4 * np.log(50))
    assert values.bic == pytest.approx(215.65, abs=0.01)
    assert values.aicc == pytest.approx(208.0 + 40.0 / 45.0)


def test_information_criteria_from_fit(fitted):
    _, result = fitted
    values = information_criteria(result, result.n)
    assert values.aic == pytest.approx(-2 * result.loglik + 8)


def test_degenerate_aicc():
    with pytest.raises(DegenerateAICc):
        information_criteria(-10.0, n=5, p=4)
    with pytest.raises(ValueError, match='p is required'):
        information_criteria(-10.0, n=50)


def test_coefficient_hypotheses():
    hypotheses = coefficient_hypotheses(['beta0', 'beta1', 'tau0', 'tau1'])
    assert [h.indices for h in hypotheses] == [(1,), (3,)]


@pytest.mark.slow()
def test_null_rejection_rates():
    from qlsreg.montecarlo import Study2Config
    from qlsreg.montecarlo import run_study2

    cfg = Study2Config(
        family='log-no',
        q=[0.5],
        n=[200],
        r=[3],
        alpha=[0.05],
        delta=[0.0],
        replications=2000,
        seed=2024,
    )
    size = run_study2(cfg).size
    bands = {
        'LR': (0.035, 0.065),
        'Wald': (0.035, 0.075),
        'Score': (0.035, 0.065),
        'Gradient': (0.035, 0.065),
    }
    rates = size[size.alpha == 0.05].set_index('statistic').rate
    for statistic, (low, high) in bands.items():
        assert low <= rates[statistic] <= high, statistic
