from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from scipy.special import ndtri
from scipy.stats import norm

from qlsreg.diagnostics import EnvelopeData
from qlsreg.diagnostics import fitted_cdf
from qlsreg.diagnostics import gcs_residuals
from qlsreg.diagnostics import qq_envelope
from qlsreg.diagnostics import reference_quantiles
from qlsreg.diagnostics import residual_summary
from qlsreg.diagnostics import rq_residuals
from qlsreg.exceptions import DegenerateSample
from qlsreg.kernels import KernelFamily
from qlsreg.regress import ParamVector
from qlsreg.regress import RegressionModel
from qlsreg.regress import fit
from qlsreg.utils import spawn_generator
from tests.conftest import make_model


def _median_model(values):
    """Intercept-only lognormal median model."""
    y = np.asarray(values)
    ones = np.ones((y.size, 1))
    family = KernelFamily(name='log-no')
    return RegressionModel(y=y, X=ones, W=ones, q=0.5, family=family)


def test_residuals_at_fitted_median():
    model = _median_model(np.exp([-1.0, 0.0, 1.0, 1.959964]))
    # Evaluate at Q = 1, phi = 1 instead of the estimate
    result = dataclasses.replace(
        fit(model),
        theta_hat=ParamVector(beta=np.zeros(1), tau=np.zeros(1)),
    )
    cdf = fitted_cdf(model, result)
    np.testing.assert_allclose(cdf, norm.cdf([-1.0, 0.0, 1.0, 1.959964]))

    gcs = gcs_residuals(model, result).values
    rq = rq_residuals(model, result).values
    assert gcs[1] == pytest.approx(np.log(2.0))
    assert rq[1] == pytest.approx(0.0, abs=1e-12)
    assert rq[3] == pytest.approx(1.959964, abs=1e-6)


def test_residual_summary_symmetric():
    summary = residual_summary(np.array([-1.0, 0.0, 1.0]))
    assert summary.mean == 0.0
    assert summary.median == 0.0
    assert summary.sd == pytest.approx(1.0)
    assert summary.skewness == pytest.approx(0.0)


def test_residual_summary_moments():
    rng = spawn_generator(8)
    exponential = residual_summary(rng.exponential(size=1_000_000))
    assert exponential.skewness == pytest.approx(2.0, abs=0.02)
    assert exponential.kurtosis == pytest.approx(6.0, abs=0.2)
    normal = residual_summary(rng.standard_normal(1_000_000))
    assert normal.skewness == pytest.approx(0.0, abs=0.01)
    assert normal.kurtosis == pytest.approx(0.0, abs=0.05)


@pytest.mark.parametrize('values', (np.array([1.0]), np.ones(5)))
def test_residual_summary_degenerate(values):
    with pytest.raises(DegenerateSample):
        residual_summary(values)


def test_reference_quantiles():
    gcs = reference_quantiles('GCS', 4)
    np.testing.assert_allclose(gcs, -np.log1p(-np.array([1, 3, 5, 7]) / 8))
    rq = reference_quantiles('RQ', 5)
    np.testing.assert_allclose(rq, -rq[::-1], atol=1e-15)
    assert rq[2] == 0.0


def test_residuals_of_well_specified_fit(heteroscedastic_model):
    result = fit(heteroscedastic_model)
    gcs = gcs_residuals(heteroscedastic_model, result)
    rq = rq_residuals(heteroscedastic_model, result)
    assert gcs.kind == 'GCS'
    assert gcs.summary.mean == pytest.approx(1.0, abs=0.2)
    assert gcs.summary.median == pytest.approx(np.log(2.0), abs=0.15)
    assert rq.summary.mean == pytest.approx(0.0, abs=0.15)
    assert rq.summary.sd == pytest.approx(1.0, abs=0.15)


@pytest.fixture(scope='module')
def envelope_fit():
    model = make_model(KernelFamily(name='log-no'), q=0.5, n=60, seed=12)
    return model, fit(model)


def test_envelope_covers_model_data(envelope_fit):
    model, result = envelope_fit
    envelope = qq_envelope(model, result, 'RQ', sims=100, band=0.95, seed=1)
    assert isinstance(envelope, EnvelopeData)
    assert envelope.residuals.shape == (model.n,)
    assert np.all(envelope.lower <= envelope.upper)
    assert np.all(np.diff(envelope.residuals) >= 0)
    assert envelope.inside_share() >= 0.9


def test_envelope_zero_band_is_median(envelope_fit):
    model, result = envelope_fit
    envelope = qq_envelope(model, result, 'GCS', sims=19, band=0.0, seed=2)
    np.testing.assert_array_equal(envelope.lower, envelope.upper)


def test_envelope_is_reproducible(envelope_fit):
    model, result = envelope_fit
    first = qq_envelope(model, result, 'RQ', sims=19, seed=5)
    second = qq_envelope(model, result, 'RQ', sims=19, seed=5)
    np.testing.assert_array_equal(first.lower, second.lower)


@pytest.mark.parametrize(
    ('sims', 'band'),
    ((5, 0.95), (19, 1.0), (19, -0.1)),
)
def test_envelope_arguments(envelope_fit, sims, band):
    model, result = envelope_fit
    with pytest.raises(ValueError):
        qq_envelope(model, result, 'RQ', sims=sims, band=band)


def test_residual_kinds_are_linked(heteroscedastic_model):
    result = fit(heteroscedastic_model)
    gcs = gcs_residuals(heteroscedastic_model, result).values
    rq = rq_residuals(heteroscedastic_model, result).values
    np.testing.assert_allclose(rq, ndtri(-np.expm1(-gcs)), atol=1e-10)


def test_residuals_increase_with_response(heteroscedastic_model):
    result = fit(heteroscedastic_model)
    larger = heteroscedastic_model.with_response(
        1.01 * heteroscedastic_model.y,
    )
    for residuals in (gcs_residuals, rq_residuals):
        before = residuals(heteroscedastic_model, result).values
        after = residuals(larger, result).values
        assert np.all(after > before)

    model = _median_model(np.exp(np.linspace(-2.0, 2.0, 25)))
    result = fit(model)
    assert np.all(np.diff(rq_residuals(model, result).values) > 0)
    assert np.all(np.diff(gcs_residuals(model, result).values) > 0)
