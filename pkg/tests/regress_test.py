from __future__ import annotations

import functools

import numpy as np
import pytest

from qlsreg.exceptions import AllGridPointsFailed
from qlsreg.exceptions import DomainError
from qlsreg.exceptions import NonConvergence
from qlsreg.exceptions import QuantileOutOfRange
from qlsreg.exceptions import RankDeficientDesign
from qlsreg.exceptions import SingularInformation
from qlsreg.kernels import DEFAULT_EXTRA
from qlsreg.kernels import KernelFamily
from qlsreg.kernels import make_kernel
from qlsreg.regress import FitOptions
from qlsreg.regress import ParamVector
from qlsreg.regress import RegressionModel
from qlsreg.regress import expected_information
from qlsreg.regress import fit
from qlsreg.regress import fitted_quantiles
from qlsreg.regress import init_params
from qlsreg.regress import invert_information
from qlsreg.regress import loglik
from qlsreg.regress import observed_information
from qlsreg.regress import profile_extra_parameter
from qlsreg.regress import quantile_shift
from qlsreg.regress import score
from qlsreg.utils import spawn_generator
from tests.conftest import make_model

LOGNORMAL = KernelFamily(name='log-no')


def _constant_model(y, q=0.5, family=LOGNORMAL):
    n = len(y)
    ones = np.ones((n, 1))
    return RegressionModel(y=np.asarray(y), X=ones, W=ones, q=q, family=family)


def _homoscedastic(n=100, seed=0, q=0.5, family=LOGNORMAL):
    rng = spawn_generator(seed, n)
    X = np.column_stack([np.ones(n), rng.uniform(size=n)])
    y = np.exp(1.0 + 0.5 * X[:, 1] + 0.4 * rng.standard_normal(n))
    return RegressionModel(y=y, X=X, W=np.ones((n, 1)), q=q, family=family)


def _central_difference(fn, theta, step=1e-7):
    gradient = np.empty_like(theta)
    for j in range(theta.size):
        shift = np.zeros_like(theta)
        shift[j] = step
        gradient[j] = (fn(theta + shift) - fn(theta - shift)) / (2 * step)
    return gradient


def test_loglik_at_zero_residual():
    model = _constant_model(np.ones(3))
    theta = np.zeros(2)
    assert loglik(model, theta, constant=False) == pytest.approx(0.0)


def test_loglik_unit_residual():
    model = _constant_model(np.full(3, np.e))
    theta = np.zeros(2)
    # -1/2 per observation
    assert loglik(model, theta, constant=False) == pytest.approx(-1.5)
    assert loglik(model, theta) == pytest.approx(
        -1.5 + 3 * np.log(1 / np.sqrt(2 * np.pi)),
    )


@pytest.mark.parametrize(
    'family',
    (
        KernelFamily(name='log-no'),
        KernelFamily(name='log-t', extra=(3.0,)),
        KernelFamily(name='log-hp', extra=(2.0,)),
    ),
    ids=lambda f: f.name,
)
def test_loglik_matches_direct_sum(family):
    model = make_model(family, q=0.25, n=50)
    theta = np.array([1.5, 0.5, 1.0, 0.5])
    kernel = make_kernel(family)
    beta, tau = theta[:2], theta[2:]
    phi = np.exp(model.W @ tau)
    z_q = float(kernel.quantile(0.25))
    total = 0.0
    for i in range(model.n):
        z = (np.log(model.y[i]) - model.X[i] @ beta) / np.sqrt(phi[i]) + z_q
        density = float(kernel.pdf(z))
        total += np.log(density) - 0.5 * np.log(phi[i])
    assert loglik(model, theta) == pytest.approx(total, abs=1e-10)


@pytest.mark.parametrize(
    'family',
    (
        KernelFamily(name='log-no'),
        KernelFamily(name='log-t', extra=(3.0,)),
        KernelFamily(name='log-pe', extra=(0.3,)),
        KernelFamily(name='log-hp', extra=(2.0,)),
        KernelFamily(name='log-sl', extra=(4.0,)),
        KernelFamily(name='log-cn', extra=(0.1, 0.2)),
        KernelFamily(name='ebs', extra=(0.5,)),
        KernelFamily(name='ebs-t', extra=(0.5, 3.0)),
    ),
    ids=lambda f: f.name,
)
def test_score_matches_finite_difference(family):
    theta = np.array([1.4, 0.6, 0.9, 0.4])
    for seed in range(50):
        model = make_model(family, q=0.75, n=60, seed=seed)
        numeric = _central_difference(functools.partial(loglik, model), theta)
        np.testing.assert_allclose(
            score(model, theta),
            numeric,
            rtol=1e-4,
            atol=1e-3,
            err_msg=f'seed {seed}',
        )


def test_lognormal_median_stationarity():
    model = _homoscedastic()
    log_y = np.log(model.y)
    beta, *_ = np.linalg.lstsq(model.X, log_y, rcond=None)
    residual = log_y - model.X @ beta
    theta = np.array([*beta, np.log(np.mean(residual**2))])
    np.testing.assert_allclose(score(model, theta), 0.0, atol=1e-8)


def test_init_params_is_lognormal_median_mle():
    model = _homoscedastic()
    start = init_params(model).to_array()
    np.testing.assert_allclose(score(model, start), 0.0, atol=1e-8)
    result = fit(model)
    np.testing.assert_allclose(result.theta, start, atol=1e-6)


def test_init_params_shifts_intercept():
    median = init_params(_homoscedastic(q=0.5))
    lower = init_params(_homoscedastic(q=0.1))
    np.testing.assert_allclose(median.beta[1:], lower.beta[1:])
    assert lower.beta[0] < median.beta[0]
    assert np.isfinite(loglik(_homoscedastic(q=0.1), lower))


def test_expected_information_closed_forms():
    model = _constant_model(np.exp(np.linspace(-1, 1, 10)))
    info = expected_information(model, np.zeros(2))
    assert info[0, 0] == pytest.approx(10.0, rel=1e-7)
    assert info[1, 1] == pytest.approx(5.0, rel=1e-7)
    assert info[0, 1] == 0.0


def test_information_matrices_are_symmetric(heteroscedastic_model):
    theta = np.array([1.5, 0.5, 1.0, 0.5])
    for info in (
        expected_information(heteroscedastic_model, theta),
        observed_information(heteroscedastic_model, theta),
    ):
        np.testing.assert_allclose(info, info.T)
    eigenvalues = np.linalg.eigvalsh(
        expected_information(heteroscedastic_model, theta),
    )
    assert eigenvalues.min() >= -1e-10


def test_observed_information_lognormal_block():
    model = _homoscedastic(n=200)
    result = fit(model)
    phi = np.exp(result.theta_hat.tau[0])
    info = observed_information(model, result.theta)
    np.testing.assert_allclose(
        info[:2, :2],
        model.X.T @ model.X / phi,
        rtol=1e-4,
    )


def test_fit_recovers_parameters():
    family = KernelFamily(name='log-t', extra=(3.0,))
    model = make_model(family, q=0.25, n=5000, seed=9)
    result = fit(model).require_converged()
    np.testing.assert_allclose(
        result.theta,
        [1.5, 0.5, 1.0, 0.5],
        atol=0.3,
    )
    assert result.names == ['beta0', 'beta1', 'tau0', 'tau1']
    assert result.covariance is not None
    assert np.all(result.std_errors() > 0)
    assert result.trace[-1] >= result.trace[0]


def test_fit_is_invariant_to_scaling(heteroscedastic_model):
    model = heteroscedastic_model
    result = fit(model)
    scaled = fit(model.with_response(3.0 * model.y))
    assert scaled.theta[0] == pytest.approx(
        result.theta[0] + np.log(3.0),
        abs=1e-4,
    )
    np.testing.assert_allclose(scaled.theta[1:], result.theta[1:], atol=1e-4)


def test_fit_with_fixed_parameters(heteroscedastic_model):
    result = fit(heteroscedastic_model, fixed={1: 0.0, 3: 0.25})
    assert result.theta[1] == 0.0
    assert result.theta[3] == 0.25
    assert result.fixed == (1, 3)
    assert result.covariance[1, 1] == 0.0


def test_fit_iteration_cap(heteroscedastic_model):
    options = FitOptions(max_iter=1)
    result = fit(heteroscedastic_model, options)
    assert not result.converged
    with pytest.raises(NonConvergence):
        result.require_converged()


def test_expected_covariance_option(heteroscedastic_model):
    observed = fit(heteroscedastic_model)
    expected = fit(
        heteroscedastic_model,
        FitOptions(covariance='expected'),
    )
    np.testing.assert_allclose(
        observed.std_errors(),
        expected.std_errors(),
        rtol=0.3,
    )


def test_profile_single_point_equals_fit():
    family = KernelFamily(name='log-t', extra=(4.0,))
    model = make_model(family, q=0.5, n=100)
    profiled = profile_extra_parameter(model, grid=[(4.0,)])
    plain = fit(model)
    np.testing.assert_allclose(profiled.theta, plain.theta)
    assert profiled.loglik == plain.loglik
    assert profiled.profile == [((4.0,), plain.loglik)]


def test_profile_prefers_best_loglik():
    family = KernelFamily(name='log-t', extra=(3.0,))
    model = make_model(family, q=0.5, n=300, seed=4)
    result = profile_extra_parameter(model, grid=[(1.0,), (3.0,), (30.0,)])
    best = max(result.profile, key=lambda item: item[1])
    assert result.vartheta_hat == best[0]
    assert result.loglik == best[1]


def test_profile_empty_grid():
    model = _homoscedastic()
    with pytest.raises(AllGridPointsFailed):
        profile_extra_parameter(model, grid=[])


def test_fitted_quantiles_shapes(heteroscedastic_model):
    result = fit(heteroscedastic_model)
    quantiles, phi = fitted_quantiles(heteroscedastic_model, result)
    assert quantiles.shape == phi.shape == (heteroscedastic_model.n,)
    assert np.all(quantiles > 0)


def test_quantile_shift_moves_intercept():
    model = _homoscedastic(q=0.5)
    result = fit(model)
    theta = quantile_shift(result, 0.9)
    shifted = fit(_homoscedastic(q=0.9))
    np.testing.assert_allclose(theta, shifted.theta, atol=1e-4)


@pytest.mark.parametrize(
    ('kwargs', 'error'),
    (
        ({'q': 1.0}, QuantileOutOfRange),
        ({'y': -np.ones(20)}, DomainError),
        ({'X': np.ones((20, 2))}, RankDeficientDesign),
        ({'X': np.ones((19, 1))}, DomainError),
    ),
)
def test_model_validation(kwargs, error):
    arguments = {
        'y': np.ones(20),
        'X': np.ones((20, 1)),
        'W': np.ones((20, 1)),
        'q': 0.5,
        'family': LOGNORMAL,
    }
    arguments.update(kwargs)
    with pytest.raises(error):
        RegressionModel(**arguments)


def test_too_few_observations():
    with pytest.raises(RankDeficientDesign):
        _constant_model(np.ones(2))


def test_param_vector_split():
    vector = ParamVector.from_array(np.arange(5.0), n_beta=3)
    np.testing.assert_array_equal(vector.beta, [0.0, 1.0, 2.0])
    np.testing.assert_array_equal(vector.tau, [3.0, 4.0])
    np.testing.assert_array_equal(vector.to_array(), np.arange(5.0))


def test_default_extra_models_fit():
    for tag in ('log-pe', 'log-hp', 'log-cn', 'ebs'):
        family = KernelFamily(name=tag, extra=DEFAULT_EXTRA[tag])
        result = fit(make_model(family, q=0.5, n=200))
        assert result.converged, tag


def test_invert_information_rejects_indefinite():
    info = np.diag([-0.576, 6.8, 36.3, 135.2])
    with pytest.raises(SingularInformation, match='positive definite'):
        invert_information(info)


def test_invert_information_positive_definite():
    info = np.array([[4.0, 1.0], [1.0, 3.0]])
    np.testing.assert_allclose(
        invert_information(info),
        np.linalg.inv(info),
        rtol=1e-12,
    )


@pytest.mark.parametrize('truth', (0.3, 0.8, 1.0))
@pytest.mark.parametrize('extra', (0.8, 0.9, 1.0))
def test_power_exponential_near_kink_converges(truth, extra):
    data = make_model(KernelFamily(name='log-pe', extra=(truth,)), n=200)
    model = data.with_extra((extra,))
    result = fit(model)
    assert result.converged
    assert result.trace[-1] >= result.trace[0]


def test_power_exponential_profile_converges():
    family = KernelFamily(name='log-pe', extra=(1.0,))
    model = make_model(family, q=0.25, n=200, seed=5)
    for extra in (0.8, 0.9, 1.0):
        assert fit(model.with_extra((extra,))).converged, extra
    result = profile_extra_parameter(model, grid=[(0.8,), (0.9,), (1.0,)])
    assert result.converged
    assert all(np.isfinite(value) for _, value in result.profile)


@pytest.mark.parametrize(
    'family',
    (LOGNORMAL, KernelFamily(name='log-pe', extra=(0.9,))),
    ids=lambda f: f.label(),
)
def test_warm_start_at_optimum(family):
    model = make_model(family, q=0.5, n=200)
    result = fit(model)
    again = fit(model, start=result.theta)
    assert again.converged
    assert again.loglik >= result.loglik - 1e-8
    np.testing.assert_allclose(again.theta, result.theta, atol=1e-3)


@pytest.mark.slow
def test_profile_mode_recovers_extra_parameter():
    family = KernelFamily(name='log-t', extra=(3.0,))
    grid = [(1.0,), (3.0,), (10.0,), (30.0,)]
    picks = [
        profile_extra_parameter(
            make_model(family, q=0.5, n=300, seed=seed),
            grid=grid,
        ).vartheta_hat
        for seed in range(20)
    ]
    assert max(grid, key=picks.count) == (3.0,)
