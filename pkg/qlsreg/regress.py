"""Log-symmetric quantile regression.

The model sets ``log Q_i = x_i' beta`` and ``log phi_i = w_i' tau`` with
``Y_i ~ QLS(Q_i, phi_i, g)`` at a fixed quantile level ``q``. The
standardized residual is

    z_i = [log y_i - x_i' beta] / sqrt(phi_i) + z_q

which is distributed as S(0, 1, g) under the model.
"""

from __future__ import annotations

import dataclasses
import logging
from typing import Literal
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor
from scipy.linalg import cho_solve
from scipy.optimize import minimize

from qlsreg.exceptions import AllGridPointsFailed
from qlsreg.exceptions import DomainError
from qlsreg.exceptions import NonConvergence
from qlsreg.exceptions import NonFiniteLikelihood
from qlsreg.exceptions import QlsRegError
from qlsreg.exceptions import QuantileOutOfRange
from qlsreg.exceptions import RankDeficientDesign
from qlsreg.exceptions import SingularInformation
from qlsreg.kernels import DEFAULT_GRIDS
from qlsreg.kernels import DensityKernel
from qlsreg.kernels import KernelFamily
from qlsreg.kernels import make_kernel
from qlsreg.timer import Timer
from qlsreg.utils import BaseConfig

logger = logging.getLogger(__name__)

# Step scale of the finite-difference Hessian.
HESSIAN_STEP = np.cbrt(np.finfo(float).eps)
# Reciprocal condition number below which an information matrix is singular.
RCOND_MIN = 1e-12
# BFGS restarts after a precision-loss or non-descent exit.
MAX_RESTARTS = 10


@dataclasses.dataclass(frozen=True, eq=False)
class RegressionModel:
    """Data and structure of a quantile regression model.

    Attributes
    ----------
    y : np.ndarray
        Positive responses, shape ``(n,)``.
    X : np.ndarray
        Design of ``log Q``, shape ``(n, k + 1)``, first column ones.
    W : np.ndarray
        Design of ``log phi``, shape ``(n, l + 1)``, first column ones.
    q : float
        Quantile level.
    family : KernelFamily
        Kernel family and the extra parameters used by :func:`fit`.
    grid : tuple, optional
        Candidate extra parameters for :func:`profile_extra_parameter`,
        defaults to the family grid.
    """

    y: np.ndarray
    X: np.ndarray
    W: np.ndarray
    q: float
    family: KernelFamily
    grid: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        """Validate shapes, positivity and rank.

        Raises
        ------
        DomainError
            If a response is not positive or shapes disagree.
        QuantileOutOfRange
            If ``q`` lies outside (0, 1).
        RankDeficientDesign
            If ``X`` or ``W`` lacks full column rank or ``n`` is too small.
        """
        y = np.asarray(self.y, dtype=float).reshape(-1)
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'W', W)

        if X.shape[0] != y.size or W.shape[0] != y.size:
            raise DomainError(
                f'design rows {X.shape[0]}, {W.shape[0]} do not match '
                f'{y.size} responses',
            )
        if np.any(~(y > 0)) or not np.all(np.isfinite(y)):
            raise DomainError('responses must be positive and finite')
        if not 0 < self.q < 1:
            raise QuantileOutOfRange(f'q must lie in (0, 1), got {self.q}')
        if y.size <= X.shape[1] + W.shape[1]:
            raise RankDeficientDesign(
                f'n={y.size} observations for {self.n_params} parameters',
            )
        for label, matrix in (('X', X), ('W', W)):
            if np.linalg.matrix_rank(matrix) < matrix.shape[1]:
                raise RankDeficientDesign(f'{label} lacks full column rank')

    @property
    def n(self) -> int:
        """Number of observations."""
        return self.y.size

    @property
    def n_beta(self) -> int:
        """Number of quantile coefficients ``k + 1``."""
        return self.X.shape[1]

    @property
    def n_params(self) -> int:
        """Number of regression coefficients ``k + l + 2``."""
        return self.X.shape[1] + self.W.shape[1]

    @property
    def kernel(self) -> DensityKernel:
        """The kernel at the model's extra parameters."""
        return make_kernel(self.family)

    @property
    def candidate_grid(self) -> tuple[tuple[float, ...], ...]:
        """Extra parameters searched by profiling."""
        return self.grid or DEFAULT_GRIDS[self.family.name]

    def with_extra(self, extra: Sequence[float]) -> RegressionModel:
        """Return the same model with other extra parameters."""
        family = KernelFamily(name=self.family.name, extra=tuple(extra))
        return dataclasses.replace(self, family=family)

    def with_response(self, y: np.ndarray) -> RegressionModel:
        """Return the same design with another response vector."""
        return dataclasses.replace(self, y=y)

    def parameter_names(self) -> list[str]:
        """Return ``beta0..betak, tau0..taul``."""
        return [f'beta{j}' for j in range(self.X.shape[1])] + [
            f'tau{j}' for j in range(self.W.shape[1])
        ]


@dataclasses.dataclass(frozen=True, eq=False)
class ParamVector:
    """Regression coefficients ``theta = (beta, tau)``."""

    beta: np.ndarray
    tau: np.ndarray

    def __post_init__(self) -> None:
        """Coerce to float arrays."""
        object.__setattr__(self, 'beta', np.asarray(self.beta, dtype=float))
        object.__setattr__(self, 'tau', np.asarray(self.tau, dtype=float))

    def to_array(self) -> np.ndarray:
        """Concatenate into ``theta``."""
        return np.concatenate([self.beta, self.tau])

    @classmethod
    def from_array(cls, theta: np.ndarray, n_beta: int) -> ParamVector:
        """Split ``theta`` after its first ``n_beta`` entries."""
        theta = np.asarray(theta, dtype=float)
        return cls(beta=theta[:n_beta].copy(), tau=theta[n_beta:].copy())


ThetaLike = ParamVector | np.ndarray


class FitOptions(BaseConfig):
    """Settings of the quasi-Newton fit."""

    # Iteration cap of the optimizer
    max_iter: int = 500
    # Max-norm of the gradient at which BFGS stops
    gtol: float = 1e-8
    # Relative loglik change that counts as converged
    ftol: float = 1e-12
    # Information matrix inverted for the covariance
    covariance: Literal['observed', 'expected'] = 'observed'


@dataclasses.dataclass
class FitResult:
    """Outcome of a maximum likelihood fit."""

    theta_hat: ParamVector
    family: KernelFamily
    q: float
    n: int
    loglik: float
    covariance: np.ndarray | None
    gradient_norm: float
    iterations: int
    converged: bool
    names: list[str]
    trace: list[float] = dataclasses.field(default_factory=list)
    fixed: tuple[int, ...] = ()
    # (extra, loglik) per grid point when the fit came from profiling
    profile: list[tuple[tuple[float, ...], float]] = dataclasses.field(
        default_factory=list,
    )

    @property
    def vartheta_hat(self) -> tuple[float, ...]:
        """Extra parameters the fit was run at."""
        return tuple(self.family.extra)

    @property
    def theta(self) -> np.ndarray:
        """Flat ``theta_hat``."""
        return self.theta_hat.to_array()

    @property
    def n_params(self) -> int:
        """Number of regression coefficients."""
        return self.theta.size

    def std_errors(self) -> np.ndarray:
        """Square roots of the covariance diagonal.

        Raises
        ------
        SingularInformation
            If the covariance is unavailable.
        """
        if self.covariance is None:
            raise SingularInformation('covariance unavailable for this fit')
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def require_converged(self) -> FitResult:
        """Return ``self``, raising ``NonConvergence`` if not converged."""
        if not self.converged:
            raise NonConvergence(
                f'{self.family.label()} fit at q={self.q} did not converge '
                f'(gradient norm {self.gradient_norm:.3g})',
            )
        return self


def _as_array(model: RegressionModel, theta: ThetaLike) -> np.ndarray:
    if isinstance(theta, ParamVector):
        theta = theta.to_array()
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.n_params,):
        raise ValueError(
            f'theta has shape {theta.shape}, expected ({model.n_params},)',
        )
    return theta


def _standardize(
    model: RegressionModel,
    theta: np.ndarray,
    kernel: DensityKernel,
) -> tuple[np.ndarray, np.ndarray, float]:
    beta, tau = theta[: model.n_beta], theta[model.n_beta :]
    log_phi = model.W @ tau
    root = np.exp(0.5 * log_phi)
    z_q = float(kernel.quantile(model.q))
    z = (np.log(model.y) - model.X @ beta) / root + z_q
    return z, log_phi, z_q


def loglik(
    model: RegressionModel,
    theta: ThetaLike,
    constant: bool = True,
) -> float:
    """Log-likelihood ``sum log g(z_i^2) - log(phi_i) / 2``.

    Parameters
    ----------
    model : RegressionModel
        The model.
    theta : ParamVector or np.ndarray
        The coefficients.
    constant : bool
        Include ``n log xi_nc`` so values compare across families.

    Raises
    ------
    NonFiniteLikelihood
        If the value overflows or a density underflows.
    """
    kernel = model.kernel
    theta = _as_array(model, theta)
    with np.errstate(all='ignore'):
        z, log_phi, _ = _standardize(model, theta, kernel)
        value = float(np.sum(kernel.log_g(z * z)) - 0.5 * np.sum(log_phi))
    if not np.isfinite(value):
        raise NonFiniteLikelihood(f'log-likelihood is {value}')
    if constant:
        value += model.n * float(np.log(kernel.xi_nc))
    return value


def score(model: RegressionModel, theta: ThetaLike) -> np.ndarray:
    """Analytic gradient of :func:`loglik` in ``(beta, tau)``.

    Raises
    ------
    NonFiniteLikelihood
        If a component is not finite.
    """
    kernel = model.kernel
    theta = _as_array(model, theta)
    with np.errstate(all='ignore'):
        z, log_phi, z_q = _standardize(model, theta, kernel)
        vz = kernel.v(z) * z
        d_beta = model.X.T @ (vz * np.exp(-0.5 * log_phi))
        d_tau = 0.5 * (model.W.T @ (vz * (z - z_q) - 1.0))
    grad = np.concatenate([d_beta, d_tau])
    if not np.all(np.isfinite(grad)):
        raise NonFiniteLikelihood('score has non-finite components')
    return grad


def expected_information(
    model: RegressionModel,
    theta: ThetaLike,
) -> np.ndarray:
    """Block-diagonal Fisher information ``diag(I_bb, I_tt)``.

    ``I_bb = X' diag(d_g / phi_i) X`` and ``I_tt = W' W f_g / 4``.

    Raises
    ------
    NonConvergentQuadrature
        If the Fisher weights cannot be computed.
    """
    theta = _as_array(model, theta)
    d_g, f_g = model.kernel.fisher_weights(model.q)
    phi = np.exp(model.W @ theta[model.n_beta :])
    k = model.n_beta
    info = np.zeros((model.n_params, model.n_params))
    info[:k, :k] = model.X.T @ (model.X * (d_g / phi)[:, None])
    info[k:, k:] = 0.25 * f_g * (model.W.T @ model.W)
    return info


def observed_information(
    model: RegressionModel,
    theta: ThetaLike,
) -> np.ndarray:
    """Negative Hessian from central differences of the analytic score.

    Raises
    ------
    NonFiniteLikelihood
        If the score is not finite at a perturbed point.
    """
    theta = _as_array(model, theta)
    size = theta.size
    hessian = np.empty((size, size))
    for j in range(size):
        h = HESSIAN_STEP * (1.0 + abs(theta[j]))
        step = np.zeros(size)
        step[j] = h
        upper = score(model, theta + step)
        lower = score(model, theta - step)
        hessian[:, j] = (upper - lower) / (2.0 * h)
    info = -hessian
    return 0.5 * (info + info.T)


def invert_information(info: np.ndarray) -> np.ndarray:
    """Invert a positive-definite information matrix by Cholesky.

    Raises
    ------
    SingularInformation
        If the matrix is not finite, badly conditioned or not positive
        definite.
    """
    if not np.all(np.isfinite(info)):
        raise SingularInformation('information matrix is not finite')
    if info.size and 1.0 / np.linalg.cond(info) < RCOND_MIN:
        raise SingularInformation('information matrix is singular')
    try:
        factor = cho_factor(info)
    except np.linalg.LinAlgError as exc:
        raise SingularInformation(
            'information matrix is not positive definite',
        ) from exc
    inverse = cho_solve(factor, np.eye(info.shape[0]))
    return 0.5 * (inverse + inverse.T)


def init_params(model: RegressionModel) -> ParamVector:
    """Starting values from least squares on ``log y``.

    The intercept is moved from the median to the ``q``-quantile,
    ``beta0 + sqrt(phi0) z_q``, and ``tau0 = log(mean squared residual)``.

    Raises
    ------
    RankDeficientDesign
        If ``X`` lacks full column rank.
    """
    log_y = np.log(model.y)
    beta, _, rank, _ = np.linalg.lstsq(model.X, log_y, rcond=None)
    if rank < model.n_beta:
        raise RankDeficientDesign('X lacks full column rank')
    residual = log_y - model.X @ beta
    phi0 = max(float(np.mean(residual**2)), np.finfo(float).tiny)
    beta = beta.copy()
    beta[0] += np.sqrt(phi0) * float(model.kernel.quantile(model.q))
    tau = np.zeros(model.W.shape[1])
    tau[0] = np.log(phi0)
    return ParamVector(beta=beta, tau=tau)


def fit(
    model: RegressionModel,
    options: FitOptions | None = None,
    start: ThetaLike | None = None,
    fixed: dict[int, float] | None = None,
) -> FitResult:
    """Maximize the log-likelihood by BFGS with the analytic score.

    BFGS is restarted from the identity inverse Hessian when it exits
    on precision loss or a non-descent step. A restart that cannot
    improve the objective beyond ``ftol`` counts as converged, which is
    what happens at the kink of a power-exponential kernel near
    ``theta = 1``.

    Parameters
    ----------
    model : RegressionModel
        The model, fitted at ``model.family``.
    options : FitOptions, optional
        Optimizer settings.
    start : ParamVector or np.ndarray, optional
        Starting point, defaults to :func:`init_params`.
    fixed : dict[int, float], optional
        Positions of ``theta`` held at the given values (restricted fit).

    Returns
    -------
    FitResult
        The fit. A fit that hit the iteration cap is returned with
        ``converged=False``; a singular information leaves
        ``covariance=None``.
    """
    options = options or FitOptions()
    fixed = dict(fixed or {})
    theta0 = (
        init_params(model).to_array()
        if start is None
        else _as_array(model, start).copy()
    )
    for index, value in fixed.items():
        theta0[index] = value
    free = np.array(
        [j for j in range(model.n_params) if j not in fixed],
        dtype=int,
    )

    def expand(x: np.ndarray) -> np.ndarray:
        theta = theta0.copy()
        theta[free] = x
        return theta

    def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
        theta = expand(x)
        try:
            value = loglik(model, theta)
            grad = score(model, theta)
        except NonFiniteLikelihood:
            # Rejected by the line search
            return np.inf, np.zeros_like(x)
        return -value, -grad[free]

    trace: list[float] = []

    def record(x: np.ndarray) -> None:
        try:
            trace.append(loglik(model, expand(x)))
        except NonFiniteLikelihood:
            trace.append(-np.inf)

    # Raises NonFiniteLikelihood when the start itself is infeasible
    trace.append(loglik(model, theta0))
    x = theta0[free]
    iterations = 0
    stalled = False
    restarts = MAX_RESTARTS + 1 if free.size else 0
    for restart in range(restarts):
        before = objective(x)[0]
        # Each call starts BFGS from the identity inverse Hessian
        result = minimize(
            objective,
            x,
            jac=True,
            method='BFGS',
            callback=record,
            options={
                'gtol': options.gtol,
                'maxiter': options.max_iter - iterations,
            },
        )
        iterations += int(result.nit)
        if result.fun <= before:
            x = result.x
        gain = before - min(float(result.fun), before)
        # A fresh steepest-descent start that cannot improve the objective
        stalled = restart > 0 and (
            result.nit == 0 or gain <= options.ftol * (1.0 + abs(before))
        )
        if result.success or stalled or iterations >= options.max_iter:
            break
        logger.debug(
            'BFGS %s q=%g: %s, restarting from identity',
            model.family.label(),
            model.q,
            result.message,
        )
    theta_hat = expand(x)
    hit_cap = bool(free.size) and iterations >= options.max_iter

    value = loglik(model, theta_hat)
    grad = score(model, theta_hat)[free]
    gradient_norm = float(np.max(np.abs(grad))) if grad.size else 0.0
    if not stalled and len(trace) > 1:
        stalled = abs(trace[-1] - trace[-2]) <= (
            options.ftol * (1.0 + abs(trace[-1]))
        ) and gradient_norm <= 1e-4 * (1.0 + abs(value))
    converged = not hit_cap and (
        gradient_norm <= options.gtol
        or gradient_norm <= 1e-6 * (1.0 + abs(value))
        or stalled
    )
    if not converged:
        logger.warning(
            'Fit %s q=%g stopped after %d iterations, gradient norm %.3g',
            model.family.label(),
            model.q,
            iterations,
            gradient_norm,
        )

    covariance = _covariance(model, theta_hat, free, options)
    return FitResult(
        theta_hat=ParamVector.from_array(theta_hat, model.n_beta),
        family=model.family,
        q=model.q,
        n=model.n,
        loglik=value,
        covariance=covariance,
        gradient_norm=gradient_norm,
        iterations=iterations,
        converged=converged,
        names=model.parameter_names(),
        trace=trace,
        fixed=tuple(sorted(fixed)),
    )


def _covariance(
    model: RegressionModel,
    theta: np.ndarray,
    free: np.ndarray,
    options: FitOptions,
) -> np.ndarray | None:
    covariance = np.zeros((model.n_params, model.n_params))
    if not free.size:
        return covariance
    try:
        if options.covariance == 'expected':
            info = expected_information(model, theta)
        else:
            info = observed_information(model, theta)
        block = invert_information(info[np.ix_(free, free)])
    except (SingularInformation, NonFiniteLikelihood) as exc:
        logger.warning('Covariance unavailable: %s', exc)
        return None
    covariance[np.ix_(free, free)] = block
    return covariance


def profile_extra_parameter(
    model: RegressionModel,
    grid: Sequence[Sequence[float]] | None = None,
    options: FitOptions | None = None,
) -> FitResult:
    """Fit at each candidate extra parameter and keep the best.

    Ties in the maximized log-likelihood go to the earliest grid point.

    Raises
    ------
    AllGridPointsFailed
        If no grid point produced a fit.
    """
    candidates = (
        model.candidate_grid if grid is None else tuple(map(tuple, grid))
    )
    if not candidates:
        raise AllGridPointsFailed('empty extra-parameter grid')

    best: FitResult | None = None
    path: list[tuple[tuple[float, ...], float]] = []
    with Timer(
        'profile',
        model.family.name,
        f'q={model.q:g}',
        f'{len(candidates)} points',
        level=logging.DEBUG,
    ):
        for extra in candidates:
            try:
                result = fit(model.with_extra(extra), options)
            except QlsRegError as exc:
                logger.debug('Grid point %s failed: %s', extra, exc)
                path.append((tuple(extra), float('nan')))
                continue
            path.append((tuple(extra), result.loglik))
            # Converged fits win over non-converged ones
            rank = (result.converged, result.loglik)
            if best is None or rank > (best.converged, best.loglik):
                best = result

    if best is None:
        raise AllGridPointsFailed(
            f'all {len(candidates)} grid points of {model.family.name} failed',
        )
    best.profile = path
    return best


def fitted_quantiles(
    model: RegressionModel,
    result: FitResult,
) -> tuple[np.ndarray, np.ndarray]:
    """Return fitted quantiles ``Q_i`` and dispersions ``phi_i``."""
    theta = result.theta
    quantiles = np.exp(model.X @ theta[: model.n_beta])
    phi = np.exp(model.W @ theta[model.n_beta :])
    return quantiles, phi


def quantile_shift(
    result: FitResult,
    q: float,
) -> np.ndarray:
    """Move a homoscedastic fit's intercept to level ``q``.

    Returns the coefficients of the same fitted law parameterized at the
    ``q``-quantile: only ``beta0`` changes, by
    ``sqrt(phi) (z_q - z_{q_fit})``.
    """
    kernel = make_kernel(result.family)
    theta = result.theta.copy()
    n_beta = result.theta_hat.beta.size
    if result.theta_hat.tau.size != 1:
        raise ValueError('intercept shift needs a constant dispersion')
    root = float(np.exp(0.5 * theta[n_beta]))
    shift = float(kernel.quantile(q)) - float(kernel.quantile(result.q))
    theta[0] += root * shift
    return theta
