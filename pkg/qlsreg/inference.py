"""Asymptotic tests, confidence intervals and information criteria."""

from __future__ import annotations

import dataclasses
import logging
from typing import Any
from typing import Callable
from typing import Literal
from typing import NamedTuple
from typing import Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import chi2

from qlsreg.exceptions import DegenerateAICc
from qlsreg.exceptions import SingularInformation
from qlsreg.regress import FitOptions
from qlsreg.regress import FitResult
from qlsreg.regress import RegressionModel
from qlsreg.regress import expected_information
from qlsreg.regress import fit
from qlsreg.regress import invert_information
from qlsreg.regress import observed_information
from qlsreg.regress import score

logger = logging.getLogger(__name__)

TestKind = Literal['Wald', 'Score', 'ScoreObserved', 'LR', 'Gradient']

# Negative statistics down to this value are rounding noise.
NEGATIVE_SLACK = -1e-8


@dataclasses.dataclass(frozen=True)
class Hypothesis:
    """A null fixing ``theta[indices]`` at ``values`` (zeros by default)."""

    indices: tuple[int, ...]
    values: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        """Validate the indices and fill in default values."""
        indices = tuple(int(j) for j in self.indices)
        if not indices:
            raise ValueError('a hypothesis fixes at least one parameter')
        if len(set(indices)) != len(indices):
            raise ValueError(f'indices must be distinct, got {indices}')
        values = (
            (0.0,) * len(indices)
            if self.values is None
            else tuple(float(x) for x in self.values)
        )
        if len(values) != len(indices):
            raise ValueError('one null value per index is required')
        object.__setattr__(self, 'indices', indices)
        object.__setattr__(self, 'values', values)

    @property
    def r(self) -> int:
        """Number of restrictions."""
        return len(self.indices)

    def as_dict(self) -> dict[int, float]:
        """Map from position to null value."""
        return dict(zip(self.indices, self.values or ()))

    def check(self, n_params: int) -> None:
        """Raise ``ValueError`` if an index is out of range."""
        if max(self.indices) >= n_params or min(self.indices) < 0:
            raise ValueError(
                f'indices {self.indices} out of range for {n_params} '
                'parameters',
            )


@dataclasses.dataclass(frozen=True)
class TestResult:
    """A test statistic with its chi-square reference."""

    kind: TestKind
    statistic: float
    df: int
    p_value: float
    clamped: bool = False

    def rejects(self, alpha: float) -> bool:
        """Whether the statistic reaches the ``1 - alpha`` critical value."""
        return bool(self.statistic >= chi2.isf(alpha, self.df))

    def to_record(self) -> dict[str, Any]:
        """Serialize as a flat record."""
        return dataclasses.asdict(self)


def _result(kind: TestKind, statistic: float, df: int) -> TestResult:
    clamped = statistic < 0
    if statistic < NEGATIVE_SLACK:
        logger.warning('%s statistic %.3g clamped at 0', kind, statistic)
    statistic = max(float(statistic), 0.0)
    return TestResult(
        kind=kind,
        statistic=statistic,
        df=df,
        p_value=float(chi2.sf(statistic, df)),
        clamped=clamped,
    )


def restricted_fit(
    model: RegressionModel,
    h: Hypothesis,
    full: FitResult,
    options: FitOptions | None = None,
) -> FitResult:
    """Fit under the null, starting from the unrestricted estimate.

    The restricted model keeps the extra parameters of ``full``.
    """
    h.check(model.n_params)
    restricted_model = model.with_extra(full.family.extra)
    start = full.theta.copy()
    return fit(restricted_model, options, start=start, fixed=h.as_dict())


def _fits(
    model: RegressionModel,
    h: Hypothesis,
    full: FitResult | None,
    restricted: FitResult | None,
    options: FitOptions | None,
) -> tuple[FitResult, FitResult]:
    full = full if full is not None else fit(model, options)
    full.require_converged()
    if restricted is None:
        restricted = restricted_fit(model, h, full, options)
    restricted.require_converged()
    return full, restricted


def lr_test(
    model: RegressionModel,
    h: Hypothesis,
    full: FitResult | None = None,
    restricted: FitResult | None = None,
    options: FitOptions | None = None,
) -> TestResult:
    """Likelihood ratio statistic ``-2 [l(restricted) - l(full)]``.

    Raises
    ------
    NonConvergence
        If either fit did not converge.
    """
    full, restricted = _fits(model, h, full, restricted, options)
    return _result('LR', -2.0 * (restricted.loglik - full.loglik), h.r)


def wald_test(
    model: RegressionModel,
    h: Hypothesis,
    full: FitResult | None = None,
    options: FitOptions | None = None,
) -> TestResult:
    """Wald statistic with the partitioned covariance.

    ``(theta_r - theta0_r)' [Cov_rr]^{-1} (theta_r - theta0_r)``.

    Raises
    ------
    SingularInformation
        If the covariance is unavailable or its block is singular.
    """
    h.check(model.n_params)
    full = full if full is not None else fit(model, options)
    full.require_converged()
    if full.covariance is None:
        raise SingularInformation('Wald test needs the fit covariance')
    index = np.array(h.indices)
    diff = full.theta[index] - np.array(h.values)
    block = full.covariance[np.ix_(index, index)]
    try:
        statistic = float(diff @ np.linalg.solve(block, diff))
    except np.linalg.LinAlgError as exc:
        raise SingularInformation(str(exc)) from exc
    return _result('Wald', statistic, h.r)


def score_test(
    model: RegressionModel,
    h: Hypothesis,
    information: Literal['expected', 'observed'] = 'expected',
    full: FitResult | None = None,
    restricted: FitResult | None = None,
    options: FitOptions | None = None,
) -> TestResult:
    """Score statistic ``U' M^{-1} U`` at the restricted estimate.

    ``M`` is the expected or the observed information.

    Raises
    ------
    SingularInformation
        If ``M`` is singular or not positive definite, where the
        quadratic form would be negative.
    NonConvergentQuadrature
        If the expected information cannot be computed.
    """
    full, restricted = _fits(model, h, full, restricted, options)
    restricted_model = model.with_extra(full.family.extra)
    theta = restricted.theta
    grad = score(restricted_model, theta)
    if information == 'expected':
        info = expected_information(restricted_model, theta)
        kind: TestKind = 'Score'
    else:
        info = observed_information(restricted_model, theta)
        kind = 'ScoreObserved'
    statistic = float(grad @ invert_information(info) @ grad)
    return _result(kind, statistic, h.r)


def gradient_test(
    model: RegressionModel,
    h: Hypothesis,
    full: FitResult | None = None,
    restricted: FitResult | None = None,
    options: FitOptions | None = None,
) -> TestResult:
    """Gradient statistic ``U(restricted)' (theta_full - theta_restricted)``.

    Raises
    ------
    NonConvergence
        If either fit did not converge.
    """
    full, restricted = _fits(model, h, full, restricted, options)
    restricted_model = model.with_extra(full.family.extra)
    grad = score(restricted_model, restricted.theta)
    statistic = float(grad @ (full.theta - restricted.theta))
    return _result('Gradient', statistic, h.r)


def run_battery(
    model: RegressionModel,
    h: Hypothesis,
    full: FitResult | None = None,
    options: FitOptions | None = None,
) -> list[TestResult]:
    """Run the five statistics sharing one pair of fits.

    A statistic whose information matrix is not positive definite at
    the fit it needs is left out of the result, with a warning.

    Raises
    ------
    NonConvergence
        If either fit did not converge.
    """
    full, restricted = _fits(model, h, full, None, options)
    runs: list[tuple[TestKind, Callable[[], TestResult]]] = [
        ('Wald', lambda: wald_test(model, h, full=full)),
        (
            'Score',
            lambda: score_test(
                model, h, 'expected', full=full, restricted=restricted,
            ),
        ),
        (
            'ScoreObserved',
            lambda: score_test(
                model, h, 'observed', full=full, restricted=restricted,
            ),
        ),
        ('LR', lambda: lr_test(model, h, full=full, restricted=restricted)),
        (
            'Gradient',
            lambda: gradient_test(model, h, full=full, restricted=restricted),
        ),
    ]
    results = []
    for kind, run in runs:
        try:
            results.append(run())
        except SingularInformation as exc:
            logger.warning('%s statistic unavailable: %s', kind, exc)
    return results


def confidence_intervals(fit_result: FitResult, level: float) -> np.ndarray:
    """Asymptotic normal intervals, one ``(lower, upper)`` row per parameter.

    Raises
    ------
    SingularInformation
        If the covariance is unavailable.
    """
    if not 0 < level < 1:
        raise ValueError(f'level must lie in (0, 1), got {level}')
    se = fit_result.std_errors()
    half = float(ndtri(0.5 * (1.0 + level))) * se
    theta = fit_result.theta
    return np.column_stack([theta - half, theta + half])


class Criteria(NamedTuple):
    """Information criteria of a fit."""

    aic: float
    bic: float
    aicc: float


def information_criteria(
    fit_result: FitResult | float,
    n: int,
    p: int | None = None,
) -> Criteria:
    """AIC, BIC and AICc from the full log-likelihood.

    ``p`` defaults to the number of regression coefficients; profiled
    extra parameters are not counted.

    Raises
    ------
    DegenerateAICc
        If ``n <= p + 1``.
    """
    if isinstance(fit_result, FitResult):
        value = fit_result.loglik
        p = fit_result.n_params if p is None else p
    else:
        value = float(fit_result)
        if p is None:
            raise ValueError('p is required with a bare log-likelihood')
    if n <= p + 1:
        raise DegenerateAICc(f'AICc undefined for n={n}, p={p}')
    aic = -2.0 * value + 2.0 * p
    bic = -2.0 * value + p * float(np.log(n))
    aicc = aic + 2.0 * p * (p + 1) / (n - p - 1)
    return Criteria(aic=aic, bic=bic, aicc=aicc)


def coefficient_hypotheses(names: Sequence[str]) -> list[Hypothesis]:
    """One ``coefficient = 0`` null per non-intercept coefficient."""
    return [
        Hypothesis(indices=(j,))
        for j, name in enumerate(names)
        if name not in ('beta0', 'tau0')
    ]
