"""Residual diagnostics: generalized Cox-Snell and quantile residuals."""

from __future__ import annotations

import dataclasses
import logging
from typing import Literal
from typing import NamedTuple

import numpy as np
from scipy import stats
from scipy.special import ndtri

from qlsreg.exceptions import DegenerateSample
from qlsreg.exceptions import EnvelopeUnstable
from qlsreg.exceptions import QlsRegError
from qlsreg.kernels import make_kernel
from qlsreg.qls import CDF_CLAMP
from qlsreg.regress import FitOptions
from qlsreg.regress import FitResult
from qlsreg.regress import RegressionModel
from qlsreg.regress import fit
from qlsreg.regress import fitted_quantiles
from qlsreg.utils import spawn_generator

logger = logging.getLogger(__name__)

ResidualKind = Literal['GCS', 'RQ']

# Share of failed refits above which an envelope is rejected.
MAX_FAILED_SHARE = 0.2
# Fewest simulations accepted for an envelope.
MIN_SIMS = 19


class ResidualSummary(NamedTuple):
    """Descriptive statistics of a residual vector."""

    mean: float
    median: float
    sd: float
    skewness: float
    kurtosis: float


@dataclasses.dataclass(frozen=True, eq=False)
class ResidualReport:
    """Residuals of one kind with their summary."""

    kind: ResidualKind
    values: np.ndarray
    summary: ResidualSummary


@dataclasses.dataclass(frozen=True, eq=False)
class EnvelopeData:
    """Ordered residuals, reference quantiles and a simulated band."""

    kind: ResidualKind
    theoretical: np.ndarray
    residuals: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    band: float
    sims: int
    failures: int

    def inside_share(self) -> float:
        """Share of ordered residuals inside the band."""
        inside = (self.residuals >= self.lower) & (
            self.residuals <= self.upper
        )
        return float(np.mean(inside))


def fitted_cdf(model: RegressionModel, result: FitResult) -> np.ndarray:
    """Fitted ``F(y_i)`` clamped to ``[1e-15, 1 - 1e-15]``."""
    kernel = make_kernel(result.family)
    quantiles, phi = fitted_quantiles(model, result)
    z_q = float(kernel.quantile(model.q))
    z = (np.log(model.y) - np.log(quantiles)) / np.sqrt(phi) + z_q
    return np.clip(kernel.cdf(z), CDF_CLAMP, 1.0 - CDF_CLAMP)


def residual_summary(values: np.ndarray) -> ResidualSummary:
    """Mean, median, sd (``n - 1`` divisor), skewness and excess kurtosis.

    Raises
    ------
    DegenerateSample
        If fewer than two values are given or they do not vary.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise DegenerateSample('residual summary needs at least two values')
    sd = float(np.std(values, ddof=1))
    if sd == 0:
        raise DegenerateSample('residuals have zero variance')
    return ResidualSummary(
        mean=float(np.mean(values)),
        median=float(np.median(values)),
        sd=sd,
        skewness=float(stats.skew(values)),
        kurtosis=float(stats.kurtosis(values, fisher=True)),
    )


def _report(kind: ResidualKind, values: np.ndarray) -> ResidualReport:
    return ResidualReport(kind, values, residual_summary(values))


def gcs_residuals(model: RegressionModel, result: FitResult) -> ResidualReport:
    """Generalized Cox-Snell residuals ``-log(1 - F_i)``."""
    return _report('GCS', _residuals('GCS', model, result))


def rq_residuals(model: RegressionModel, result: FitResult) -> ResidualReport:
    """Quantile residuals ``Phi^{-1}(F_i)``."""
    return _report('RQ', _residuals('RQ', model, result))


def _residuals(
    kind: ResidualKind,
    model: RegressionModel,
    result: FitResult,
) -> np.ndarray:
    cdf = fitted_cdf(model, result)
    return -np.log1p(-cdf) if kind == 'GCS' else ndtri(cdf)


def reference_quantiles(kind: ResidualKind, n: int) -> np.ndarray:
    """EXP(1) or N(0,1) quantiles at plotting positions ``(i - 1/2) / n``."""
    positions = (np.arange(1, n + 1) - 0.5) / n
    if kind == 'GCS':
        return -np.log1p(-positions)
    return ndtri(positions)


def simulate_response(
    model: RegressionModel,
    result: FitResult,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw a response vector from the fitted model."""
    kernel = make_kernel(result.family)
    quantiles, phi = fitted_quantiles(model, result)
    z_q = float(kernel.quantile(model.q))
    z = kernel.sample(model.n, rng)
    return quantiles * np.exp(np.sqrt(phi) * (z - z_q))


def qq_envelope(
    model: RegressionModel,
    result: FitResult,
    kind: ResidualKind,
    sims: int = 100,
    band: float = 0.95,
    seed: int = 0,
    options: FitOptions | None = None,
) -> EnvelopeData:
    """Simulated pointwise envelope of ordered residuals.

    Each simulation draws a response from the fitted model, refits at the
    fitted extra parameters and sorts the residuals.

    Raises
    ------
    ValueError
        If ``sims < 19`` or ``band`` lies outside [0, 1).
    EnvelopeUnstable
        If more than 20% of the refits fail or do not converge.
    """
    if sims < MIN_SIMS:
        raise ValueError(f'an envelope needs at least {MIN_SIMS} sims')
    if not 0 <= band < 1:
        raise ValueError(f'band must lie in [0, 1), got {band}')

    sim_model = model.with_extra(result.family.extra)
    curves = []
    failures = 0
    for sim in range(sims):
        rng = spawn_generator(seed, sim)
        simulated = sim_model.with_response(
            simulate_response(model, result, rng),
        )
        try:
            refit = fit(simulated, options, start=result.theta)
        except QlsRegError as exc:
            logger.debug('Envelope simulation %d failed: %s', sim, exc)
            failures += 1
            continue
        if not refit.converged:
            failures += 1
            continue
        curves.append(np.sort(_residuals(kind, simulated, refit)))

    if failures > MAX_FAILED_SHARE * sims:
        raise EnvelopeUnstable(
            f'{failures} of {sims} envelope refits failed',
        )
    if failures:
        logger.warning('%d of %d envelope refits dropped', failures, sims)

    stacked = np.vstack(curves)
    lower = np.quantile(stacked, 0.5 * (1.0 - band), axis=0)
    upper = np.quantile(stacked, 0.5 * (1.0 + band), axis=0)
    return EnvelopeData(
        kind=kind,
        theoretical=reference_quantiles(kind, model.n),
        residuals=np.sort(_residuals(kind, model, result)),
        lower=lower,
        upper=upper,
        band=band,
        sims=sims,
        failures=failures,
    )
