"""Log-slash density generator."""

from __future__ import annotations

import numpy as np
from scipy.special import gammainc
from scipy.special import gammaln

from qlsreg.exceptions import InvalidExtraParameter
from qlsreg.kernels.base import DensityKernel

# Below this value of u / 2 the incomplete gamma ratio uses its series.
SERIES_CUTOFF = 1e-6


class SlashKernel(DensityKernel):
    """Kernel ``g(u) = int_0^1 exp(-(u/2) t) t^{theta - 1/2} dt``.

    With ``a = theta + 1/2`` and ``x = u / 2`` the integral equals
    ``Gamma(a) P(a, x) / x^a``, ``P`` the regularized lower incomplete
    gamma. The law is a normal scale mixture ``Z = N / sqrt(T)`` with
    ``T ~ Beta(theta, 1)``, which gives the sampler.
    """

    tag = 'log-sl'
    n_extra = 1

    def _set_extra(self, theta: float) -> None:  # type: ignore[override]
        if theta <= 0:
            raise InvalidExtraParameter(
                f'log-sl requires theta > 0, got {theta}',
            )
        self.theta = theta
        self.shape = theta + 0.5

    def log_g(self, u: np.ndarray) -> np.ndarray:
        """Return ``log g(u)`` through the incomplete gamma function."""
        a = self.shape
        x = 0.5 * np.asarray(u, dtype=float)
        small = x < SERIES_CUTOFF
        safe = np.where(small, 1.0, x)
        regular = gammaln(a) + np.log(gammainc(a, safe)) - a * np.log(safe)
        series = np.log(1.0 / a - x / (a + 1.0) + 0.5 * x * x / (a + 2.0))
        return np.where(small, series, regular)

    def _weight(self, z: np.ndarray) -> np.ndarray:
        # -2 d log g / du = a P(a+1, x) / (x P(a, x)) with x = u / 2
        a = self.shape
        x = 0.5 * z * z
        small = x < SERIES_CUTOFF
        safe = np.where(small, 1.0, x)
        regular = a * gammainc(a + 1.0, safe) / (safe * gammainc(a, safe))
        series = a / (a + 1.0) - x * a / ((a + 1.0) ** 2 * (a + 2.0))
        return np.where(small, series, regular)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``N / U^{1 / (2 theta)}`` with ``N`` normal, ``U`` uniform."""
        normal = rng.standard_normal(n)
        mixing = rng.uniform(size=n) ** (1.0 / self.theta)
        return normal / np.sqrt(mixing)
