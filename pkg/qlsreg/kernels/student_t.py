"""Log-Student-t density generator."""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln
from scipy.special import stdtr
from scipy.special import stdtrit

from qlsreg.exceptions import InvalidExtraParameter
from qlsreg.kernels.base import DensityKernel


class StudentTKernel(DensityKernel):
    """Kernel ``g(u) = (1 + u / nu)^{-(nu + 1) / 2}`` with ``nu > 0``."""

    tag = 'log-t'
    n_extra = 1

    def _set_extra(self, nu: float) -> None:  # type: ignore[override]
        if nu <= 0:
            raise InvalidExtraParameter(f'log-t requires theta > 0, got {nu}')
        self.nu = nu

    def log_g(self, u: np.ndarray) -> np.ndarray:
        """Return ``-(nu + 1) / 2 * log(1 + u / nu)``."""
        u = np.asarray(u, dtype=float)
        return -0.5 * (self.nu + 1.0) * np.log1p(u / self.nu)

    def _weight(self, z: np.ndarray) -> np.ndarray:
        return (self.nu + 1.0) / (self.nu + z * z)

    def normalizing_constant(self) -> float:
        """Return the Student-t constant."""
        nu = self.nu
        log_xi = gammaln((nu + 1) / 2) - gammaln(nu / 2)
        return float(np.exp(log_xi) / np.sqrt(nu * np.pi))

    def cdf(self, w: np.ndarray) -> np.ndarray:
        """Student-t CDF."""
        return stdtr(self.nu, np.asarray(w, dtype=float))

    def _ppf(self, q: np.ndarray) -> np.ndarray:
        return stdtrit(self.nu, q)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw Student-t values."""
        return rng.standard_t(self.nu, size=n)
