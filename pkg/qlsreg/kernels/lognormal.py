"""Log-normal density generator, g(u) = exp(-u / 2)."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr
from scipy.special import ndtri

from qlsreg.kernels.base import DensityKernel


class LogNormalKernel(DensityKernel):
    """Standard normal kernel."""

    tag = 'log-no'
    n_extra = 0

    def log_g(self, u: np.ndarray) -> np.ndarray:
        """Return ``-u / 2``."""
        return -0.5 * np.asarray(u, dtype=float)

    def _weight(self, z: np.ndarray) -> np.ndarray:
        return np.ones_like(z)

    def normalizing_constant(self) -> float:
        """Return ``1 / sqrt(2 pi)``."""
        return 1.0 / np.sqrt(2.0 * np.pi)

    def cdf(self, w: np.ndarray) -> np.ndarray:
        """Standard normal CDF."""
        return ndtr(np.asarray(w, dtype=float))

    def _ppf(self, q: np.ndarray) -> np.ndarray:
        return ndtri(q)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw standard normal values."""
        return rng.standard_normal(n)
