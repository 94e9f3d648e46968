"""Log-hyperbolic density generator."""

from __future__ import annotations

import numpy as np

from qlsreg.exceptions import InvalidExtraParameter
from qlsreg.kernels.base import DensityKernel


class HyperbolicKernel(DensityKernel):
    """Kernel ``g(u) = exp(-theta sqrt(1 + u))`` with ``theta > 0``.

    The normalizing constant, CDF and quantile come from quadrature and
    the tabulated inverse CDF.
    """

    tag = 'log-hp'
    n_extra = 1

    def _set_extra(self, theta: float) -> None:  # type: ignore[override]
        if theta <= 0:
            raise InvalidExtraParameter(
                f'log-hp requires theta > 0, got {theta}',
            )
        self.theta = theta

    def log_g(self, u: np.ndarray) -> np.ndarray:
        """Return ``-theta sqrt(1 + u)``."""
        return -self.theta * np.sqrt(1.0 + np.asarray(u, dtype=float))

    def _weight(self, z: np.ndarray) -> np.ndarray:
        return self.theta / np.sqrt(1.0 + z * z)
