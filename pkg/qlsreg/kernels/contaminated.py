"""Log-contaminated-normal density generator."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from qlsreg.exceptions import InvalidExtraParameter
from qlsreg.kernels.base import DensityKernel


class ContaminatedNormalKernel(DensityKernel):
    """Two-component normal scale mixture.

    ``g(u) = sqrt(t2) exp(-t2 u / 2) + (1 - t1) / t1 exp(-u / 2)`` with
    ``0 < t1, t2 < 1``, so that ``Z`` is ``N(0, 1 / t2)`` with probability
    ``t1`` and ``N(0, 1)`` otherwise.
    """

    tag = 'log-cn'
    n_extra = 2

    def _set_extra(  # type: ignore[override]
        self,
        t1: float,
        t2: float,
    ) -> None:
        if not (0.0 < t1 < 1.0 and 0.0 < t2 < 1.0):
            raise InvalidExtraParameter(
                f'log-cn requires 0 < theta1, theta2 < 1, got ({t1}, {t2})',
            )
        self.t1 = t1
        self.t2 = t2
        self.ratio = (1.0 - t1) / t1

    def _mix(self, u: np.ndarray) -> np.ndarray:
        # Weight of the N(0, 1) component relative to exp(-t2 u / 2)
        return self.ratio * np.exp(-0.5 * (1.0 - self.t2) * u)

    def log_g(self, u: np.ndarray) -> np.ndarray:
        """Return ``log g(u)`` factored around the heavier component."""
        u = np.asarray(u, dtype=float)
        return -0.5 * self.t2 * u + np.log(np.sqrt(self.t2) + self._mix(u))

    def _weight(self, z: np.ndarray) -> np.ndarray:
        mix = self._mix(z * z)
        return (self.t2**1.5 + mix) / (np.sqrt(self.t2) + mix)

    def normalizing_constant(self) -> float:
        """Return ``t1 / sqrt(2 pi)``."""
        return self.t1 / np.sqrt(2.0 * np.pi)

    def cdf(self, w: np.ndarray) -> np.ndarray:
        """Mixture of the two normal CDFs."""
        w = np.asarray(w, dtype=float)
        heavy = ndtr(np.sqrt(self.t2) * w)
        return self.t1 * heavy + (1.0 - self.t1) * ndtr(w)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw from the scale mixture."""
        heavy = rng.uniform(size=n) < self.t1
        scale = np.where(heavy, 1.0 / np.sqrt(self.t2), 1.0)
        return scale * rng.standard_normal(n)
