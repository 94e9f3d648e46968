"""Extended Birnbaum-Saunders density generators.

Both kernels are sinh transformations of a symmetric core: with
``X = (2 / theta) sinh(Z)`` the variate ``X`` is standard normal (EBS) or
Student-t (EBS-t), which gives closed-form CDFs, quantiles and samplers.
The normalizing constants are computed by quadrature.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr
from scipy.special import ndtri
from scipy.special import stdtr
from scipy.special import stdtrit

from qlsreg.exceptions import InvalidExtraParameter
from qlsreg.kernels.base import DensityKernel

# Below this |z| the weight is replaced by its limit at zero.
SMALL_Z = 1e-6
# Above this |z| the ratio sinh cosh / sinh^2 is taken as 1.
LARGE_Z = 30.0


def log_cosh(s: np.ndarray) -> np.ndarray:
    """Overflow-free ``log cosh(s)`` for ``s >= 0``."""
    return s + np.log1p(np.exp(-2.0 * s)) - np.log(2.0)


def log_two_sinh(s: np.ndarray) -> np.ndarray:
    """Overflow-free ``log(2 sinh(s))`` for ``s >= 0``."""
    with np.errstate(divide='ignore'):
        return s + np.log1p(-np.exp(-2.0 * s))


class ExtendedBirnbaumSaundersKernel(DensityKernel):
    """Kernel ``g(u) = cosh(sqrt(u)) exp(-(2 / theta^2) sinh^2(sqrt(u)))``."""

    tag = 'ebs'
    n_extra = 1

    def _set_extra(self, theta: float) -> None:  # type: ignore[override]
        if theta <= 0:
            raise InvalidExtraParameter(f'ebs requires theta > 0, got {theta}')
        self.theta = theta

    def log_g(self, u: np.ndarray) -> np.ndarray:
        """Return ``log g(u)``."""
        s = np.sqrt(np.asarray(u, dtype=float))
        with np.errstate(over='ignore'):
            penalty = (2.0 / self.theta**2) * np.sinh(s) ** 2
        return log_cosh(s) - penalty

    def _weight(self, z: np.ndarray) -> np.ndarray:
        s = np.abs(z)
        small = s < SMALL_Z
        safe = np.where(small, 1.0, s)
        with np.errstate(over='ignore', invalid='ignore'):
            slope = (4.0 / self.theta**2) * np.sinh(safe) * np.cosh(safe)
            regular = (slope - np.tanh(safe)) / safe
        return np.where(small, 4.0 / self.theta**2 - 1.0, regular)

    def cdf(self, w: np.ndarray) -> np.ndarray:
        """Return ``Phi((2 / theta) sinh(w))``."""
        with np.errstate(over='ignore'):
            w = np.asarray(w, dtype=float)
            return ndtr((2.0 / self.theta) * np.sinh(w))

    def _ppf(self, q: np.ndarray) -> np.ndarray:
        return np.arcsinh(0.5 * self.theta * ndtri(q))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``asinh(theta N / 2)``."""
        return np.arcsinh(0.5 * self.theta * rng.standard_normal(n))


class ExtendedBirnbaumSaundersTKernel(DensityKernel):
    """Kernel ``g(u) = cosh(s) (nu t^2 + 4 sinh^2(s))^{-(nu + 1) / 2}``.

    Here ``s = sqrt(u)``, ``t`` is the shape and ``nu`` the degrees of
    freedom of the Student-t core.
    """

    tag = 'ebs-t'
    n_extra = 2

    def _set_extra(  # type: ignore[override]
        self,
        shape: float,
        nu: float,
    ) -> None:
        if shape <= 0 or nu <= 0:
            raise InvalidExtraParameter(
                f'ebs-t requires theta1, theta2 > 0, got ({shape}, {nu})',
            )
        self.shape = shape
        self.nu = nu
        self.offset = nu * shape * shape

    def log_g(self, u: np.ndarray) -> np.ndarray:
        """Return ``log g(u)`` on the log scale throughout."""
        s = np.sqrt(np.asarray(u, dtype=float))
        log_base = np.logaddexp(np.log(self.offset), 2.0 * log_two_sinh(s))
        return log_cosh(s) - 0.5 * (self.nu + 1.0) * log_base

    def _weight(self, z: np.ndarray) -> np.ndarray:
        s = np.abs(z)
        small = s < SMALL_Z
        large = s > LARGE_Z
        safe = np.where(small | large, 1.0, s)
        sinh = np.sinh(safe)
        ratio = 4.0 * sinh * np.cosh(safe) / (self.offset + 4.0 * sinh * sinh)
        ratio = np.where(large, 1.0, ratio)
        s_eff = np.where(large, s, safe)
        tanh = np.where(large, 1.0, np.tanh(safe))
        regular = ((self.nu + 1.0) * ratio - tanh) / s_eff
        limit = 4.0 * (self.nu + 1.0) / self.offset - 1.0
        return np.where(small, limit, regular)

    def cdf(self, w: np.ndarray) -> np.ndarray:
        """Return ``T_nu((2 / theta1) sinh(w))``."""
        w = np.asarray(w, dtype=float)
        with np.errstate(over='ignore'):
            return stdtr(self.nu, (2.0 / self.shape) * np.sinh(w))

    def _ppf(self, q: np.ndarray) -> np.ndarray:
        return np.arcsinh(0.5 * self.shape * stdtrit(self.nu, q))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``asinh(theta1 T / 2)`` with a Student-t core."""
        core = rng.standard_t(self.nu, size=n)
        return np.arcsinh(0.5 * self.shape * core)
