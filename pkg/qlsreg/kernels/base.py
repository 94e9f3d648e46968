"""Density generator interface shared by all kernel families."""

from __future__ import annotations

import logging
import warnings
from abc import ABC
from abc import abstractmethod
from typing import Callable
from typing import ClassVar

import numpy as np
from scipy.integrate import IntegrationWarning
from scipy.integrate import quad
from scipy.optimize import brentq

from qlsreg.exceptions import InvalidExtraParameter
from qlsreg.exceptions import NonConvergentQuadrature
from qlsreg.exceptions import NonIntegrableKernel
from qlsreg.exceptions import QuantileOutOfRange
from qlsreg.kernels.tabulate import TabulatedCdf
from qlsreg.utils import BaseConfig

logger = logging.getLogger(__name__)

# Relative tolerance of the moment integrals behind d_g and f_g.
MOMENT_RTOL = 1e-8
# Relative step of the finite-difference weight.
FD_STEP = 1e-6
# Smallest u passed to kernels whose weight is singular at u = 0.
U_FLOOR = np.finfo(float).tiny


class KernelFamily(BaseConfig):
    """A density-generator family and its extra parameters."""

    # The family tag, e.g. 'log-t'
    name: str  # type: ignore[assignment]
    # The extra parameters (length 0, 1 or 2 depending on the family)
    extra: tuple[float, ...] = ()

    def label(self) -> str:
        """Return a short label such as ``log-cn(0.1,0.2)``."""
        if not self.extra:
            return self.name
        return f'{self.name}({",".join(f"{x:g}" for x in self.extra)})'


def integrate(
    fn: Callable[[float], float],
    a: float,
    b: float,
    rtol: float,
) -> float:
    """Adaptive Gauss-Kronrod quadrature that raises on trouble.

    Half-infinite ranges starting below 1 are split at 1, so the bulk of
    a narrow kernel is integrated on a finite interval.

    Raises
    ------
    NonConvergentQuadrature
        If QUADPACK reports that the tolerance was not reached.
    """
    if np.isinf(b) and a < 1.0:
        return integrate(fn, a, 1.0, rtol) + integrate(fn, 1.0, b, rtol)
    with warnings.catch_warnings():
        warnings.simplefilter('error', IntegrationWarning)
        try:
            value, _ = quad(fn, a, b, epsabs=0.0, epsrel=rtol, limit=500)
        except IntegrationWarning as exc:
            raise NonConvergentQuadrature(str(exc)) from exc
    return float(value)


class DensityKernel(ABC):
    """A density generator ``g`` and the standard symmetric law S(0,1,g).

    Subclasses provide ``log_g`` and the analytic weight ``_weight``;
    they may override the normalizing constant, CDF, quantile function
    and sampler with closed forms. Instances are immutable after
    construction apart from internal caches.
    """

    # The CLI tag of the family
    tag: ClassVar[str]
    # Number of extra parameters
    n_extra: ClassVar[int] = 0

    def __init__(
        self,
        family: KernelFamily,
        finite_difference: bool = False,
    ) -> None:
        """Initialize the kernel.

        Parameters
        ----------
        family : KernelFamily
            The family tag and extra parameters.
        finite_difference : bool
            Use central finite differences of ``log_g`` for the weight
            ``v`` instead of the analytic derivative.

        Raises
        ------
        InvalidExtraParameter
            If the extra parameters violate the family constraints.
        NonIntegrableKernel
            If the normalizing constant cannot be computed.
        """
        self.family = family
        self.extra = tuple(float(x) for x in family.extra)
        self.finite_difference = finite_difference
        if len(self.extra) != self.n_extra:
            raise InvalidExtraParameter(
                f'{self.tag} takes {self.n_extra} extra parameter(s), '
                f'got {len(self.extra)}',
            )
        if not all(np.isfinite(self.extra)):
            raise InvalidExtraParameter(f'{self.tag}: non-finite {self.extra}')
        self._set_extra(*self.extra)

        self.xi_nc = self.normalizing_constant()
        self._moments: tuple[float, float] | None = None
        self._table: TabulatedCdf | None = None

    def __repr__(self) -> str:
        """Return the family label."""
        return f'{type(self).__name__}({self.family.label()})'

    def _set_extra(self, *extra: float) -> None:
        """Validate and store the extra parameters."""

    @abstractmethod
    def log_g(self, u: np.ndarray) -> np.ndarray:
        """Return ``log g(u)`` for ``u >= 0``."""
        ...

    @abstractmethod
    def _weight(self, z: np.ndarray) -> np.ndarray:
        """Return the analytic ``v(z) = -2 g'(z^2) / g(z^2)``."""
        ...

    def g(self, u: np.ndarray) -> np.ndarray:
        """Return the density generator ``g(u)``."""
        return np.exp(self.log_g(np.asarray(u, dtype=float)))

    def log_pdf(self, z: np.ndarray) -> np.ndarray:
        """Return the log density of S(0,1,g) at ``z``."""
        z = np.asarray(z, dtype=float)
        return np.log(self.xi_nc) + self.log_g(z * z)

    def pdf(self, z: np.ndarray) -> np.ndarray:
        """Return the density ``xi_nc g(z^2)`` of S(0,1,g)."""
        return np.exp(self.log_pdf(z))

    def v(self, z: np.ndarray) -> np.ndarray:
        """Return the score weight ``v(z)``."""
        z = np.asarray(z, dtype=float)
        if self.finite_difference:
            return self.v_numeric(z)
        return self._weight(z)

    def v_numeric(self, z: np.ndarray) -> np.ndarray:
        """Central finite-difference weight ``-2 d log g(u) / du``."""
        u = np.asarray(z, dtype=float) ** 2
        h = FD_STEP * np.maximum(u, 1.0)
        lower = np.maximum(u - h, 0.0)
        upper = u + h
        slope = (self.log_g(upper) - self.log_g(lower)) / (upper - lower)
        return -2.0 * slope

    def normalizing_constant(self) -> float:
        """Compute ``xi_nc`` by adaptive quadrature of ``g(z^2)``.

        Raises
        ------
        NonIntegrableKernel
            If the quadrature fails or the integral is not finite.
        """
        try:
            half = integrate(
                lambda z: float(np.exp(self.log_g(np.asarray(z * z)))),
                0.0,
                np.inf,
                rtol=1e-11,
            )
        except NonConvergentQuadrature as exc:
            raise NonIntegrableKernel(
                f'{self.family.label()}: {exc}',
            ) from exc
        if not np.isfinite(half) or half <= 0:
            raise NonIntegrableKernel(
                f'{self.family.label()}: integral of g(z^2) is {half}',
            )
        return 1.0 / (2.0 * half)

    def tabulated(self) -> TabulatedCdf:
        """Return (building on first use) the tabulated CDF."""
        if self._table is None:
            logger.debug('Tabulating CDF of %s', self.family.label())
            self._table = TabulatedCdf(self.log_pdf)
        return self._table

    def cdf(self, w: np.ndarray) -> np.ndarray:
        """Return ``G(w)``, the CDF of S(0,1,g)."""
        return self.tabulated().cdf(w)

    def quantile(self, q: np.ndarray) -> np.ndarray:
        """Return ``G^{-1}(q)``.

        Raises
        ------
        QuantileOutOfRange
            If any ``q`` lies outside (0, 1).
        """
        q = np.asarray(q, dtype=float)
        if np.any(~((q > 0) & (q < 1))):
            raise QuantileOutOfRange(f'quantile level outside (0, 1): {q}')
        # The median of S(0,1,g) is exactly zero
        return np.where(q == 0.5, 0.0, self._ppf(q))

    def _ppf(self, q: np.ndarray) -> np.ndarray:
        """Bracketed root finding on ``G``, one level at a time."""
        out = np.empty(q.shape)
        flat = out.reshape(-1)
        for index, level in enumerate(q.reshape(-1)):
            flat[index] = self._root(float(level))
        return flat.reshape(q.shape)

    def _root(self, level: float) -> float:
        if level == 0.5:
            return 0.0
        # Solve in the lower half and reflect, so z_{1-q} = -z_q exactly
        tail = min(level, 1.0 - level)
        lo = -1.0
        while float(self.cdf(lo)) > tail:
            lo *= 2.0
        hi = lo / 2.0 if lo < -1.0 else 0.0
        root = brentq(
            lambda w: float(self.cdf(w)) - tail,
            lo,
            hi,
            xtol=1e-14,
            rtol=4 * np.finfo(float).eps,
            maxiter=500,
        )
        return root if level < 0.5 else -root

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` values from S(0,1,g) by inverse-CDF sampling."""
        return self.tabulated().ppf(rng.uniform(size=n))

    def moments(self) -> tuple[float, float]:
        """Return ``(E[v^2 Z^2], E[(v Z^2 - 1)^2])`` under S(0,1,g).

        Raises
        ------
        NonConvergentQuadrature
            If either integral does not reach the tolerance.
        """
        if self._moments is None:

            def weight(z: float) -> float:
                return float(self.v(np.asarray(z)))

            def dg_integrand(z: float) -> float:
                density = float(self.pdf(z))
                return 0.0 if density == 0 else (weight(z) * z) ** 2 * density

            def f0_integrand(z: float) -> float:
                density = float(self.pdf(z))
                if density == 0:
                    return 0.0
                return (weight(z) * z * z - 1) ** 2 * density

            d_g = 2.0 * integrate(dg_integrand, 0.0, np.inf, MOMENT_RTOL)
            f_0 = 2.0 * integrate(f0_integrand, 0.0, np.inf, MOMENT_RTOL)
            self._moments = (d_g, f_0)
        return self._moments

    def fisher_weights(self, q: float) -> tuple[float, float]:
        """Return ``(d_g, f_g)`` at quantile level ``q``.

        The odd cross term of ``f_g`` integrates to zero, so
        ``f_g = E[(v Z^2 - 1)^2] + z_q^2 d_g``.
        """
        z_q = float(self.quantile(q))
        d_g, f_0 = self.moments()
        return d_g, f_0 + z_q * z_q * d_g
