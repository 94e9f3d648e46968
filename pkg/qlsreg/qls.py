"""The quantile-parameterized log-symmetric law QLS(Q, phi, g).

``Y ~ QLS(Q, phi, g)`` when ``log Y = log(lambda) + sqrt(phi) Z`` with
``Z ~ S(0, 1, g)`` and ``lambda = Q / exp(sqrt(phi) z_q)``, so that ``Q``
is the ``100 q``-th quantile of ``Y``.
"""

from __future__ import annotations

import dataclasses
from typing import Any

import numpy as np

from qlsreg.exceptions import DomainError
from qlsreg.exceptions import QuantileOutOfRange
from qlsreg.kernels import DensityKernel
from qlsreg.kernels import KernelFamily
from qlsreg.kernels import make_kernel

# Output range of qls_cdf, kept away from 0 and 1 for log and probit use.
CDF_CLAMP = 1e-15


@dataclasses.dataclass(frozen=True)
class QlsParams:
    """Parameters of a QLS law.

    Raises
    ------
    DomainError
        If ``Q`` or ``phi`` is not positive and finite.
    QuantileOutOfRange
        If ``q`` lies outside (0, 1).
    """

    Q: float
    phi: float
    q: float
    kernel: DensityKernel

    def __post_init__(self) -> None:
        """Validate the parameters."""
        if not (np.isfinite(self.Q) and self.Q > 0):
            raise DomainError(f'Q must be positive, got {self.Q}')
        if not (np.isfinite(self.phi) and self.phi > 0):
            raise DomainError(f'phi must be positive, got {self.phi}')
        if not 0 < self.q < 1:
            raise QuantileOutOfRange(f'q must lie in (0, 1), got {self.q}')

    @property
    def z_q(self) -> float:
        """The ``q``-quantile of the standard symmetric law."""
        return float(self.kernel.quantile(self.q))

    @property
    def scale(self) -> float:
        """The scale ``lambda = Q / exp(sqrt(phi) z_q)``."""
        return self.Q * float(np.exp(-np.sqrt(self.phi) * self.z_q))

    def standardize(self, y: np.ndarray) -> np.ndarray:
        """Return ``z = [log y - log Q + sqrt(phi) z_q] / sqrt(phi)``."""
        root = np.sqrt(self.phi)
        return (np.log(y) - np.log(self.Q)) / root + self.z_q

    def to_record(self) -> dict[str, Any]:
        """Serialize as a flat record."""
        return {
            'family': self.kernel.family.name,
            'extra': list(self.kernel.extra),
            'Q': self.Q,
            'phi': self.phi,
            'q': self.q,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> QlsParams:
        """Rebuild parameters from :meth:`to_record` output."""
        family = KernelFamily(
            name=record['family'],
            extra=tuple(record['extra']),
        )
        return cls(
            Q=float(record['Q']),
            phi=float(record['phi']),
            q=float(record['q']),
            kernel=make_kernel(family),
        )


def _positive(y: float | np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise DomainError(f'y must be positive, got {y}')
    return y


def qls_pdf(p: QlsParams, y: float | np.ndarray) -> np.ndarray:
    """Density of Y at ``y``.

    Raises
    ------
    DomainError
        If any ``y`` is not positive.
    """
    y = _positive(y)
    z = p.standardize(y)
    return p.kernel.pdf(z) / (np.sqrt(p.phi) * y)


def qls_cdf(p: QlsParams, y: float | np.ndarray) -> np.ndarray:
    """CDF of Y at ``y``, clamped to ``[1e-15, 1 - 1e-15]``.

    Raises
    ------
    DomainError
        If any ``y`` is not positive.
    """
    y = _positive(y)
    return np.clip(p.kernel.cdf(p.standardize(y)), CDF_CLAMP, 1 - CDF_CLAMP)


def qls_quantile(p: QlsParams, prob: float | np.ndarray) -> np.ndarray:
    """Return the ``prob``-quantile ``lambda exp(sqrt(phi) z_prob)``.

    Raises
    ------
    QuantileOutOfRange
        If ``prob`` lies outside (0, 1).
    """
    prob = np.asarray(prob, dtype=float)
    if np.any(~((prob > 0) & (prob < 1))):
        raise QuantileOutOfRange(f'probability outside (0, 1): {prob}')
    shift = p.kernel.quantile(prob) - p.z_q
    # At prob == q the shift is exactly zero and Q comes back unchanged
    return p.Q * np.exp(np.sqrt(p.phi) * shift)


def qls_sample(p: QlsParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` values ``lambda exp(sqrt(phi) Z)``."""
    if n < 1:
        raise ValueError(f'n must be at least 1, got {n}')
    z = p.kernel.sample(n, rng)
    return p.Q * np.exp(np.sqrt(p.phi) * (z - p.z_q))


def scale_law(p: QlsParams, c: float) -> QlsParams:
    """Law of ``cY``: ``QLS(cQ, phi, g)``.

    Raises
    ------
    DomainError
        If ``c`` is not positive.
    """
    if not c > 0:
        raise DomainError(f'scale factor must be positive, got {c}')
    return dataclasses.replace(p, Q=c * p.Q)


def power_law(p: QlsParams, c: float) -> QlsParams:
    """Law of ``Y^c``: ``QLS(Q^c, c^2 phi, g)``.

    Raises
    ------
    DomainError
        If ``c`` is not positive.
    """
    if not c > 0:
        raise DomainError(f'power must be positive, got {c}')
    return dataclasses.replace(p, Q=p.Q**c, phi=c * c * p.phi)
