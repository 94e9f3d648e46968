"""Density-generator kernels and the symmetric laws they induce."""

from __future__ import annotations

import functools
import itertools

import numpy as np

from qlsreg.exceptions import DomainError
from qlsreg.exceptions import ParseError
from qlsreg.exceptions import SingularWeight
from qlsreg.kernels.base import DensityKernel
from qlsreg.kernels.base import KernelFamily
from qlsreg.kernels.birnbaum_saunders import ExtendedBirnbaumSaundersKernel
from qlsreg.kernels.birnbaum_saunders import ExtendedBirnbaumSaundersTKernel
from qlsreg.kernels.contaminated import ContaminatedNormalKernel
from qlsreg.kernels.hyperbolic import HyperbolicKernel
from qlsreg.kernels.lognormal import LogNormalKernel
from qlsreg.kernels.power_exp import PowerExponentialKernel
from qlsreg.kernels.slash import SlashKernel
from qlsreg.kernels.student_t import StudentTKernel
from qlsreg.utils import parse_floats

STRATEGIES: dict[str, type[DensityKernel]] = {
    'log-no': LogNormalKernel,
    'log-t': StudentTKernel,
    'log-pe': PowerExponentialKernel,
    'log-hp': HyperbolicKernel,
    'log-sl': SlashKernel,
    'log-cn': ContaminatedNormalKernel,
    'ebs': ExtendedBirnbaumSaundersKernel,
    'ebs-t': ExtendedBirnbaumSaundersTKernel,
}

_EBS_GRID = (0.1, 0.25, 0.5, 1.0, 2.0, 4.0)
_UNIT_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))

# Candidate extra parameters searched when profiling theta.
DEFAULT_GRIDS: dict[str, tuple[tuple[float, ...], ...]] = {
    'log-no': ((),),
    'log-t': tuple((float(k),) for k in range(1, 11)),
    'log-pe': tuple((round(0.1 * k, 1),) for k in range(-9, 11)),
    'log-hp': tuple((0.5 * k,) for k in range(1, 11)),
    'log-sl': tuple((float(k),) for k in range(1, 11)),
    'log-cn': tuple(itertools.product(_UNIT_GRID, _UNIT_GRID)),
    'ebs': tuple((x,) for x in _EBS_GRID),
    'ebs-t': tuple(
        (x, float(k)) for x in _EBS_GRID for k in range(1, 11)
    ),
}

# Extra parameters used by the simulation studies.
DEFAULT_EXTRA: dict[str, tuple[float, ...]] = {
    'log-no': (),
    'log-t': (3.0,),
    'log-pe': (0.3,),
    'log-hp': (2.0,),
    'log-sl': (4.0,),
    'log-cn': (0.1, 0.2),
    'ebs': (0.5,),
    'ebs-t': (0.5, 3.0),
}


@functools.lru_cache(maxsize=256)
def _cached_kernel(
    name: str,
    extra: tuple[float, ...],
    finite_difference: bool,
) -> DensityKernel:
    cls = STRATEGIES[name]
    return cls(KernelFamily(name=name, extra=extra), finite_difference)


def make_kernel(
    family: KernelFamily,
    finite_difference: bool = False,
) -> DensityKernel:
    """Get the kernel of a family.

    Kernels are immutable, so instances (and their quadrature caches) are
    shared between callers asking for the same family.

    Parameters
    ----------
    family : KernelFamily
        The family tag and its extra parameters.
    finite_difference : bool
        Use finite differences for the weight ``v``.

    Returns
    -------
    DensityKernel
        The kernel.

    Raises
    ------
    ValueError
        If the family tag is unknown.
    InvalidExtraParameter
        If the extra parameters are out of range.
    NonIntegrableKernel
        If the normalizing constant cannot be computed.
    """
    if family.name not in STRATEGIES:
        raise ValueError(
            f'Unknown kernel family: {family.name}.'
            f' Available: {set(STRATEGIES.keys())}',
        )
    extra = tuple(float(x) for x in family.extra)
    return _cached_kernel(family.name, extra, finite_difference)


def parse_family(tag: str, extra: str = '') -> KernelFamily:
    """Build a family from its CLI tag and comma-separated extra values.

    An empty ``extra`` selects the simulation default of the family.

    Raises
    ------
    ParseError
        If the tag is unknown or the values are not reals.
    """
    tag = tag.strip().lower()
    if tag not in STRATEGIES:
        raise ParseError(
            f'Unknown kernel family: {tag}.'
            f' Available: {", ".join(STRATEGIES)}',
        )
    values = parse_floats(extra) if extra.strip() else DEFAULT_EXTRA[tag]
    return KernelFamily(name=tag, extra=values)


def g_value(kernel: DensityKernel, u: float | np.ndarray) -> np.ndarray:
    """Return the density generator ``g(u)``.

    Raises
    ------
    DomainError
        If any ``u`` is negative.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise DomainError(f'g(u) needs u >= 0, got {u}')
    return kernel.g(u)


def v_weight(kernel: DensityKernel, z: float | np.ndarray) -> np.ndarray:
    """Return ``v(z) = -2 g'(z^2) / g(z^2)``.

    Raises
    ------
    SingularWeight
        If ``g(z^2)`` underflows to zero.
    """
    z = np.asarray(z, dtype=float)
    if np.any(np.isneginf(kernel.log_g(z * z))):
        raise SingularWeight(f'g(z^2) underflows for z in {z}')
    return kernel.v(z)


def symmetric_cdf(kernel: DensityKernel, w: float | np.ndarray) -> np.ndarray:
    """Return the CDF ``G(w)`` of S(0,1,g)."""
    return kernel.cdf(w)


def symmetric_quantile(
    kernel: DensityKernel,
    q: float | np.ndarray,
) -> np.ndarray:
    """Return ``z_q = G^{-1}(q)``.

    Raises
    ------
    QuantileOutOfRange
        If ``q`` lies outside (0, 1).
    """
    return kernel.quantile(q)


def sample_standard(
    kernel: DensityKernel,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw ``n`` values from S(0,1,g)."""
    if n < 1:
        raise ValueError(f'n must be at least 1, got {n}')
    return kernel.sample(n, rng)


def fisher_weights(kernel: DensityKernel, q: float) -> tuple[float, float]:
    """Return ``(d_g, f_g)`` at quantile level ``q``.

    Raises
    ------
    NonConvergentQuadrature
        If a moment integral does not converge.
    """
    return kernel.fisher_weights(q)


__all__ = [
    'DEFAULT_EXTRA',
    'DEFAULT_GRIDS',
    'STRATEGIES',
    'DensityKernel',
    'KernelFamily',
    'fisher_weights',
    'g_value',
    'make_kernel',
    'parse_family',
    'sample_standard',
    'symmetric_cdf',
    'symmetric_quantile',
    'v_weight',
]
