"""Error types raised by qlsreg."""

from __future__ import annotations


class QlsRegError(Exception):
    """Base class for qlsreg errors."""

    error_type = 'QLSREG_ERROR'

    def __init__(self, message: str, error_type: str | None = None) -> None:
        """Initialize the error.

        Parameters
        ----------
        message : str
            Human readable message.
        error_type : str, optional
            Machine readable error type, defaults to the class value.
        """
        super().__init__(message)
        if error_type is not None:
            self.error_type = error_type


class InvalidExtraParameter(QlsRegError, ValueError):
    """Extra parameter outside the range allowed by the kernel family."""

    error_type = 'INVALID_EXTRA_PARAMETER'


class NonIntegrableKernel(QlsRegError):
    """Normalizing-constant quadrature did not converge."""

    error_type = 'NON_INTEGRABLE_KERNEL'


class NonConvergentQuadrature(QlsRegError):
    """A moment integral did not reach the requested tolerance."""

    error_type = 'NON_CONVERGENT_QUADRATURE'


class DomainError(QlsRegError, ValueError):
    """Argument outside the domain of a function."""

    error_type = 'DOMAIN_ERROR'


class SingularWeight(QlsRegError, ArithmeticError):
    """The density generator underflowed to zero."""

    error_type = 'SINGULAR_WEIGHT'


class QuantileOutOfRange(QlsRegError, ValueError):
    """A probability level outside (0, 1)."""

    error_type = 'QUANTILE_OUT_OF_RANGE'


class NonFiniteLikelihood(QlsRegError, ArithmeticError):
    """The log-likelihood or its score is not finite."""

    error_type = 'NON_FINITE_LIKELIHOOD'


class NonConvergence(QlsRegError):
    """An optimizer run did not converge."""

    error_type = 'NON_CONVERGENCE'


class SingularInformation(QlsRegError, ArithmeticError):
    """An information matrix could not be inverted."""

    error_type = 'SINGULAR_INFORMATION'


class RankDeficientDesign(QlsRegError, ValueError):
    """A design matrix does not have full column rank."""

    error_type = 'RANK_DEFICIENT_DESIGN'


class AllGridPointsFailed(QlsRegError):
    """Every extra-parameter grid point failed to fit."""

    error_type = 'ALL_GRID_POINTS_FAILED'


class DegenerateAICc(QlsRegError, ValueError):
    """AICc is undefined because n <= p + 1."""

    error_type = 'DEGENERATE_AICC'


class DegenerateSample(QlsRegError, ValueError):
    """A sample without spread."""

    error_type = 'DEGENERATE_SAMPLE'


class EnvelopeUnstable(QlsRegError):
    """Too many simulated refits failed while building an envelope."""

    error_type = 'ENVELOPE_UNSTABLE'


class ExcessiveNonConvergence(QlsRegError):
    """Too many Monte Carlo replications failed to converge."""

    error_type = 'EXCESSIVE_NON_CONVERGENCE'


class ParseError(QlsRegError, ValueError):
    """Malformed input data."""

    error_type = 'PARSE_ERROR'


class ConfigError(QlsRegError, ValueError):
    """Invalid run configuration."""

    error_type = 'CONFIG_ERROR'
