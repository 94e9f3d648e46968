"""Tabulated CDF and inverse CDF for kernels without closed forms."""

from __future__ import annotations

import logging
import warnings
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import IntegrationWarning
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline

logger = logging.getLogger(__name__)

LogPdf = Callable[[np.ndarray], np.ndarray]


class TabulatedCdf:
    """Upper-tail table of a symmetric density on a sinh-spaced grid.

    Panel integrals use fixed Gauss-Legendre rules, so the whole table is
    built in one vectorized pass. The upper tail ``S(z) = 1 - G(z)`` is
    stored on the log scale and interpolated with cubic Hermite splines
    whose slopes come from the exact density, which keeps small tail
    probabilities accurate.
    """

    def __init__(
        self,
        log_pdf: LogPdf,
        z_max: float = 1e6,
        step: float = 0.004,
        nodes: int = 10,
    ) -> None:
        """Build the table.

        Parameters
        ----------
        log_pdf : Callable
            Vectorized log density of the symmetric law on the real line.
        z_max : float
            Largest tabulated abscissa; beyond it the tail is integrated
            on demand.
        step : float
            Grid step in ``asinh(z)``.
        nodes : int
            Gauss-Legendre nodes per panel.
        """
        self._log_pdf = log_pdf

        t = np.arange(0.0, np.arcsinh(z_max) + step, step)
        z = np.sinh(t)

        # Integrate the density over each panel [z_k, z_{k+1}]
        x, w = leggauss(nodes)
        mid = 0.5 * (z[1:] + z[:-1])
        half = 0.5 * (z[1:] - z[:-1])
        points = mid[:, None] + half[:, None] * x[None, :]
        panels = (np.exp(log_pdf(points)) * w[None, :]).sum(axis=1) * half

        beyond = self._tail_integral(float(z[-1]))
        upper = np.append(np.cumsum(panels[::-1])[::-1], 0.0) + beyond

        # G(0) = 1/2 exactly
        upper *= 0.5 / upper[0]

        # Keep the strictly decreasing, representable part of the tail
        keep = upper > 0
        keep[1:] &= np.diff(upper) < 0
        z, upper = z[keep], upper[keep]
        density = np.exp(log_pdf(z))

        self.z_last = float(z[-1])
        self.log_upper_last = float(np.log(upper[-1]))
        self._log_upper = CubicHermiteSpline(
            z,
            np.log(upper),
            -density / upper,
        )
        self._inverse = CubicHermiteSpline(
            -np.log(upper),
            z,
            upper / density,
        )

    def _tail_integral(self, a: float) -> float:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always', IntegrationWarning)
            value, error = quad(
                lambda s: np.exp(self._log_pdf(np.asarray(s))),
                a,
                np.inf,
                epsabs=0.0,
                epsrel=1e-10,
                limit=200,
            )
        for warning in caught:
            if issubclass(warning.category, IntegrationWarning):
                # Far tails are tiny; the table keeps the estimate
                logger.debug(
                    'Tail integral beyond %g = %.3g (error %.1g): %s',
                    a,
                    value,
                    error,
                    str(warning.message).splitlines()[0],
                )
            else:
                warnings.warn_explicit(
                    warning.message,
                    warning.category,
                    warning.filename,
                    warning.lineno,
                )
        return float(value)

    def upper_tail(self, a: np.ndarray) -> np.ndarray:
        """Return ``1 - G(a)`` for ``a >= 0``."""
        a = np.asarray(a, dtype=float)
        inside = a <= self.z_last
        result = np.exp(self._log_upper(np.where(inside, a, 0.0)))
        if not np.all(inside):
            far = np.flatnonzero(~inside)
            flat = result.reshape(-1)
            for index in far:
                value = a.reshape(-1)[index]
                flat[index] = (
                    0.0 if np.isinf(value) else self._tail_integral(value)
                )
            result = flat.reshape(a.shape)
        return result

    def cdf(self, w: np.ndarray) -> np.ndarray:
        """Evaluate ``G(w)``."""
        w = np.asarray(w, dtype=float)
        upper = self.upper_tail(np.abs(w))
        return np.where(w >= 0, 1.0 - upper, upper)

    def ppf(self, p: np.ndarray, polish: int = 3) -> np.ndarray:
        """Evaluate ``G^{-1}(p)`` for ``p`` in (0, 1).

        Starts from the inverse spline and refines with Newton steps on
        the tail equation ``S(|z|) = min(p, 1 - p)``.
        """
        p = np.asarray(p, dtype=float)
        tail = np.minimum(p, 1.0 - p)
        y = np.minimum(-np.log(tail), -self.log_upper_last)
        a = np.asarray(self._inverse(y), dtype=float)

        for _ in range(polish):
            density = np.exp(self._log_pdf(a))
            positive = density > 0
            safe = np.where(positive, density, 1.0)
            step = np.where(positive, (self.upper_tail(a) - tail) / safe, 0.0)
            a = np.maximum(a + step, 0.0)

        return np.where(p < 0.5, -a, np.where(p > 0.5, a, 0.0))
