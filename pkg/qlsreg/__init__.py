"""Quantile log-symmetric distributions and regression models."""

from __future__ import annotations

__version__ = '0.1.0'
