"""Reading and writing regression datasets as CSV."""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from qlsreg.exceptions import ParseError
from qlsreg.kernels import KernelFamily
from qlsreg.montecarlo import draw_response
from qlsreg.montecarlo import study1_design
from qlsreg.regress import RegressionModel
from qlsreg.utils import FLOAT_DIGITS
from qlsreg.utils import PathLike
from qlsreg.utils import spawn_generator

FLOAT_FORMAT = f'%.{FLOAT_DIGITS}g'


@dataclasses.dataclass(frozen=True, eq=False)
class Dataset:
    """A response column with quantile and dispersion covariates."""

    frame: pd.DataFrame
    response: str
    quantile_covars: tuple[str, ...] = ()
    dispersion_covars: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        """Number of rows."""
        return len(self.frame)

    @property
    def y(self) -> np.ndarray:
        """The response vector."""
        return self.frame[self.response].to_numpy(dtype=float)

    def _design(self, columns: Sequence[str]) -> np.ndarray:
        ones = np.ones((self.n, 1))
        if not columns:
            return ones
        values = self.frame[list(columns)].to_numpy(dtype=float)
        return np.hstack([ones, values])

    @property
    def X(self) -> np.ndarray:
        """Quantile design with a leading intercept column."""
        return self._design(self.quantile_covars)

    @property
    def W(self) -> np.ndarray:
        """Dispersion design with a leading intercept column."""
        return self._design(self.dispersion_covars)

    def terms(self) -> list[str]:
        """Covariate name of each regression coefficient."""
        return [
            '(intercept)',
            *self.quantile_covars,
            '(intercept)',
            *self.dispersion_covars,
        ]

    def model(
        self,
        q: float,
        family: KernelFamily,
        grid: tuple[tuple[float, ...], ...] | None = None,
    ) -> RegressionModel:
        """Build the regression model at quantile level ``q``."""
        return RegressionModel(
            y=self.y,
            X=self.X,
            W=self.W,
            q=q,
            family=family,
            grid=grid,
        )


def read_dataset(
    path: PathLike,
    response: str,
    quantile_covars: Sequence[str] = (),
    dispersion_covars: Sequence[str] = (),
) -> Dataset:
    """Read a comma-separated file with a header row.

    Raises
    ------
    ParseError
        If the file cannot be parsed, a column is missing or not numeric,
        a cell is empty, or a response is not positive.
    """
    try:
        frame = pd.read_csv(path, float_precision='round_trip')
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise ParseError(f'cannot read {path}: {exc}') from exc

    columns = [response, *quantile_covars, *dispersion_covars]
    missing = [name for name in columns if name not in frame.columns]
    if missing:
        raise ParseError(
            f'{path}: missing column(s) {", ".join(missing)}; '
            f'available: {", ".join(map(str, frame.columns))}',
        )

    used = frame[list(dict.fromkeys(columns))]
    if used.isna().any().any():
        raise ParseError(f'{path}: empty cells in {", ".join(used.columns)}')
    for name in used.columns:
        if not pd.api.types.is_numeric_dtype(used[name]):
            raise ParseError(f'{path}: column {name!r} is not numeric')
    if (used[response] <= 0).any():
        raise ParseError(f'{path}: response {response!r} must be positive')

    return Dataset(
        frame=used.astype(float).reset_index(drop=True),
        response=response,
        quantile_covars=tuple(quantile_covars),
        dispersion_covars=tuple(dispersion_covars),
    )


def write_frame(frame: pd.DataFrame, path: PathLike | None) -> str:
    """Write a table as CSV with round-trip float precision.

    Returns the CSV text; it is also written to ``path`` when given.
    """
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def simulate_dataset(
    family: KernelFamily,
    q: float,
    n: int,
    beta: tuple[float, float] = (1.5, 0.5),
    tau: tuple[float, float] = (1.0, 0.5),
    seed: int = 0,
) -> pd.DataFrame:
    """Draw a dataset ``y, x, w`` from the estimation-study design."""
    rng = spawn_generator(seed, n)
    X, W = study1_design(n, rng)
    y = draw_response(family, q, X @ np.array(beta), W @ np.array(tau), rng)
    return pd.DataFrame({'y': y, 'x': X[:, 1], 'w': W[:, 1]})
