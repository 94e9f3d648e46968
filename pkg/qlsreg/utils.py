"""Utilities for qlsreg."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal
from typing import TypeVar
from typing import Union

import numpy as np
import yaml  # type: ignore[import-untyped]
from pydantic import BaseModel

from qlsreg.exceptions import ParseError

PathLike = Union[str, Path]

T = TypeVar('T', bound='BaseConfig')

# Significant digits used whenever floats are written to text.
FLOAT_DIGITS = 17


class BaseConfig(BaseModel):
    """Pydantic model that round-trips through YAML study files."""

    # Discriminates the members of a config union, e.g. compute backends.
    name: Literal[''] = ''

    def write_yaml(self, path: PathLike) -> None:
        """Write the config to ``path`` in YAML, keeping field order."""
        with open(path, 'w') as fp:
            yaml.dump(
                json.loads(self.model_dump_json()),
                fp,
                indent=4,
                sort_keys=False,
            )

    @classmethod
    def from_yaml(cls: type[T], path: PathLike) -> T:
        """Load a config written by :meth:`write_yaml` or by hand.

        Raises
        ------
        pydantic.ValidationError
            If a field is missing or invalid.
        """
        with open(path) as fp:
            raw_data = yaml.safe_load(fp) or {}
        return cls(**raw_data)


def parse_floats(text: str) -> tuple[float, ...]:
    """Parse a comma-separated list of reals, e.g. ``'0.1, 0.2'``.

    An empty string gives an empty tuple.

    Raises
    ------
    ParseError
        If an item is not a real number.
    """
    items = [item.strip() for item in text.split(',') if item.strip()]
    try:
        return tuple(float(item) for item in items)
    except ValueError as exc:
        raise ParseError(f'cannot parse {text!r} as reals: {exc}') from exc


def spawn_generator(seed: int, *keys: int) -> np.random.Generator:
    """Build an independent generator keyed by ``(seed, *keys)``.

    The stream only depends on the key tuple, so replication ``r`` draws
    the same numbers whether it runs serially or on a worker.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))
