"""Parsl compute backends for Monte Carlo replications."""

from __future__ import annotations

import logging
from abc import ABC
from abc import abstractmethod
from typing import Callable
from typing import Literal
from typing import Sequence
from typing import TypeVar
from typing import Union

from parsl.concurrent import ParslPoolExecutor
from parsl.config import Config
from parsl.executors import HighThroughputExecutor
from parsl.executors import ThreadPoolExecutor
from parsl.providers import LocalProvider
from tqdm import tqdm

from qlsreg.utils import BaseConfig
from qlsreg.utils import PathLike

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


class BaseComputeConfig(BaseConfig, ABC):
    """Compute configuration for running replications."""

    @abstractmethod
    def get_config(self, run_dir: PathLike) -> Config:
        """Create a new Parsl configuration.

        Parameters
        ----------
        run_dir : PathLike
            Path to store parsl logs.

        Returns
        -------
        Config
            Parsl configuration.
        """
        ...


class LocalConfig(BaseComputeConfig):
    """Worker processes on the local machine."""

    name: Literal['local'] = 'local'  # type: ignore[assignment]
    max_workers: int = 1
    cores_per_worker: float = 0.0001
    worker_port_range: tuple[int, int] = (10000, 20000)
    label: str = 'htex'

    def get_config(self, run_dir: PathLike) -> Config:
        """Create a parsl configuration with a local process pool."""
        return Config(
            run_dir=str(run_dir),
            strategy=None,
            executors=[
                HighThroughputExecutor(
                    address='localhost',
                    label=self.label,
                    max_workers=self.max_workers,
                    cores_per_worker=self.cores_per_worker,
                    worker_port_range=self.worker_port_range,
                    provider=LocalProvider(init_blocks=1, max_blocks=1),
                ),
            ],
        )


class ThreadConfig(BaseComputeConfig):
    """Threads in the current process."""

    name: Literal['thread'] = 'thread'  # type: ignore[assignment]
    max_threads: int = 1
    label: str = 'threads'

    def get_config(self, run_dir: PathLike) -> Config:
        """Create a parsl configuration with a thread pool."""
        return Config(
            run_dir=str(run_dir),
            strategy=None,
            executors=[
                ThreadPoolExecutor(
                    label=self.label,
                    max_threads=self.max_threads,
                ),
            ],
        )


ComputeConfigs = Union[LocalConfig, ThreadConfig]


def compute_config_for(workers: int) -> ComputeConfigs | None:
    """Pick a backend for a worker count, ``None`` (serial) for one."""
    if workers <= 1:
        return None
    return ThreadConfig(max_threads=workers)


def map_ordered(
    fn: Callable[[T], R],
    items: Sequence[T],
    compute: ComputeConfigs | None,
    run_dir: PathLike,
    desc: str = 'replications',
) -> list[R]:
    """Apply ``fn`` to every item, keeping input order in the results.

    ``compute=None`` runs in the calling thread with a progress bar.
    """
    if compute is None:
        return [fn(item) for item in tqdm(items, desc=desc, leave=False)]

    logger.info('Distributing %d %s on %s', len(items), desc, compute.name)
    parsl_config = compute.get_config(run_dir)
    with ParslPoolExecutor(parsl_config) as pool:
        return list(pool.map(fn, items))
