"""Wall-clock timing of fits and study runs."""

from __future__ import annotations

import logging
import time
from types import TracebackType
from typing import Any

from typing_extensions import Self

logger = logging.getLogger(__name__)


class Timer:
    """Context manager that logs how long a block took.

    Example:
        ```python
        from qlsreg.timer import Timer

        with Timer('study1', 'log-no') as timer:
            ...

        print(timer.elapsed_s)
        ```

    The message is logged at ``level`` when the block exits, with
    ``failed`` appended if it raised.
    """

    def __init__(self, *tags: Any, level: int = logging.INFO) -> None:
        self.label = ' '.join(str(tag) for tag in tags)
        self.level = level
        self._start: int | None = None
        self._end: int | None = None

    def __enter__(self) -> Self:
        """Start the clock."""
        self._start = time.perf_counter_ns()
        self._end = None
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_value: BaseException | None,
        exc_traceback: TracebackType | None,
    ) -> None:
        """Stop the clock and log the elapsed time."""
        self._end = time.perf_counter_ns()
        logger.log(
            self.level,
            '[timer] [%s] in [%.2f] seconds%s',
            self.label,
            self.elapsed_s,
            ' (failed)' if exc_type is not None else '',
        )

    @property
    def elapsed_s(self) -> float:
        """Elapsed seconds of the finished block.

        Raises
        ------
        RuntimeError
            If the block has not finished.
        """
        if self._start is None or self._end is None:
            raise RuntimeError('Timer is still running!')
        return (self._end - self._start) / 1e9
