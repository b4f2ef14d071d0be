"""
Ensemble runner: lifecycle manager for concurrent trajectory execution.
Results are always returned in submission order, so reductions over them
do not depend on scheduling.
"""
import asyncio, logging
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from typing import Any, Callable, Dict, Iterable, List, Optional, TypeVar
from src.config.settings import get_config
from src.services.exceptions import EnsembleError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class EnsembleRunner:
    """Owns the worker pool used to propagate independent trajectories."""

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers or get_config().max_workers
        self._executor: Optional[ThreadPoolExecutor] = None
        self.start_time: Optional[datetime] = None
        self.is_running = False
        self._stats: Dict[str, int] = dict(submitted=0, completed=0, failed=0, batches=0)

    async def __aenter__(self):
        if not await self.initialize():
            raise RuntimeError("EnsembleRunner initialization failed!!!")
        return self

    async def __aexit__(self, exc_type, exc, tb):
        await self.shutdown()

    async def initialize(self) -> bool:
        if self.is_running:
            return True
        self._executor = ThreadPoolExecutor(max_workers=self.max_workers, thread_name_prefix="trajectory")
        self.start_time = datetime.now()
        self.is_running = True
        logger.debug(f"EnsembleRunner started with {self.max_workers} workers")
        return True

    async def shutdown(self) -> None:
        if not self.is_running:
            return
        self.is_running = False
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None
        logger.debug(f"EnsembleRunner stopped: {self.get_stats()}")

    async def map(self, fn: Callable[[T], R], items: Iterable[T], label: str = "member") -> List[R]:
        """
        Run fn over items concurrently.
        Any failure refuses the whole batch with an EnsembleError listing every failed index.
        """
        if not self.is_running:
            raise RuntimeError("EnsembleRunner is not running")
        loop = asyncio.get_running_loop()
        futures = [loop.run_in_executor(self._executor, fn, item) for item in items]
        self._stats["submitted"] += len(futures)
        self._stats["batches"] += 1
        results = await asyncio.gather(*futures, return_exceptions=True)

        failures: Dict[int, str] = {}
        for index, result in enumerate(results):
            if isinstance(result, Exception):
                failures[index] = str(result)
            elif isinstance(result, BaseException):
                raise result
        self._stats["completed"] += len(results) - len(failures)
        self._stats["failed"] += len(failures)
        if failures:
            logger.error(f"{len(failures)} of {len(results)} {label}s failed; refusing partial ensemble")
            raise EnsembleError(failures, label)
        return list(results)

    def get_stats(self) -> Dict[str, Any]:
        uptime = (datetime.now() - self.start_time).total_seconds() if self.start_time else 0.0
        return {**self._stats, "workers": self.max_workers, "uptime_seconds": uptime}


async def run_ordered(fn: Callable[[T], R], items: Iterable[T], runner: Optional[EnsembleRunner] = None,
                      label: str = "member") -> List[R]:
    """Use the given runner, or a private one for the duration of the call."""
    if runner is not None:
        return await runner.map(fn, items, label)
    async with EnsembleRunner() as own:
        return await own.map(fn, items, label)
