"""
Concurrent sweep evaluation with a persistent result cache
"""
import asyncio
import logging
from typing import Callable, Dict, List, Optional, Sequence

from src.models import SweepRow, SweepTable
from src.result_store import ResultStore

logger = logging.getLogger(__name__)

RowEvaluator = Callable[[float], SweepRow]


class SweepRunner:
    """
    Evaluates sweep rows off the event loop, at most `workers` at a time.
    Stored rows are reused; rows that failed are returned but never stored.
    """

    def __init__(self, evaluate: RowEvaluator, store: Optional[ResultStore] = None,
                 fingerprint: Optional[str] = None, workers: int = 1):
        if store is not None and not fingerprint:
            raise ValueError("a result store needs a configuration fingerprint")
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.evaluate = evaluate
        self.store = store
        self.fingerprint = fingerprint
        self.workers = workers
        self.stats = {
            "requested": 0,
            "computed": 0,
            "cached": 0,
            "failed": 0
        }

    async def _row(self, tau_fs: float, semaphore: asyncio.Semaphore) -> SweepRow:
        if self.store is not None:
            cached = await self.store.get_row(self.fingerprint, tau_fs)
            if cached is not None:
                self.stats["cached"] += 1
                logger.debug(f"Reused stored row tau={tau_fs:.4g} fs")
                return cached

        async with semaphore:
            row = await asyncio.to_thread(self.evaluate, tau_fs)

        if row.error is not None:
            self.stats["failed"] += 1
            return row
        self.stats["computed"] += 1
        if self.store is not None:
            await self.store.save_row(self.fingerprint, row)
        logger.info(f"Computed row tau={tau_fs:.4g} fs")
        return row

    async def run(self, taus: Sequence[float]) -> SweepTable:
        """Rows in τ order whatever order they finish in"""
        ordered = sorted(float(t) for t in taus)
        self.stats["requested"] += len(ordered)
        semaphore = asyncio.Semaphore(self.workers)
        rows: List[SweepRow] = await asyncio.gather(*(self._row(t, semaphore) for t in ordered))
        logger.info(f"Sweep finished: {self.stats['computed']} computed, {self.stats['cached']} cached, "
                    f"{self.stats['failed']} failed")
        return SweepTable(rows=rows)

    def get_stats(self) -> Dict[str, int]:
        return self.stats.copy()
