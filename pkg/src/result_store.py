"""
Persistent sweep result cache using SQLite
Rows are keyed by configuration fingerprint and τ, so re-running a sweep is idempotent
"""
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

import aiosqlite

from src.models import SweepRow

logger = logging.getLogger(__name__)


def tau_key(tau_fs: float) -> str:
    """Exact text key for τ; repr round-trips a float"""
    return repr(float(tau_fs))


class ResultStore:
    """
    Computed sweep rows, one per (fingerprint, τ).
    Survives process restarts.
    """

    def __init__(self, db_path: str = "data/results.db"):
        self.db_path = str(db_path)
        self.db: Optional[aiosqlite.Connection] = None

    async def initialize(self):
        Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)

        self.db = await aiosqlite.connect(self.db_path)
        await self.db.execute("""
            CREATE TABLE IF NOT EXISTS sweep_rows (
                fingerprint TEXT NOT NULL,
                tau TEXT NOT NULL,
                row_json TEXT NOT NULL,
                computed_at TEXT NOT NULL,
                PRIMARY KEY (fingerprint, tau)
            )
        """)
        await self.db.execute("""
            CREATE INDEX IF NOT EXISTS idx_fingerprint
            ON sweep_rows(fingerprint)
        """)
        await self.db.commit()
        logger.info(f"Result store initialized at {self.db_path}")

    def _connection(self) -> aiosqlite.Connection:
        if not self.db:
            raise RuntimeError("ResultStore not initialized")
        return self.db

    async def get_row(self, fingerprint: str, tau_fs: float) -> Optional[SweepRow]:
        cursor = await self._connection().execute(
            "SELECT row_json FROM sweep_rows WHERE fingerprint = ? AND tau = ?",
            (fingerprint, tau_key(tau_fs))
        )
        result = await cursor.fetchone()
        if result is None:
            return None
        return SweepRow.model_validate_json(result[0])

    async def save_row(self, fingerprint: str, row: SweepRow) -> bool:
        """
        Store a computed row
        Returns False if a row for this fingerprint and τ already exists
        """
        db = self._connection()
        try:
            await db.execute(
                """INSERT INTO sweep_rows (fingerprint, tau, row_json, computed_at)
                   VALUES (?, ?, ?, ?)""",
                (fingerprint, tau_key(row.tau_fs), row.model_dump_json(),
                 datetime.now(timezone.utc).isoformat())
            )
            await db.commit()
            return True
        except aiosqlite.IntegrityError:
            logger.debug(f"Row already stored: fingerprint={fingerprint[:12]}, tau={row.tau_fs}")
            return False

    async def fingerprints(self) -> List[str]:
        cursor = await self._connection().execute(
            "SELECT DISTINCT fingerprint FROM sweep_rows ORDER BY fingerprint"
        )
        rows = await cursor.fetchall()
        return [row[0] for row in rows]

    async def count_rows(self, fingerprint: Optional[str] = None) -> int:
        db = self._connection()
        if fingerprint:
            cursor = await db.execute(
                "SELECT COUNT(*) FROM sweep_rows WHERE fingerprint = ?",
                (fingerprint,)
            )
        else:
            cursor = await db.execute("SELECT COUNT(*) FROM sweep_rows")
        result = await cursor.fetchone()
        return result[0] if result else 0

    async def close(self):
        if self.db:
            await self.db.close()
            self.db = None
            logger.info("Result store closed")
