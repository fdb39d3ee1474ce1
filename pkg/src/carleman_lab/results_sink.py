from typing import Any, Dict, List, Mapping, Optional
import logging
import threading
from datetime import datetime

import pandas as pd


class ResultsSink:
    """Append-only store of result rows shared by the workers of a sweep.

    Stores rows per stage name; every append records the time of the last write.
    """

    def __init__(self, config_hash: Optional[str] = None):
        self.config_hash = config_hash
        # Mapping stage -> list of row dicts
        self.rows_by_stage: Dict[str, List[Dict[str, Any]]] = {}
        # Mapping stage -> time of the last append
        self.last_write_at: Dict[str, datetime] = {}
        self._lock = threading.Lock()

    def append(self, stage: str, row: Mapping[str, Any]) -> None:
        """Append one row to a stage; the config hash column is added when known.

        Args:
            stage: Stage the row belongs to
            row: Column name -> value
        """
        try:
            record = dict(row)
            if self.config_hash is not None:
                record["config_hash"] = self.config_hash
            with self._lock:
                self.rows_by_stage.setdefault(stage, []).append(record)
                self.last_write_at[stage] = datetime.utcnow()
            logging.debug(f"Appended row to stage {stage}")
        except Exception as e:
            logging.error(f"Failed to append row to stage {stage}: {e}", exc_info=True)
            raise

    def rows(self, stage: str) -> List[Dict[str, Any]]:
        """Copy of the rows recorded for a stage, in append order.

        Args:
            stage: Stage name

        Returns:
            List of row dicts (empty for unknown stages)
        """
        with self._lock:
            return [dict(row) for row in self.rows_by_stage.get(stage, [])]

    def frame(self, stage: str, sort_by: Optional[List[str]] = None) -> pd.DataFrame:
        """Rows of a stage as a DataFrame, optionally sorted for deterministic output."""
        frame = pd.DataFrame(self.rows(stage))
        if sort_by and not frame.empty:
            frame = frame.sort_values(sort_by, kind="mergesort").reset_index(drop=True)
        return frame

    def get_row_count(self, stage: Optional[str] = None) -> int:
        """Number of rows in one stage, or across all stages.

        Args:
            stage: Stage name; None counts every stage

        Returns:
            Row count
        """
        with self._lock:
            if stage is None:
                return sum(len(rows) for rows in self.rows_by_stage.values())
            return len(self.rows_by_stage.get(stage, []))
