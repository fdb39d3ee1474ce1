import threading
from concurrent.futures import ThreadPoolExecutor, as_completed

import pytest

from carleman_lab.models.factories import PotentialModelFactory
from carleman_lab.results_sink import ResultsSink
from carleman_lab.schemas.reports import EpsRule
from carleman_lab.services.resolvent_lab import ResolventLabService


class TestSweepConcurrency:
    """Thread-count independence of the resolvent sweep and of the shared sink.

    Kept small: the operators are tridiagonal with at most a few hundred unknowns.
    """

    def setup_method(self):
        """Set up test fixtures."""
        self.service = ResolventLabService(max_iter=100000, max_doublings=1, seed=3)
        self.model = PotentialModelFactory("compact_bump", "line", height=0.5, lo=-1.0, hi=1.0, edge=0.25)
        self.h_grid = [0.5, 0.4, 0.3, 0.25, 0.2]
        self.rule = EpsRule(kind="constant", coefficient=1.0)

    def _sweep(self, threads, sink=None):
        return self.service.h_sweep(
            self.model, E=1.0, s=1.0, eps_rule=self.rule, h_grid=self.h_grid,
            L=10.0, N=400, signs=[1, -1], threads=threads, sink=sink,
        )

    def test_thread_count_does_not_change_results(self):
        # Act
        serial = self._sweep(threads=1)
        parallel = self._sweep(threads=4)

        # Assert
        assert [run.h for run in serial] == [0.5, 0.5, 0.4, 0.4, 0.3, 0.3, 0.25, 0.25, 0.2, 0.2]
        assert [(run.h, run.sign) for run in parallel] == [(run.h, run.sign) for run in serial]
        assert [run.g_value for run in parallel] == [run.g_value for run in serial]

    def test_sweep_rows_reach_sink(self):
        # Arrange
        sink = ResultsSink("0123456789abcdef")

        # Act
        runs = self._sweep(threads=4, sink=sink)

        # Assert
        assert sink.get_row_count("resolvent-sweep") == len(runs) == 10
        frame = sink.frame("resolvent-sweep", sort_by=["h", "sign"])
        assert sorted(frame["g_value"]) == sorted(run.g_value for run in runs)
        assert set(frame["config_hash"]) == {"0123456789abcdef"}

    def test_concurrent_appends_are_not_lost(self):
        """Many writers appending to one stage keep every row."""
        # Arrange
        sink = ResultsSink()
        writers, rows_each = 8, 250
        barrier = threading.Barrier(writers)

        def write(worker: int) -> int:
            barrier.wait()
            for index in range(rows_each):
                sink.append("stress", {"worker": worker, "index": index})
            return worker

        # Act
        with ThreadPoolExecutor(max_workers=writers) as executor:
            futures = [executor.submit(write, worker) for worker in range(writers)]
            done = sorted(future.result() for future in as_completed(futures))

        # Assert
        assert done == list(range(writers))
        assert sink.get_row_count("stress") == writers * rows_each
        for worker in range(writers):
            indices = [row["index"] for row in sink.rows("stress") if row["worker"] == worker]
            assert indices == list(range(rows_each))

    @pytest.mark.parametrize("threads", [1, 3])
    def test_order_is_decreasing_h(self, threads):
        runs = self.service.h_sweep(
            self.model, E=1.0, s=1.0, eps_rule=self.rule, h_grid=[0.2, 0.5, 0.3, 0.4, 0.25],
            L=10.0, N=400, threads=threads,
        )

        assert [run.h for run in runs] == [0.5, 0.4, 0.3, 0.25, 0.2]
