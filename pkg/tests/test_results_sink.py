import pytest
from unittest.mock import patch

from datetime import datetime

from carleman_lab.results_sink import ResultsSink


class TestResultsSink:
    """Test suite for ResultsSink class."""

    @pytest.fixture
    def sink(self):
        """Create a fresh sink for each test."""
        return ResultsSink(config_hash="0123456789abcdef")

    def test_initial_state(self, sink):
        """Test initial state of the sink."""
        assert len(sink.rows_by_stage) == 0
        assert len(sink.last_write_at) == 0
        assert sink.get_row_count() == 0

    def test_append_adds_config_hash(self, sink):
        """Test appending a row tags it with the config hash."""
        sink.append("fit", {"h": 0.1, "g": 2.0})

        rows = sink.rows("fit")
        assert rows == [{"h": 0.1, "g": 2.0, "config_hash": "0123456789abcdef"}]
        assert isinstance(sink.last_write_at["fit"], datetime)

    def test_append_without_hash(self):
        """Test a sink without config hash stores rows unchanged."""
        sink = ResultsSink()

        sink.append("fit", {"h": 0.1})

        assert sink.rows("fit") == [{"h": 0.1}]

    def test_rows_returns_copies(self, sink):
        """Test callers cannot mutate stored rows."""
        sink.append("fit", {"h": 0.1})

        sink.rows("fit")[0]["h"] = 99.0

        assert sink.rows("fit")[0]["h"] == 0.1

    def test_rows_of_unknown_stage(self, sink):
        """Test an unknown stage yields an empty list."""
        assert sink.rows("missing") == []

    def test_counts_per_stage_and_in_total(self, sink):
        """Test rows are counted per stage and across stages."""
        sink.append("resolvent-sweep", {"h": 0.2})
        sink.append("resolvent-sweep", {"h": 0.1})
        sink.append("fit", {"slope": 1.0})

        assert sink.get_row_count("resolvent-sweep") == 2
        assert sink.get_row_count("fit") == 1
        assert sink.get_row_count() == 3
        assert [row["h"] for row in sink.rows("resolvent-sweep")] == [0.2, 0.1]

    def test_frame_sorted_for_determinism(self, sink):
        """Test frame sorting is stable and resets the index."""
        # Arrange
        for row in ({"h": 0.1, "sign": 1}, {"h": 0.05, "sign": -1}, {"h": 0.1, "sign": -1}):
            sink.append("resolvent-sweep", row)

        # Act
        frame = sink.frame("resolvent-sweep", sort_by=["h"])

        # Assert
        assert list(frame["h"]) == [0.05, 0.1, 0.1]
        assert list(frame["sign"]) == [-1, 1, -1]
        assert list(frame.index) == [0, 1, 2]

    def test_frame_of_unknown_stage_is_empty(self, sink):
        """Test sorting an empty frame does not fail."""
        assert sink.frame("missing", sort_by=["h"]).empty

    def test_append_failure_is_logged_and_reraised(self, sink):
        """Test a row that cannot be converted to a dict raises after logging."""
        with patch("carleman_lab.results_sink.logging") as mock_logging:
            with pytest.raises(TypeError):
                sink.append("fit", 42)

        mock_logging.error.assert_called_once()
        assert sink.get_row_count() == 0
