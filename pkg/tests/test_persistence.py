"""Tests for the SQLite run store."""

from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from silab.models import RunStatus
from silab.persistence import RunStore

if TYPE_CHECKING:
    from pathlib import Path

pytestmark = pytest.mark.unit


@pytest.fixture
def store(tmp_path: Path) -> RunStore:
    """Provide an initialized store in a temporary directory."""
    run_store = RunStore(tmp_path / "nested" / "runs.db")
    run_store.initialize()
    return run_store


def test_run_store_reuses_run_rows_by_key(store: RunStore) -> None:
    """Test that reopening a run key returns the same ID and keeps the original config."""
    first = store.open_run("abc", {"setting": {"n": 100}})
    store.update_run(first, status=RunStatus.COMPLETED.value)
    second = store.open_run("abc", {"setting": {"n": 999}})

    run = store.get_run("abc")

    assert first == second
    assert run is not None
    assert run["config"] == {"setting": {"n": 100}}
    assert run["status"] == RunStatus.RUNNING.value
    assert store.get_run("missing") is None


def test_run_store_round_trips_replications_by_index(store: RunStore) -> None:
    """Test that records come back keyed by replication and later saves replace earlier ones."""
    run_id = store.open_run("key", {})
    store.save_replications(
        run_id,
        [
            {"rep": 2, "ok": False, "reason": "SeparationDetected: x"},
            {"rep": 0, "ok": True, "beta4_hat": 0.1 + 0.2},
        ],
    )
    store.save_replications(run_id, [{"rep": 2, "ok": True, "beta4_hat": float("nan")}])

    stored = store.load_replications(run_id)

    assert list(stored) == [0, 2]
    assert stored[0]["beta4_hat"] == 0.1 + 0.2
    assert stored[2] == {"rep": 2, "ok": True, "beta4_hat": None}
    assert store.count_replications(run_id) == 2
    assert store.count_replications(run_id, ok=True) == 2
    assert store.count_replications(run_id, ok=False) == 0


def test_run_store_clear_run_only_touches_one_run(store: RunStore) -> None:
    """Test that clearing a run leaves other runs intact."""
    first = store.open_run("first", {})
    second = store.open_run("second", {})
    store.save_replications(first, [{"rep": 0, "ok": True}])
    store.save_replications(second, [{"rep": 0, "ok": True}])

    store.clear_run(first)

    assert store.count_replications(first) == 0
    assert store.count_replications(second) == 1


def test_run_store_update_run_rejects_unknown_fields(store: RunStore) -> None:
    """Test that only whitelisted columns can be updated."""
    run_id = store.open_run("key", {})

    with pytest.raises(ValueError, match="Unsupported run update fields: run_key"):
        store.update_run(run_id, run_key="other")  # type: ignore[call-arg]


def test_run_store_update_run_records_completion(store: RunStore) -> None:
    """Test that status and finish time are written together."""
    run_id = store.open_run("key", {})

    store.update_run(run_id, status=RunStatus.COMPLETED.value, finished_at="2026-01-01T00:00:00+00:00")

    run = store.get_run("key")
    assert run is not None
    assert run["status"] == RunStatus.COMPLETED.value
    assert run["finished_at"] == "2026-01-01T00:00:00+00:00"
