"""SQLite store for Monte-Carlo runs and their per-replication records."""

from __future__ import annotations

import sqlite3
from contextlib import closing
from threading import RLock
from typing import TYPE_CHECKING, Any, TypedDict, Unpack

from silab.models import RunStatus
from silab.utils import json_dumps, json_loads, utcnow

if TYPE_CHECKING:
    from collections.abc import Iterable
    from pathlib import Path

RUN_UPDATE_FIELDS = frozenset({"finished_at", "status", "updated_at"})


class RunUpdateFields(TypedDict, total=False):
    """Typed partial updates for run rows."""

    finished_at: str | None
    status: str
    updated_at: str


def _validate_update_fields(fields: dict[str, object], allowed_fields: frozenset[str]) -> None:
    unexpected = sorted(set(fields).difference(allowed_fields))
    if unexpected:
        joined = ", ".join(unexpected)
        message = f"Unsupported run update fields: {joined}"
        raise ValueError(message)


class RunStore:
    """Persist Monte-Carlo replications so interrupted runs can resume."""

    def __init__(self, path: Path) -> None:
        """Initialize the store wrapper for the given file path."""
        self.path = path
        self._lock = RLock()

    def connect(self) -> sqlite3.Connection:
        """Open a SQLite connection configured for this store."""
        connection = sqlite3.connect(self.path, check_same_thread=False)
        connection.row_factory = sqlite3.Row
        connection.execute("PRAGMA foreign_keys = ON")
        connection.execute("PRAGMA journal_mode = WAL")
        return connection

    def initialize(self) -> None:
        """Create the schema if it does not already exist."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self._lock, closing(self.connect()) as connection:
            connection.executescript(
                """
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_key TEXT NOT NULL UNIQUE,
                    config_json TEXT NOT NULL,
                    status TEXT NOT NULL,
                    created_at TEXT NOT NULL,
                    updated_at TEXT NOT NULL,
                    finished_at TEXT
                );

                CREATE TABLE IF NOT EXISTS replications (
                    run_id INTEGER NOT NULL REFERENCES runs(id) ON DELETE CASCADE,
                    rep INTEGER NOT NULL,
                    ok INTEGER NOT NULL,
                    record_json TEXT NOT NULL,
                    created_at TEXT NOT NULL,
                    PRIMARY KEY (run_id, rep)
                );
                """,
            )
            connection.commit()

    def _execute(self, query: str, params: tuple[Any, ...] = ()) -> list[dict[str, Any]]:
        with self._lock, closing(self.connect()) as connection:
            cursor = connection.execute(query, params)
            rows = [dict(row) for row in cursor.fetchall()]
            connection.commit()
            return rows

    def _execute_one(self, query: str, params: tuple[Any, ...] = ()) -> dict[str, Any] | None:
        rows = self._execute(query, params)
        return rows[0] if rows else None

    def _write_many(self, query: str, rows: Iterable[tuple[Any, ...]]) -> None:
        with self._lock, closing(self.connect()) as connection:
            connection.executemany(query, rows)
            connection.commit()

    def open_run(self, run_key: str, config: dict[str, Any]) -> int:
        """Return the run ID for `run_key`, creating the run row when it is new."""
        now = utcnow()
        self._execute(
            """
            INSERT INTO runs(run_key, config_json, status, created_at, updated_at)
            VALUES (?, ?, ?, ?, ?)
            ON CONFLICT(run_key) DO UPDATE SET status = excluded.status, updated_at = excluded.updated_at
            """,
            (run_key, json_dumps(config), RunStatus.RUNNING.value, now, now),
        )
        row = self._execute_one("SELECT id FROM runs WHERE run_key = ?", (run_key,))
        if row is None:
            raise RuntimeError("Run row was not created.")
        return int(row["id"])

    def get_run(self, run_key: str) -> dict[str, Any] | None:
        """Return a run by key with its decoded configuration."""
        row = self._execute_one("SELECT * FROM runs WHERE run_key = ?", (run_key,))
        if row:
            row["config"] = json_loads(row["config_json"])
        return row

    def update_run(self, run_id: int, **fields: Unpack[RunUpdateFields]) -> None:
        """Apply a partial update to a run row."""
        if not fields:
            return
        updated_fields: dict[str, object] = {**fields, "updated_at": utcnow()}
        _validate_update_fields(updated_fields, RUN_UPDATE_FIELDS)
        assignments = ", ".join(f"{key} = ?" for key in updated_fields)
        params = (*updated_fields.values(), run_id)
        query = f"UPDATE runs SET {assignments} WHERE id = ?"  # noqa: S608 - keys validated against RUN_UPDATE_FIELDS
        self._execute(query, params)

    def save_replications(self, run_id: int, records: Iterable[dict[str, Any]]) -> None:
        """Insert or replace replication records; each record carries its ``rep`` and ``ok`` keys."""
        now = utcnow()
        self._write_many(
            """
            INSERT INTO replications(run_id, rep, ok, record_json, created_at)
            VALUES (?, ?, ?, ?, ?)
            ON CONFLICT(run_id, rep) DO UPDATE SET ok = excluded.ok, record_json = excluded.record_json
            """,
            [(run_id, int(record["rep"]), int(bool(record["ok"])), json_dumps(record), now) for record in records],
        )

    def load_replications(self, run_id: int) -> dict[int, dict[str, Any]]:
        """Return stored replication records keyed by replication index."""
        rows = self._execute("SELECT rep, record_json FROM replications WHERE run_id = ? ORDER BY rep", (run_id,))
        return {int(row["rep"]): json_loads(row["record_json"]) for row in rows}  # type: ignore[misc]

    def count_replications(self, run_id: int, *, ok: bool | None = None) -> int:
        """Return the number of stored replications, optionally filtered by outcome."""
        if ok is None:
            row = self._execute_one("SELECT COUNT(*) AS total FROM replications WHERE run_id = ?", (run_id,))
        else:
            row = self._execute_one(
                "SELECT COUNT(*) AS total FROM replications WHERE run_id = ? AND ok = ?",
                (run_id, int(ok)),
            )
        return int(row["total"]) if row else 0

    def clear_run(self, run_id: int) -> None:
        """Delete every stored replication of a run."""
        self._execute("DELETE FROM replications WHERE run_id = ?", (run_id,))
