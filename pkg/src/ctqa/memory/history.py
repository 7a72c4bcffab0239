"""Append-only history log: one JSON object per line.

Fields per record: ts, session, kind, trace, inputs_digest, output. The
trace object carries its own trace_id so episodes can be looked up by id.
Appends are serialized and durable before returning (fsync by default).
"""
from __future__ import annotations

import json
import os
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class HistoryRecord:
    ts: float
    session: str
    kind: str  # "qa" | "report"
    trace: dict = field(default_factory=dict)
    inputs_digest: str = ""
    output: str = ""

    @property
    def trace_id(self) -> str | None:
        return self.trace.get("trace_id")


class HistoryLog:
    def __init__(self, path: str | Path, fsync_on_append: bool = True):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.fsync_on_append = fsync_on_append
        self._lock = threading.Lock()
        self._last_ts: dict[str, float] = {}
        if self.path.exists():
            for record in self._scan():
                self._last_ts[record.session] = record.ts

    def append(self, record: HistoryRecord) -> None:
        """Durable append; timestamps must be monotone within a session."""
        with self._lock:
            last = self._last_ts.get(record.session)
            if last is not None and record.ts < last:
                raise ValueError(
                    f"timestamp {record.ts} precedes last {last} for session {record.session!r}"
                )
            line = json.dumps(asdict(record), ensure_ascii=False, sort_keys=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                if self.fsync_on_append:
                    os.fsync(fh.fileno())
            self._last_ts[record.session] = record.ts

    def _scan(self) -> list[HistoryRecord]:
        records = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(HistoryRecord(**json.loads(line)))
        return records

    def query(
        self,
        session: str | None = None,
        kind: str | None = None,
        trace_id: str | None = None,
    ) -> list[HistoryRecord]:
        """Matching records in append order; never mutates the log."""
        if not self.path.exists():
            return []
        with self._lock:
            records = self._scan()
        return [
            r
            for r in records
            if (session is None or r.session == session)
            and (kind is None or r.kind == kind)
            and (trace_id is None or r.trace_id == trace_id)
        ]
