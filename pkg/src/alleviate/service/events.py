"""Append-only JSON-lines event log with crash recovery.

A write interrupted mid-line leaves a torn tail; recovery drops it and
truncates the file so later appends start on a clean line. Damage anywhere
before the tail means the log cannot be trusted and raises CorruptLog.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

EVENT_KINDS = (
    "SessionOpened",
    "NoteIngested",
    "TripleAdded",
    "LinkResolved",
    "MessageIn",
    "MessageOut",
    "AlertRaised",
    "FeedbackReceived",
    "PolicyUpdated",
)


class CorruptLog(Exception):
    def __init__(self, lineno: int, reason: str):
        self.lineno = lineno
        self.reason = reason
        super().__init__(f"event log line {lineno}: {reason}")


@dataclass(frozen=True)
class EventRecord:
    seq: int
    kind: str
    at: str
    payload: dict

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.seq < 1:
            raise ValueError(f"seq must be positive, got {self.seq}")

    def to_json(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "at": self.at, "payload": self.payload}

    @classmethod
    def from_json(cls, data: dict) -> "EventRecord":
        return cls(
            seq=int(data["seq"]),
            kind=data["kind"],
            at=data["at"],
            payload=dict(data["payload"]),
        )


def _scan(path: Path) -> tuple[list[EventRecord], int]:
    """(events, byte length of the intact prefix). Torn final line excluded."""
    if not path.exists():
        return [], 0
    data = path.read_bytes()
    events: list[EventRecord] = []
    good_end = 0
    offset = 0
    lineno = 0
    pending: tuple[int, int, str] | None = None  # (lineno, offset, reason)
    for chunk in data.split(b"\n"):
        lineno += 1
        line_start = offset
        offset += len(chunk) + 1
        text = chunk.decode("utf-8", errors="replace").strip()
        if not text:
            continue
        if pending is not None:
            raise CorruptLog(pending[0], pending[2])
        try:
            record = EventRecord.from_json(json.loads(text))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
            # may be a torn tail; fatal only if more lines follow
            pending = (lineno, line_start, f"unreadable record ({err})")
            continue
        expected = events[-1].seq + 1 if events else 1
        if record.seq != expected:
            raise CorruptLog(lineno, f"seq {record.seq}, expected {expected}")
        events.append(record)
        good_end = min(offset, len(data))
    return events, good_end


def read_events(path: "str | Path") -> list[EventRecord]:
    """Parse the log, ignoring a torn final line."""
    events, _ = _scan(Path(path))
    return events


class EventLog:
    """Single-writer append log. Opening recovers from a torn tail."""

    def __init__(self, path: "str | Path"):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        events, good_end = _scan(self.path)
        if self.path.exists() and self.path.stat().st_size > good_end:
            with open(self.path, "r+b") as fh:
                fh.truncate(good_end)
        if good_end > 0:
            with open(self.path, "rb") as fh:
                fh.seek(good_end - 1)
                terminated = fh.read(1) == b"\n"
            if not terminated:
                with open(self.path, "ab") as fh:
                    fh.write(b"\n")
        self._next_seq = events[-1].seq + 1 if events else 1
        self._fh = open(self.path, "a", encoding="utf-8")

    @property
    def next_seq(self) -> int:
        return self._next_seq

    def append(self, kind: str, payload: dict, at: str) -> EventRecord:
        record = EventRecord(self._next_seq, kind, at, payload)
        self._fh.write(json.dumps(record.to_json(), separators=(",", ":")) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self._next_seq += 1
        return record

    def close(self):
        if self._fh and not self._fh.closed:
            self._fh.close()
