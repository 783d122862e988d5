"""Scheduler event trace, serialized as JSON lines."""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Optional

from .core import Mode

EVENTS = ("request", "block", "grant", "downgrade", "release", "commit", "reject")


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    ts: int
    txn: str
    event: str
    op: Optional[str] = None
    req: Optional[int] = None
    instance: Optional[str] = None
    field: Optional[int] = None
    mode: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


class Trace:
    """Thread-safe, append-only event log.

    ``clock`` supplies timestamps (the step driver passes its step counter);
    without one the timestamp is the sequence number.
    """

    def __init__(self, clock: Optional[Callable[[], int]] = None):
        self.clock = clock
        self.events: list[TraceEvent] = []
        self._lock = threading.Lock()

    def emit(self, txn, event, op=None, req=None, instance=None, field=None, mode=None) -> TraceEvent:
        if event not in EVENTS:
            raise ValueError(f"unknown trace event {event!r}")
        letter = Mode(mode).letter if mode is not None else None
        with self._lock:
            seq = len(self.events)
            ts = self.clock() if self.clock is not None else seq
            ev = TraceEvent(seq, ts, txn, event, op, req, instance, field, letter)
            self.events.append(ev)
        return ev

    def __iter__(self):
        return iter(list(self.events))

    def __len__(self) -> int:
        return len(self.events)

    def count(self, event: str) -> int:
        return sum(1 for e in self.events if e.event == event)

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())


def load_jsonl(lines: Iterable[str]) -> list[TraceEvent]:
    events = []
    for n, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            data = json.loads(line)
            events.append(TraceEvent(**data))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"trace line {n}: {exc}") from None
    return events
