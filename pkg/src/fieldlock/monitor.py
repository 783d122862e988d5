"""Per-instance field-level scheduler.

The monitor keeps, for each field, a reader count, a writer flag and a FIFO
queue of blocked requests. Entry points run under one mutex per instance and
never block inside it: when a request has to wait, :meth:`InstanceMonitor.in_control`
returns ``False`` with the request enqueued, and the caller waits on
``request.event`` (threads) or simply stops scheduling it (step driver). Once
woken, the caller continues with :meth:`InstanceMonitor.resume`.

Holdings belong to transactions. Each request carries its own per-field
claims; the transaction's effective mode on a field is the maximum claim over
its live requests, and the counters track effective modes. A request for a
mode the transaction already holds is granted on the spot; a read-to-write
upgrade goes to the front of the queue and is granted once the transaction is
the sole reader.
"""

from __future__ import annotations

import threading
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import AccessVector, Mode, compatible, control_vectors, format_vector, lemma1_holds

__all__ = ["ProtocolError", "Request", "FieldQueueEntry", "InstanceMonitor", "WaitForEdge"]


class ProtocolError(RuntimeError):
    """A caller broke the monitor's calling discipline."""


class Request:
    """One operation's passage through a monitor."""

    def __init__(self, rid: int, txn: str, op: str, vector: Sequence[Mode], instance: str = ""):
        self.id = rid
        self.txn = txn
        self.op = op
        self.instance = instance
        self.vector: AccessVector = tuple(vector)
        self.claims = [Mode.NULL] * len(self.vector)
        self.dynamic: Optional[AccessVector] = None
        self.cursor = 0
        self.waiting_field: Optional[int] = None
        self.woken_field: Optional[int] = None
        self.woken_as_reader = False
        self.cancelled = False
        self.released = False
        self.registered = False
        self.event = threading.Event()
        self.event.set()

    @property
    def granted(self) -> bool:
        return self.cursor >= len(self.vector) and self.waiting_field is None

    def __repr__(self) -> str:
        return f"Request({self.id}, {self.txn}.{self.op}{format_vector(self.vector)})"


@dataclass
class FieldQueueEntry:
    req: Request
    is_field_reader: bool
    upgrade: bool = False

    @property
    def mode(self) -> Mode:
        return Mode.READ if self.is_field_reader else Mode.WRITE


@dataclass(frozen=True)
class WaitForEdge:
    waiter: str
    holder: str
    instance: str
    field: int


class InstanceMonitor:
    def __init__(self, dimension: int, name: str = "", trace=None, check_invariants: bool = True):
        if dimension < 1:
            raise ValueError("dimension must be at least 1")
        self.n = dimension
        self.name = name
        self.trace = trace
        self.check_invariants = check_invariants
        self.lock = threading.Lock()
        self.read_vector = [0] * dimension
        self.write_vector = [False] * dimension
        self.blocked: list[deque] = [deque() for _ in range(dimension)]
        self.holdings: list[dict] = [{} for _ in range(dimension)]  # txn -> effective Mode
        self._txn_reqs: dict = defaultdict(list)
        # instrumentation
        self.field_visits = 0
        self.entry_calls = 0
        self.calls_by_txn: dict = defaultdict(int)
        self.invariant_checks = 0
        self.violations = 0

    # ------------------------------------------------------------------
    # entry points

    def in_control(self, req: Request) -> bool:
        """Admit ``req`` field by field in ascending order.

        Returns ``True`` once every non-null field is held, ``False`` if the
        request is now queued on some field.
        """
        if len(req.vector) != self.n:
            raise ProtocolError(f"{req!r} has dimension {len(req.vector)}, monitor has {self.n}")
        with self.lock:
            if req.registered:
                raise ProtocolError(f"{req!r} already passed in_control")
            self._enter(req)
            req.registered = True
            req.dynamic = (Mode.NULL,) * self.n
            self._txn_reqs[req.txn].append(req)
            done = self._advance(req)
            self._check()
            return done

    def resume(self, req: Request) -> bool:
        """Continue ``in_control`` after the request was woken."""
        with self.lock:
            if req.cancelled:
                raise ProtocolError(f"{req!r} was cancelled")
            if req.woken_field is None:
                raise ProtocolError(f"{req!r} was not woken")
            self._enter(req)
            i = req.woken_field
            req.woken_field = None
            if req.woken_as_reader:
                self._unblock_reader(i)
            done = self._advance(req)
            self._check()
            return done

    def out_control(self, req: Request, dynamic: Sequence[Mode]) -> None:
        """Downgrade ``req`` from its static vector to ``dynamic``."""
        dynamic = tuple(dynamic)
        with self.lock:
            self._enter(req)
            if not req.granted or req.released:
                raise ProtocolError(f"{req!r} does not hold its fields")
            if len(dynamic) != self.n:
                raise ProtocolError(f"dynamic vector has dimension {len(dynamic)}")
            if tuple(req.claims) != req.vector:
                raise ProtocolError(f"{req!r} already left out_control")
            for i, (static, dyn) in enumerate(zip(req.vector, dynamic)):
                if dyn > static:
                    raise ProtocolError(f"dynamic mode {dyn} exceeds static {static} on field {i}")
            req.dynamic = dynamic
            for i in reversed(range(self.n)):
                self.field_visits += 1
                static, dyn = req.vector[i], dynamic[i]
                if dyn < static:
                    self._emit(req, "downgrade", i, dyn)
                    self._lower(req, i, dyn)
            self._check()

    def commit_or_reject(self, req: Request) -> None:
        """Release whatever ``req`` still holds, highest field first."""
        with self.lock:
            self._enter(req)
            if req.released:
                raise ProtocolError(f"{req!r} released twice")
            if req.waiting_field is not None:
                self._dequeue(req)
            for i in reversed(range(self.n)):
                self.field_visits += 1
                held = req.claims[i]
                if held is not Mode.NULL:
                    self._emit(req, "release", i, held)
                    self._lower(req, i, Mode.NULL)
            req.released = True
            reqs = self._txn_reqs[req.txn]
            if req in reqs:
                reqs.remove(req)
            if not reqs:
                del self._txn_reqs[req.txn]
            self._check()

    # ------------------------------------------------------------------
    # deadlock support; callers hold self.lock

    def wait_edges_locked(self) -> list[WaitForEdge]:
        edges = []
        for i, queue in enumerate(self.blocked):
            ahead: list[FieldQueueEntry] = []
            for entry in queue:
                waiter = entry.req.txn
                for txn, held in self.holdings[i].items():
                    if txn != waiter and not compatible(held, entry.mode):
                        edges.append(WaitForEdge(waiter, txn, self.name, i))
                for prior in ahead:
                    if prior.req.txn != waiter and not compatible(prior.mode, entry.mode):
                        edges.append(WaitForEdge(waiter, prior.req.txn, self.name, i))
                ahead.append(entry)
        return edges

    def waiting_request_locked(self, txn: str) -> Optional[Request]:
        for req in self._txn_reqs.get(txn, ()):
            if req.waiting_field is not None:
                return req
        return None

    def cancel_locked(self, req: Request) -> None:
        """Withdraw a queued request (deadlock victim) and wake its owner."""
        if req.waiting_field is None:
            raise ProtocolError(f"{req!r} is not waiting")
        self._dequeue(req)
        req.cancelled = True
        req.event.set()
        self._check()

    # ------------------------------------------------------------------
    # introspection

    def snapshot(self) -> dict:
        with self.lock:
            return {
                "read_vector": list(self.read_vector),
                "write_vector": list(self.write_vector),
                "queues": [[(e.req.txn, e.mode.letter) for e in q] for q in self.blocked],
                "holdings": [dict(h) for h in self.holdings],
            }

    def holding_vector(self, txn: str) -> AccessVector:
        return tuple(self.holdings[i].get(txn, Mode.NULL) for i in range(self.n))

    def invariant_ok(self) -> bool:
        """The reader/writer counters satisfy the commutativity condition and agree with the holdings."""
        bag = [self.holding_vector(txn) for txn in self._holders()]
        cv = control_vectors(bag, self.n)
        if not lemma1_holds(cv):
            return False
        for i in range(self.n):
            if self.read_vector[i] != cv.rcv[i] or int(self.write_vector[i]) != cv.wcv[i]:
                return False
            if self.read_vector[i] and self.write_vector[i]:
                return False
        return True

    # ------------------------------------------------------------------
    # internals

    def _holders(self):
        seen = set()
        for h in self.holdings:
            seen.update(h)
        return sorted(seen)

    def _enter(self, req: Request) -> None:
        self.entry_calls += 1
        self.calls_by_txn[req.txn] += 1

    def _check(self) -> None:
        if not self.check_invariants:
            return
        self.invariant_checks += 1
        if not self.invariant_ok():
            self.violations += 1
            raise AssertionError(f"monitor {self.name}: control vectors violate the invariant: {self.snapshot_locked()}")

    def snapshot_locked(self) -> dict:
        return {"read_vector": list(self.read_vector), "write_vector": list(self.write_vector)}

    def _emit(self, req: Request, event: str, i: int, mode: Mode) -> None:
        if self.trace is not None:
            self.trace.emit(txn=req.txn, op=req.op, req=req.id, instance=self.name, event=event, field=i, mode=mode)

    def _advance(self, req: Request) -> bool:
        while req.cursor < self.n:
            i = req.cursor
            req.cursor += 1
            self.field_visits += 1
            mode = req.vector[i]
            if mode is Mode.NULL:
                continue
            self._emit(req, "request", i, mode)
            held = self.holdings[i].get(req.txn, Mode.NULL)
            queue = self.blocked[i]
            if mode <= held:
                self._raise_claim(req, i, mode)
            elif mode is Mode.READ:
                if self.write_vector[i] or queue:
                    self._enqueue(req, i, FieldQueueEntry(req, True))
                    return False
                self._raise_claim(req, i, mode)
            elif held is Mode.READ:
                # upgrade: sole reader goes straight to write
                if self.read_vector[i] != 1 or self.write_vector[i]:
                    self._enqueue(req, i, FieldQueueEntry(req, False, upgrade=True))
                    return False
                self._raise_claim(req, i, mode)
            else:
                if self.write_vector[i] or self.read_vector[i] != 0 or queue:
                    self._enqueue(req, i, FieldQueueEntry(req, False))
                    return False
                self._raise_claim(req, i, mode)
            self._emit(req, "grant", i, mode)
        return True

    def _enqueue(self, req: Request, i: int, entry: FieldQueueEntry) -> None:
        queue = self.blocked[i]
        if entry.upgrade:
            pos = 0
            while pos < len(queue) and queue[pos].upgrade:
                pos += 1
            queue.insert(pos, entry)
        else:
            queue.append(entry)
        req.waiting_field = i
        req.event.clear()
        self._emit(req, "block", i, entry.mode)

    def _dequeue(self, req: Request) -> None:
        i = req.waiting_field
        queue = self.blocked[i]
        was_head = bool(queue) and queue[0].req is req
        for entry in queue:
            if entry.req is req:
                queue.remove(entry)
                break
        req.waiting_field = None
        if was_head:
            self._unblock_head(i)

    def _set_claim(self, req: Request, i: int, mode: Mode) -> tuple:
        old = self.holdings[i].get(req.txn, Mode.NULL)
        req.claims[i] = mode
        new = max((r.claims[i] for r in self._txn_reqs[req.txn]), default=Mode.NULL)
        if new is Mode.NULL:
            self.holdings[i].pop(req.txn, None)
        else:
            self.holdings[i][req.txn] = new
        return old, new

    def _raise_claim(self, req: Request, i: int, mode: Mode) -> None:
        old, new = self._set_claim(req, i, max(mode, req.claims[i]))
        if new <= old:
            return
        if old is Mode.READ:
            self.read_vector[i] -= 1
        if new is Mode.READ:
            self.read_vector[i] += 1
        else:
            self.write_vector[i] = True

    def _lower(self, req: Request, i: int, mode: Mode) -> None:
        old, new = self._set_claim(req, i, mode)
        if new >= old:
            return
        if old is Mode.WRITE:
            self.write_vector[i] = False
            if new is Mode.READ:
                # a writer excluded every reader, so the count restarts at one
                self.read_vector[i] = 1
                self._unblock_reader(i)
            else:
                self._unblock_any(i)
        else:
            self.read_vector[i] -= 1
            if self.read_vector[i] == 0:
                self._unblock_any(i)
            elif self.read_vector[i] == 1:
                self._unblock_upgrade(i)

    def _grantable(self, entry: FieldQueueEntry, i: int) -> bool:
        if self.write_vector[i]:
            return False
        if entry.upgrade:
            return self.read_vector[i] == 1 and self.holdings[i].get(entry.req.txn) is Mode.READ
        if entry.is_field_reader:
            return True
        return self.read_vector[i] == 0

    def _wake(self, i: int) -> None:
        entry = self.blocked[i].popleft()
        req = entry.req
        self._raise_claim(req, i, entry.mode)
        req.waiting_field = None
        req.woken_field = i
        req.woken_as_reader = entry.is_field_reader
        self._emit(req, "grant", i, entry.mode)
        req.event.set()

    def _unblock_any(self, i: int) -> None:
        queue = self.blocked[i]
        if queue and self._grantable(queue[0], i):
            self._wake(i)

    def _unblock_reader(self, i: int) -> None:
        queue = self.blocked[i]
        if queue and queue[0].is_field_reader and not self.write_vector[i]:
            self._wake(i)

    def _unblock_upgrade(self, i: int) -> None:
        queue = self.blocked[i]
        if queue and queue[0].upgrade and self._grantable(queue[0], i):
            self._wake(i)

    def _unblock_head(self, i: int) -> None:
        # after a withdrawal the new head may already be admissible
        queue = self.blocked[i]
        if queue and self._grantable(queue[0], i):
            self._wake(i)
