"""Transaction manager: strict two-phase locking over instance monitors.

An operation goes through three steps: admission by the instance monitor
with its control vector, execution outside the monitor (building the dynamic
vector and before-image), and the post-execution downgrade. Holdings that
survive the downgrade are released only at commit or reject.

Operations are written as generators (:meth:`TransactionManager.operation_steps`)
that yield after each atomic step and yield :class:`Blocked` when the request
has to wait. :meth:`TransactionManager.run_operation` drives one to completion on
the calling thread; :mod:`fieldlock.harness` interleaves several of them from
a seeded random scheduler.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import networkx as nx

from .core import Mode, vector_leq
from .dsl import AdtSchema, OperationDef, quote_text
from .interp import ExecutionFault, ExecutionRecord, InstanceValue, apply_inverse, execute, inverse_vector
from .monitor import InstanceMonitor, ProtocolError, Request, WaitForEdge
from .trace import Trace

MODES = ("compat", "static-av", "dynamic-av")


class TransactionRejected(Exception):
    def __init__(self, txn_id: str, reason: str):
        super().__init__(f"transaction {txn_id} rejected: {reason}")
        self.txn_id = txn_id
        self.reason = reason


@dataclass(frozen=True)
class Blocked:
    request: Request


STEP = "step"


@dataclass
class LogRecord:
    txn: str
    instance: str
    op: str
    before_image: dict
    dynamic: tuple
    field_names: tuple = ()

    def to_line(self) -> str:
        parts = ["LOG", self.txn, self.instance, self.op]
        for i in sorted(self.before_image):
            name = self.field_names[i] if self.field_names else str(i)
            parts.append(f"{name}={format_value(self.before_image[i])}")
        return " ".join(parts)


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return quote_text(value)
    return str(value)


@dataclass
class Executed:
    instance: str
    op: OperationDef
    record: ExecutionRecord
    request: Request


@dataclass
class Transaction:
    id: str
    start: int
    status: str = "active"
    executed: list = field(default_factory=list)
    pending: Optional[Request] = None
    reason: str = ""

    @property
    def active(self) -> bool:
        return self.status == "active"


def compat_vector(static: Sequence[Mode]) -> tuple:
    """Whole-object mode: a single writer if the op writes anything, else a reader."""
    return (Mode.WRITE,) if Mode.WRITE in static else (Mode.READ,)


class TransactionManager:
    def __init__(
        self,
        mode: str = "dynamic-av",
        trace: Optional[Trace] = None,
        log_path=None,
        check_invariants: bool = True,
        wait_timeout: Optional[float] = 60.0,
        step_pause: Optional[float] = None,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown scheduler mode {mode!r}; expected one of {MODES}")
        self.mode = mode
        self.trace = trace if trace is not None else Trace()
        self.check_invariants = check_invariants
        self.wait_timeout = wait_timeout
        self.step_pause = step_pause
        self.instances: dict[str, InstanceValue] = {}
        self.monitors: dict[str, InstanceMonitor] = {}
        self.transactions: dict[str, Transaction] = {}
        self.log: dict[str, list[LogRecord]] = {}
        self.victims: list[str] = []
        self._log_path = log_path
        self._log_lock = threading.Lock()
        self._detect_lock = threading.Lock()
        self._ids = itertools.count(1)
        self._rids = itertools.count(1)
        self._start = itertools.count()
        if log_path is not None:
            open(log_path, "w").close()

    # ------------------------------------------------------------------
    # setup

    def add_instance(self, name: str, schema: AdtSchema, values: Optional[Sequence[Any]] = None) -> InstanceValue:
        if name in self.instances:
            raise ValueError(f"duplicate instance {name!r}")
        inst = InstanceValue(schema, values)
        dim = 1 if self.mode == "compat" else schema.dimension
        self.instances[name] = inst
        self.monitors[name] = InstanceMonitor(dim, name, self.trace, self.check_invariants)
        return inst

    def begin(self, txn_id: Optional[str] = None) -> Transaction:
        if txn_id is None:
            txn_id = f"T{next(self._ids)}"
        if txn_id in self.transactions:
            raise ValueError(f"duplicate transaction id {txn_id!r}")
        txn = Transaction(txn_id, next(self._start))
        self.transactions[txn_id] = txn
        return txn

    # ------------------------------------------------------------------
    # control vectors per scheduler mode

    def control_vector(self, op: OperationDef) -> tuple:
        if self.mode == "compat":
            return compat_vector(op.static_dav)
        return op.static_dav

    def control_dynamic(self, op: OperationDef, record: ExecutionRecord) -> tuple:
        if self.mode == "dynamic-av":
            return record.dynamic_dav
        return self.control_vector(op)

    # ------------------------------------------------------------------
    # operations

    def operation_steps(self, txn: Transaction, instance: str, op_name: str, args: Sequence[Any] = ()):
        """Generator running one operation; its return value is the op's result."""
        self._require_active(txn)
        if txn.pending is not None:
            raise ProtocolError(f"{txn.id} already has an operation in flight")
        inst = self.instances[instance]
        monitor = self.monitors[instance]
        op = inst.schema.operation(op_name)
        req = Request(next(self._rids), txn.id, op.name, self.control_vector(op), instance)
        txn.pending = req

        done = monitor.in_control(req)
        while not done:
            self._on_block(req)
            yield Blocked(req)
            if req.cancelled:
                self._abort(txn, "deadlock victim")
            done = monitor.resume(req)
        yield STEP

        try:
            record = execute(op, args, inst)
        except ExecutionFault as fault:
            self._record(txn, Executed(instance, op, fault.record, req))
            self._abort(txn, str(fault))
        self._record(txn, Executed(instance, op, record, req))
        yield STEP

        monitor.out_control(req, self.control_dynamic(op, record))
        yield STEP
        return record.result

    def run_operation(self, txn: Transaction, instance: str, op_name: str, args: Sequence[Any] = ()) -> Any:
        """Run one operation on the calling thread, blocking while it waits."""
        return self.drive(self.operation_steps(txn, instance, op_name, args))

    def drive(self, steps) -> Any:
        try:
            item = next(steps)
            while True:
                if isinstance(item, Blocked):
                    if not item.request.event.wait(self.wait_timeout):
                        raise ProtocolError(f"{item.request!r} waited longer than {self.wait_timeout}s")
                elif self.step_pause is not None:
                    time.sleep(self.step_pause)  # let other workers interleave
                item = steps.send(None)
        except StopIteration as stop:
            return stop.value

    def commit(self, txn: Transaction) -> None:
        self._require_active(txn)
        if txn.pending is not None:
            raise ProtocolError(f"{txn.id} commits with an operation in flight")
        txn.status = "committed"
        self.trace.emit(txn.id, "commit")
        for ex in reversed(txn.executed):
            self.monitors[ex.instance].commit_or_reject(ex.request)
        self._retire(txn)

    def reject(self, txn: Transaction, reason: str = "") -> None:
        """Undo ``txn`` from its before-images, then release its holdings."""
        self._require_active(txn)
        txn.status = "rejected"
        txn.reason = reason
        self.trace.emit(txn.id, "reject")

        calls_before = self._monitor_calls(txn.id)
        for ex in reversed(txn.executed):
            apply_inverse(ex.record, self.instances[ex.instance])
        if self._monitor_calls(txn.id) != calls_before:
            raise ProtocolError("inverse application touched a monitor")

        if txn.pending is not None:
            self.monitors[txn.pending.instance].commit_or_reject(txn.pending)
            txn.pending = None
        for ex in reversed(txn.executed):
            if not ex.request.released:
                self.monitors[ex.instance].commit_or_reject(ex.request)
        self._retire(txn)

    # ------------------------------------------------------------------
    # deadlocks

    def wait_for_edges(self) -> list[WaitForEdge]:
        with self._all_monitors():
            return self._edges_locked()

    def detect_deadlocks(self) -> set:
        """Break every wait-for cycle by cancelling its youngest transaction.

        Victims are woken with their request cancelled; each victim's own
        context then rejects it.
        """
        with self._detect_lock, self._all_monitors():
            graph = nx.DiGraph()
            graph.add_edges_from((e.waiter, e.holder) for e in self._edges_locked())
            victims = set()
            while True:
                try:
                    cycle = nx.find_cycle(graph)
                except nx.NetworkXNoCycle:
                    break
                members = {u for u, _ in cycle}
                victim = max(members, key=lambda t: self.transactions[t].start)
                victims.add(victim)
                graph.remove_node(victim)
            for victim in sorted(victims):
                req = self.transactions[victim].pending
                if req is not None and req.waiting_field is not None:
                    self.monitors[req.instance].cancel_locked(req)
            self.victims.extend(sorted(victims))
            return victims

    # ------------------------------------------------------------------
    # internals

    def _on_block(self, req: Request) -> None:
        self.detect_deadlocks()

    def _edges_locked(self) -> list[WaitForEdge]:
        edges = []
        for name in sorted(self.monitors):
            edges.extend(self.monitors[name].wait_edges_locked())
        return edges

    def _all_monitors(self):
        return _MultiLock([self.monitors[n].lock for n in sorted(self.monitors)])

    def _monitor_calls(self, txn_id: str) -> int:
        return sum(m.calls_by_txn.get(txn_id, 0) for m in self.monitors.values())

    def _require_active(self, txn: Transaction) -> None:
        if not txn.active:
            raise ProtocolError(f"transaction {txn.id} is already {txn.status}")

    def _abort(self, txn: Transaction, reason: str):
        self.reject(txn, reason)
        raise TransactionRejected(txn.id, reason)

    def _record(self, txn: Transaction, ex: Executed) -> None:
        inst = self.instances[ex.instance]
        rec = ex.record
        dim = inst.schema.dimension
        if not vector_leq(inverse_vector(rec, dim), rec.dynamic_dav) or not vector_leq(rec.dynamic_dav, ex.op.static_dav):
            raise ProtocolError(f"{ex.op.name}: access vectors out of order")
        txn.executed.append(ex)
        txn.pending = None
        entry = LogRecord(txn.id, ex.instance, rec.op_name, dict(rec.before_image), rec.dynamic_dav, inst.schema.field_names)
        with self._log_lock:
            self.log.setdefault(txn.id, []).append(entry)
            if self._log_path is not None:
                with open(self._log_path, "a", encoding="utf-8") as fh:
                    fh.write(entry.to_line() + "\n")

    def _retire(self, txn: Transaction) -> None:
        with self._log_lock:
            self.log.pop(txn.id, None)


class _MultiLock:
    """Acquire several locks in the given order."""

    def __init__(self, locks):
        self.locks = locks

    def __enter__(self):
        for lock in self.locks:
            lock.acquire()
        return self

    def __exit__(self, *exc):
        for lock in reversed(self.locks):
            lock.release()
        return False
