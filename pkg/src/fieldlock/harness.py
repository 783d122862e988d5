"""Run workloads under a scheduler mode and verify the results.

Two drivers share the same transaction code:

* ``step``: single-threaded, a seeded RNG picks which runnable transaction
  takes its next atomic step. Same seed, same trace.
* ``threads``: a pool of real worker threads, one transaction at a time each.
"""

from __future__ import annotations

import logging
import random
import threading
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Optional

import networkx as nx

from .oracle import EnumerationBoundError, Outcome, check_serializable, conflict_graph
from .trace import Trace
from .txn import Blocked, TransactionManager, TransactionRejected
from .workload import Workload

log = logging.getLogger(__name__)

DRIVERS = ("step", "threads")


@dataclass
class RunConfig:
    mode: str = "dynamic-av"
    driver: str = "step"
    workers: int = 4
    seed: int = 0
    iterations: int = 1
    trace_path: Optional[str] = None
    log_path: Optional[str] = None
    check_invariants: bool = True
    step_pause: Optional[float] = 0.0

    def __post_init__(self):
        if self.driver not in DRIVERS:
            raise ValueError(f"unknown driver {self.driver!r}")
        if self.workers < 1 or self.iterations < 1:
            raise ValueError("workers and iterations must be positive")


@dataclass
class MetricsReport:
    mode: str
    transactions: int = 0
    committed: int = 0
    rejected: int = 0
    block_events: int = 0
    early_releases: int = 0
    mean_queue_wait: float = 0.0
    max_queue_wait: int = 0
    queue_waits: int = 0
    conflict_edges: int = 0
    deadlock_victims: int = 0
    invariant_violations: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    outcome: Outcome
    trace: Trace
    manager: TransactionManager
    metrics: MetricsReport
    serializable: Optional[bool] = None
    acyclic: bool = True
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.acyclic and self.serializable is not False


def _script(manager: TransactionManager, txn, script, returns: dict):
    try:
        out = []
        for call in script.calls:
            value = yield from manager.operation_steps(txn, call.instance, call.op, call.args)
            out.append(value)
        returns[txn.id] = out
        if script.abort:
            manager.reject(txn, "scripted abort")
        else:
            manager.commit(txn)
    except TransactionRejected:
        pass


def _setup(workload: Workload, config: RunConfig, trace: Trace) -> TransactionManager:
    pause = config.step_pause if config.driver == "threads" else None
    manager = TransactionManager(config.mode, trace, config.log_path, config.check_invariants, step_pause=pause)
    for name, (sname, values) in workload.instances.items():
        manager.add_instance(name, workload.schemas[sname], values)
    return manager


class StepScheduler:
    """Seeded interleaving of transaction steps on one thread."""

    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.step = 0

    def run(self, manager: TransactionManager, workload: Workload, returns: dict) -> None:
        live = {}
        for script in workload.transactions:
            txn = manager.begin(script.name)
            live[txn.id] = [_script(manager, txn, script, returns), None]
        while live:
            runnable = [t for t, (_, last) in live.items() if not isinstance(last, Blocked) or last.request.event.is_set()]
            if not runnable:
                raise RuntimeError(f"scheduler stalled with {sorted(live)} blocked")
            tid = self.rng.choice(sorted(runnable))
            gen = live[tid][0]
            self.step += 1
            try:
                live[tid][1] = gen.send(None)
            except StopIteration:
                del live[tid]


def _run_threads(manager: TransactionManager, workload: Workload, returns: dict, workers: int) -> None:
    pending = deque()
    for script in workload.transactions:
        pending.append((manager.begin(script.name), script))
    lock = threading.Lock()
    errors = []

    def worker():
        while True:
            with lock:
                if not pending:
                    return
                txn, script = pending.popleft()
            try:
                manager.drive(_script(manager, txn, script, returns))
            except BaseException as exc:  # surfaced after join
                errors.append(exc)
                return

    threads = [threading.Thread(target=worker, daemon=True) for _ in range(min(workers, max(1, len(pending))))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]


def compute_metrics(mode: str, manager: TransactionManager, trace: Trace, graph: nx.DiGraph) -> MetricsReport:
    txns = manager.transactions.values()
    blocked_at = {}
    waits = []
    for ev in trace:
        key = (ev.req, ev.field)
        if ev.event == "block":
            blocked_at[key] = ev.ts
        elif ev.event == "grant" and key in blocked_at:
            waits.append(ev.ts - blocked_at.pop(key))
    return MetricsReport(
        mode=mode,
        transactions=len(manager.transactions),
        committed=sum(t.status == "committed" for t in txns),
        rejected=sum(t.status == "rejected" for t in txns),
        block_events=trace.count("block"),
        early_releases=trace.count("downgrade"),
        mean_queue_wait=sum(waits) / len(waits) if waits else 0.0,
        max_queue_wait=max(waits, default=0),
        queue_waits=len(waits),
        conflict_edges=graph.number_of_edges(),
        deadlock_victims=len(manager.victims),
        invariant_violations=sum(m.violations for m in manager.monitors.values()),
    )


def run_workload(workload: Workload, config: RunConfig, seed: Optional[int] = None, verify: bool = True) -> RunResult:
    """One execution of ``workload``; ``seed`` overrides ``config.seed``."""
    seed = config.seed if seed is None else seed
    returns: dict = {}
    if config.driver == "step":
        scheduler = StepScheduler(seed)
        trace = Trace(clock=lambda: scheduler.step)
        manager = _setup(workload, config, trace)
        scheduler.run(manager, workload, returns)
    else:
        trace = Trace()
        manager = _setup(workload, config, trace)
        _run_threads(manager, workload, returns, config.workers)

    committed = [t.id for t in manager.transactions.values() if t.status == "committed"]
    outcome = Outcome.build(manager.instances, returns, committed)
    graph = conflict_graph(trace)
    result = RunResult(outcome, trace, manager, compute_metrics(config.mode, manager, trace, graph))
    result.acyclic = nx.is_directed_acyclic_graph(graph)
    if verify:
        try:
            result.serializable = check_serializable(workload, outcome)
        except EnumerationBoundError as exc:
            log.warning("serializability check skipped: %s", exc)
            result.notes.append(f"serializability check skipped: {exc}")
    return result


def merge_metrics(reports: list) -> MetricsReport:
    if not reports:
        raise ValueError("no reports")
    total = MetricsReport(reports[0].mode)
    wait_sum = 0.0
    for r in reports:
        for name in ("transactions", "committed", "rejected", "block_events", "early_releases",
                     "queue_waits", "conflict_edges", "deadlock_victims", "invariant_violations"):
            setattr(total, name, getattr(total, name) + getattr(r, name))
        total.max_queue_wait = max(total.max_queue_wait, r.max_queue_wait)
        wait_sum += r.mean_queue_wait * r.queue_waits
    total.mean_queue_wait = wait_sum / total.queue_waits if total.queue_waits else 0.0
    return total


def run(config: RunConfig, workload: Workload) -> tuple:
    """Run ``config.iterations`` seeds; return (merged metrics, verdict, results)."""
    results = []
    for k in range(config.iterations):
        res = run_workload(workload, config, seed=config.seed + k)
        results.append(res)
    if config.trace_path:
        results[-1].trace.write(config.trace_path)
    verdict = all(r.passed for r in results)
    return merge_metrics([r.metrics for r in results]), verdict, results
