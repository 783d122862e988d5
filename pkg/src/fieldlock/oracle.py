"""Ground-truth serializability checks by brute force.

Two outcomes are equivalent when every instance ends with the same field
values and every committed transaction got the same return values.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

import networkx as nx

from .core import Mode, compatible
from .interp import ExecutionFault, execute
from .trace import TraceEvent
from .workload import Workload

MAX_ENUMERATION = 6


class EnumerationBoundError(ValueError):
    pass


@dataclass(frozen=True)
class Outcome:
    finals: tuple  # ((instance, values), ...) sorted by instance
    returns: tuple  # ((txn, (value, ...)), ...) sorted by txn, committed only
    committed: frozenset

    @classmethod
    def build(cls, instances: dict, returns: dict, committed: Iterable[str]) -> "Outcome":
        committed = frozenset(committed)
        finals = tuple(sorted((name, inst.snapshot()) for name, inst in instances.items()))
        rets = tuple(sorted((t, tuple(v)) for t, v in returns.items() if t in committed))
        return cls(finals, rets, committed)


def initial_outcome(w: Workload) -> Outcome:
    return Outcome.build(w.fresh_instances(), {}, ())


def run_serial(w: Workload, order: Iterable[str]) -> Optional[Outcome]:
    """Run the named transactions one after another from the initial state.

    Returns ``None`` if some transaction faults in this order, since such an
    order is not a serial execution of all of them.
    """
    order = list(order)
    scripts = {t.name: t for t in w.transactions}
    instances = w.fresh_instances()
    returns = {}
    for name in order:
        out = []
        for call in scripts[name].calls:
            inst = instances[call.instance]
            op = inst.schema.operation(call.op)
            try:
                out.append(execute(op, call.args, inst).result)
            except ExecutionFault:
                return None
        returns[name] = out
    return Outcome.build(instances, returns, order)


def serial_outcomes(w: Workload, committed: Iterable[str]) -> set:
    committed = sorted(set(committed))
    if len(committed) > MAX_ENUMERATION:
        raise EnumerationBoundError(f"{len(committed)} committed transactions exceed the enumeration bound {MAX_ENUMERATION}")
    known = {t.name for t in w.transactions}
    unknown = set(committed) - known
    if unknown:
        raise KeyError(f"unknown transactions {sorted(unknown)}")
    outcomes = set()
    for perm in itertools.permutations(committed):
        outcome = run_serial(w, perm)
        if outcome is not None:
            outcomes.add(outcome)
    return outcomes


def check_serializable(w: Workload, observed: Outcome) -> bool:
    return observed in serial_outcomes(w, observed.committed)


def conflict_graph(trace: Iterable[TraceEvent]) -> nx.DiGraph:
    """Field-level conflict graph of a scheduler trace.

    Each granted access keeps the mode it ended with after any downgrade.
    ``T -> T'`` when T's access precedes a conflicting access of T' on the
    same (instance, field). If the trace carries terminal events, only
    committed transactions take part.
    """
    accesses: dict = {}
    committed, terminated = set(), False
    txns = set()
    for ev in sorted(trace, key=lambda e: e.seq):
        txns.add(ev.txn)
        if ev.event == "commit":
            committed.add(ev.txn)
            terminated = True
        elif ev.event == "reject":
            terminated = True
        elif ev.event == "grant":
            key = (ev.req, ev.instance, ev.field)
            if key not in accesses:
                accesses[key] = [ev.seq, ev.txn, Mode.from_letter(ev.mode)]
            else:
                accesses[key][2] = max(accesses[key][2], Mode.from_letter(ev.mode))
        elif ev.event == "downgrade":
            key = (ev.req, ev.instance, ev.field)
            if key not in accesses:
                raise ValueError(f"downgrade without grant at seq {ev.seq}")
            accesses[key][2] = Mode.from_letter(ev.mode)
        elif ev.event not in ("request", "block", "release"):
            raise ValueError(f"unknown event {ev.event!r} at seq {ev.seq}")

    keep = committed if terminated else txns
    graph = nx.DiGraph()
    graph.add_nodes_from(sorted(keep))
    by_item: dict = {}
    for (req, inst, fld), (seq, txn, mode) in accesses.items():
        if txn in keep and mode is not Mode.NULL:
            by_item.setdefault((inst, fld), []).append((seq, txn, mode))
    for items in by_item.values():
        items.sort()
        for a in range(len(items)):
            for b in range(a + 1, len(items)):
                _, t1, m1 = items[a]
                _, t2, m2 = items[b]
                if t1 != t2 and not compatible(m1, m2):
                    graph.add_edge(t1, t2)
    return graph
