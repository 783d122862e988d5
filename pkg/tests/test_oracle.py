import random

import pytest
from hypothesis import given, settings, strategies as st

from fieldlock.core import Mode
from fieldlock.harness import RunConfig, run_workload
from fieldlock.oracle import (
    MAX_ENUMERATION,
    EnumerationBoundError,
    Outcome,
    check_serializable,
    conflict_graph,
    initial_outcome,
    run_serial,
    serial_outcomes,
)
from fieldlock.trace import Trace, load_jsonl
from fieldlock.workload import load_workload, parse_workload, random_workload

from conftest import DATA

QUAD = "use quad.adt\ninstance q: Quad()\n"


def wl(text):
    return parse_workload(QUAD + text, base_dir=DATA)


def test_disjoint_writes_single_outcome():
    w = wl("txn T1 { q.incA(1) }\ntxn T2 { q.incB(2) }")
    outs = serial_outcomes(w, ["T1", "T2"])
    assert len(outs) == 1
    (o,) = outs
    assert o.finals == (("q", (1, 2, 0, 0)),)


def test_empty_committed_set_is_initial_state():
    w = wl("txn T1 { q.incA(1) }")
    assert serial_outcomes(w, []) == {initial_outcome(w)}


def test_increments_commute_semantically():
    w = wl("txn T1 { q.incA(1) }\ntxn T2 { q.incA(2) }")
    (o,) = serial_outcomes(w, ["T1", "T2"])
    assert dict(o.finals)["q"] == (3, 0, 0, 0)


def test_order_dependent_returns_give_two_outcomes():
    w = wl("txn T1 { q.incA(1) }\ntxn T2 { q.total() }")
    outs = serial_outcomes(w, ["T1", "T2"])
    assert {dict(o.returns)["T2"] for o in outs} == {(0,), (1,)}


def test_single_transaction_run_is_serializable():
    w = wl("txn T1 { q.incA(1); q.total() }")
    res = run_workload(w, RunConfig())
    assert res.serializable is True
    assert dict(res.outcome.returns)["T1"] == (None, 1)


def test_lost_update_is_not_serializable():
    w = wl("txn T1 { q.incA(1) }\ntxn T2 { q.incA(2) }")
    inst = w.fresh_instances()
    inst["q"].values[0] = 2  # T1's increment overwritten by T2
    lost = Outcome.build(inst, {"T1": [None], "T2": [None]}, ["T1", "T2"])
    assert not check_serializable(w, lost)


def test_enumeration_bound():
    text = "".join(f"txn T{k} {{ q.incA(1) }}\n" for k in range(MAX_ENUMERATION + 1))
    w = wl(text)
    names = [t.name for t in w.transactions]
    assert len(serial_outcomes(w, names[:MAX_ENUMERATION])) == 1
    with pytest.raises(EnumerationBoundError):
        serial_outcomes(w, names)


def test_unknown_transaction():
    with pytest.raises(KeyError):
        serial_outcomes(wl("txn T1 { q.incA(1) }"), ["T9"])


def test_faulting_order_is_skipped():
    src = "adt D(x: integer)\nop setZero() { x := 0 }\nop inv() -> integer { return 10 / x }\n"
    w = parse_workload("use d.adt\ninstance d: D(x=5)\ntxn A { d.setZero() }\ntxn B { d.inv() }",
                       adt_sources={"d.adt": src})
    assert run_serial(w, ["A", "B"]) is None
    (o,) = serial_outcomes(w, ["A", "B"])
    assert dict(o.returns)["B"] == (2,)


def _ev(trace, txn, event, req=None, field=None, mode=None):
    trace.emit(txn, event, "op", req, "x", field, mode)


class TestConflictGraph:
    def test_readers_have_no_edges(self):
        t = Trace()
        _ev(t, "T1", "grant", 1, 0, Mode.READ)
        _ev(t, "T2", "grant", 2, 0, Mode.READ)
        g = conflict_graph(t)
        assert set(g.nodes) == {"T1", "T2"} and g.number_of_edges() == 0

    def test_writer_then_reader(self):
        t = Trace()
        _ev(t, "T1", "grant", 1, 0, Mode.WRITE)
        _ev(t, "T1", "commit")
        _ev(t, "T1", "release", 1, 0, Mode.WRITE)
        _ev(t, "T2", "grant", 2, 0, Mode.READ)
        _ev(t, "T2", "commit")
        assert list(conflict_graph(t).edges) == [("T1", "T2")]

    def test_downgrade_to_null_removes_conflict(self):
        t = Trace()
        _ev(t, "T1", "grant", 1, 0, Mode.WRITE)
        _ev(t, "T1", "downgrade", 1, 0, Mode.NULL)
        _ev(t, "T2", "grant", 2, 0, Mode.WRITE)
        assert conflict_graph(t).number_of_edges() == 0

    def test_rejected_transactions_excluded(self):
        t = Trace()
        _ev(t, "T1", "grant", 1, 0, Mode.WRITE)
        _ev(t, "T1", "reject")
        _ev(t, "T2", "grant", 2, 0, Mode.WRITE)
        _ev(t, "T2", "commit")
        g = conflict_graph(t)
        assert set(g.nodes) == {"T2"}

    def test_malformed(self):
        t = Trace()
        _ev(t, "T1", "downgrade", 1, 0, Mode.READ)
        with pytest.raises(ValueError):
            conflict_graph(t)
        with pytest.raises(ValueError):
            load_jsonl(['{"seq": 0}'])

    def test_jsonl_round_trip(self):
        res = run_workload(load_workload(DATA / "bank.wl"), RunConfig(seed=3))
        events = load_jsonl(res.trace.to_jsonl().splitlines())
        assert events == list(res.trace)
        assert set(conflict_graph(events).edges) == set(conflict_graph(res.trace).edges)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["compat", "static-av", "dynamic-av"]))
def test_acyclic_implies_serializable(seed, mode):
    w = random_workload(random.Random(seed))
    res = run_workload(w, RunConfig(mode=mode), seed=seed)
    assert res.acyclic
    assert res.serializable


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_atomicity_of_rejects(seed):
    # final state equals replaying only the committed transactions in some order
    w = random_workload(random.Random(seed), abort_rate=0.5)
    res = run_workload(w, RunConfig(), seed=seed)
    finals = {o.finals for o in serial_outcomes(w, res.outcome.committed)}
    assert res.outcome.finals in finals
