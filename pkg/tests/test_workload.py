import random

import pytest

from fieldlock.dsl import DslSyntaxError, DuplicateNameError, UnknownIdentifierError
from fieldlock.interp import SchemaMismatch
from fieldlock.workload import OpCall, format_workload, load_workload, parse_workload, random_workload

from conftest import DATA


def parse(text):
    return parse_workload("use account.adt\n" + text, base_dir=DATA)


def test_bank_workload():
    w = load_workload(DATA / "bank.wl")
    assert w.instances["alice"] == ("Account", (100, "alice"))
    assert [t.name for t in w.transactions] == ["Pay", "Audit", "Rename", "Refund", "Oops"]
    assert w.transactions[0].calls == [OpCall("alice", "withdraw", (30,)), OpCall("bob", "deposit", (30,))]
    assert w.transactions[-1].abort
    assert not w.transactions[0].abort


def test_defaults_and_negative_literals():
    w = parse('instance a: Account(balance=-4)\ntxn T { a.deposit(-1); a.rename("x y") }')
    assert w.instances["a"] == ("Account", (-4, ""))
    assert w.transactions[0].calls[1].args == ("x y",)


def test_empty_workload():
    w = load_workload(DATA / "empty.wl")
    assert w.transactions == [] and w.instances == {}


def test_trailing_semicolon_and_empty_txn():
    w = parse("instance a: Account()\ntxn T { a.noop(); }\ntxn U { }")
    assert len(w.transactions[0].calls) == 1
    assert w.transactions[1].calls == []


@pytest.mark.parametrize(
    "text, exc",
    [
        ("instance a: Nope()", UnknownIdentifierError),
        ("instance a: Account(size=1)", UnknownIdentifierError),
        ("instance a: Account(balance=1, balance=2)", DuplicateNameError),
        ('instance a: Account(balance="x")', SchemaMismatch),
        ("instance a: Account()\ninstance a: Account()", DuplicateNameError),
        ("instance a: Account()\ntxn T { a.deposit(1) }\ntxn T { }", DuplicateNameError),
        ("instance a: Account()\ntxn T { b.deposit(1) }", UnknownIdentifierError),
        ("instance a: Account()\ntxn T { a.fly() }", UnknownIdentifierError),
        ("instance a: Account()\ntxn T { a.deposit() }", SchemaMismatch),
        ('instance a: Account()\ntxn T { a.deposit("1") }', SchemaMismatch),
        ("instance a: Account()\ntxn T { a.deposit(1) a.noop() }", DslSyntaxError),
        ("instance a: Account()\ntxn T { abort; a.noop() }", DslSyntaxError),
        ("frobnicate", DslSyntaxError),
    ],
)
def test_errors(text, exc):
    with pytest.raises(exc):
        parse(text)


def test_error_position():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("instance a: Account()\ninstance b: Nope()")
    assert (info.value.line, info.value.col) == (3, 13)


def test_missing_use_file():
    with pytest.raises(DslSyntaxError):
        parse_workload("use missing.adt\n", base_dir=DATA)


def test_duplicate_adt_via_use():
    with pytest.raises(DuplicateNameError):
        parse_workload("use account.adt\nuse account.adt\n", base_dir=DATA)


def test_format_round_trip():
    w = load_workload(DATA / "bank.wl")
    text = format_workload(w, {"Account": "account.adt"})
    again = parse_workload(text, base_dir=DATA)
    assert again.instances == w.instances
    assert again.transactions == w.transactions


def test_random_workloads_are_valid_and_round_trip():
    from fieldlock.dsl import format_adt

    for seed in range(100):
        w = random_workload(random.Random(seed))
        assert 1 <= len(w.transactions) <= 4
        assert all(1 <= len(t.calls) <= 3 for t in w.transactions)
        assert all(s.dimension <= 4 for s in w.schemas.values())
        sources = {f"{name}.adt": format_adt(s) for name, s in w.schemas.items()}
        text = format_workload(w, {name: f"{name}.adt" for name in w.schemas})
        again = parse_workload(text, adt_sources=sources)
        assert again.instances == w.instances
        assert again.transactions == w.transactions


def test_random_workload_is_deterministic():
    a = random_workload(random.Random(7))
    b = random_workload(random.Random(7))
    assert a.instances == b.instances and a.transactions == b.transactions
