from pathlib import Path

import pytest

from fieldlock.dsl import parse_adt

DATA = Path(__file__).resolve().parent.parent / "demos" / "data"
CORPUS = Path(__file__).resolve().parent / "corpus"

_acceptance: list = []


def record_acceptance(number: int, name: str, ok: bool, detail: str = "") -> None:
    _acceptance.append((number, name, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(_acceptance):
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] {number:2d}. {name}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)


@pytest.fixture
def account():
    return parse_adt((DATA / "account.adt").read_text())


@pytest.fixture
def capped():
    return parse_adt((DATA / "capped.adt").read_text())


@pytest.fixture
def shop():
    return parse_adt((CORPUS / "shop.adt").read_text())
