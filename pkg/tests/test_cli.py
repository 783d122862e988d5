import json
import subprocess
import sys

import pytest

from fieldlock import harness
from fieldlock.cli import main
from fieldlock.trace import load_jsonl

from conftest import DATA


def report(text):
    return dict(line.split(": ", 1) for line in text.strip().splitlines())


def test_analyze_account(capsys):
    assert main(["analyze", str(DATA / "account.adt")]) == 0
    out = capsys.readouterr().out
    assert "  deposit     (W,N)" in out
    assert "  getOwner    (N,R)" in out
    assert "  noop        (N,N)" in out
    rows = {line.split()[0]: line.split()[1:] for line in out.splitlines()[9:]}
    assert rows["deposit"][3] == "yes" and rows["getOwner"][0] == "yes"
    assert rows["noop"] == ["yes"] * 6


def test_analyze_single_op(tmp_path, capsys):
    p = tmp_path / "one.adt"
    p.write_text("adt One(x: integer)\nop get() -> integer { return x }\n")
    assert main(["analyze", str(p)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1:] == ["  get   (R)", "  commutes:", "        get", "  get   yes"]


def test_analyze_parse_error(tmp_path, capsys):
    p = tmp_path / "bad.adt"
    p.write_text("adt Bad(x: integer)\nop f() { x := y }\n")
    assert main(["analyze", str(p)]) == 2
    assert "bad.adt:2:15:" in capsys.readouterr().err


def test_missing_file(capsys):
    assert main(["analyze", "/nonexistent.adt"]) == 2
    assert main(["run", "/nonexistent.wl"]) == 2


def test_usage_errors():
    for argv in (["run"], ["run", "x.wl", "--mode", "fast"], ["frob"], ["run", "x.wl", "--workers", "0"]):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == 2


def test_workload_parse_error(tmp_path, capsys):
    p = tmp_path / "bad.wl"
    p.write_text("instance a: Nope()\n")
    assert main(["run", str(p)]) == 2


def test_disjoint_compat_vs_static(capsys):
    blocks = {}
    for mode in ("compat", "static-av"):
        assert main(["run", "--mode", mode, "--seed", "1", str(DATA / "disjoint.wl")]) == 0
        blocks[mode] = int(report(capsys.readouterr().out)["block_events"])
    assert blocks["compat"] > 0
    assert blocks["static-av"] == 0


def test_conditional_downgrade(capsys):
    out = {}
    for mode in ("static-av", "dynamic-av"):
        assert main(["run", "--mode", mode, "--seed", "1", str(DATA / "conditional.wl")]) == 0
        out[mode] = report(capsys.readouterr().out)
    assert int(out["dynamic-av"]["early_releases"]) > 0
    assert int(out["static-av"]["early_releases"]) == 0
    assert int(out["dynamic-av"]["max_queue_wait"]) < int(out["static-av"]["max_queue_wait"])


def test_empty_workload_all_zero(capsys):
    assert main(["run", str(DATA / "empty.wl")]) == 0
    r = report(capsys.readouterr().out)
    assert r["verdict"] == "pass"
    for key in ("transactions", "committed", "rejected", "block_events", "early_releases",
                "max_queue_wait", "conflict_edges"):
        assert r[key] == "0"
    assert r["mean_queue_wait"] == "0.000"


def test_json_has_same_fields(capsys):
    main(["run", "--seed", "2", str(DATA / "bank.wl")])
    text = report(capsys.readouterr().out)
    main(["run", "--seed", "2", "--json", str(DATA / "bank.wl")])
    doc = json.loads(capsys.readouterr().out)
    assert list(doc) == list(text)
    assert doc["committed"] + doc["rejected"] == doc["transactions"] == 5
    assert doc["verdict"] == "pass"


def test_trace_and_log_outputs(tmp_path, capsys):
    trace, log = tmp_path / "trace.jsonl", tmp_path / "undo.log"
    argv = ["run", "--seed", "3", "--trace", str(trace), "--log", str(log), str(DATA / "bank.wl")]
    assert main(argv) == 0
    events = load_jsonl(trace.read_text().splitlines())
    assert {e.event for e in events} >= {"request", "grant", "release", "commit", "reject"}
    lines = log.read_text().splitlines()
    assert all(line.startswith("LOG ") for line in lines)
    assert "LOG Oops alice deposit balance=" in log.read_text()


def test_threads_driver(capsys):
    assert main(["run", "--driver", "threads", "--workers", "4", "--iterations", "5", str(DATA / "bank.wl")]) == 0
    assert report(capsys.readouterr().out)["transactions"] == "25"


def test_verification_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(harness, "check_serializable", lambda w, o: False)
    assert main(["run", str(DATA / "bank.wl")]) == 1
    assert report(capsys.readouterr().out)["verdict"] == "fail"


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "fieldlock.cli", "analyze", str(DATA / "quad.adt")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "incA   (W,N,N,N)" in proc.stdout
