import io
import json
import signal
import socket
import subprocess
import sys

import pytest

import oracle
from offsim.cli import ReportRow, main, rows_from_csv, rows_to_csv
from offsim.emulator import EmulationConfig, emulate_socket
from offsim.emulator.wire import ERROR, decode_header, recv_exact
from offsim.profiles import ExecutionPlan, dump_profile, with_changes


def run(*argv):
    out = io.StringIO()
    status = main(list(argv), out)
    return status, out.getvalue()


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


# eval

def test_eval_csv(paper):
    status, text = run("eval", "--exit", "5", "--split", "0")
    assert status == 0
    header, line = text.strip().splitlines()
    assert header.split(",")[:3] == ["exit", "split", "accuracy"]
    row = rows_from_csv(text)[0]
    assert row.t_total_ms == pytest.approx(196.908, abs=1e-3)
    assert row.offload_active


def test_eval_json_fully_local():
    status, text = run("eval", "--exit", "5", "--split", "5", "--format", "json")
    doc = json.loads(text)
    assert status == 0
    assert doc["offload_active"] is False
    assert doc["t_total_ms"] == pytest.approx(oracle.plan_costs(5, 5)["t_total"], rel=1e-9)
    assert doc["e_comm_j"] == 0


def test_eval_format_before_subcommand():
    status, text = run("--format", "json", "eval", "--exit", "1", "--split", "0")
    assert status == 0
    assert json.loads(text)["accuracy"] == 0.32


def test_eval_exit_out_of_range(capsys):
    status, text = run("eval", "--exit", "6", "--split", "0")
    assert status == 2
    assert text == ""
    assert "exit out of range 1..5" in capsys.readouterr().err


def test_eval_idealized_differs():
    _, refined = run("eval", "--exit", "5", "--split", "2")
    _, ideal = run("eval", "--exit", "5", "--split", "2", "--idealized")
    assert rows_from_csv(refined)[0].t_total_ms != rows_from_csv(ideal)[0].t_total_ms


def test_missing_required_flag():
    assert run("eval", "--exit", "5")[0] == 2


# sweep

def test_sweep_csv_rows_and_roundtrip():
    status, text = run("sweep")
    assert status == 0
    rows = rows_from_csv(text)
    assert len(rows) == 30
    assert [(r.exit, r.split) for r in rows] == oracle.all_plans()
    assert rows_to_csv(rows) == text


def test_sweep_json():
    status, text = run("sweep", "--format", "json")
    doc = json.loads(text)
    assert status == 0 and len(doc) == 30
    assert set(doc[0]) == {f for f in ReportRow.__dataclass_fields__}


def test_sweep_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("sweep", "-o", str(a))[0] == 0
    assert run("sweep", "--output", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes().count(b"\n") == 31


def test_sweep_io_error(tmp_path, capsys):
    status, _ = run("sweep", "-o", str(tmp_path / "missing" / "out.csv"))
    assert status == 4
    assert "cannot write" in capsys.readouterr().err


# optimize

def test_optimize_delay_with_accuracy():
    status, text = run("optimize", "--min-accuracy", "0.9")
    assert status == 0
    lines = text.strip().splitlines()
    assert lines[-1].startswith("# ")
    row = rows_from_csv("\n".join(lines[:-1]) + "\n")[0]
    assert (row.exit, row.split) == (5, 0)
    assert row.t_total_ms == pytest.approx(196.91, abs=5e-3)


def test_optimize_json_has_justification():
    status, text = run("optimize", "--objective", "energy", "--format", "json")
    doc = json.loads(text)
    assert status == 0
    assert (doc["exit"], doc["split"]) == (1, 1)
    assert doc["justification"]


def test_optimize_infeasible(capsys):
    status, text = run("optimize", "--min-accuracy", "0.99")
    assert status == 5
    assert text == ""
    assert "min_accuracy" in capsys.readouterr().err


def test_optimize_max_delay_in_ms():
    status, text = run("optimize", "--objective", "energy", "--min-accuracy", "0.9",
                       "--max-delay", "250", "--format", "json")
    doc = json.loads(text)
    assert status == 0 and doc["t_total_ms"] <= 250 and doc["accuracy"] >= 0.9


def test_optimize_bad_weights():
    assert run("optimize", "--objective", "weighted", "--weight-delay", "0",
               "--weight-energy", "0")[0] == 2


# emulate

def _emulate_csv(text):
    blocks = text.strip().split("\n\n")
    trials = [line.split(",") for line in blocks[0].splitlines()[1:]]
    keys, values = (line.split(",") for line in blocks[1].splitlines())
    return trials, dict(zip(keys, map(float, values))), blocks[2:]


def test_emulate_event_trials():
    status, text = run("emulate", "--exit", "5", "--split", "0", "--trials", "250")
    assert status == 0
    trials, stats, _ = _emulate_csv(text)
    assert len(trials) == 250
    assert stats["std_ms"] == 0
    assert stats["mean_ms"] == pytest.approx(196.908, abs=1e-3)


def test_emulate_seed_reproducible():
    args = ("emulate", "--exit", "5", "--split", "2", "--trials", "20", "--jitter", "gaussian:3")
    a = run(*args, "--seed", "1")[1]
    assert a == run(*args, "--seed", "1")[1]
    assert a != run(*args, "--seed", "2")[1]


def test_emulate_no_jitter_seed_irrelevant():
    args = ("emulate", "--exit", "3", "--split", "1", "--trials", "5")
    assert run(*args, "--seed", "1")[1] == run(*args, "--seed", "2")[1]


def test_emulate_trace_and_json():
    status, text = run("emulate", "--exit", "5", "--split", "4", "--trace")
    assert status == 0
    _, _, rest = _emulate_csv(text)
    trace = rest[0].splitlines()
    assert trace[0] == "time_ms,stage"
    assert trace[-1].endswith(",done")
    doc = json.loads(run("emulate", "--exit", "5", "--split", "4", "--trace",
                         "--format", "json")[1])
    assert doc["trace"][-1]["stage"] == "done"
    assert doc["summary"]["mean_ms"] == pytest.approx(513.904, abs=1e-3)


@pytest.mark.parametrize("extra", [("--trials", "0"), ("--jitter", "uniform:2")])
def test_emulate_bad_args(extra):
    assert run("emulate", "--exit", "5", "--split", "0", *extra)[0] == 2


@pytest.mark.socket
def test_emulate_socket_without_server(capsys):
    status, text = run("emulate", "--exit", "5", "--split", "4", "--mode", "socket",
                       "--endpoint", f"127.0.0.1:{free_port()}", "--timeout", "2")
    assert status == 6
    assert text == ""
    assert "cannot connect" in capsys.readouterr().err


# bitrate

@pytest.mark.parametrize("argv, bps", [
    ((), 161126784.0),
    (("--n-rb", "0"), 0.0),
    (("--n-rb", "1", "--n-sub", "1", "--n-bits", "1", "--n-sym", "1", "--code-rate", "1"), 1.0),
])
def test_bitrate_examples(argv, bps):
    status, text = run("bitrate", "--format", "json", *argv)
    assert status == 0
    assert json.loads(text)["bitrate_bps"] == pytest.approx(bps)


def test_bitrate_text():
    status, text = run("bitrate")
    assert status == 0
    assert text.splitlines() == ["161126784.000 bit/s", "161.127 Mbps"]


@pytest.mark.parametrize("argv", [("--n-rb", "-1"), ("--code-rate", "1.5"), ("--code-rate", "0")])
def test_bitrate_bad(argv):
    assert run("bitrate", *argv)[0] == 2


# profiles

def test_profile_file_and_env(tmp_path, monkeypatch, paper):
    path = tmp_path / "fast.toml"
    dump_profile(with_changes(paper, network={"b_ul": 100.0}), path)
    via_flag = rows_from_csv(run("eval", "--exit", "5", "--split", "0",
                                 "--profile", str(path))[1])[0]
    monkeypatch.setenv("OFFSIM_PROFILE", str(path))
    via_env = rows_from_csv(run("eval", "--exit", "5", "--split", "0")[1])[0]
    assert via_flag == via_env
    assert via_flag.t_ul_ms < 196.908 - 100


def test_flag_beats_env(tmp_path, monkeypatch, paper):
    monkeypatch.setenv("OFFSIM_PROFILE", str(tmp_path / "nope.toml"))
    assert run("eval", "--exit", "5", "--split", "0")[0] == 3
    good = tmp_path / "good.toml"
    dump_profile(paper, good)
    assert run("eval", "--exit", "5", "--split", "0", "--profile", str(good))[0] == 0


def test_set_override():
    base = rows_from_csv(run("eval", "--exit", "5", "--split", "0")[1])[0]
    fast = rows_from_csv(run("eval", "--exit", "5", "--split", "0",
                             "--set", "network.b_ul=1000")[1])[0]
    assert fast.t_ul_ms < base.t_ul_ms


@pytest.mark.parametrize("argv, status", [
    (("--set", "network.b_ul=-1"), 3),
    (("--set", "network.bogus=1"), 3),
    (("--set", "noequals"), 2),
    (("--profile", "/nonexistent/profile.toml"), 3),
])
def test_profile_errors(argv, status, capsys):
    code, text = run("eval", "--exit", "5", "--split", "0", *argv)
    assert code == status
    assert text == ""
    assert capsys.readouterr().err


def test_malformed_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[network\nb_ul = ")
    assert run("sweep", "--profile", str(path))[0] == 3


# serve

def _start_server(port):
    proc = subprocess.Popen(
        [sys.executable, "-m", "offsim", "serve", "--endpoint", f"127.0.0.1:{port}"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    line = proc.stderr.readline()
    if "listening on" not in line:
        proc.kill()
        pytest.fail(f"server did not start: {line!r}")
    return proc


@pytest.mark.socket
def test_serve_round_and_sigint(paper):
    port = free_port()
    proc = _start_server(port)
    try:
        cfg = EmulationConfig(mode="socket", listen_endpoint=f"127.0.0.1:{port}")
        emulate_socket(ExecutionPlan(5, 4), paper, cfg)
        line = proc.stdout.readline()
        assert line.startswith("round exit=5 split=4 bytes_in=12575 bytes_out=200")

        # a malformed frame gets an ERROR reply and the server keeps running
        with socket.create_connection(("127.0.0.1", port), timeout=5) as s:
            s.sendall(b"NOPE" + bytes(12))
            header = decode_header(recv_exact(s, 16))
            assert header.msg_type == ERROR
        emulate_socket(ExecutionPlan(5, 3), paper, cfg)
        assert proc.stdout.readline().startswith("round exit=5 split=3")
    finally:
        proc.send_signal(signal.SIGINT)
        assert proc.wait(10) == 0


@pytest.mark.socket
def test_serve_sigterm():
    proc = _start_server(free_port())
    proc.send_signal(signal.SIGTERM)
    assert proc.wait(10) == 0
    assert proc.stdout.read() == ""


@pytest.mark.socket
def test_serve_port_in_use(capsys):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        s.listen(1)
        port = s.getsockname()[1]
        status, text = run("serve", "--endpoint", f"127.0.0.1:{port}")
    assert status == 6
    assert "cannot listen" in capsys.readouterr().err


def test_serve_bad_endpoint():
    assert run("serve", "--endpoint", "localhost")[0] == 6


def test_module_help():
    proc = subprocess.run([sys.executable, "-m", "offsim", "--help"], capture_output=True,
                          text=True, timeout=30)
    assert proc.returncode == 0
    for name in ("eval", "sweep", "optimize", "emulate", "serve", "bitrate"):
        assert name in proc.stdout
