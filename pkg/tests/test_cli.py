import csv
import json
import math
import shutil
import subprocess

import pytest

from catlink import __version__, cli
from catlink.detection import entanglement_curve


def run(args, tmp_path, name="out.csv"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def read_csv(path):
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    body = list(csv.reader(l for l in lines if not l.startswith("#")))
    return header, body[0], body[1:]


# --------------------------------------------------------------------------- parsing


def test_grid_parsing():
    assert cli.parse_grid("0:1:0.25") == [0, 0.25, 0.5, 0.75, 1]
    assert cli.parse_grid("0:0.3:0.1") == [0, 0.1, 0.2, 0.3]
    assert cli.parse_grid("0.9, 0.5,0.1") == [0.9, 0.5, 0.1]
    for bad in ("0:1", "1:0:0.1", "0:1:0"):
        with pytest.raises(ValueError):
            cli.parse_grid(bad)


def test_config_validation_names_the_key():
    with pytest.raises(cli.ConfigError) as info:
        cli.ExperimentConfig("purify-walk", {"r": "1.5"}).resolved()
    assert info.value.key == "r"
    with pytest.raises(cli.ConfigError) as info:
        cli.ExperimentConfig("purify-walk", {"gamma": "1"}).resolved()
    assert info.value.key == "gamma"


# --------------------------------------------------------------------------- experiments


def test_eof_curve(tmp_path):
    code, out = run(["eof-curve", "--r", "0:1:0.01"], tmp_path)
    assert code == 0
    header, cols, rows = read_csv(out)
    assert header[0] == cli.MAGIC and f"# version={__version__}" in header
    assert cols == ["r", "E"]
    assert len(rows) == 101
    ref = entanglement_curve([i / 100 for i in range(101)])
    for (r, e), (r_ref, e_ref) in zip(rows, ref):
        assert float(r) == pytest.approx(r_ref, abs=1e-12)
        assert float(e) == e_ref
    assert float(rows[0][1]) == 0 and float(rows[-1][1]) == 1


def test_purify_walk_is_bit_identical(tmp_path):
    _, a = run(["purify-walk", "--r", "0.5", "--seed", "1"], tmp_path, "a.csv")
    _, b = run(["purify-walk", "--r", "0.5", "--seed", "1"], tmp_path, "b.csv")
    assert a.read_bytes() == b.read_bytes()
    _, cols, rows = read_csv(a)
    assert cols == ["n", "R", "sign", "p"]
    assert float(rows[0][1]) == 0.5
    assert 1 - abs(float(rows[-1][1])) < 1e-5


def test_output_round_trips_through_config(tmp_path):
    _, first = run(["purify-walk", "--r", "0.3", "--seed", "9"], tmp_path, "first.csv")
    code, second = run(["purify-walk", "--config", str(first)], tmp_path, "second.csv")
    assert code == 0
    assert first.read_bytes() == second.read_bytes()


def test_json_round_trip(tmp_path):
    _, first = run(["backaction-curve", "--gamma", "0,0.5,1"], tmp_path, "first.json")
    doc = json.loads(first.read_text())
    assert doc["config"]["experiment"] == "backaction-curve"
    assert doc["columns"] == ["gamma", "C", "S", "E"]
    assert doc["rows"][0] == [0.0, 1.0, 0.0, 1.0]
    _, second = run(["backaction-curve", "--config", str(first)], tmp_path, "second.json")
    assert first.read_text() == second.read_text()


def test_key_value_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "walk.cfg"
    cfg.write_text("# a walk\nr = 0.4\nseed=2  # trailing comment\n")
    _, a = run(["purify-walk", "--config", str(cfg), "--seed", "5"], tmp_path, "a.csv")
    _, b = run(["purify-walk", "--r", "0.4", "--seed", "5"], tmp_path, "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_mean_steps_table(tmp_path):
    code, out = run(["mean-steps", "--r", "0.9,0.5", "--trials", "500", "--seed", "4"], tmp_path)
    assert code == 0
    _, cols, rows = read_csv(out)
    assert cols == ["r", "nbar", "stderr", "nbar_exact"]
    for r, nbar, se, exact in rows:
        assert abs(float(nbar) - float(exact)) < 4 * float(se)


def test_other_experiments_run(tmp_path):
    cases = [
        ["prepare", "--alpha", "1.5"],
        ["prepare", "--alpha", "1.5", "--mode", "third-party"],
        ["transmit", "--alpha", "1", "--l_over_L", "0,0.5", "--T0", "0.9", "--T1", "0.9"],
        ["purify-fock", "--alpha", "2.5", "--R", "0.5", "--r", "0.5", "--seed", "3"],
        ["interference", "--alpha", "2", "--r", "-0.5", "--gamma", "0.5", "--dphi-grid", "0,1.5707963267948966,3.141592653589793"],
        ["complementarity", "--alpha", "3"],
    ]
    for i, args in enumerate(cases):
        code, out = run(args, tmp_path, f"{i}.csv")
        assert code == 0, args
        _, cols, rows = read_csv(out)
        assert rows and all(len(r) == len(cols) for r in rows)


def test_interference_summary(tmp_path):
    _, out = run(["interference", "--alpha", "3", "--r", "-0.5", "--gamma", "0.5"], tmp_path)
    header, _, _ = read_csv(out)
    summary = dict(l[3:].split(": ") for l in header if l.startswith("#! "))
    assert float(summary["contrast"]) == pytest.approx(0.5, abs=1e-6)
    assert summary["sign_of_r"] == "-1"


# --------------------------------------------------------------------------- errors


def test_invalid_parameter_exits_with_config_error(tmp_path, capsys):
    code, out = run(["purify-walk", "--r", "2"], tmp_path)
    assert code == 2
    assert not out.exists()
    lines = capsys.readouterr().err.strip().splitlines()
    assert len(lines) == 1
    assert lines[0].startswith("catlink: error: kind=config key=r message=")


def test_unknown_parameter_and_experiment(tmp_path, capsys):
    assert run(["eof-curve", "--gamma", "1"], tmp_path)[0] == 2
    assert "key=gamma" in capsys.readouterr().err
    assert run(["teleport"], tmp_path)[0] == 2


def test_bad_thread_setting(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CATLINK_THREADS", "lots")
    assert run(["eof-curve"], tmp_path)[0] == 2
    assert "key=CATLINK_THREADS" in capsys.readouterr().err


def test_nonconvergence_exit(tmp_path, capsys):
    code, out = run(["purify-walk", "--r", "0.1", "--max_steps", "3"], tmp_path)
    assert code == 3
    assert "kind=nonconvergence" in capsys.readouterr().err
    code, _ = run(["mean-steps", "--r", "0.1", "--trials", "5", "--max_steps", "3"], tmp_path)
    assert code == 3


def test_truncation_warning_goes_to_stderr(tmp_path, capsys):
    code, _ = run(["prepare", "--alpha", "3", "--cutoff", "8"], tmp_path)
    assert code == 0
    err = capsys.readouterr().err
    assert "catlink: warning: kind=truncation" in err


def test_infinite_values_are_written_as_text(tmp_path):
    assert cli._fmt(math.inf) == "inf"
    assert cli._fmt(0.1) == "0.1"


@pytest.mark.skipif(shutil.which("catlink") is None, reason="console script not installed")
def test_console_script(tmp_path):
    out = tmp_path / "e.json"
    proc = subprocess.run(
        ["catlink", "eof-curve", "--r", "0,1", "--out", str(out), "--format", "json"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["rows"] == [[0.0, 0.0], [1.0, 1.0]]
