import json
import subprocess
import sys

import pytest

from fieldport.cli import EXIT_CHECKS, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, config_hash, load_config, run


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def test_teleport_qudit(tmp_path):
    assert run(["teleport-qudit", "--dim", "3", "--trials", "20", "--seed", "7", "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "teleport-qudit.json").read_text())
    assert summary["passed"] and summary["subcommand"] == "teleport-qudit"
    assert {c["name"] for c in summary["checks"]} == {"uniform_probabilities", "corrected_fidelity"}
    assert "timestamp" not in json.dumps(summary)


def test_conformance_report(tmp_path):
    assert run(["conformance-report", "--out", str(tmp_path)]) == EXIT_OK
    s = json.loads((tmp_path / "conformance-report.json").read_text())
    assert s["results"]["parasitic_fraction"] == "1/2"
    assert s["results"]["parasitic_fraction_raw_wick"] == "1/3"
    assert any(r["matches"] for r in s["results"]["closed_form_sign_layouts"])


def test_nr_limit_csv(tmp_path):
    cfg = _write(tmp_path, "c.json", {"grid": {"n_points": 9, "spacing": 0.5}})
    assert run(["nr-limit", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    lines = (tmp_path / "o" / "nr_limit.csv").read_text().splitlines()
    assert lines[0] == "X,P,prob" and len(lines) == 82


def test_formats_filter(tmp_path):
    cfg = _write(tmp_path, "c.json", {"grid": {"n_points": 9}, "output": {"formats": ["json"]}})
    assert run(["nr-limit", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["nr-limit.json"]


@pytest.mark.parametrize(
    "cfg,needle",
    [
        ({"packet": {"sigma_k": -1}}, "packet.sigma_k"),
        ({"bogus": 1}, "bogus"),
        ({"grid": {"n_points": 8}}, "odd"),
        ({"packet": {"t0": 1.0}, "times": {"t_packet": 2.0}}, "times.t_packet"),
    ],
)
def test_invalid_config_exit_2(tmp_path, capsys, cfg, needle):
    path = _write(tmp_path, "bad.json", cfg)
    assert run(["nr-limit", "--config", path, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert needle in capsys.readouterr().err


def test_malformed_json_reports_position(tmp_path, capsys):
    path = _write(tmp_path, "bad.json", '{"grid":\n  {"n_points": }}')
    assert run(["nr-limit", "--config", path]) == EXIT_CONFIG
    assert "line 2, column" in capsys.readouterr().err


def test_amplitude_scan_needs_1d(tmp_path, capsys):
    assert run(["amplitude-scan", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("FIELDPORT_THREADS", "many")
    assert run(["teleport-qudit", "--trials", "1", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_numerical_failure_exit_3(tmp_path, capsys):
    cfg = _write(tmp_path, "c.json", {"scan": {"points": [[1.0, 1.0, 0.0, 0.0]]}})
    assert run(["propagator-scan", "--config", cfg, "--out", str(tmp_path)]) == EXIT_NUMERIC
    assert "numerical failure" in capsys.readouterr().err


def test_failed_check_exit_1(tmp_path, monkeypatch, capsys):
    import fieldport.cli as cli

    def failing(args, cfg, conv, out, threads):
        return {}, [cli._check("always_fails", False, 1.0, 0.0)]

    monkeypatch.setitem(cli.COMMANDS, "teleport-qudit", failing)
    assert run(["teleport-qudit", "--out", str(tmp_path)]) == EXIT_CHECKS
    assert "FAIL always_fails" in capsys.readouterr().out
    assert json.loads((tmp_path / "teleport-qudit.json").read_text())["passed"] is False


def test_config_hash_canonical():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert load_config(None) == {}


def test_no_temp_files_left(tmp_path):
    run(["conformance-report", "--out", str(tmp_path)])
    assert not [p for p in tmp_path.iterdir() if p.name.endswith(".tmp")]


def test_console_script_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "fieldport.cli", "teleport-qudit", "--trials", "2", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert r.returncode == 0 and "PASS" in r.stdout
