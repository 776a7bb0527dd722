"""CLI tests: argument handling, exit codes, and output shapes."""

import json
import signal
import subprocess
import sys
import time

import pytest

from csrflab import cli, harness
from csrflab.forum import DefenseMode
from csrflab.harness import AttackOutcome, MatrixReport, ScenarioId, ScenarioSetupFailed
from csrflab.httpcore import HttpMethod, make_request, parse_response, serialize
from csrflab.transport import TcpTransport


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["--version"])
    assert excinfo.value.code == 0
    assert capsys.readouterr().out.startswith("csrf-lab ")


def test_unknown_scenario_is_an_argument_error():
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["attack", "--scenario", "A9", "--policy", "none"])
    assert excinfo.value.code == 2


class TestFixturesCommand:
    def test_writes_the_three_pages(self, tmp_path, capsys):
        assert cli.main(["fixtures", "--emit", str(tmp_path / "fx")]) == 0
        out = capsys.readouterr().out.splitlines()
        assert len(out) == 3
        attack_page = (tmp_path / "fx" / "attack_form.html").read_text()
        assert 'id="post-form"' in attack_page
        assert "http://127.0.0.1:8080/cgi-bin/Forum/new_pm.php" in attack_page
        assert (tmp_path / "fx" / "login_form.html").exists()
        assert (tmp_path / "fx" / "index.html").exists()


class TestAttackCommand:
    def test_plain_report(self, capsys):
        assert cli.main(["attack", "--scenario", "A1", "--policy", "none"]) == 0
        out = capsys.readouterr().out
        assert "A1 under none: attack SUCCEEDED (status 302" in out

    def test_defended_attack_still_exits_zero(self, capsys):
        # A blocked attack is a completed experiment, not an error.
        assert cli.main(["attack", "--scenario", "A2", "--policy", "csrf_token"]) == 0
        assert "attack failed (status 403" in capsys.readouterr().out

    def test_json_cell(self, capsys):
        assert (
            cli.main(
                ["attack", "--scenario", "A4", "--policy", "origin_check",
                 "--spoof-origin", "--json"]
            )
            == 0
        )
        cell = json.loads(capsys.readouterr().out)
        assert cell["scenario"] == "A4"
        assert cell["spoof"] is True
        assert (cell["success"], cell["status"]) == (True, 302)

    def test_setup_failure_exits_two(self, monkeypatch, capsys):
        def explode(*args, **kwargs):
            raise ScenarioSetupFailed("injected")

        monkeypatch.setattr(harness, "run_scenario", explode)
        assert cli.main(["attack", "--scenario", "A1", "--policy", "none"]) == 2
        assert "injected" in capsys.readouterr().err


def _dead_cell():
    return AttackOutcome(
        scenario=ScenarioId.A1_LOAD_URL_ASSET_FORM,
        defense=DefenseMode.NONE,
        spoof=False,
        success=False,
        http_status=0,
        evidence=[],
        notes="ScenarioSetupFailed: injected",
    )


run_matrix_original = harness.run_matrix


def harness_run_matrix_fast(seed):
    # The real thing, just over the in-process transport; the CLI-level
    # tests only care about plumbing around the report.
    return run_matrix_original(seed=seed, in_process=True)


class TestMatrixCommand:
    def test_matching_run_exits_zero_and_writes_report(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setattr(
            harness, "run_matrix", lambda seed: harness_run_matrix_fast(seed)
        )
        out_path = tmp_path / "report.json"
        assert cli.main(["matrix", "--json", str(out_path)]) == 0
        printed = capsys.readouterr().out
        assert "matrix matches the expected grid (17 cells)" in printed
        doc = json.loads(out_path.read_text())
        assert list(doc.keys()) == ["seed", "version", "cells"]
        assert len(doc["cells"]) == 17

    def test_grid_mismatch_exits_one(self, monkeypatch, capsys):
        monkeypatch.setattr(
            harness, "run_matrix", lambda seed: harness_run_matrix_fast(seed)
        )
        monkeypatch.setattr(harness, "compare_with_expected", lambda report: ["cell off"])
        assert cli.main(["matrix"]) == 1
        assert "cell off" in capsys.readouterr().err

    def test_dead_cell_exits_two(self, monkeypatch, capsys):
        report = MatrixReport(grid=[_dead_cell()], seed=1)
        monkeypatch.setattr(harness, "run_matrix", lambda seed: report)
        assert cli.main(["matrix"]) == 2
        assert "ScenarioSetupFailed" in capsys.readouterr().err

    def test_unwritable_report_path_exits_two(self, monkeypatch, capsys):
        report = MatrixReport(grid=[], seed=1)
        monkeypatch.setattr(harness, "run_matrix", lambda seed: report)
        assert cli.main(["matrix", "--json", "/nonexistent-dir/report.json"]) == 2
        assert "cannot write report" in capsys.readouterr().err


class TestServeCommand:
    def test_missing_config_file_exits_two(self, capsys):
        assert cli.main(["serve", "--config", "/nonexistent/lab.conf"]) == 2
        assert "csrf-lab:" in capsys.readouterr().err

    def test_bad_config_key_exits_two(self, tmp_path, capsys):
        conf = tmp_path / "lab.conf"
        conf.write_text("listen = yes\n")
        assert cli.main(["serve", "--config", str(conf)]) == 2
        assert "listen" in capsys.readouterr().err

    def test_port_collision_exits_two(self, lab_server, capsys):
        server = lab_server()
        assert cli.main(["serve", "--port", str(server.port)]) == 2
        assert "cannot bind" in capsys.readouterr().err

    def test_foreground_serve_answers_and_stops_cleanly(self, tmp_path):
        snapshot = tmp_path / "state.json"
        proc = subprocess.Popen(
            [sys.executable, "-m", "csrflab.cli", "serve", "--port", "0",
             "--policy", "csrf_token", "--seed", "99", "--snapshot", str(snapshot)],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        try:
            banner = proc.stdout.readline()
            assert banner.startswith("serving on http://127.0.0.1:")
            assert "policy=csrf_token" in banner
            port = int(banner.split("http://127.0.0.1:")[1].split(" ")[0])
            request = make_request(HttpMethod.GET, f"http://127.0.0.1:{port}/cgi-bin/Forum/index.php")
            response = parse_response(
                TcpTransport().exchange("127.0.0.1", port, serialize(request))
            )
            assert response.status == 200
        finally:
            proc.send_signal(signal.SIGINT)
            assert proc.wait(timeout=10) == 0
        deadline = time.time() + 5
        while not snapshot.exists() and time.time() < deadline:
            time.sleep(0.05)
        state = json.loads(snapshot.read_text())
        assert state["policy"] == "csrf_token" and state["seed"] == 99
