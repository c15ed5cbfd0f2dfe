import json
import subprocess
import sys
from pathlib import Path

import pytest

from spatialqr import cli
from spatialqr.numeric import (
    Matrix,
    parse_matrix_text,
    random_matrix,
    write_matrix,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def matrix4(tmp_path):
    path = tmp_path / "a4.txt"
    write_matrix(str(path), random_matrix(4, 4, 0))
    return path


@pytest.fixture
def rhs4(tmp_path):
    path = tmp_path / "z4.txt"
    write_matrix(str(path), Matrix(4, 1, [1.0, 2.0, 3.0, 4.0]))
    return path


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


class TestTrace:
    def test_text_output(self, capsys):
        assert run_cli("trace", "4", "4") == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 26
        assert lines[0] == "1,4,-  c,s[4,1](W) A'[4,1] A'[3,1]"

    def test_matches_golden_fixture(self, capsys):
        assert run_cli("trace", "4", "4") == 0
        assert capsys.readouterr().out == (FIXTURES / "trace_4x4_golden.txt").read_text()

    def test_empty_space(self, capsys):
        assert run_cli("trace", "1", "1") == 0
        assert capsys.readouterr().out == ""

    def test_json_count(self, capsys):
        assert run_cli("trace", "4", "4", "--format", "json") == 0
        obj = json.loads(capsys.readouterr().out)
        assert len(obj["events"]) == 26

    def test_invalid_size_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("trace", "0", "4")
        assert exc.value.code == 2


class TestGraph:
    def test_dot_node_statements(self, capsys):
        assert run_cli("graph", "4", "4") == 0
        out = capsys.readouterr().out
        assert out.count("[shape=") == 26
        assert '"X_1_4" [shape=ellipse];' in out

    def test_json_stats(self, capsys):
        assert run_cli("graph", "4", "4", "--format", "json") == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["stats"]["x_nodes"] == 6
        assert obj["stats"]["y_nodes"] == 20

    def test_relay_flag_rewrites_edges(self, capsys):
        assert run_cli("graph", "4", "4", "--format", "json", "--relay") == 0
        obj = json.loads(capsys.readouterr().out)
        relayed = [
            e for e in obj["edges"]
            if e["pattern"] == "cs" and e["source"]["producer"]["func"] == "Y"
        ]
        assert len(relayed) == 14  # one per non-head chain position

    def test_output_file(self, tmp_path, capsys):
        target = tmp_path / "graph.dot"
        assert run_cli("graph", "4", "4", "--output", target) == 0
        assert capsys.readouterr().out == ""
        assert target.read_text().startswith("digraph dataflow {")


class TestDecompose:
    def test_writes_upper_triangular_r(self, matrix4, tmp_path, capsys):
        out = tmp_path / "r.txt"
        assert run_cli("decompose", matrix4, "--output", out) == 0
        r = parse_matrix_text(out.read_text())
        assert (r.rows, r.cols) == (4, 4)
        for j in range(1, 5):
            for i in range(j + 1, 5):
                assert r.get(i, j) == 0.0

    def test_rhs_adds_column(self, matrix4, rhs4, tmp_path):
        out = tmp_path / "raug.txt"
        assert run_cli("decompose", matrix4, "--rhs", rhs4, "--output", out) == 0
        r = parse_matrix_text(out.read_text())
        assert (r.rows, r.cols) == (4, 5)

    def test_q_output_reconstructs(self, matrix4, tmp_path):
        r_path, q_path = tmp_path / "r.txt", tmp_path / "q.txt"
        assert run_cli(
            "decompose", matrix4, "--output", r_path,
            "--accumulate-q", "--q-output", q_path,
        ) == 0
        q = parse_matrix_text(q_path.read_text())
        r = parse_matrix_text(r_path.read_text())
        a = parse_matrix_text(matrix4.read_text())
        recon = q.matmul(r)
        for i in range(1, 5):
            for j in range(1, 5):
                assert abs(recon.get(i, j) - a.get(i, j)) < 1e-12

    def test_q_output_without_flag_is_usage_error(self, matrix4, tmp_path, capsys):
        code = run_cli("decompose", matrix4, "--output", tmp_path / "r.txt",
                       "--q-output", tmp_path / "q.txt")
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_missing_file_is_usage_error(self, tmp_path, capsys):
        code = run_cli("decompose", tmp_path / "nope.txt", "--output", tmp_path / "r.txt")
        assert code == 2

    def test_csv_autodetect(self, tmp_path):
        src = tmp_path / "a.csv"
        src.write_text("2.0,1.0\n0.0,1.0\n")
        out = tmp_path / "r.csv"
        assert run_cli("decompose", src, "--output", out) == 0
        assert out.read_text() == "2.0,1.0\n0.0,1.0\n"


class TestSolve:
    def test_identity(self, tmp_path, capsys):
        a_path, z_path = tmp_path / "a.txt", tmp_path / "z.txt"
        write_matrix(str(a_path), Matrix.identity(3))
        write_matrix(str(z_path), Matrix(3, 1, [5.0, -1.0, 2.0]))
        assert run_cli("solve", a_path, z_path) == 0
        assert capsys.readouterr().out == "5.0\n-1.0\n2.0\n"

    def test_singular_matrix_fails(self, tmp_path, capsys):
        a_path, z_path = tmp_path / "a.txt", tmp_path / "z.txt"
        write_matrix(str(a_path), Matrix(2, 2, [1.0, 0.0, 0.0, 0.0]))
        write_matrix(str(z_path), Matrix(2, 1, [1.0, 1.0]))
        assert run_cli("solve", a_path, z_path) == 1
        assert "singular" in capsys.readouterr().err

    def test_dimension_mismatch_is_usage_error(self, tmp_path, capsys):
        a_path, z_path = tmp_path / "a.txt", tmp_path / "z.txt"
        write_matrix(str(a_path), Matrix.identity(3))
        write_matrix(str(z_path), Matrix(2, 1, [1.0, 1.0]))
        assert run_cli("solve", a_path, z_path) == 2


class TestSimulate:
    def test_full_unroll_completes(self, matrix4, rhs4, tmp_path, capsys):
        report_path = tmp_path / "report.json"
        code = run_cli("simulate", matrix4, "--rhs", rhs4, "--report", report_path)
        assert code == 0
        report = json.loads(report_path.read_text())
        assert report["status"] == "completed"
        assert report["total_firings"] == 26
        assert len(report["firings"]) == 26

    def test_folded_has_fewer_pes(self, matrix4, tmp_path):
        report_path = tmp_path / "report.json"
        assert run_cli("simulate", matrix4, "--unroll", "folded",
                       "--report", report_path) == 0
        report = json.loads(report_path.read_text())
        assert len(report["firings"]) == 12  # 3 X + 9 Y processing elements
        assert report["total_firings"] == 26

    def test_report_to_stdout(self, matrix4, capsys):
        assert run_cli("simulate", matrix4) == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["schema"] == 1
        assert obj["status"] == "completed"

    def test_capacity_zero_is_usage_error(self, matrix4):
        with pytest.raises(SystemExit) as exc:
            run_cli("simulate", matrix4, "--capacity", "0")
        assert exc.value.code == 2

    def test_nan_input_fails(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("2 2\n1.0 2.0\nnan 4.0\n")
        assert run_cli("simulate", bad) == 1
        assert "non-finite" in capsys.readouterr().err

    def test_event_log_goes_to_stderr(self, matrix4, tmp_path, capsys):
        assert run_cli("simulate", matrix4, "--report", tmp_path / "r.json",
                       "--event-log") == 0
        err = capsys.readouterr().err
        assert err.count("step=") == 26

    def test_deadlock_exit_code(self, matrix4, tmp_path, monkeypatch, capsys):
        from spatialqr.simulator import SimReport

        def fake_run(spec, cfg, aug):
            return SimReport(
                status="deadlock", m=4, n=4, config=cfg.describe(), steps=7,
                firings={}, max_occupancy={}, channel_sends={}, output=None,
                drained=[], uncovered=[],
                blocked=[{"pe": "X(col=1)", "iteration": "X(1, 2)",
                          "waiting_on_empty": [], "waiting_on_full": []}],
            )

        monkeypatch.setattr(cli, "run", fake_run)
        code = run_cli("simulate", matrix4, "--report", tmp_path / "r.json")
        assert code == 3
        assert "deadlock" in capsys.readouterr().err

    def test_mismatch_exit_code(self, matrix4, tmp_path, monkeypatch, capsys):
        real_run = cli.run

        def tampered(spec, cfg, aug):
            report = real_run(spec, cfg, aug)
            i, j = report.drained[0]
            report.output.set(i, j, report.output.get(i, j) + 1.0)
            return report

        monkeypatch.setattr(cli, "run", tampered)
        code = run_cli("simulate", matrix4, "--report", tmp_path / "r.json")
        assert code == 1
        assert "differs from reference" in capsys.readouterr().err


class TestVerify:
    def test_identity_all_zero_errors(self, tmp_path, capsys):
        path = tmp_path / "i.txt"
        write_matrix(str(path), Matrix.identity(4))
        assert run_cli("verify", path, "--tol", "1e-12") == 0
        out = capsys.readouterr().out
        assert "reconstruction_max_error 0.0" in out
        assert "orthogonality_max_error 0.0" in out
        assert out.rstrip().endswith("result PASS")

    def test_random_passes_default_tolerance(self, tmp_path, capsys):
        path = tmp_path / "a8.txt"
        write_matrix(str(path), random_matrix(8, 8, 3))
        assert run_cli("verify", path) == 0

    def test_non_finite_fixture_fails(self, tmp_path, capsys):
        path = tmp_path / "bad.txt"
        path.write_text("2 2\n1.0 inf\n0.0 1.0\n")
        assert run_cli("verify", path) == 1
        assert "result FAIL" in capsys.readouterr().out

    def test_nan_pivot_fixture_fails(self, tmp_path, capsys):
        path = tmp_path / "bad.txt"
        path.write_text("2 2\nnan 1.0\n1.0 1.0\n")
        assert run_cli("verify", path) == 1
        assert capsys.readouterr().err.startswith("error:")


class TestSelfcheck:
    def test_small_selfcheck_passes(self, capsys):
        assert run_cli("selfcheck", "--max-size", "4") == 0
        out = capsys.readouterr().out
        assert out.rstrip().endswith("selfcheck: all passed")


class TestDeterminism:
    def _capture(self, *argv):
        return subprocess.run(
            [sys.executable, "-m", "spatialqr", *map(str, argv)],
            capture_output=True, check=False,
        )

    @pytest.mark.parametrize("argv", [
        ("trace", "4", "4"),
        ("trace", "5", "3", "--format", "json"),
        ("graph", "4", "4"),
        ("graph", "4", "4", "--format", "json", "--relay"),
    ])
    def test_byte_identical_stdout(self, argv):
        first, second = self._capture(*argv), self._capture(*argv)
        assert first.returncode == second.returncode == 0
        assert first.stdout == second.stdout

    def test_simulate_and_verify_byte_identical(self, matrix4):
        for argv in (["simulate", matrix4, "--unroll", "folded"], ["verify", matrix4]):
            first, second = self._capture(*argv), self._capture(*argv)
            assert first.returncode == second.returncode == 0
            assert first.stdout == second.stdout
