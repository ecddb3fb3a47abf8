"""CLI tests through click's runner."""

import json
import math

import pytest
from click.testing import CliRunner

from mtp2_ising.cli import main
from mtp2_ising.sample_io import format_table
from mtp2_ising.solvers import general_mle
from mtp2_ising.solvers.general_mle import solve_general
from mtp2_ising.tables import ProbTable, SampleCounts
from tests.conftest import EXAMPLE_COUNTS, MOUSSOURIS_ROWS

# full support with positive covariance on every pair of a triangle
TRIANGLE_COUNTS = [5, 1, 1, 2, 1, 2, 2, 5]


def _counts_text(counts):
    dim = len(counts).bit_length() - 1
    lines = [f"# d={dim}"] + [f"{mask},{n}" for mask, n in enumerate(counts) if n]
    return "\n".join(lines) + "\n"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def moussouris_file(tmp_path):
    path = tmp_path / "moussouris.txt"
    path.write_text("\n".join(" ".join(str(v) for v in row) for row in MOUSSOURIS_ROWS) + "\n")
    return path


@pytest.fixture
def example_file(tmp_path):
    path = tmp_path / "example.txt"
    path.write_text(_counts_text(EXAMPLE_COUNTS))
    return path


class TestFit:
    def test_moussouris_on_cycle(self, runner, moussouris_file):
        result = runner.invoke(main, ["fit", "-i", str(moussouris_file), "-g", "cycle"])
        assert result.exit_code == 0, result.output
        assert "status: certified" in result.output
        assert "fitted_edges: 1-2 2-3 3-4" in result.output
        assert "certificate.passed: true" in result.output

    def test_json_report(self, runner, moussouris_file, tmp_path):
        out = tmp_path / "report.json"
        result = runner.invoke(
            main, ["fit", "-i", str(moussouris_file), "-g", "cycle", "--json", "-o", str(out)]
        )
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert report["exit_code"] == 0
        assert report["J"][0][1] == pytest.approx(math.log(3) / 2, abs=1e-9)
        assert report["certificate"]["passed"] is True
        assert len(report["table"]) == 16

    def test_output_is_deterministic(self, runner, moussouris_file):
        args = ["fit", "-i", str(moussouris_file), "-g", "complete", "--seed", "7"]
        first = runner.invoke(main, args)
        second = runner.invoke(main, args)
        assert first.exit_code == 0
        assert first.output == second.output
        assert "seed: 7" in first.output

    def test_default_graph_warns(self, runner, moussouris_file):
        result = runner.invoke(main, ["fit", "-i", str(moussouris_file)])
        assert result.exit_code == 0
        assert "complete graph" in result.output

    def test_edge_list_file(self, runner, moussouris_file, tmp_path):
        graph = tmp_path / "graph.txt"
        graph.write_text("1 2\n2 3\n3 4\n1 4\n")
        result = runner.invoke(main, ["fit", "-i", str(moussouris_file), "-g", str(graph)])
        assert result.exit_code == 0
        assert "edges: 1-2 1-4 2-3 3-4" in result.output

    def test_likelihood_ratio(self, runner, moussouris_file):
        result = runner.invoke(main, ["fit", "-i", str(moussouris_file), "-g", "chain", "--lr"])
        assert result.exit_code == 0
        assert "lr.statistic:" in result.output

    def test_symmetric(self, runner, moussouris_file):
        for args in (["fit-symmetric"], ["fit", "--symmetric"]):
            result = runner.invoke(main, [*args, "-i", str(moussouris_file), "-g", "cycle"])
            assert result.exit_code == 0
            assert "solver: symmetric" in result.output

    def test_nonexistence_exits_two(self, runner, tmp_path):
        path = tmp_path / "sample.txt"
        path.write_text("1 1\n-1 -1\n1 -1\n")
        result = runner.invoke(main, ["fit", "-i", str(path), "-g", "complete"])
        assert result.exit_code == 2
        assert "offending_edges: 1-2" in result.output

    def test_non_convergence_exits_three(self, runner, tmp_path):
        path = tmp_path / "triangle.txt"
        path.write_text(_counts_text(TRIANGLE_COUNTS))
        args = ["fit", "-i", str(path), "-g", "complete", "--max-sweeps", "1"]
        result = runner.invoke(main, args)
        assert result.exit_code == 3
        assert "status: not converged" in result.output

    def test_malformed_input_exits_one(self, runner, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 -1\n1 0\n")
        result = runner.invoke(main, ["fit", "-i", str(path)])
        assert result.exit_code == 1
        assert "Error:" in result.output


class TestGeneral:
    def test_example(self, runner, example_file):
        result = runner.invoke(main, ["fit-general", "-i", str(example_file)])
        assert result.exit_code == 0, result.output
        assert "status: certified" in result.output
        assert "certificate.decomposition: u{1,3|2}" in result.output
        assert "certificate.decomposition: u{1,3|}" in result.output

    def test_passing_certificate_outranks_the_convergence_flag(
        self, runner, example_file, monkeypatch
    ):
        solve = general_mle._solve
        monkeypatch.setattr(
            general_mle, "_solve", lambda *args: solve(*args)._replace(converged=False)
        )
        result = runner.invoke(main, ["fit-general", "-i", str(example_file)])
        assert result.exit_code == 0, result.output
        assert "status: certified" in result.output
        assert "converged: false" in result.output

    def test_fit_general_flag(self, runner, example_file):
        result = runner.invoke(main, ["fit", "--general", "-i", str(example_file)])
        assert result.exit_code == 0
        assert "solver: general" in result.output

    def test_sublattice_support_is_reported(self, runner, tmp_path):
        path = tmp_path / "chain.txt"
        path.write_text("-1 -1\n1 -1\n1 1\n")
        result = runner.invoke(main, ["fit-general", "-i", str(path)])
        assert result.exit_code == 0
        assert "support_size: 3" in result.output
        assert "lattice closure" in result.output


class TestChecks:
    def test_check_mtp2(self, runner, moussouris_file):
        result = runner.invoke(main, ["check-mtp2", "-i", str(moussouris_file)])
        assert result.exit_code == 0
        assert "status: not MTP2" in result.output
        assert "violation: " in result.output

    def test_check_mtp2_of_a_table(self, runner, moussouris_file, tmp_path):
        table = tmp_path / "table.txt"
        table.write_text(format_table(solve_general(SampleCounts.from_rows(MOUSSOURIS_ROWS))))
        result = runner.invoke(
            main, ["check-mtp2", "-i", str(moussouris_file), "--table", str(table)]
        )
        assert result.exit_code == 0
        assert "status: MTP2" in result.output

    def test_check_existence(self, runner, moussouris_file, tmp_path):
        result = runner.invoke(main, ["check-existence", "-i", str(moussouris_file), "-g", "cycle"])
        assert result.exit_code == 0
        assert "status: MLE exists" in result.output

        path = tmp_path / "sample.txt"
        path.write_text("1 1 1\n-1 -1 -1\n1 -1 1\n")
        result = runner.invoke(main, ["check-existence", "--general", "-i", str(path)])
        assert result.exit_code == 2
        assert "offending_edges: 1-2 1-3 2-3" in result.output

    def test_edges_and_constant_vertices_are_both_reported(self, runner, tmp_path):
        path = tmp_path / "sample.txt"
        path.write_text("1 1 1\n-1 -1 1\n1 -1 1\n")
        graph = tmp_path / "edges.txt"
        graph.write_text("1 2\n")
        for command in ("check-existence", "fit"):
            result = runner.invoke(main, [command, "-i", str(path), "-g", str(graph)])
            assert result.exit_code == 2, result.output
            assert "offending_edges: 1-2" in result.output
            assert "offending_vertices: 3" in result.output

    def test_check_existence_symmetric(self, runner, tmp_path):
        path = tmp_path / "sample.txt"
        path.write_text("1 -1\n1 1\n")
        args = ["check-existence", "-i", str(path), "-g", "complete"]
        assert runner.invoke(main, args).exit_code == 2
        assert runner.invoke(main, [*args, "--symmetric"]).exit_code == 0


class TestCertify:
    def test_general_table(self, runner, example_file, tmp_path):
        table = tmp_path / "table.txt"
        table.write_text(format_table(solve_general(SampleCounts(dim=3, counts=EXAMPLE_COUNTS))))
        result = runner.invoke(main, ["certify", "-i", str(example_file), "--table", str(table)])
        assert result.exit_code == 0, result.output
        assert "certificate.kind: general" in result.output

    def test_wrong_table_exits_one(self, runner, example_file, tmp_path):
        table = tmp_path / "table.txt"
        table.write_text(format_table(ProbTable.uniform(3)))
        result = runner.invoke(main, ["certify", "-i", str(example_file), "--table", str(table)])
        assert result.exit_code == 1
        assert "status: not certified" in result.output

    def test_ising_table(self, runner, moussouris_file, tmp_path):
        out = tmp_path / "fit.json"
        runner.invoke(
            main, ["fit", "-i", str(moussouris_file), "-g", "cycle", "--json", "-o", str(out)]
        )
        rows = json.loads(out.read_text())["table"]
        table = tmp_path / "table.txt"
        table.write_text("\n".join(f"{r['mask']},{r['probability']!r}" for r in rows) + "\n")
        args = ["certify", "-i", str(moussouris_file), "--table", str(table), "-g", "cycle"]
        result = runner.invoke(main, args)
        assert result.exit_code == 0, result.output
        assert "certificate.kind: ising" in result.output

    def test_missing_table(self, runner, example_file):
        result = runner.invoke(main, ["certify", "-i", str(example_file)])
        assert result.exit_code == 1


def test_env_command(runner):
    result = runner.invoke(main, ["env"])
    assert result.exit_code == 0
    assert "MTP2_MAX_DIM" in result.output
