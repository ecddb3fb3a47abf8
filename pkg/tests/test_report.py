"""Tests for report rendering."""

from mtp2_ising.report import Report, result_fields, subset_label, table_rows
from mtp2_ising.solvers.ips import fit
from mtp2_ising.tables import ProbTable


def test_subset_label():
    assert subset_label(0, 3) == "{}"
    assert subset_label(0b101, 3) == "{1,3}"


def test_table_rows_follow_lattice_order():
    rows = table_rows(ProbTable.uniform(3))
    expected = ["{}", "{1}", "{2}", "{3}", "{1,2}", "{1,3}", "{2,3}", "{1,2,3}"]
    assert [r.subset for r in rows] == expected
    assert rows[4].mask == 3


def test_minimal_report():
    text = Report(command="check-existence", status="MLE exists", exit_code=0).render()
    assert text == "command: check-existence\nstatus: MLE exists\nexit_code: 0\n"


def test_fit_fields_render(moussouris, cycle4):
    fields = result_fields(fit(moussouris, cycle4))
    text = Report(command="fit", status="fitted", exit_code=0, **fields).render()
    lines = text.splitlines()
    assert "d: 4" in lines
    assert "solver: ips" in lines
    assert "converged: true" in lines
    assert "J:" in lines
    # J_14 prints as an exact zero
    j_row = lines[lines.index("J:") + 1].split()
    assert j_row[3] == "0.000000000000"
    assert lines[-16].startswith("  0 {} 0.21093")
