"""Tests for sample, graph and table parsing."""

import numpy as np
import pytest

from mtp2_ising.config import SampleFormat
from mtp2_ising.errors import DimensionError, SampleFormatError
from mtp2_ising.sample_io import format_table, parse_graph, parse_sample, parse_table
from mtp2_ising.tables import ProbTable, moments_from_counts, moments_from_table
from tests.conftest import random_mtp2_table


class Recorder:
    def __init__(self):
        self.messages = []

    def __call__(self, message):
        self.messages.append(message)


class TestParseSample:
    def test_pm1_rows(self):
        c = parse_sample("1 -1 1\n-1,-1,1\n+1 1 1\n")
        assert c.dim == 3
        assert c.counts[0b101] == 1
        assert c.counts[0b100] == 1
        assert c.counts[0b111] == 1

    def test_zero_one_rows_map_zero_to_minus_one(self):
        c = parse_sample("# header comment\nx1 x2\n1 0\n0 0\n")
        assert c.counts.tolist() == [1, 1, 0, 0]

    def test_two_column_zero_one_data_warns(self):
        warn = Recorder()
        c = parse_sample("0,1\n1,1\n", warn=warn)
        assert c.dim == 2
        assert c.counts.tolist() == [0, 0, 1, 1]
        assert any("--format counts" in m for m in warn.messages)

    def test_header_reads_two_columns_as_counts(self):
        warn = Recorder()
        c = parse_sample("# d=1\n0,1\n1,1\n", warn=warn)
        assert c.counts.tolist() == [1, 1]
        assert warn.messages == []

    def test_explicit_format(self):
        c = parse_sample("1 1\n1 1\n", fmt=SampleFormat.ZERO_ONE)
        assert c.counts.tolist() == [0, 0, 0, 2]

    def test_counts_with_header(self):
        c = parse_sample("# d=3\n5,2\n0,1\n")
        assert c.dim == 3
        assert c.counts[5] == 2
        assert c.n == 3

    def test_counts_infer_dimension_with_warning(self):
        warn = Recorder()
        c = parse_sample("0x5,2\n3,7\n", warn=warn)
        assert c.dim == 3
        assert c.counts[5] == 2
        assert any("inferred" in m for m in warn.messages)

    def test_counts_respect_dim_argument(self):
        c = parse_sample("1,4\n2,3\n", fmt=SampleFormat.COUNTS, dim=4)
        assert c.dim == 4
        assert c.n == 7

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "# only a comment\n",
            "1 -1\n1 0\n",
            "1 -1 1\n1 -1\n",
            "1 2 3\n",
            "3,-1\n",
            "# d=2\n0,0\n1,0\n",
            f"1,{2**63}\n",
        ],
    )
    def test_malformed(self, text):
        with pytest.raises(SampleFormatError):
            parse_sample(text, dim=2 if "," in text else None)

    def test_mask_out_of_range(self):
        with pytest.raises(SampleFormatError):
            parse_sample("9,1\n", dim=3)

    def test_dimension_mismatch(self):
        with pytest.raises(SampleFormatError):
            parse_sample("1 -1 1\n", dim=2)

    def test_dimension_cap(self):
        with pytest.raises(DimensionError):
            parse_sample(" ".join(["1"] * 21) + "\n", fmt=SampleFormat.PM1)


class TestParseGraph:
    def test_edge_list(self):
        g = parse_graph("1 2\n# comment\n2,3\n", 3)
        assert g.edges == ((0, 1), (1, 2))

    def test_keywords(self):
        assert len(parse_graph("complete\n", 4).edges) == 6
        assert parse_graph("chain", 3).edges == ((0, 1), (1, 2))
        assert len(parse_graph("cycle", 5).edges) == 5

    def test_duplicate_edges_warn(self):
        warn = Recorder()
        g = parse_graph("1 2\n2 1\n", 2, warn=warn)
        assert g.edges == ((0, 1),)
        assert len(warn.messages) == 1

    @pytest.mark.parametrize("text", ["1 1\n", "1 4\n", "1 2 3\n", "a b\n"])
    def test_malformed(self, text):
        with pytest.raises(SampleFormatError):
            parse_graph(text, 3)


class TestParseTable:
    def test_round_trip(self, rng):
        p = random_mtp2_table(rng, 4)
        q = parse_table(format_table(p))
        assert q.dim == 4
        assert np.allclose(q.values, p.values, rtol=0, atol=1e-15)

    def test_unlisted_states_are_zero(self):
        p = parse_table("0,0.5\n3,0.5\n", dim=2)
        assert p.values.tolist() == [0.5, 0, 0, 0.5]

    def test_small_drift_is_renormalized(self):
        warn = Recorder()
        p = parse_table("0,0.5\n1,0.5000001\n", dim=1, warn=warn)
        assert float(p.values.sum()) == pytest.approx(1.0, abs=1e-15)
        assert any("renormalized" in m for m in warn.messages)

    @pytest.mark.parametrize("text", ["0,0.5\n1,0.4\n", "0,-0.5\n1,1.5\n", "0,abc\n", "0\n"])
    def test_malformed(self, text):
        with pytest.raises(SampleFormatError):
            parse_table(text, dim=1)

    def test_scaled_table_reproduces_moments(self, rng):
        p = random_mtp2_table(rng, 5)
        N = 10**12
        lines = [f"{mask},{round(v * N)}" for mask, v in enumerate(p.values)]
        c = parse_sample("\n".join(lines), fmt=SampleFormat.COUNTS, dim=5)
        a, b = moments_from_counts(c), moments_from_table(p)
        assert np.allclose(a.mean, b.mean, atol=1e-9)
        assert np.allclose(a.second, b.second, atol=1e-9)

    def test_table_of_uniform(self):
        text = format_table(ProbTable.uniform(2))
        assert text.splitlines()[0] == "# d=2"
        assert text.splitlines()[1] == "0,0.25"
