"""Tests for imsets, cone membership and KKT certificates."""

from itertools import combinations

import numpy as np
import pytest

from mtp2_ising.certify import (
    Imset,
    certify_general,
    certify_ising,
    cone_membership,
    elementary_imsets,
    fit_result_from_table,
    lattice_constraints,
    supermodularity_values,
)
from mtp2_ising.config import Tolerances
from mtp2_ising.errors import DimensionError, SupportError
from mtp2_ising.ising import IsingParams, table_from_params
from mtp2_ising.solvers.general_mle import solve_general
from mtp2_ising.solvers.ips import fit
from mtp2_ising.states import StateSet
from mtp2_ising.tables import ProbTable, SampleCounts, is_mtp2, moments_from_counts
from tests.conftest import random_sample


class TestImsets:
    def test_elementary(self):
        u = Imset.elementary(3, 0, 2, 0b010)
        assert u.entries == {0b010: 1, 0b111: 1, 0b011: -1, 0b110: -1}
        assert u.label == "u{1,3|2}"
        assert Imset.elementary(3, 0, 2, 0).label == "u{1,3|}"
        with pytest.raises(ValueError):
            Imset.elementary(3, 0, 2, 0b001)

    def test_count_and_zero_sum(self):
        imsets = elementary_imsets(4)
        assert len(imsets) == 24
        assert all(u.as_vector().sum() == 0 for u in imsets)

    def test_semi_elementary_decomposes(self):
        # u_{{1},{2,3}} = u{1,3|} + u{1,2|3} = u{1,2|} + u{1,3|2}
        semi = Imset.semi_elementary(3, 0b001, 0b110).as_vector()
        a = Imset.elementary(3, 0, 2, 0).as_vector() + Imset.elementary(3, 0, 1, 0b100).as_vector()
        b = Imset.elementary(3, 0, 1, 0).as_vector() + Imset.elementary(3, 0, 2, 0b010).as_vector()
        assert np.array_equal(semi, a)
        assert np.array_equal(semi, b)

    def test_comparable_pair_is_zero(self):
        assert Imset.semi_elementary(2, 0b01, 0b11).entries == {}

    def test_inner_matches_supermodularity(self, rng):
        theta = rng.normal(size=8)
        values = supermodularity_values(theta)
        assert np.allclose(values, [u.inner(theta) for u in elementary_imsets(3)])


class TestCone:
    def test_nonnegative_combination_is_inside(self):
        v = 2 * Imset.elementary(3, 0, 1, 0).as_vector() + Imset.elementary(3, 1, 2, 1).as_vector()
        membership = cone_membership(v)
        assert membership.residual < 1e-12

    def test_negated_generator_is_outside(self):
        v = -Imset.elementary(3, 0, 1, 0).as_vector()
        assert cone_membership(v).residual > 0.1

    def test_mass_must_vanish(self):
        v = np.zeros(8)
        v[0] = 1
        assert cone_membership(v).residual == pytest.approx(1.0)

    def test_random_nonnegative_combinations_are_inside(self, rng):
        for d in (3, 4):
            generators = np.array([u.as_vector() for u in elementary_imsets(d)], dtype=float)
            for _ in range(25):
                weights = rng.exponential(size=len(generators))
                weights[rng.random(len(generators)) < 0.5] = 0
                assert cone_membership(weights @ generators).residual < 1e-9

    def test_certify_cap(self, monkeypatch):
        monkeypatch.setenv("MTP2_CERTIFY_MAX_DIM", "3")
        with pytest.raises(DimensionError):
            cone_membership(np.zeros(16))


class TestSupermodularity:
    def test_log_supermodular_iff_mtp2(self, rng):
        d = 3
        outcomes = set()
        for _ in range(60):
            J = np.zeros((d, d))
            for i, j in combinations(range(d), 2):
                draw = rng.random()
                if draw < 0.3:
                    J[i, j] = J[j, i] = -rng.uniform(0.05, 0.5)
                elif draw < 0.7:
                    J[i, j] = J[j, i] = rng.uniform(0.05, 0.5)
            p = table_from_params(IsingParams(h=rng.uniform(-0.4, 0.4, size=d), J=J))
            supermodular = bool(supermodularity_values(np.log(p.values)).min() >= -1e-9)
            assert supermodular == is_mtp2(p).ok
            outcomes.add(supermodular)
        assert outcomes == {True, False}


class TestLatticeConstraints:
    def test_full_cube_uses_elementary_pairs(self):
        assert len(lattice_constraints(StateSet.full(3))) == 6

    def test_sublattice_uses_incomparable_pairs(self):
        support = StateSet(dim=3, members=frozenset({0, 1, 2, 3, 7}))
        constraints = lattice_constraints(support)
        assert len(constraints) == 1
        assert constraints.support[constraints.x[0]] == 1
        assert constraints.support[constraints.top[0]] == 3

    def test_rejects_non_lattice(self):
        with pytest.raises(SupportError):
            lattice_constraints(StateSet(dim=2, members=frozenset({1, 2})))


class TestCertifyGeneral:
    def test_example_decomposition(self, example_counts):
        p_hat = solve_general(example_counts)
        certificate = certify_general(p_hat, example_counts)
        assert certificate.passed
        coefficients = dict(certificate.decomposition)
        assert coefficients["u{1,3|2}"] == pytest.approx(16 / 182, abs=1e-8)
        assert coefficients["u{1,3|}"] == pytest.approx(7 / 182, abs=1e-8)
        tight = ("u{1,3|2}", "u{1,3|}")
        others = [c for label, c in certificate.decomposition if label not in tight]
        assert sum(others) < 1e-8

    def test_example_has_two_tight_constraints(self, example_counts):
        theta = np.log(solve_general(example_counts).values)
        values = supermodularity_values(theta)
        assert np.sum(np.abs(values) < 1e-8) == 2
        assert values.min() > -1e-9

    def test_moussouris_has_twelve_tight_constraints(self, moussouris):
        theta = np.log(solve_general(moussouris).values)
        assert np.sum(np.abs(supermodularity_values(theta)) < 1e-8) == 12
        assert certify_general(solve_general(moussouris), moussouris).passed

    def test_wrong_table_fails(self, example_counts):
        certificate = certify_general(ProbTable.uniform(3), example_counts)
        assert not certificate.passed
        assert certificate.primal_ok
        assert not certificate.dual_ok

    def test_restricted_support(self):
        c = SampleCounts(dim=3, counts=[1, 3, 3, 1, 0, 0, 0, 2])
        p = ProbTable(dim=3, values=[0.2, 0.2, 0.2, 0.2, 0, 0, 0, 0.2])
        certificate = certify_general(p, c)
        assert certificate.kind == "general-restricted"
        assert certificate.passed

    def test_zero_mass_on_observed_state(self):
        c = SampleCounts(dim=2, counts=[1, 1, 0, 1])
        with pytest.raises(SupportError):
            certify_general(ProbTable(dim=2, values=[0.5, 0, 0, 0.5]), c)

    def test_dimension_mismatch(self, moussouris):
        with pytest.raises(DimensionError):
            certify_general(ProbTable.uniform(3), moussouris)


class TestCertifyIsing:
    def test_uniform_is_not_the_moussouris_fit(self, moussouris, cycle4):
        result = fit_result_from_table(ProbTable.uniform(4), cycle4)
        certificate = certify_ising(result, moments_from_counts(moussouris), cycle4)
        assert not certificate.passed
        assert certificate.primal_ok
        assert certificate.dual_residual == pytest.approx(-0.5)

    def test_tolerances_are_respected(self, moussouris, cycle4):
        result = fit(moussouris, cycle4)
        m = moments_from_counts(moussouris)
        assert certify_ising(result, m, cycle4, Tolerances(primal=1e-12)).passed

    def test_wrapped_table_recovers_fitted_edges(self, moussouris, cycle4):
        table = fit(moussouris, cycle4).table
        wrapped = fit_result_from_table(table, cycle4)
        assert wrapped.fitted_graph.edges == ((0, 1), (1, 2), (2, 3))
        assert certify_ising(wrapped, moments_from_counts(moussouris), cycle4).passed


def test_general_fits_of_random_samples_are_certified(rng):
    for _ in range(20):
        d = int(rng.integers(3, 5))
        c = random_sample(rng, d, int(rng.integers(5, 41)))
        p_hat = solve_general(c)
        assert certify_general(p_hat, c).passed
