"""Constraint-family generators: structure, feasible witnesses, edge cases."""
import numpy as np
import pytest

from linproj import (
    CertifiedInfeasible,
    ContractViolation,
    CsrMatrix,
    SolverConfig,
    build_layer,
    canonicalize,
    project,
)
from linproj.fixtures import (
    FAMILIES,
    gen_partial_matching,
    gen_portfolio,
    gen_tsp_priority,
    gen_tsp_start_end,
    gen_uc_min_updown,
    generate,
)
from linproj.gradcheck import newton_solve
from linproj.dual import EntropicProblem, primal_from_dual


class TestTspStartEnd:
    def test_row_counts(self):
        gc = gen_tsp_start_end(3, 0, 2)
        assert gc.n_vars == 9
        assert gc.a3.rows == 8  # 3 column + 3 row + 2 pinned cells

    def test_unique_vertex_for_two_cities(self):
        gc = gen_tsp_start_end(2, 0, 1)
        layer = build_layer(gc, SolverConfig(theta=100.0, epsilon=1e-8,
                                             max_iter=500_000))
        rng = np.random.default_rng(0)
        (res,) = project(layer, [rng.uniform(-1.0, 1.0, 4)])
        np.testing.assert_allclose(res.x_original, [1.0, 0.0, 0.0, 1.0], atol=1e-3)

    def test_permutation_witness_is_feasible(self):
        gc = gen_tsp_start_end(4, 1, 3)
        x = np.zeros((4, 4))
        x[1, 0] = 1.0  # start city at step 0
        x[3, 3] = 1.0  # end city at the last step
        x[0, 1] = 1.0
        x[2, 2] = 1.0
        assert gc.violation(x.ravel()) <= 1e-12

    def test_invalid_indices(self):
        with pytest.raises(ContractViolation):
            gen_tsp_start_end(3, 5, 1)
        with pytest.raises(ContractViolation):
            gen_tsp_start_end(3, 1, 1)
        with pytest.raises(ContractViolation):
            gen_tsp_start_end(1, 0, 0)


class TestTspPriority:
    def test_row_count(self):
        gc = gen_tsp_priority(3, 0, 2, p=1, m_steps=1)
        assert gc.a3.rows == 9

    def test_redundant_priority_row_still_solves(self):
        gc = gen_tsp_priority(3, 0, 2, p=1, m_steps=2)
        layer = build_layer(gc, SolverConfig(epsilon=1e-6, max_iter=500_000))
        (res,) = project(layer, [np.zeros(9)])
        assert res.solution.converged

    def test_priority_equal_to_start_rejected(self):
        with pytest.raises(ContractViolation):
            gen_tsp_priority(3, 0, 2, p=0, m_steps=1)
        with pytest.raises(ContractViolation):
            gen_tsp_priority(3, 0, 2, p=1, m_steps=0)


class TestPartialMatching:
    def test_canonical_dimensions(self):
        gc = gen_partial_matching(2, 2, 1)
        std, _ = canonicalize(gc, np.zeros(4))
        assert std.m == 5
        assert std.n == 8
        np.testing.assert_allclose(std.u, np.ones(8))

    def test_full_matching_feasible(self):
        gc = gen_partial_matching(3, 2, 2)
        layer = build_layer(gc, SolverConfig(epsilon=1e-6))
        (res,) = project(layer, [np.zeros(6)])
        assert res.solution.converged

    def test_inlier_count_validated(self):
        with pytest.raises(ContractViolation):
            gen_partial_matching(2, 2, 0)
        with pytest.raises(ContractViolation):
            gen_partial_matching(2, 2, 3)

    def test_witness(self):
        gc = gen_partial_matching(3, 4, 2)
        x = np.zeros((3, 4))
        x[0, 0] = 1.0
        x[1, 1] = 1.0
        assert gc.violation(x.ravel()) <= 1e-12


class TestPortfolio:
    def test_slack_capacity(self):
        gc = gen_portfolio(4, preferred=[0, 1], q=0.5)
        std, _ = canonicalize(gc, np.zeros(4))
        # One slack column for the preference row with capacity |S| - q.
        assert std.embedding.n_slack == 1
        assert std.u[-1] == pytest.approx(1.5)

    def test_whole_universe_preference_is_implied(self):
        gc = gen_portfolio(5, preferred=range(5), q=0.5)
        layer = build_layer(gc, SolverConfig(epsilon=1e-8))
        (res,) = project(layer, [np.zeros(5)])
        assert res.solution.converged
        assert np.sum(res.x_original) == pytest.approx(1.0, abs=1e-7)

    def test_symmetric_split(self):
        # c = 0 with preferred {0, 1} and q = 0.5: symmetry pairs the
        # coordinates; checked against the dense Newton oracle.
        gc = gen_portfolio(4, preferred=[0, 1], q=0.5)
        std, c = canonicalize(gc, np.zeros(4))
        ep = EntropicProblem(std, c, 1.0)
        x = primal_from_dual(ep, newton_solve(ep))[:4]
        assert x[0] == pytest.approx(x[1], abs=1e-9)
        assert x[2] == pytest.approx(x[3], abs=1e-9)
        assert x[0] + x[1] >= 0.5 - 1e-9
        assert np.sum(x) == pytest.approx(1.0, abs=1e-9)

    def test_overdemanding_floor_is_infeasible(self):
        gc = gen_portfolio(4, preferred=[0, 1], q=2.5)
        with pytest.raises(CertifiedInfeasible):
            canonicalize(gc, np.zeros(4))

    def test_parameter_validation(self):
        with pytest.raises(ContractViolation):
            gen_portfolio(4, preferred=[], q=0.5)
        with pytest.raises(ContractViolation):
            gen_portfolio(4, preferred=[9], q=0.5)
        with pytest.raises(ContractViolation):
            gen_portfolio(4, preferred=[0], q=0.0)


class TestUnitCommitment:
    def test_row_and_variable_counts(self):
        gc = gen_uc_min_updown(1, 3, ut=2, dt=2, u0=0)
        assert gc.n_vars == 9
        assert gc.a3.rows == 3  # logical rows
        assert gc.a1.rows == 4  # 2 up-time + 2 down-time rows

    def test_contains_negative_coefficients(self):
        gc = gen_uc_min_updown(2, 4, ut=2, dt=3, u0=[0, 1])
        assert np.min(gc.a1.to_dense()) < 0.0
        assert np.min(gc.a3.to_dense()) < 0.0

    def test_all_off_schedule_feasible(self):
        gc = gen_uc_min_updown(2, 4, ut=2, dt=2, u0=0)
        assert gc.violation(np.zeros(gc.n_vars)) <= 1e-12

    def test_initially_on_unit_folds_into_rhs(self):
        gc = gen_uc_min_updown(1, 2, ut=1, dt=1, u0=1)
        # Staying on (u = 1 throughout, no starts or stops) must be feasible.
        x = np.zeros(6)
        x[0] = x[1] = 1.0
        assert gc.violation(x) <= 1e-12

    def test_parameter_validation(self):
        with pytest.raises(ContractViolation):
            gen_uc_min_updown(1, 3, ut=4, dt=2, u0=0)
        with pytest.raises(ContractViolation):
            gen_uc_min_updown(1, 3, ut=2, dt=0, u0=0)
        with pytest.raises(ContractViolation):
            gen_uc_min_updown(1, 3, ut=2, dt=2, u0=0.5)


class TestDispatcher:
    def test_all_families_generate(self):
        params = {
            "tsp_start_end": {"n": 3, "s": 0, "e": 2},
            "tsp_priority": {"n": 3, "s": 0, "e": 2, "p": 1, "m_steps": 1},
            "partial_matching": {"m": 2, "n": 3, "p": 1},
            "portfolio": {"n": 4, "preferred": [0, 1], "q": 0.5},
            "uc_min_updown": {"g_count": 1, "t_count": 3, "ut": 2, "dt": 2, "u0": 0},
        }
        assert set(params) == set(FAMILIES)
        for family, kw in params.items():
            gc = generate(family, kw)
            assert gc.n_vars > 0

    def test_unknown_family_rejected(self):
        with pytest.raises(ContractViolation):
            generate("knapsack", {})

    def test_sparse_variant_matches_dense(self):
        for family, kw in (
            ("partial_matching", {"m": 2, "n": 3, "p": 1}),
            ("uc_min_updown", {"g_count": 1, "t_count": 3, "ut": 2, "dt": 2, "u0": 0}),
        ):
            dense = generate(family, kw, sparse=False)
            sparse = generate(family, kw, sparse=True)
            assert isinstance(sparse.a1, CsrMatrix)
            np.testing.assert_allclose(sparse.a1.to_dense(), dense.a1.to_dense())
            np.testing.assert_allclose(sparse.a3.to_dense(), dense.a3.to_dense())
