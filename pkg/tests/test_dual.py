"""Primal-from-dual map, dual objective/gradient, smoothness constants."""
import numpy as np
import pytest

from linproj import (
    ContractViolation,
    DenseMatrix,
    EntropicProblem,
    SolverConfig,
    StandardProblem,
    dual_gradient,
    dual_objective,
    estimate_spectral_norm,
    primal_from_dual,
    primal_objective,
    smoothness_constants,
    solve,
    stationarity_residual,
)

from helpers import random_standard


def closed_form_instance(c=(1.0, 0.0), theta=1.0):
    std = StandardProblem(
        a=DenseMatrix([[1.0, 1.0]]), b=np.array([1.0]), u=np.array([1.0, 1.0])
    )
    return EntropicProblem(std, np.array(c, dtype=np.float64), theta)


class TestPrimalFromDual:
    def test_zero_cost_midpoint(self):
        ep = closed_form_instance(c=(0.0, 0.0), theta=3.7)
        np.testing.assert_allclose(primal_from_dual(ep, np.zeros(1)), [0.5, 0.5])

    def test_sigmoid_values_at_zero_dual(self):
        ep = closed_form_instance()
        np.testing.assert_allclose(
            primal_from_dual(ep, np.zeros(1)), [0.7310586, 0.5], atol=1e-7
        )

    def test_closed_form_optimum(self):
        ep = closed_form_instance()
        np.testing.assert_allclose(
            primal_from_dual(ep, np.array([-0.5])), [0.6224593, 0.3775407], atol=1e-7
        )

    def test_strict_interiority(self):
        # Scale chosen below the float64 sigmoid saturation threshold.
        rng = np.random.default_rng(0)
        for _ in range(20):
            ep = random_standard(rng)
            y = rng.normal(scale=8.0, size=ep.m)
            x = primal_from_dual(ep, y)
            assert np.all(x > 0.0) and np.all(x < ep.u)

    def test_non_finite_dual_rejected(self):
        with pytest.raises(ContractViolation):
            primal_from_dual(closed_form_instance(), np.array([np.nan]))


class TestDualObjective:
    def test_closed_form_value(self):
        ep = closed_form_instance()
        assert dual_objective(ep, np.zeros(1)) == pytest.approx(2.0064089, abs=1e-7)

    def test_zero_data_value(self):
        std = StandardProblem(
            a=DenseMatrix([[1.0, 1.0]]), b=np.array([0.0]), u=np.array([1.0, 1.0])
        )
        ep = EntropicProblem(std, np.zeros(2), 1.0)
        assert dual_objective(ep, np.zeros(1)) == pytest.approx(2 * np.log(2.0))

    def test_lagrangian_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            ep = random_standard(rng)
            y = rng.normal(size=ep.m)
            x = primal_from_dual(ep, y)
            lagrangian = primal_objective(ep, x) - y @ (ep.a.matvec(x) - ep.b)
            neg_g = dual_objective(ep, y)
            assert abs(-neg_g - lagrangian) <= 1e-10 * max(1.0, abs(neg_g))

    def test_convexity(self):
        rng = np.random.default_rng(2)
        ep = random_standard(rng)
        for _ in range(50):
            y1 = rng.normal(size=ep.m)
            y2 = rng.normal(size=ep.m)
            t = rng.uniform(0.05, 0.95)
            mid = dual_objective(ep, t * y1 + (1 - t) * y2)
            chord = t * dual_objective(ep, y1) + (1 - t) * dual_objective(ep, y2)
            assert mid <= chord + 1e-12


class TestDualGradient:
    def test_value_at_zero(self):
        ep = closed_form_instance()
        np.testing.assert_allclose(dual_gradient(ep, np.zeros(1)), [0.2310586], atol=1e-7)

    def test_zero_at_optimum(self):
        ep = closed_form_instance()
        np.testing.assert_allclose(dual_gradient(ep, np.array([-0.5])), [0.0], atol=1e-12)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        step = 1e-6
        for _ in range(10):
            ep = random_standard(rng)
            y = rng.normal(size=ep.m)
            grad = dual_gradient(ep, y)
            for i in range(ep.m):
                e = np.zeros(ep.m)
                e[i] = step
                fd = (dual_objective(ep, y + e) - dual_objective(ep, y - e)) / (2 * step)
                assert grad[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)


class TestPrimalObjective:
    def test_entropy_at_midpoint(self):
        ep = closed_form_instance(c=(0.0, 0.0))
        assert primal_objective(ep, np.array([0.5, 0.5])) == pytest.approx(
            -2 * np.log(2.0)
        )

    def test_equals_dual_at_optimum(self):
        ep = closed_form_instance()
        x = primal_from_dual(ep, np.array([-0.5]))
        # Zero residual at the optimum collapses the Lagrangian to f itself.
        assert primal_objective(ep, x) == pytest.approx(
            -dual_objective(ep, np.array([-0.5])), abs=1e-7
        )

    def test_solver_output_minimizes_over_feasible_samples(self):
        ep = closed_form_instance()
        sol = solve(ep, SolverConfig(epsilon=1e-10))
        f_star = primal_objective(ep, sol.x)
        for t in np.linspace(0.01, 0.99, 25):
            assert f_star <= primal_objective(ep, np.array([t, 1.0 - t])) + 1e-8

    def test_out_of_box_rejected(self):
        with pytest.raises(ContractViolation):
            primal_objective(closed_form_instance(), np.array([1.5, -0.5]))


class TestSmoothnessConstants:
    def test_reference_values(self):
        ep = closed_form_instance()
        sc = smoothness_constants(ep, np.sqrt(2.0))
        assert sc.strong_convexity == pytest.approx(4.0)
        assert sc.lipschitz == pytest.approx(0.5)

    def test_theta_scaling(self):
        ep = closed_form_instance(theta=4.0)
        sc = smoothness_constants(ep, np.sqrt(2.0))
        assert sc.strong_convexity == pytest.approx(1.0)
        assert sc.lipschitz == pytest.approx(2.0)

    def test_bound_scaling(self):
        std = StandardProblem(
            a=DenseMatrix([[1.0, 1.0]]), b=np.array([1.0]), u=np.array([2.0, 2.0])
        )
        ep = EntropicProblem(std, np.zeros(2), 1.0)
        sc = smoothness_constants(ep, np.sqrt(2.0))
        assert sc.lipschitz == pytest.approx(4 * 0.5)
        assert sc.strong_convexity == pytest.approx(4.0 / 4.0)

    def test_empirical_lipschitz_bound(self):
        rng = np.random.default_rng(4)
        ep = random_standard(rng)
        norm = estimate_spectral_norm(ep.a, iters=500)
        lip = smoothness_constants(ep, norm).lipschitz
        for _ in range(200):
            y1 = rng.normal(size=ep.m)
            y2 = rng.normal(size=ep.m)
            dg = np.linalg.norm(dual_gradient(ep, y1) - dual_gradient(ep, y2))
            dy = np.linalg.norm(y1 - y2)
            assert dg <= lip * dy * (1 + 1e-6)


class TestStationarity:
    def test_residual_small_everywhere(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            ep = random_standard(rng)
            y = rng.normal(scale=20.0, size=ep.m)
            assert np.max(np.abs(stationarity_residual(ep, y))) <= 1e-8


def test_cost_temperature_scaling_invariance():
    # Solving with (c, theta) and (k c, theta / k) gives the same projection.
    rng = np.random.default_rng(6)
    ep = random_standard(rng, theta=2.0)
    k = 5.0
    scaled = EntropicProblem(ep.std, k * ep.c, ep.theta / k)
    s1 = solve(ep, SolverConfig(theta=ep.theta, epsilon=1e-9, max_iter=500_000))
    s2 = solve(scaled, SolverConfig(theta=scaled.theta, epsilon=1e-9, max_iter=500_000))
    assert s1.converged and s2.converged
    np.testing.assert_allclose(s1.x, s2.x, atol=1e-6)


def test_theta_must_be_positive():
    std = StandardProblem(
        a=DenseMatrix([[1.0, 1.0]]), b=np.array([1.0]), u=np.array([1.0, 1.0])
    )
    with pytest.raises(ContractViolation):
        EntropicProblem(std, np.zeros(2), 0.0)
