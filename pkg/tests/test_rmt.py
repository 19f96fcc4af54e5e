"""Tests for the resolvent fixed-point solvers and the Monte-Carlo oracle."""

import numpy as np
import pytest

from mcmimo import (
    FixedPointDivergenceError,
    ResolventModel,
    normalized_trace,
    resolvent_trace_mc,
    solve_resolvent,
    solve_second_order,
)

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _identity_covariances(B, M):
    return np.broadcast_to(np.eye(M), (B, M, M)).copy()


class TestSolveResolvent:
    def test_golden_ratio_closed_form(self):
        # B = M, R_b = I, rho = 1: the fixed point solves x^2 + x - 1 = 0
        sol = solve_resolvent(ResolventModel(M=64, covariances=np.ones(64), rho=1.0))
        assert np.abs(sol.delta - GOLDEN).max() < 1e-10
        assert sol.T == pytest.approx(GOLDEN, abs=1e-10)

    def test_golden_ratio_general_path(self):
        sol = solve_resolvent(
            ResolventModel(M=16, covariances=_identity_covariances(16, 16), rho=1.0)
        )
        assert np.abs(sol.delta - GOLDEN).max() < 1e-10
        np.testing.assert_allclose(sol.T, GOLDEN * np.eye(16), atol=1e-9)

    def test_empty_model(self):
        sol = solve_resolvent(ResolventModel(M=8, covariances=np.zeros((0,)), rho=2.0))
        assert sol.T == pytest.approx(0.5)
        assert sol.trace_with(1.0) == pytest.approx(0.5)
        gen = solve_resolvent(
            ResolventModel(M=4, covariances=np.zeros((0, 4, 4)), rho=2.0)
        )
        assert normalized_trace(np.eye(4), gen.T, 4) == pytest.approx(0.5)

    @pytest.mark.parametrize("seed", range(3))
    def test_isotropic_vs_general_path(self, seed):
        rng = np.random.default_rng(seed)
        M, B = 12, 7
        r = rng.uniform(0.1, 2.0, size=B)
        iso = solve_resolvent(ResolventModel(M=M, covariances=r, rho=0.8))
        mats = np.stack([rb * np.eye(M) for rb in r])
        gen = solve_resolvent(ResolventModel(M=M, covariances=mats, rho=0.8))
        assert np.abs(iso.delta - gen.delta).max() < 1e-10
        np.testing.assert_allclose(gen.T, iso.T * np.eye(M), atol=1e-10)

    def test_positivity_and_bounds(self, rng):
        r = rng.uniform(0.0, 3.0, size=20)
        rho = 0.3
        sol = solve_resolvent(ResolventModel(M=32, covariances=r, rho=rho))
        assert np.all(sol.delta >= 0.0)
        assert 0.0 < sol.T <= 1.0 / rho + 1e-12

    def test_idempotent_at_fixed_point(self, rng):
        r = rng.uniform(0.1, 2.0, size=10)
        model = ResolventModel(M=16, covariances=r, rho=1.0)
        first = solve_resolvent(model, tol=1e-12)
        again = solve_resolvent(model, tol=1e-12, max_iter=100_000)
        assert np.abs(first.delta - again.delta).max() < 1e-11
        assert first.residual <= 1e-12

    def test_nonconvergence_raises(self):
        model = ResolventModel(M=4, covariances=np.ones(4), rho=1.0)
        with pytest.raises(FixedPointDivergenceError) as err:
            solve_resolvent(model, tol=1e-15, max_iter=2)
        assert err.value.iterations == 2
        assert err.value.residual > 0

    def test_invalid_shift(self):
        with pytest.raises(ValueError):
            ResolventModel(M=4, covariances=np.ones(2), rho=0.0)


class TestSolveSecondOrder:
    def test_zero_theta_homogeneous(self, rng):
        r = rng.uniform(0.1, 1.0, size=5)
        sol = solve_second_order(ResolventModel(M=8, covariances=r, rho=1.0, theta=0.0))
        np.testing.assert_array_equal(sol.delta_prime, 0.0)
        assert sol.T_prime == 0.0

    def test_scalar_identity_case(self):
        # B = M, R_b = I, theta = I, rho = 1: everything reduces to scalars
        M = 32
        sol = solve_second_order(
            ResolventModel(M=M, covariances=np.ones(M), rho=1.0, theta=1.0)
        )
        t = GOLDEN
        J_row = t**2 / (1 + GOLDEN) ** 2
        expected_dp = t**2 / (1.0 - J_row)
        np.testing.assert_allclose(sol.delta_prime, expected_dp, rtol=1e-10)
        expected_tp = t**2 + t**2 * expected_dp / (1 + GOLDEN) ** 2
        assert sol.T_prime == pytest.approx(expected_tp, rel=1e-10)

    @pytest.mark.parametrize("seed", range(3))
    def test_isotropic_vs_general_path(self, seed):
        rng = np.random.default_rng(seed + 100)
        M, B = 10, 6
        r = rng.uniform(0.1, 2.0, size=B)
        theta = float(rng.uniform(0.5, 1.5))
        iso = solve_second_order(
            ResolventModel(M=M, covariances=r, rho=0.6, theta=theta)
        )
        mats = np.stack([rb * np.eye(M) for rb in r])
        gen = solve_second_order(
            ResolventModel(M=M, covariances=mats, rho=0.6, theta=theta * np.eye(M))
        )
        assert np.abs(iso.delta_prime - gen.delta_prime).max() < 1e-10
        np.testing.assert_allclose(gen.T_prime, iso.T_prime * np.eye(M), atol=1e-10)

    def test_linearity_in_theta(self, rng):
        r = rng.uniform(0.1, 2.0, size=8)
        base = solve_second_order(
            ResolventModel(M=16, covariances=r, rho=0.9, theta=1.0)
        )
        scaled = solve_second_order(
            ResolventModel(M=16, covariances=r, rho=0.9, theta=3.7)
        )
        np.testing.assert_allclose(
            scaled.delta_prime, 3.7 * base.delta_prime, rtol=1e-12
        )
        assert scaled.T_prime == pytest.approx(3.7 * base.T_prime, rel=1e-12)

    def test_requires_theta(self):
        with pytest.raises(ValueError):
            solve_second_order(ResolventModel(M=4, covariances=np.ones(2), rho=1.0))


class TestResolventTraceOracle:
    def test_zero_weight_gives_zero(self, rng):
        model = ResolventModel(M=16, covariances=np.ones(4), rho=1.0, D=0.0)
        mean, stderr = resolvent_trace_mc(model, 10, rng)
        assert mean == 0.0 and stderr == 0.0

    def test_first_order_concentration(self):
        rng = np.random.default_rng(5)
        M, B = 128, 32
        r = rng.uniform(0.1, 2.0, size=B)
        model = ResolventModel(M=M, covariances=r, rho=1.0)
        sol = solve_resolvent(model)
        mean, stderr = resolvent_trace_mc(model, 300, rng)
        det = sol.trace_with(1.0)
        assert abs(mean - det) <= max(4 * stderr, 0.02 * abs(det))

    def test_second_order_concentration(self):
        rng = np.random.default_rng(6)
        M, B = 128, 32
        r = rng.uniform(0.1, 2.0, size=B)
        model = ResolventModel(M=M, covariances=r, rho=1.0, theta=1.0)
        sol = solve_second_order(model)
        mean, stderr = resolvent_trace_mc(model, 300, rng, second_order=True)
        det = sol.trace_with(1.0, second_order=True)
        assert abs(mean - det) <= max(4 * stderr, 0.02 * abs(det))

    def test_finite_size_gap_shrinks(self):
        # the bias at M = 8 visibly exceeds the bias at M = 64
        rng = np.random.default_rng(7)
        gaps = []
        for M in (8, 64):
            r = np.ones(M // 2)
            model = ResolventModel(M=M, covariances=r, rho=1.0)
            sol = solve_resolvent(model)
            mean, stderr = resolvent_trace_mc(model, 3000, rng)
            gaps.append(abs(mean - sol.trace_with(1.0)))
        assert gaps[1] < gaps[0]

    def test_general_covariance_sampling(self, rng):
        # non-isotropic columns still concentrate on the general-path value
        M, B = 48, 8
        mats = []
        for _ in range(B):
            A = rng.standard_normal((M, 2 * M)).view(np.complex128)
            R = A @ A.conj().T / (2 * M)
            mats.append(R)
        model = ResolventModel(M=M, covariances=np.stack(mats), rho=1.0)
        sol = solve_resolvent(model)
        mean, stderr = resolvent_trace_mc(model, 200, rng)
        det = sol.trace_with(1.0)
        assert abs(mean - det) <= max(4 * stderr, 0.03 * abs(det))

    def test_normalized_trace_combinations(self):
        T = np.diag([1.0, 2.0, 3.0])
        D = np.diag([2.0, 2.0, 2.0])
        assert normalized_trace(D, T, 3) == pytest.approx(4.0)
        assert normalized_trace(2.0, T, 3) == pytest.approx(4.0)
        assert normalized_trace(D, 2.0, 3) == pytest.approx(4.0)
        assert normalized_trace(2.0, 2.0, 3) == pytest.approx(4.0)
