"""Tests for the generic Kalman filter."""

import math

import numpy as np
import pytest

from cineflight.estimation import (KalmanState, LinearGaussianModel,
                                   NumericalSingularityError,
                                   heading_residual, kf_predict, kf_update,
                                   wrap_heading_state)


def scalar_model(a=1.0, b=0.0, c=1.0, f=0.0, h=0.0):
    return LinearGaussianModel([[a]], [[b]], [[c]], [[f]], [[h]])


class TestPredict:
    def test_identity_propagation(self):
        model = LinearGaussianModel(np.eye(3), np.zeros((3, 1)), np.eye(3),
                                    np.zeros((3, 3)), np.eye(3))
        state = KalmanState(np.array([1.0, -2.0, 0.5]), 0.3 * np.eye(3))
        out = kf_predict(state, model, [0.0])
        assert np.array_equal(out.x, state.x)
        assert np.array_equal(out.p, state.p)

    def test_scalar_hand_computed(self):
        # x- = 0.96 * 1, p- = 0.96^2 * 0.04 + 0.01 = 0.046864 (hand evaluation)
        model = scalar_model(a=0.96, f=0.01)
        out = kf_predict(KalmanState([1.0], [[0.04]]), model, [0.0])
        assert out.x[0] == pytest.approx(0.96, abs=1e-15)
        assert out.p[0, 0] == pytest.approx(0.046864, abs=1e-15)

    def test_heading_model_matches_integrator_on_the_mean(self):
        from cineflight.dynamics import heading_step
        k_yaw, dt = 1.7, 0.02
        model = scalar_model(a=1.0, b=k_yaw * dt)
        course, state = 0.3, KalmanState([0.3], [[0.0]])
        for cmd in (0.5, -0.2, 0.9):
            state = wrap_heading_state(kf_predict(state, model, [cmd]))
            course = heading_step(course, cmd, dt, k_yaw)
            assert state.x[0] == pytest.approx(course, abs=1e-15)

    def test_dimension_mismatch_rejected(self):
        model = scalar_model()
        with pytest.raises(ValueError):
            kf_predict(KalmanState([1.0, 2.0], np.eye(2)), model, [0.0])
        with pytest.raises(ValueError):
            kf_predict(KalmanState([1.0], [[1.0]]), model, [0.0, 0.0])


class TestUpdate:
    def test_zero_measurement_noise_trusts_measurement(self):
        model = LinearGaussianModel(np.eye(2), np.zeros((2, 1)), np.eye(2),
                                    np.zeros((2, 2)), np.zeros((2, 2)))
        state = KalmanState(np.array([0.0, 0.0]), np.eye(2))
        y = np.array([1.5, -0.5])
        out, gain = kf_update(state, model, y)
        assert np.allclose(out.x, y, atol=1e-14)
        assert np.allclose(gain, np.eye(2), atol=1e-14)

    def test_huge_measurement_noise_ignores_measurement(self):
        model = LinearGaussianModel(np.eye(2), np.zeros((2, 1)), np.eye(2),
                                    np.zeros((2, 2)), 1e9 * np.eye(2))
        state = KalmanState(np.array([1.0, 2.0]), np.eye(2))
        y = np.array([100.0, -200.0])
        out, _ = kf_update(state, model, y)
        assert np.linalg.norm(out.x - state.x) <= 1e-6 * np.linalg.norm(y - state.x)

    def test_stationary_scalar_gain_fixed_point(self):
        # Oracle: iterate the scalar Riccati recursion 10^4 steps; the filter's
        # gain must converge to the same fixed point.
        a, c, f, h = 1.0, 1.0, 0.01, 0.04
        p = 1.0
        for _ in range(10_000):
            p_pred = a * p * a + f
            gain_oracle = p_pred * c / (c * p_pred * c + h)
            p = (1 - gain_oracle * c) * p_pred
        model = scalar_model(a=a, c=c, f=f, h=h)
        state = KalmanState([0.0], [[1.0]])
        gain = None
        for _ in range(10_000):
            state = kf_predict(state, model, [0.0])
            state, gain = kf_update(state, model, [0.0])
        assert gain[0, 0] == pytest.approx(gain_oracle, abs=1e-12)

    def test_singular_but_consistent_innovation_passes(self):
        # All-zero covariances: S = 0 but the innovation is 0, so the update
        # degenerates to the prediction (the exact zero-noise limit).
        model = scalar_model()
        state = KalmanState([2.0], [[0.0]])
        out, gain = kf_update(state, model, [2.0])
        assert out.x[0] == 2.0
        assert gain[0, 0] == 0.0

    def test_singular_inconsistent_innovation_raises_with_step(self):
        model = scalar_model()
        state = KalmanState([2.0], [[0.0]])
        with pytest.raises(NumericalSingularityError, match="step 17"):
            kf_update(state, model, [3.0], step=17)

    def test_dimension_mismatch_rejected(self):
        model = scalar_model()
        with pytest.raises(ValueError):
            kf_update(KalmanState([1.0], [[1.0]]), model, [1.0, 2.0])


class TestHeadingResidual:
    def test_wraps_across_seam(self):
        y = np.array([math.pi - 0.01])
        predicted = np.array([-math.pi + 0.01])
        assert heading_residual(y, predicted)[0] == pytest.approx(-0.02, abs=1e-12)

    def test_filter_never_sees_discontinuity(self):
        # Rotating through +pi with wrapped measurements: estimate follows.
        k_yaw, dt, h = 1.0, 0.02, 1e-4
        model = scalar_model(a=1.0, b=k_yaw * dt, f=1e-6, h=h)
        from cineflight.dynamics import heading_step, wrap_angle
        course = math.pi - 0.05
        state = KalmanState([course], [[h]])
        for _ in range(200):
            course = heading_step(course, 1.0, dt, k_yaw)
            state = kf_predict(state, model, [1.0])
            state, _ = kf_update(state, model, [course], residual=heading_residual)
            state = wrap_heading_state(state)
            assert abs(wrap_angle(state.x[0] - course)) < 1e-9


class TestCovarianceHealth:
    def test_psd_preserved_over_many_random_steps(self):
        rng = np.random.default_rng(2024)
        n = 3
        model = LinearGaussianModel(
            0.9 * np.eye(n) + 0.05 * rng.standard_normal((n, n)),
            rng.standard_normal((n, 1)),
            np.eye(n),
            0.01 * np.eye(n),
            0.04 * np.eye(n))
        state = KalmanState(np.zeros(n), np.eye(n))
        worst = 0.0
        for k in range(100_000):
            state = kf_predict(state, model, rng.uniform(-1, 1, size=1))
            state, _ = kf_update(state, model, rng.normal(size=n))
            if k % 500 == 0:
                assert np.array_equal(state.p, state.p.T)
                worst = min(worst, np.linalg.eigvalsh(state.p).min())
        assert worst >= -1e-10

    def test_model_rejects_non_psd_noise(self):
        with pytest.raises(ValueError):
            LinearGaussianModel([[1.0]], [[0.0]], [[1.0]], [[-1.0]], [[0.0]])
        bad_h = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
        with pytest.raises(ValueError):
            LinearGaussianModel(np.eye(2), np.zeros((2, 1)), np.eye(2),
                                np.zeros((2, 2)), bad_h)
