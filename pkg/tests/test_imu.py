import numpy as np
import pytest

from dynafuse import so3
from dynafuse.imu import (
    CameraEgoMotion,
    Extrinsics,
    ImuBias,
    ImuNoiseParams,
    ImuSample,
    PreintegratedDelta,
    WorldState,
    gravity_w,
    integrate_dynamics,
    load_imu_csv,
    preintegrate,
    save_imu_csv,
    simulate_measurement,
    to_camera_frame,
)

from helpers import truth_samples, truth_state, truth_world_state

ZERO_NOISE = ImuNoiseParams(0.0, 0.0, 0.0, 0.0)


class TestSimulateMeasurement:
    def test_stationary_identity_attitude(self):
        state = WorldState(np.zeros(3), np.zeros(3), [1, 0, 0, 0])
        s = simulate_measurement(state, np.zeros(3), np.zeros(3), ImuBias(), ZERO_NOISE, 100.0)
        np.testing.assert_allclose(s.a_m, [0.0, 0.0, 9.81], atol=1e-15)
        np.testing.assert_array_equal(s.w_m, np.zeros(3))

    def test_gyro_bias_is_additive(self):
        state = WorldState(np.zeros(3), np.zeros(3), [1, 0, 0, 0])
        bias = ImuBias(b_w=[0.01, 0.0, 0.0])
        w_b = np.array([0.2, -0.1, 0.3])
        s = simulate_measurement(state, np.zeros(3), w_b, bias, ZERO_NOISE, 100.0)
        np.testing.assert_allclose(s.w_m, w_b + [0.01, 0.0, 0.0], atol=1e-15)

    def test_discrete_noise_std_monte_carlo(self):
        state = WorldState(np.zeros(3), np.zeros(3), [1, 0, 0, 0])
        noise = ImuNoiseParams(sigma_w=0.0, sigma_bw=0.0, sigma_a=0.1, sigma_ba=0.0)
        rng = np.random.default_rng(42)
        draws = np.array(
            [
                simulate_measurement(
                    state, np.zeros(3), np.zeros(3), ImuBias(), noise, 100.0, rng
                ).a_m
                for _ in range(100_000)
            ]
        )
        std = (draws - draws.mean(axis=0)).std()
        assert std == pytest.approx(0.1 * np.sqrt(100.0), rel=0.03)

    def test_deterministic_given_seed(self):
        state = WorldState(np.zeros(3), np.ones(3), [1, 0, 0, 0])
        noise = ImuNoiseParams()
        a = simulate_measurement(state, np.ones(3), np.ones(3), ImuBias(), noise, 200.0, rng=7)
        b = simulate_measurement(state, np.ones(3), np.ones(3), ImuBias(), noise, 200.0, rng=7)
        np.testing.assert_array_equal(a.a_m, b.a_m)
        np.testing.assert_array_equal(a.w_m, b.w_m)

    def test_rejects_bad_rate(self):
        state = WorldState(np.zeros(3), np.zeros(3), [1, 0, 0, 0])
        with pytest.raises(ValueError):
            simulate_measurement(state, np.zeros(3), np.zeros(3), ImuBias(), ZERO_NOISE, 0.0)


class TestIntegrateDynamics:
    def test_hover_leaves_state_unchanged(self):
        state = WorldState(np.array([1.0, 2.0, 3.0]), np.zeros(3), [1, 0, 0, 0])
        samples = [
            ImuSample(t, np.zeros(3), np.array([0.0, 0.0, 9.81])) for t in np.arange(0, 1.01, 0.01)
        ]
        out = integrate_dynamics(state, samples, ImuBias())
        np.testing.assert_allclose(out.p_wb, state.p_wb, atol=1e-12)
        np.testing.assert_allclose(out.v_w, np.zeros(3), atol=1e-12)
        np.testing.assert_allclose(out.q_wb, state.q_wb, atol=1e-15)
        assert out.t == pytest.approx(1.0)

    def test_constant_acceleration_closed_form(self):
        v0 = np.array([0.3, 0.0, 0.0])
        state = WorldState(np.zeros(3), v0, [1, 0, 0, 0])
        a = 0.7
        samples = [
            ImuSample(t, np.zeros(3), np.array([a, 0.0, 9.81])) for t in np.arange(0, 2.001, 0.01)
        ]
        out = integrate_dynamics(state, samples, ImuBias())
        big_t = 2.0
        np.testing.assert_allclose(out.p_wb, v0 * big_t + [0.5 * a * big_t**2, 0, 0], atol=1e-10)
        np.testing.assert_allclose(out.v_w, v0 + [a * big_t, 0, 0], atol=1e-10)

    def test_against_fine_step_oracle(self):
        state = truth_world_state(0.0)
        coarse = integrate_dynamics(state, truth_samples(100.0, 2.0), ImuBias())
        fine = integrate_dynamics(state, truth_samples(10_000.0, 2.0), ImuBias())
        assert np.linalg.norm(coarse.p_wb - fine.p_wb) < 1e-4

    def test_second_order_convergence(self):
        state = truth_world_state(0.0)
        fine = integrate_dynamics(state, truth_samples(10_000.0, 2.0), ImuBias())
        err = {
            rate: np.linalg.norm(
                integrate_dynamics(state, truth_samples(rate, 2.0), ImuBias()).p_wb - fine.p_wb
            )
            for rate in (100.0, 200.0)
        }
        assert err[100.0] / err[200.0] >= 3.5

    def test_rejects_empty_and_non_monotone(self):
        state = truth_world_state(0.0)
        with pytest.raises(ValueError):
            integrate_dynamics(state, [], ImuBias())
        bad = [ImuSample(0.0, np.zeros(3), np.zeros(3)), ImuSample(0.0, np.zeros(3), np.zeros(3))]
        with pytest.raises(ValueError):
            integrate_dynamics(state, bad, ImuBias())


class TestPreintegrate:
    def test_zero_inputs(self):
        samples = [ImuSample(t, np.zeros(3), np.zeros(3)) for t in np.arange(0, 1.01, 0.01)]
        d = preintegrate(samples, ImuBias())
        np.testing.assert_allclose(d.alpha, np.zeros(3), atol=1e-15)
        np.testing.assert_allclose(d.beta, np.zeros(3), atol=1e-15)
        np.testing.assert_allclose(d.q_bibj, [1, 0, 0, 0], atol=1e-15)

    def test_constant_acceleration_two_seconds(self):
        samples = [
            ImuSample(t, np.zeros(3), np.array([1.0, 0.0, 0.0]))
            for t in np.arange(0, 2.001, 0.01)
        ]
        d = preintegrate(samples, ImuBias())
        np.testing.assert_allclose(d.beta, [2.0, 0.0, 0.0], atol=1e-10)
        np.testing.assert_allclose(d.alpha, [2.0, 0.0, 0.0], atol=1e-10)
        assert d.dt_total == pytest.approx(2.0)

    def test_composition_reproduces_full_integration(self):
        # Algebraic identity: p_j = p_i + v_i*dt + R_i*alpha - 0.5*g*dt^2 etc.
        bias = ImuBias(b_w=[0.004, -0.002, 0.001], b_a=[0.05, -0.03, 0.02])
        samples = truth_samples(50.0, 1.5, bias)
        state = truth_world_state(0.0)
        direct = integrate_dynamics(state, samples, bias)
        d = preintegrate(samples, bias)
        r_i = state.r_wb
        dt = d.dt_total
        g = state.g_w
        p_j = state.p_wb + state.v_w * dt + r_i @ d.alpha - 0.5 * g * dt**2
        v_j = state.v_w + r_i @ d.beta - g * dt
        q_j = so3.quat_mul(state.q_wb, d.q_bibj)
        np.testing.assert_allclose(p_j, direct.p_wb, atol=1e-10)
        np.testing.assert_allclose(v_j, direct.v_w, atol=1e-10)
        np.testing.assert_allclose(
            so3.rot_from_quat(q_j), so3.rot_from_quat(direct.q_wb), atol=1e-10
        )

    def test_independent_of_world_frame(self):
        # Re-expressing the same trajectory under a rotated world frame
        # leaves the body-frame measurements, hence the delta, unchanged.
        rng = np.random.default_rng(20)
        r_world = so3.exp_so3(rng.normal(size=3))
        g = gravity_w()
        base, rotated = [], []
        for t in np.arange(0.0, 1.0 + 0.005, 0.01):
            r_wb, _, _, a_w, w_b = truth_state(t)
            base.append(ImuSample(t, w_b, r_wb.T @ (a_w + g)))
            r_wb2 = r_world @ r_wb
            rotated.append(ImuSample(t, w_b, r_wb2.T @ (r_world @ a_w + r_world @ g)))
        d1 = preintegrate(base, ImuBias())
        d2 = preintegrate(rotated, ImuBias())
        np.testing.assert_allclose(d1.alpha, d2.alpha, atol=1e-12)
        np.testing.assert_allclose(d1.beta, d2.beta, atol=1e-12)
        np.testing.assert_allclose(d1.q_bibj, d2.q_bibj, atol=1e-12)

    def test_deterministic_bit_identical(self):
        samples = truth_samples(100.0, 1.0)
        d1 = preintegrate(samples, ImuBias())
        d2 = preintegrate(samples, ImuBias())
        assert (d1.alpha == d2.alpha).all()
        assert (d1.beta == d2.beta).all()
        assert (d1.q_bibj == d2.q_bibj).all()

    def test_requires_two_samples(self):
        with pytest.raises(ValueError):
            preintegrate([ImuSample(0.0, np.zeros(3), np.zeros(3))], ImuBias())


def random_extrinsics(rng):
    return Extrinsics(so3.exp_so3(rng.normal(size=3) * 0.5), rng.normal(size=3) * 0.2)


class TestToCameraFrame:
    def test_identity_everything(self):
        d = PreintegratedDelta(np.zeros(3), np.zeros(3), np.array([1.0, 0, 0, 0]), 0.1)
        ego = to_camera_frame(d, Extrinsics.identity(), np.zeros(3), np.zeros(3))
        np.testing.assert_allclose(ego.R, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(ego.p, np.zeros(3), atol=1e-15)

    def test_velocity_and_gravity_terms(self):
        d = PreintegratedDelta(np.zeros(3), np.zeros(3), np.array([1.0, 0, 0, 0]), 0.1)
        ego = to_camera_frame(
            d, Extrinsics.identity(), np.array([1.0, 0, 0]), np.array([0.0, 0, 9.81])
        )
        np.testing.assert_allclose(ego.p, [0.1, 0.0, -0.04905], atol=1e-15)

    def test_pose_composition_oracle(self):
        # The camera-frame conversion must equal T_wc_k^-1 T_wc_{k+1} where
        # the world chain comes from the Eq-style full integration.
        rng = np.random.default_rng(21)
        for trial in range(10):
            ex = random_extrinsics(rng)
            bias = ImuBias(b_w=rng.normal(size=3) * 0.01, b_a=rng.normal(size=3) * 0.05)
            samples = truth_samples(100.0, 0.4, bias)
            state_i = truth_world_state(0.0)
            state_j = integrate_dynamics(state_i, samples, bias)

            r_wb_i, r_wb_j = state_i.r_wb, state_j.r_wb
            r_wc_i, p_wc_i = r_wb_i @ ex.R_bc, state_i.p_wb + r_wb_i @ ex.p_bc
            r_wc_j, p_wc_j = r_wb_j @ ex.R_bc, state_j.p_wb + r_wb_j @ ex.p_bc
            r_true = r_wc_i.T @ r_wc_j
            p_true = r_wc_i.T @ (p_wc_j - p_wc_i)

            v_ck = ex.R_cb @ r_wb_i.T @ state_i.v_w
            g_ck = ex.R_cb @ r_wb_i.T @ state_i.g_w
            ego = to_camera_frame(preintegrate(samples, bias), ex, v_ck, g_ck)
            np.testing.assert_allclose(ego.R, r_true, atol=1e-8)
            np.testing.assert_allclose(ego.p, p_true, atol=1e-8)

    def test_linear_in_velocity_and_gravity(self):
        rng = np.random.default_rng(22)
        samples = truth_samples(100.0, 0.2)
        d = preintegrate(samples, ImuBias())
        ex = random_extrinsics(rng)
        dt = d.dt_total
        base = to_camera_frame(d, ex, np.zeros(3), np.zeros(3))
        for _ in range(5):
            v, g = rng.normal(size=3), rng.normal(size=3)
            ego = to_camera_frame(d, ex, v, g)
            np.testing.assert_allclose(ego.p, base.p + v * dt - 0.5 * g * dt**2, atol=1e-14)
            np.testing.assert_array_equal(ego.R, base.R)

    def test_rejects_zero_duration(self):
        d = PreintegratedDelta(np.zeros(3), np.zeros(3), np.array([1.0, 0, 0, 0]), 0.0)
        with pytest.raises(ValueError):
            to_camera_frame(d, Extrinsics.identity(), np.zeros(3), np.zeros(3))


class TestTypes:
    def test_extrinsics_consistency(self):
        rng = np.random.default_rng(23)
        ex = random_extrinsics(rng)
        np.testing.assert_allclose(ex.p_cb, -ex.R_cb @ ex.p_bc, atol=1e-12)
        np.testing.assert_allclose(ex.R_bc @ ex.R_cb, np.eye(3), atol=1e-12)

    def test_ego_motion_inverse(self):
        rng = np.random.default_rng(24)
        ego = CameraEgoMotion(so3.exp_so3(rng.normal(size=3)), rng.normal(size=3))
        inv = ego.inverse()
        np.testing.assert_allclose(inv.R @ ego.R, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(ego.R @ inv.p + ego.p, np.zeros(3), atol=1e-12)

    def test_ego_motion_xi_round_trip(self):
        rng = np.random.default_rng(25)
        ego = CameraEgoMotion(so3.exp_so3(rng.normal(size=3) * 0.5), rng.normal(size=3))
        back = CameraEgoMotion.from_xi(ego.as_xi())
        np.testing.assert_allclose(back.R, ego.R, atol=1e-12)
        np.testing.assert_allclose(back.p, ego.p, atol=1e-12)


def test_csv_round_trip(tmp_path):
    samples = truth_samples(100.0, 0.1)
    path = tmp_path / "imu.csv"
    save_imu_csv(path, samples)
    loaded = load_imu_csv(path)
    assert len(loaded) == len(samples)
    for a, b in zip(samples, loaded):
        assert a.t == b.t
        np.testing.assert_array_equal(a.w_m, b.w_m)
        np.testing.assert_array_equal(a.a_m, b.a_m)
