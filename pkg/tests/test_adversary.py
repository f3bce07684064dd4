"""Attacker sensing, tracking, scheduling and planning tests."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.constants import c as C_LIGHT

from spoofsim.adversary import (
    AttackerState,
    InfeasibleSchedule,
    SpoofCommand,
    StrategyConfig,
    TrackState,
    cv_process_noise,
    default_template,
    doppler_ramp,
    emission_from_command,
    music_spectrum_model,
    plan_attack,
    same_frame_bound,
    schedule_delay,
    sense_victim,
    solve_power_split,
    track_victim,
)
from spoofsim.airsim import AttackerNode, ChirpEmission, NoiseEmission
from spoofsim.radar_dsp import ArrayGeometry
from spoofsim.signalcore import BasebandSignal, ChirpParams, make_chirp

FS = 68.266667e6
PARAMS = ChirpParams()


def embedded_chirp(offset, snr_db, seed, n=40000, extra_offsets=()):
    rng = np.random.default_rng(seed)
    full = make_chirp(PARAMS, 0, FS).samples
    sig = np.zeros(n, complex)
    for off in (offset, *extra_offsets):
        sig[off : off + full.size] += full
    noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    rms = np.sqrt(np.mean(np.abs(full) ** 2))
    return BasebandSignal(sig + noise * rms / 10 ** (snr_db / 20), FS, 0.0)


class TestSenseVictim:
    def test_template_is_a_short_prefix(self):
        tpl = default_template(PARAMS, FS)
        full = make_chirp(PARAMS, 0, FS)
        assert tpl.samples.size < full.samples.size // 10
        assert np.allclose(tpl.samples, full.samples[: tpl.samples.size])

    def test_locates_chirp_at_snr_10(self):
        tpl = default_template(PARAMS, FS)
        for seed in range(5):
            rx = embedded_chirp(12345, 10.0, seed)
            hit = sense_victim(rx, tpl)
            assert hit is not None
            t, conf = hit
            assert abs(t * FS - 12345) <= 1
            assert conf > 0.7

    def test_noise_only_returns_none(self):
        tpl = default_template(PARAMS, FS)
        rng = np.random.default_rng(9)
        noise = (rng.standard_normal(30000) + 1j * rng.standard_normal(30000)) / np.sqrt(2)
        assert sense_victim(BasebandSignal(noise, FS, 0.0), tpl) is None

    def test_earliest_of_two_chirps_wins(self):
        tpl = default_template(PARAMS, FS)
        rx = embedded_chirp(5000, 10.0, 1, extra_offsets=(25000,))
        t, _ = sense_victim(rx, tpl)
        assert abs(t * FS - 5000) <= 1

    def test_detect_time_includes_window_origin(self):
        tpl = default_template(PARAMS, FS)
        rx = embedded_chirp(5000, 30.0, 2)
        shifted = BasebandSignal(rx.samples, FS, 1.5)
        t, _ = sense_victim(shifted, tpl)
        assert t == pytest.approx(1.5 + 5000 / FS, abs=2 / FS)

    def test_rejects_oversized_template(self):
        tpl = default_template(PARAMS, FS)
        short = BasebandSignal(np.zeros(10, complex), FS, 0.0)
        with pytest.raises(ValueError):
            sense_victim(short, tpl)

    def test_rejects_zero_energy_template(self):
        dead = BasebandSignal(np.zeros(50, complex), FS, 0.0)
        rx = embedded_chirp(5000, 10.0, 3)
        with pytest.raises(ValueError):
            sense_victim(rx, dead)


class TestTrackState:
    def test_rejects_negative_range(self):
        with pytest.raises(ValueError):
            TrackState(x=np.array([-1.0, 0.0, 0.0]), P=np.eye(3))

    def test_rejects_non_psd_covariance(self):
        bad = np.eye(3)
        bad[0, 0] = -0.5
        with pytest.raises(ValueError):
            TrackState(x=np.array([1.0, 0.0, 0.0]), P=bad)

    def test_rejects_asymmetric_covariance(self):
        bad = np.eye(3)
        bad[0, 1] = 0.3
        with pytest.raises(ValueError):
            TrackState(x=np.array([1.0, 0.0, 0.0]), P=bad)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            TrackState(x=np.array([1.0, 0.0]), P=np.eye(3))


class TestTrackVictim:
    DT = 4.45e-3

    def test_predict_only_grows_covariance_trace(self):
        ts = TrackState(x=np.array([40.0, -10.0, 2.0]), P=np.eye(3))
        q = cv_process_noise(self.DT)
        out = track_victim(ts, None, self.DT, q, None)
        assert np.trace(out.P) > np.trace(ts.P)
        assert out.t == pytest.approx(ts.t + self.DT)

    def test_update_shrinks_position_variance(self):
        ts = TrackState(x=np.array([40.0, -10.0, 2.0]), P=np.eye(3) * 9.0)
        q = cv_process_noise(self.DT)
        r = np.diag([0.09, 0.25, 0.25])
        out = track_victim(ts, np.array([39.9, -10.1, 2.2]), self.DT, q, r)
        assert out.P[0, 0] < ts.P[0, 0]

    def test_converges_on_constant_velocity_target(self):
        rng = np.random.default_rng(42)
        q = cv_process_noise(self.DT)
        r = np.diag([0.09, 0.25, 0.25])
        ts = TrackState(x=np.array([60.0, 0.0, 0.0]), P=np.diag([4.0, 4.0, 4.0]))
        errs = []
        for k in range(1, 101):
            true = np.array([60.0 - 12.0 * k * self.DT, -12.0, 1.0])
            z = true + rng.normal(0, [0.3, 0.5, 0.5])
            ts = track_victim(ts, z, self.DT, q, r)
            if k > 20:
                errs.append(ts.x - true)
        rmse = np.sqrt(np.mean(np.square(errs), axis=0))
        assert rmse[0] < 0.3
        assert rmse[1] < 0.5
        assert rmse[2] < 0.5

    def test_rejects_non_psd_prior(self):
        ts = TrackState(x=np.array([10.0, 0.0, 0.0]), P=np.eye(3))
        ts.P[0, 0] = -1.0  # corrupt after construction
        with pytest.raises(ValueError):
            track_victim(ts, None, self.DT, cv_process_noise(self.DT), None)

    def test_rejects_bad_dt(self):
        ts = TrackState(x=np.array([10.0, 0.0, 0.0]), P=np.eye(3))
        with pytest.raises(ValueError):
            track_victim(ts, None, 0.0, cv_process_noise(self.DT), None)

    def test_rejects_malformed_measurement(self):
        ts = TrackState(x=np.array([10.0, 0.0, 0.0]), P=np.eye(3))
        with pytest.raises(ValueError):
            track_victim(ts, np.array([10.0, 0.0]), self.DT,
                         cv_process_noise(self.DT), np.eye(3))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_covariance_stays_psd(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(3, 3))
        ts = TrackState(x=np.array([50.0, -5.0, 0.0]), P=a @ a.T + 1e-6 * np.eye(3))
        q = cv_process_noise(self.DT, accel_psd=float(rng.uniform(0.1, 10)))
        r = np.diag(rng.uniform(0.01, 1.0, 3))
        z = np.array([50.0, -5.0, 0.0]) + rng.normal(0, 1, 3)
        out = track_victim(ts, z, self.DT, q, r)
        assert np.linalg.eigvalsh(out.P)[0] >= -1e-9


class TestScheduleDelay:
    TRACK = TrackState(x=np.array([25.0, 0.0, 0.0]), P=np.eye(3))

    def test_colocated_zero_latency_fine_is_round_trip(self):
        node = AttackerNode(range_m=1e-9, angle_deg=0.0,
                            sensing_latency_s=0.0, switch_latency_s=0.0)
        lag, fine = schedule_delay(self.TRACK, node, 30.0, PARAMS.frame_period,
                                   min_lag=0, max_lag=0)
        assert lag == 0
        assert fine == pytest.approx(2 * 30.0 / C_LIGHT, rel=1e-12)

    def test_prefers_smallest_feasible_lag(self):
        node = AttackerNode(range_m=10.0, angle_deg=0.0)
        lag, fine = schedule_delay(self.TRACK, node, 30.0, PARAMS.frame_period,
                                   min_lag=1, max_lag=8)
        assert lag == 1
        assert fine >= node.switch_latency_s

    def test_same_frame_bound_splits_feasibility(self):
        probe = AttackerNode(range_m=1.0, angle_deg=0.0)
        bound = same_frame_bound(probe, 50.0)
        assert bound == pytest.approx(50.0 - C_LIGHT * 75e-9 / 2, rel=1e-9)
        inside = AttackerNode(range_m=bound - 0.01, angle_deg=0.0)
        outside = AttackerNode(range_m=bound + 0.01, angle_deg=0.0)
        lag, fine = schedule_delay(self.TRACK, inside, 50.0, PARAMS.frame_period,
                                   min_lag=0, max_lag=0)
        assert lag == 0 and fine >= inside.switch_latency_s
        with pytest.raises(InfeasibleSchedule):
            schedule_delay(self.TRACK, outside, 50.0, PARAMS.frame_period,
                           min_lag=0, max_lag=0)

    def test_infeasible_when_lag_budget_exhausted(self):
        # even max_lag frames cannot push fine_delay negative enough
        node = AttackerNode(range_m=10.0, angle_deg=0.0, switch_latency_s=1.0)
        with pytest.raises(InfeasibleSchedule):
            schedule_delay(self.TRACK, node, 30.0, PARAMS.frame_period,
                           min_lag=0, max_lag=8)

    def test_rejects_bad_lag_bounds(self):
        node = AttackerNode(range_m=10.0, angle_deg=0.0)
        with pytest.raises(ValueError):
            schedule_delay(self.TRACK, node, 30.0, PARAMS.frame_period,
                           min_lag=3, max_lag=1)

    @given(
        st.floats(5.0, 120.0),
        st.floats(1.0, 60.0),
        st.integers(0, 6),
    )
    @settings(max_examples=60, deadline=None)
    def test_timeline_congruence(self, d_spoof, d_att, min_lag):
        """Full timeline equals the spoofed round trip modulo the frame."""
        node = AttackerNode(range_m=d_att, angle_deg=0.0)
        try:
            lag, fine = schedule_delay(self.TRACK, node, d_spoof,
                                       PARAMS.frame_period,
                                       min_lag=min_lag, max_lag=min_lag + 8)
        except InfeasibleSchedule:
            return
        assert min_lag <= lag <= min_lag + 8
        assert fine >= node.switch_latency_s
        total = (d_att / C_LIGHT + node.sensing_latency_s + lag * PARAMS.frame_period
                 + fine + d_att / C_LIGHT)
        residue = (total - 2 * d_spoof / C_LIGHT) / PARAMS.frame_period
        assert abs(residue - round(residue)) < 1e-9


class TestStrategyConfig:
    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            StrategyConfig(kind="teleport")

    def test_rejects_bad_power_split(self):
        with pytest.raises(ValueError):
            StrategyConfig(kind="synchronous_pair", power_split=(1.0, 0.0))

    def test_rejects_nonpositive_spoof_range(self):
        with pytest.raises(ValueError):
            StrategyConfig(kind="add_obstacle", d_spoof=0.0)

    def test_rejects_empty_train(self):
        with pytest.raises(ValueError):
            StrategyConfig(kind="multi_obstacle", n_obstacles=0)


class TestPlanAttack:
    NODES = [
        AttackerNode(range_m=15.0, angle_deg=-10.0),
        AttackerNode(range_m=15.0, angle_deg=10.0),
    ]
    TRACK = TrackState(x=np.array([25.0, 0.0, 0.0]), P=np.eye(3))

    def test_add_obstacle_single_chirp(self):
        cfg = StrategyConfig(kind="add_obstacle", d_spoof=30.0, v_spoof=-5.0)
        (cmd,) = plan_attack(cfg, self.TRACK, 7, self.NODES[:1])
        assert cmd.kind == "chirp_with"
        assert cmd.delay_s == pytest.approx(2 * 30.0 / C_LIGHT)
        assert cmd.phase_ramp_rad == pytest.approx(doppler_ramp(-5.0, PARAMS))
        assert cmd.frame_id == 7

    def test_multi_obstacle_train_spacing(self):
        cfg = StrategyConfig(kind="multi_obstacle", d_spoof=20.0,
                             n_obstacles=4, spacing_m=10.0)
        (cmd,) = plan_attack(cfg, self.TRACK, 0, self.NODES[:1])
        assert cmd.kind == "spoof_train"
        assert len(cmd.extra_delays) == 3
        assert cmd.extra_delays[0] == pytest.approx(2 * 10.0 / C_LIGHT)
        assert cmd.extra_delays[2] == pytest.approx(2 * 30.0 / C_LIGHT)

    def test_gaussian_reseeds_each_frame(self):
        cfg = StrategyConfig(kind="random_gaussian", noise_seed=100)
        (a,) = plan_attack(cfg, self.TRACK, 1, self.NODES[:1])
        (b,) = plan_attack(cfg, self.TRACK, 2, self.NODES[:1])
        assert a.kind == "gaussian_noise"
        assert a.noise_seed != b.noise_seed

    def test_synchronous_pair_requires_flag(self):
        cfg = StrategyConfig(kind="synchronous_pair")
        with pytest.raises(ValueError):
            plan_attack(cfg, self.TRACK, 0, self.NODES)

    def test_pair_requires_two_nodes(self):
        cfg = StrategyConfig(kind="asynchronous_pair")
        with pytest.raises(ValueError):
            plan_attack(cfg, self.TRACK, 0, self.NODES[:1])

    def test_synchronous_pair_identical_delays(self):
        cfg = StrategyConfig(kind="synchronous_pair", perfect_sync=True,
                             power_split=(1.0, 4.0))
        c1, c2 = plan_attack(cfg, self.TRACK, 0, self.NODES)
        assert c1.kind == c2.kind == "chirp_with"
        assert c1.delay_s == c2.delay_s
        assert c1.power_scale == pytest.approx(0.25)
        assert c2.power_scale == pytest.approx(1.0)

    def test_async_pair_roles_and_shared_seed(self):
        cfg = StrategyConfig(kind="asynchronous_pair", power_split=(0.74, 1.0),
                             noise_seed=11)
        c1, c2 = plan_attack(cfg, self.TRACK, 3, self.NODES)
        assert c1.kind == "correlated_chirp_plus_noise"
        assert c2.kind == "correlated_noise_only"
        assert c1.noise_seed == c2.noise_seed == 11
        assert c1.delay_s == c2.delay_s

    def test_power_normalization_never_exceeds_unity(self):
        cfg = StrategyConfig(kind="synchronous_pair", perfect_sync=True,
                             power_split=(3.0, 7.0))
        cmds = plan_attack(cfg, self.TRACK, 0, self.NODES)
        assert max(c.power_scale for c in cmds) == pytest.approx(1.0)

    def test_requires_nodes(self):
        with pytest.raises(ValueError):
            plan_attack(StrategyConfig(kind="add_obstacle"), self.TRACK, 0, [])


class TestEmissionAdapter:
    def test_none_maps_to_no_emission(self):
        cmd = SpoofCommand(node_index=0, kind="none", frame_id=0)
        assert emission_from_command(cmd, PARAMS) is None

    def test_chirp_with_carries_phase(self):
        phi = np.linspace(0, 1, PARAMS.n_chirps)
        cmd = SpoofCommand(node_index=0, kind="chirp_with", frame_id=0,
                           delay_s=2e-7, phase_ramp_rad=0.1)
        em = emission_from_command(cmd, PARAMS, phi_tx=phi)
        assert isinstance(em.chirps, ChirpEmission)
        assert em.noise is None
        assert np.array_equal(em.chirps.phi_tx, phi)
        assert em.chirps.doppler_step_rad == pytest.approx(0.1)

    def test_gaussian_noise_is_unanchored(self):
        cmd = SpoofCommand(node_index=0, kind="gaussian_noise", frame_id=0,
                           power_scale=2.0, noise_seed=5)
        em = emission_from_command(cmd, PARAMS)
        assert em.chirps is None
        assert isinstance(em.noise, NoiseEmission)
        assert em.noise.center_delay_s is None

    def test_correlated_noise_anchored_at_delay(self):
        cmd = SpoofCommand(node_index=1, kind="correlated_noise_only", frame_id=0,
                           delay_s=2e-7, noise_seed=5)
        em = emission_from_command(cmd, PARAMS)
        assert em.chirps is None
        assert em.noise.center_delay_s == pytest.approx(2e-7)

    def test_chirp_plus_noise_splits_budget(self):
        cmd = SpoofCommand(node_index=0, kind="correlated_chirp_plus_noise",
                           frame_id=0, delay_s=2e-7, power_scale=0.8, noise_seed=5)
        em = emission_from_command(cmd, PARAMS)
        assert em.chirps.power_scale == pytest.approx(0.4)
        assert em.noise.power_scale == pytest.approx(0.4)
        assert em.noise.center_delay_s == pytest.approx(2e-7)

    def test_rejects_unknown_command_kind(self):
        with pytest.raises(ValueError):
            SpoofCommand(node_index=0, kind="chirp", frame_id=0)


class TestPowerSplitSolver:
    GEOM = ArrayGeometry()

    def test_equal_split_lands_near_midpoint(self):
        p1, p2 = solve_power_split(-10.0, 10.0, 0.0, self.GEOM)
        assert p1 / p2 == pytest.approx(1.0, abs=0.05)

    def test_solution_steers_model_to_target(self):
        grid = np.arange(-15.0, 15.05, 0.05)
        for target in (-7.0, -3.0, 0.0, 3.0, 7.0):
            p1, p2 = solve_power_split(-10.0, 10.0, target, self.GEOM)
            spec = music_spectrum_model(
                grid, [(-10.0, p1), (10.0, p2)], self.GEOM)
            assert grid[np.argmax(spec)] == pytest.approx(target, abs=0.25)

    def test_heavier_node_pulls_angle_toward_it(self):
        p1a, p2a = solve_power_split(-10.0, 10.0, -6.0, self.GEOM)
        p1b, p2b = solve_power_split(-10.0, 10.0, 6.0, self.GEOM)
        assert p1a / p2a > 1.0 > p1b / p2b

    def test_out_of_span_target_raises(self):
        with pytest.raises(ValueError):
            solve_power_split(-10.0, 10.0, 25.0, self.GEOM)

    def test_echo_term_shifts_required_ratio(self):
        p1, p2 = solve_power_split(-10.0, 10.0, 5.0, self.GEOM,
                                   total_power=4.0, echo=(0.0, 1.0))
        q1, q2 = solve_power_split(-10.0, 10.0, 5.0, self.GEOM, total_power=4.0)
        # the on-axis echo drags the composite toward zero, so reaching +5
        # needs more weight on the +10 node than without it
        assert p1 / p2 < q1 / q2


class TestAttackerState:
    def test_first_measurement_initializes_track(self):
        state = AttackerState()
        q = cv_process_noise(4.45e-3)
        r = np.diag([0.09, 0.25, 0.25])
        tr = state.update_track((42.0, -8.0, 1.0), 4.45e-3, q, r)
        assert tr.range_m == pytest.approx(42.0)

    def test_subsequent_measurements_filter(self):
        state = AttackerState()
        q = cv_process_noise(4.45e-3)
        r = np.diag([0.09, 0.25, 0.25])
        state.update_track((42.0, -8.0, 1.0), 4.45e-3, q, r)
        tr = state.update_track(np.array([41.9, -8.1, 1.1]), 4.45e-3, q, r)
        assert 41.9 <= tr.range_m <= 42.05
