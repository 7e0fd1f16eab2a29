"""Tests for the simulated pose-estimation channel.

The drift model admits an exact statistical oracle: with the estimate
composed as gt . drift . noise, the translation error magnitude is
||mu + w|| with w zero-mean isotropic Gaussian of per-axis variance
beta_t^2 t + sigma_t^2, independent of where the trajectory goes. The
Monte-Carlo tests check that law directly.
"""

import numpy as np
import pytest

from mcr_teleop.errors import EmptyStream, InvalidSpec
from mcr_teleop.geometry import Pose, compose, rotation_distance
from mcr_teleop.vio import (
    EstimateStream,
    VioChannel,
    VioPreset,
    absolute_orientation_error,
    absolute_position_error,
    default_trajectory_spec,
    estimate_stream,
    generate_test_trajectory,
    load_presets,
    sample_times,
)

PRESET_NAMES = ["wired-stereo", "wireless-stereo", "wired-rgbd", "wireless-rgbd"]


def default_trajectory():
    return generate_test_trajectory(default_trajectory_spec())


class TestPreset:
    def test_negative_noise_rejected(self):
        with pytest.raises(InvalidSpec):
            VioPreset(name="bad", rate=30.0, sigma_t=-0.01)

    def test_nonpositive_rate_rejected(self):
        with pytest.raises(InvalidSpec):
            VioPreset(name="bad", rate=0.0)

    def test_latency_property_converts_to_seconds(self):
        p = VioPreset(name="p", rate=30.0, latency_ms=40.0)
        assert p.latency == pytest.approx(0.04)

    def test_shipped_presets_load_with_supported_rates(self):
        presets = load_presets()
        assert sorted(presets) == sorted(PRESET_NAMES)
        for p in presets.values():
            assert p.rate in (15.0, 30.0)
            for field in ("sigma_t", "sigma_r", "beta_t", "beta_r"):
                assert getattr(p, field) >= 0

    def test_stereo_presets_run_at_30hz_and_wireless_rgbd_at_15(self):
        presets = load_presets()
        assert presets["wired-stereo"].rate == 30.0
        assert presets["wireless-stereo"].rate == 30.0
        assert presets["wireless-rgbd"].rate == 15.0


class TestTrajectory:
    def test_empty_spec_is_constant_identity(self):
        gt = generate_test_trajectory([])
        assert gt.duration == 0.0
        for t in [0.0, 1.0, 57.3]:
            p = gt.pose_at(t)
            assert np.array_equal(p.translation, np.zeros(3))
            assert np.array_equal(p.rotation, np.array([1.0, 0, 0, 0]))

    def test_single_translation_segment_endpoint(self):
        gt = generate_test_trajectory(
            [{"kind": "translation", "axis": "x", "amplitude": 0.2, "duration": 4.0}])
        assert gt.duration == 4.0
        np.testing.assert_allclose(gt.pose_at(4.0).translation, [0.2, 0, 0], atol=1e-15)
        np.testing.assert_allclose(gt.pose_at(0.0).translation, [0, 0, 0], atol=1e-15)

    def test_zero_velocity_at_segment_endpoints(self):
        gt = generate_test_trajectory(
            [{"kind": "translation", "axis": "x", "amplitude": 0.2, "duration": 4.0}])
        h = 1e-4
        v_start = (gt.pose_at(h).translation - gt.pose_at(0.0).translation) / h
        v_end = (gt.pose_at(4.0).translation - gt.pose_at(4.0 - h).translation) / h
        assert np.linalg.norm(v_start) < 1e-6
        assert np.linalg.norm(v_end) < 1e-6

    def test_default_spec_reaches_each_amplitude(self):
        gt = default_trajectory()
        times, poses = gt.sampled(100.0)
        positions = np.array([p.translation for p in poses])
        np.testing.assert_allclose(np.abs(positions).max(axis=0), [0.3, 0.3, 0.3],
                                   atol=1e-6)
        angles = [rotation_distance(Pose.identity(), p) for p in poses]
        assert max(angles) > 0.4

    def test_sample_times_strictly_increasing(self):
        gt = default_trajectory()
        times, _ = gt.sampled(30.0)
        assert np.all(np.diff(times) > 0)

    def test_velocity_continuous_at_segment_boundary(self):
        gt = generate_test_trajectory([
            {"kind": "translation", "axis": "x", "amplitude": 0.2, "duration": 2.0},
            {"kind": "translation", "axis": "y", "amplitude": 0.2, "duration": 2.0},
        ])
        h = 1e-4
        v_left = (gt.pose_at(2.0).translation - gt.pose_at(2.0 - h).translation) / h
        v_right = (gt.pose_at(2.0 + h).translation - gt.pose_at(2.0).translation) / h
        assert np.linalg.norm(v_left - v_right) < 1e-6

    @pytest.mark.parametrize("bad", [
        {"kind": "spline", "axis": "x", "amplitude": 0.1, "duration": 1.0},
        {"kind": "translation", "axis": "w", "amplitude": 0.1, "duration": 1.0},
        {"kind": "translation", "axis": "x", "amplitude": -0.1, "duration": 1.0},
        {"kind": "translation", "axis": "x", "amplitude": 0.1, "duration": 0.0},
        {"kind": "translation"},
    ])
    def test_bad_segment_rejected(self, bad):
        with pytest.raises(InvalidSpec):
            generate_test_trajectory([bad])


class TestEstimateStream:
    def test_zero_noise_preset_reproduces_ground_truth(self):
        gt = default_trajectory()
        est = estimate_stream(gt, VioPreset.ideal(rate=30.0), seed=3)
        for t, p in zip(est.times, est.poses):
            truth = gt.pose_at(t)
            assert np.linalg.norm(p.translation - truth.translation) <= 1e-12
            assert rotation_distance(truth, p) <= 1e-12

    def test_sample_count_15hz_60s(self):
        gt = default_trajectory()
        est = estimate_stream(gt, VioPreset.ideal(rate=15.0), seed=0)
        assert len(est.times) == int(np.floor(60.0 * 15.0)) == 900

    def test_sample_count_every_shipped_preset(self):
        gt = default_trajectory()
        for preset in load_presets().values():
            est = estimate_stream(gt, preset, seed=0)
            assert len(est.times) == int(np.floor(gt.duration * preset.rate))

    def test_sample_count_fractional_duration(self):
        times = sample_times(0.7, 15.0)
        assert len(times) == 10

    def test_seed_determinism(self):
        gt = default_trajectory()
        preset = load_presets()["wired-rgbd"]
        a = estimate_stream(gt, preset, seed=11)
        b = estimate_stream(gt, preset, seed=11)
        c = estimate_stream(gt, preset, seed=12)
        for pa, pb in zip(a.poses, b.poses):
            assert np.array_equal(pa.translation, pb.translation)
            assert np.array_equal(pa.rotation, pb.rotation)
        assert any(not np.array_equal(pa.translation, pc.translation)
                   for pa, pc in zip(a.poses, c.poses))

    def test_latency_delays_content(self):
        gt = default_trajectory()
        preset = VioPreset(name="lagged", rate=30.0, latency_ms=200.0)
        est = estimate_stream(gt, preset, seed=0)
        k = 150  # t = 5 s, mid segment, moving
        t = est.times[k]
        delayed = gt.pose_at(t - 0.2)
        current = gt.pose_at(t)
        assert np.linalg.norm(est.poses[k].translation - delayed.translation) < 1e-12
        assert np.linalg.norm(est.poses[k].translation - current.translation) > 1e-4

    def test_squared_error_grows_linearly_in_time(self):
        # beta_t > 0, sigma = 0: per-axis variance is beta^2 t, so the mean
        # squared error over seeds should match 3 beta^2 t within 20%.
        gt = default_trajectory()
        beta = 0.02
        preset = VioPreset(name="drift-only", rate=30.0, beta_t=beta)
        checkpoints = [600, 1200, 1799]
        sq = np.zeros(len(checkpoints))
        for seed in range(100):
            est = estimate_stream(gt, preset, seed=seed)
            for i, k in enumerate(checkpoints):
                t = est.times[k]
                err = est.poses[k].translation - gt.pose_at(t).translation
                sq[i] += err @ err
        sq /= 100
        for i, k in enumerate(checkpoints):
            t = k / 30.0
            expected = 3 * beta ** 2 * t
            assert abs(sq[i] - expected) <= 0.2 * expected
        # doubling time doubles the expectation
        assert abs(sq[1] / sq[0] - 2.0) <= 0.4


class TestAbsoluteError:
    def test_perfect_estimate_gives_zeros(self):
        gt = default_trajectory()
        est = estimate_stream(gt, VioPreset.ideal(), seed=0)
        errors, avg = absolute_position_error(est, gt)
        assert np.all(errors <= 1e-12)
        assert avg <= 1e-12

    def test_constant_offset_average_exact(self):
        gt = default_trajectory()
        times = sample_times(gt.duration, 30.0)
        offset = np.array([0.05, 0.0, 0.0])
        poses = [Pose(gt.pose_at(t).rotation, gt.pose_at(t).translation + offset)
                 for t in times]
        est = EstimateStream(times=times, poses=poses, preset=VioPreset.ideal())
        errors, avg = absolute_position_error(est, gt)
        assert avg == pytest.approx(0.05, abs=1e-15)

    def test_empty_stream_rejected(self):
        gt = default_trajectory()
        est = EstimateStream(times=np.array([]), poses=[], preset=VioPreset.ideal())
        with pytest.raises(EmptyStream):
            absolute_position_error(est, gt)
        with pytest.raises(EmptyStream):
            absolute_orientation_error(est, gt)

    def test_orientation_error_tracks_rotation_drift(self):
        gt = default_trajectory()
        noisy = VioPreset(name="r-drift", rate=30.0, beta_r=0.01)
        clean = VioPreset.ideal(rate=30.0)
        _, avg_noisy = absolute_orientation_error(estimate_stream(gt, noisy, 0), gt)
        _, avg_clean = absolute_orientation_error(estimate_stream(gt, clean, 0), gt)
        assert avg_clean <= 1e-12
        assert avg_noisy > 0.01

    def test_wired_stereo_mean_matches_reported_figure(self):
        gt = default_trajectory()
        preset = load_presets()["wired-stereo"]
        total = 0.0
        for seed in range(50):
            _, avg = absolute_position_error(estimate_stream(gt, preset, seed), gt)
            total += avg
        mean = total / 50
        assert abs(mean - 0.0365) <= 0.25 * 0.0365


class TestMonotoneDegradation:
    def _mean_error(self, preset, gt, seeds=100, duration=20.0):
        total = 0.0
        for seed in range(seeds):
            est = estimate_stream(gt, preset, seed, duration=duration)
            _, avg = absolute_position_error(est, gt)
            total += avg
        return total / seeds

    def test_more_noise_or_drift_means_more_error(self):
        gt = default_trajectory()
        base = VioPreset(name="base", rate=30.0, sigma_t=0.005, beta_t=0.003)
        more_sigma = VioPreset(name="s", rate=30.0, sigma_t=0.010, beta_t=0.003)
        more_beta = VioPreset(name="b", rate=30.0, sigma_t=0.005, beta_t=0.006)
        e_base = self._mean_error(base, gt)
        assert self._mean_error(more_sigma, gt) > e_base
        assert self._mean_error(more_beta, gt) > e_base


class TestVioChannel:
    def test_emits_at_preset_rate(self):
        preset = VioPreset.ideal(rate=30.0)
        channel = VioChannel(preset, seed=0)
        emitted = 0
        dt = 1.0 / 500.0
        pose = Pose.identity()
        for i in range(500):
            if channel.observe(i * dt, pose) is not None:
                emitted += 1
        assert emitted == 30

    def test_latency_delays_delivery(self):
        preset = VioPreset(name="lag", rate=30.0, latency_ms=100.0)
        channel = VioChannel(preset, seed=0)
        dt = 1.0 / 500.0
        first_delivery = None
        for i in range(200):
            t = i * dt
            moving = Pose(np.array([1.0, 0, 0, 0]), np.array([t, 0.0, 0.0]))
            est = channel.observe(t, moving)
            if est is not None and first_delivery is None:
                first_delivery = (t, est)
        assert first_delivery is not None
        t_del, est = first_delivery
        # sample taken at t=0 surfaces only after the 100 ms latency window
        assert t_del >= 0.1
        assert np.linalg.norm(est.translation) < 1e-12

    def test_channel_matches_batch_stream_sample_for_sample(self):
        # 32 Hz keeps the sample grid exact in binary, so the online channel
        # and the vectorized stream see identical sample instants and draw
        # the same noise sequence; poses then agree to rounding
        gt = default_trajectory()
        preset = VioPreset(name="sync", rate=32.0, sigma_t=0.01, sigma_r=0.004,
                           beta_t=0.006, beta_r=0.002)
        batch = estimate_stream(gt, preset, seed=7, duration=4.0)
        channel = VioChannel(preset, seed=7)
        assert len(batch.poses) == 128
        for t, want in zip(batch.times, batch.poses):
            got = channel.observe(float(t), gt.pose_at(float(t)))
            assert got is not None   # zero latency delivers on the spot
            np.testing.assert_allclose(got.translation, want.translation,
                                       atol=1e-12)
            np.testing.assert_allclose(got.rotation, want.rotation, atol=1e-12)
