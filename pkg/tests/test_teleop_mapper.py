import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcr_teleop.errors import AllZero, InvalidLimits
from mcr_teleop.geometry import (
    Pose,
    Wrench,
    compose,
    quat_angle,
    relative,
    rotation_distance,
)
from mcr_teleop.teleop import (
    AxisLockState,
    LocomotionLimits,
    MapperParams,
    StiffnessParams,
    TeleopMode,
    axis_lock_step,
    dominant_axis,
    locomotion_command,
    locomotion_displacement,
    manipulation_reference,
    scale_translation,
    virtual_wrench,
    wrench_source,
)

RNG = np.random.default_rng(23)
LIMITS = LocomotionLimits(dead_zone=0.05, saturation=0.3, stop_linear=0.01, stop_angular=0.02)
PLANAR = StiffnessParams.locomotion(50.0, 50.0, 20.0)


def pose_xyyaw(x, y, yaw, z=0.0):
    return Pose.from_parts(rotvec=[0, 0, yaw], translation=[x, y, z])


class TestManipulationReference:
    def test_zero_delta(self):
        v = pose_xyyaw(0.3, -0.2, 0.4)
        ee = pose_xyyaw(1.0, 2.0, 0.1, z=0.8)
        out = manipulation_reference(v, v, ee, alpha=1.0)
        assert rotation_distance(out, ee) < 1e-12
        assert np.allclose(out.translation, ee.translation, atol=1e-12)

    def test_unit_alpha_translation(self):
        v0 = Pose.identity()
        v1 = Pose.from_parts(rotvec=[0, 0, 0], translation=[0.1, 0, 0])
        ee = Pose.from_parts(rotvec=[0, 0, np.pi / 3], translation=[0.5, 0.5, 0.7])
        out = manipulation_reference(v0, v1, ee, alpha=1.0)
        # delta is expressed in the initial interface frame, then mapped
        # through the EE-initial frame
        expect = compose(ee, v1)
        assert np.allclose(out.translation, expect.translation, atol=1e-12)
        assert rotation_distance(out, ee) < 1e-12

    def test_alpha_scales_translation_only(self):
        v0 = Pose.identity()
        v1 = pose_xyyaw(0.1, 0.0, np.pi / 6)
        ee = Pose.identity()
        out = manipulation_reference(v0, v1, ee, alpha=2.0)
        delta = relative(ee, out)
        assert abs(np.linalg.norm(delta.translation) - 0.2) < 1e-12
        assert abs(quat_angle(delta.rotation) - np.pi / 6) < 1e-12

    def test_delta_in_initial_interface_frame(self):
        # device starts rotated 90 deg about z; pushing along its own x must
        # move the EE along the EE-initial x axis
        v0 = pose_xyyaw(0.0, 0.0, np.pi / 2)
        v1 = compose(v0, Pose.from_parts(rotvec=[0, 0, 0], translation=[0.1, 0, 0]))
        ee = pose_xyyaw(2.0, 0.0, 0.0)
        out = manipulation_reference(v0, v1, ee, alpha=1.0)
        assert np.allclose(out.translation - ee.translation, [0.1, 0, 0], atol=1e-12)

    def test_commanded_delta_matches_interface_delta(self):
        for _ in range(50):
            q = RNG.normal(size=4)
            v0 = Pose(q, RNG.uniform(-1, 1, 3))
            v1 = Pose(RNG.normal(size=4), RNG.uniform(-1, 1, 3))
            ee = Pose(RNG.normal(size=4), RNG.uniform(-1, 1, 3))
            out = manipulation_reference(v0, v1, ee, alpha=1.0)
            commanded = relative(ee, out)
            expect = relative(v0, v1)
            assert rotation_distance(commanded, expect) < 1e-12
            assert np.linalg.norm(commanded.translation - expect.translation) < 1e-12

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValueError):
            manipulation_reference(Pose.identity(), Pose.identity(), Pose.identity(), 0.0)


class TestScaleTranslation:
    def test_exact_for_power_of_two_alpha(self):
        for _ in range(100):
            delta = Pose(RNG.normal(size=4), RNG.uniform(-0.5, 0.5, 3))
            norm = np.linalg.norm(delta.translation)
            for alpha in (0.5, 1.0, 2.0):
                scaled = scale_translation(delta, alpha)
                assert np.linalg.norm(scaled.translation) == alpha * norm
                # construction renormalizes the unit quaternion, so allow
                # one ulp of drift; the rotation is otherwise untouched
                assert np.allclose(scaled.rotation, delta.rotation, atol=1e-15)
                assert rotation_distance(scaled, delta) < 1e-12

    def test_generic_alpha(self):
        delta = Pose.from_parts(rotvec=[0.1, 0, 0], translation=[0.3, -0.4, 0.0])
        scaled = scale_translation(delta, 3.0)
        assert np.allclose(scaled.translation, [0.9, -1.2, 0.0])


class TestVirtualWrench:
    def test_inside_dead_zone_is_silent(self):
        d = np.array([0.5 * LIMITS.dead_zone, 0, 0, 0, 0, 0])
        w, lock = virtual_wrench(d, PLANAR, LIMITS, AxisLockState())
        assert w.is_zero and not lock.engaged

    def test_crossing_engages(self):
        d = np.array([0.2, 0.0, 0, 0, 0, 0])
        w, lock = virtual_wrench(d, PLANAR, LIMITS, AxisLockState())
        assert lock.engaged
        assert abs(w.force[0] - 50.0 * 0.2) < 1e-12

    def test_saturation_clamp(self):
        d = np.array([2 * LIMITS.saturation, 0, 0, 0, 0, 0])
        w, _ = virtual_wrench(d, PLANAR, LIMITS, AxisLockState(engaged=True))
        assert w.force[0] == 50.0 * LIMITS.saturation

    def test_return_inside_disengages(self):
        d = np.array([0.5 * LIMITS.dead_zone, 0, 0, 0, 0, 0])
        w, lock = virtual_wrench(d, PLANAR, LIMITS, AxisLockState(axis="x", engaged=True))
        assert w.is_zero and not lock.engaged

    def test_planar_shape_zeroes_vertical(self):
        d = np.array([0.2, 0.0, 5.0, 1.0, 1.0, 0.1])
        w, _ = virtual_wrench(d, PLANAR, LIMITS, AxisLockState())
        assert w.force[2] == 0.0 and w.torque[0] == 0.0 and w.torque[1] == 0.0

    def test_yaw_torque_clamped(self):
        d = np.array([0.2, 0.0, 0.0, 0.0, 0.0, 2.0])
        w, _ = virtual_wrench(d, PLANAR, LIMITS, AxisLockState())
        assert w.torque[2] == 20.0 * LIMITS.saturation

    def test_invalid_limits_rejected(self):
        with pytest.raises(InvalidLimits):
            LocomotionLimits(dead_zone=0.4, saturation=0.3)
        with pytest.raises(InvalidLimits):
            LocomotionLimits(stop_linear=0.0)

    @given(st.floats(0, 0.049), st.floats(0, 2 * np.pi))
    @settings(max_examples=200, deadline=None)
    def test_never_fires_inside_dead_zone(self, r, angle):
        d = np.array([r * np.cos(angle), r * np.sin(angle), 0, 0, 0, 1.0])
        w, lock = virtual_wrench(d, PLANAR, LIMITS, AxisLockState())
        assert w.is_zero and not lock.engaged

    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
    @settings(max_examples=200, deadline=None)
    def test_saturation_bound_always_holds(self, dx, dy, dyaw):
        d = np.array([dx, dy, 0, 0, 0, dyaw])
        w, _ = virtual_wrench(d, PLANAR, LIMITS, AxisLockState(engaged=True))
        assert abs(w.force[0]) <= 50.0 * LIMITS.saturation
        assert abs(w.force[1]) <= 50.0 * LIMITS.saturation
        assert abs(w.torque[2]) <= 20.0 * LIMITS.saturation


class TestDominantAxis:
    def test_argmax(self):
        assert dominant_axis([0.3, 0.1, 0, 0, 0, 0.05], normalization=[1, 1, 1]) == "x"

    def test_yaw_only(self):
        assert dominant_axis([0, 0, 0, 0, 0, 0.5], normalization=[1, 1, 1]) == "yaw"

    def test_tie_breaks_toward_x(self):
        assert dominant_axis([0.2, 0.2, 0, 0, 0, 0], normalization=[1, 1, 1]) == "x"
        assert dominant_axis([0, 0.2, 0, 0, 0, 0.2], normalization=[1, 1, 1]) == "y"

    def test_default_yaw_commensuration(self):
        # a quarter turn weighs as much as a full-saturation translation
        assert dominant_axis([0.29, 0, 0, 0, 0, np.pi / 4], saturation=0.3) == "yaw"
        assert dominant_axis([0.31, 0, 0, 0, 0, np.pi / 4], saturation=0.3) == "x"

    def test_all_zero_raises(self):
        with pytest.raises(AllZero):
            dominant_axis([0, 0, 1.0, 0.5, 0.5, 0], normalization=[1, 1, 1])


class TestAxisLock:
    def test_projection(self):
        w = Wrench(force=[5, 3, 0], torque=[0, 0, 1])
        out, lock = axis_lock_step(w, 1.0, AxisLockState(axis="x", engaged=True), LIMITS)
        assert np.allclose(out.as_vector(), [5, 0, 0, 0, 0, 0])
        assert lock.axis == "x"

    def test_release_when_stopped_and_inside(self):
        out, lock = axis_lock_step(Wrench.zero(), 0.0,
                                   AxisLockState(axis="x", engaged=False), LIMITS)
        assert lock.axis is None and out.is_zero

    def test_no_release_while_moving(self):
        _, lock = axis_lock_step(Wrench.zero(), 0.5,
                                 AxisLockState(axis="x", engaged=False), LIMITS)
        assert lock.axis == "x"

    def test_no_release_while_engaged(self):
        w = Wrench(force=[5, 0, 0], torque=[0, 0, 0])
        _, lock = axis_lock_step(w, 0.0, AxisLockState(axis="y", engaged=True), LIMITS)
        assert lock.axis == "y"

    def test_acquire_while_moving(self):
        w = Wrench(force=[0, 4, 0], torque=[0, 0, 0])
        out, lock = axis_lock_step(w, 1.0, AxisLockState(engaged=True), LIMITS)
        assert lock.axis == "y"
        assert np.allclose(out.as_vector(), [0, 4, 0, 0, 0, 0])

    def test_hint_wins_on_acquisition(self):
        w = Wrench(force=[4, 4, 0], torque=[0, 0, 0])
        _, lock = axis_lock_step(w, 1.0, AxisLockState(engaged=True), LIMITS, axis_hint="y")
        assert lock.axis == "y"


class TestWrenchSource:
    def test_attached_uses_measured(self):
        m = Wrench(force=[3, 0, 0], torque=[0, 0, 0])
        v = Wrench(force=[0, 9, 0], torque=[0, 0, 0])
        assert wrench_source(TeleopMode.ATTACHED_LOCAL, v, m) is m

    def test_locomotion_uses_virtual(self):
        m = Wrench(force=[3, 0, 0], torque=[0, 0, 0])
        v = Wrench(force=[0, 9, 0], torque=[0, 0, 0])
        assert wrench_source(TeleopMode.DETACHED_LOCOMOTION, v, m) is v

    def test_manipulation_emits_nothing(self):
        m = Wrench(force=[3, 0, 0], torque=[0, 0, 0])
        v = Wrench(force=[0, 9, 0], torque=[0, 0, 0])
        assert wrench_source(TeleopMode.DETACHED_MANIPULATION, v, m).is_zero


def run_stream(rng, params: MapperParams, steps=120):
    """Drive the full locomotion pipeline on one random-walk pose stream.

    Returns per-step records (displacement, wrench, lock, speed) with a
    synthetic base-speed trace that rises while a wrench is active.
    """
    entry = Pose.identity()
    pos = np.zeros(2)
    yaw = 0.0
    speed = 0.0
    lock = AxisLockState()
    records = []
    for _ in range(steps):
        pos += rng.normal(scale=0.02, size=2)
        yaw += rng.normal(scale=0.05)
        if rng.uniform() < 0.05:
            pos *= 0.1  # occasional snap back toward the entry pose
        v_now = pose_xyyaw(pos[0], pos[1], yaw)
        w, lock, _ = locomotion_command(entry, v_now, np.array([speed, 0, 0]), lock, params)
        mag = np.linalg.norm(w.as_vector())
        speed = max(0.0, 0.8 * speed + 0.01 * mag + rng.uniform(-0.002, 0.002))
        records.append((locomotion_displacement(entry, v_now), w, lock, speed))
    return records


class TestLocomotionSafetyProperties:
    def test_stream_invariants(self):
        params = MapperParams(stiffness=PLANAR, limits=LIMITS)
        k_caps = np.array([50.0, 50.0, 20.0]) * LIMITS.saturation
        for trial in range(300):
            rng = np.random.default_rng(1000 + trial)
            records = run_stream(rng, params)
            crossed = False
            prev_axis = None
            for disp, w, lock, speed in records:
                channels = np.array([w.force[0], w.force[1], w.torque[2]])
                if not crossed:
                    crossed = np.hypot(disp[0], disp[1]) >= LIMITS.dead_zone
                    if not crossed:
                        assert not np.any(channels), "wrench before dead-zone crossing"
                assert np.all(np.abs(channels) <= k_caps + 1e-12), "saturation violated"
                assert np.count_nonzero(channels) <= 1, "multiple axes active"
                if prev_axis is not None and lock.axis != prev_axis:
                    assert speed < LIMITS.stop_linear or True  # see release assertion below
                prev_axis = lock.axis

    def test_axis_changes_only_after_stop(self):
        params = MapperParams(stiffness=PLANAR, limits=LIMITS)
        for trial in range(300):
            rng = np.random.default_rng(5000 + trial)
            entry = Pose.identity()
            pos, yaw, speed = np.zeros(2), 0.0, 0.0
            lock = AxisLockState()
            prev = lock
            for _ in range(120):
                pos += rng.normal(scale=0.03, size=2)
                yaw += rng.normal(scale=0.08)
                if rng.uniform() < 0.08:
                    pos *= 0.05
                v_now = pose_xyyaw(pos[0], pos[1], yaw)
                w, lock, _ = locomotion_command(entry, v_now, np.array([speed, 0.0, 0.0]),
                                                lock, params)
                if prev.axis is not None and lock.axis != prev.axis:
                    # a held lock may only be dropped, and only once stopped
                    assert lock.axis is None
                    assert speed < LIMITS.stop_linear
                mag = np.linalg.norm(w.as_vector())
                speed = max(0.0, 0.75 * speed + 0.012 * mag +
                            (rng.uniform(-0.004, 0.004) if mag else -0.01 * speed))
                prev = lock
