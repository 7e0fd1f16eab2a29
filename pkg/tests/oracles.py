"""Independent reference implementations used to cross-check the library.

Everything here goes through 4x4 homogeneous matrices and scipy rotations
so that no production code path is reused as its own oracle.
"""

import numpy as np
from scipy.spatial.transform import Rotation

from mcr_teleop.geometry import Pose


def mat_from_pose(p: Pose) -> np.ndarray:
    m = np.eye(4)
    # scipy uses (x, y, z, w) ordering
    w, x, y, z = p.rotation
    m[:3, :3] = Rotation.from_quat([x, y, z, w]).as_matrix()
    m[:3, 3] = p.translation
    return m


def pose_from_mat(m: np.ndarray) -> Pose:
    q = Rotation.from_matrix(m[:3, :3]).as_quat()
    return Pose(np.array([q[3], q[0], q[1], q[2]]), m[:3, 3].copy())


def rot_x(a: float) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = Rotation.from_rotvec([a, 0.0, 0.0]).as_matrix()
    return m


def rot_z(a: float) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = Rotation.from_rotvec([0.0, 0.0, a]).as_matrix()
    return m


def trans(x: float, y: float, z: float) -> np.ndarray:
    m = np.eye(4)
    m[:3, 3] = [x, y, z]
    return m


def arm_chain_matrix(q_r, model) -> np.ndarray:
    """Plain matrix-product forward kinematics over the link table."""
    t = np.eye(4)
    for (a, d, alpha), theta in zip(model.dh, q_r):
        t = t @ rot_x(alpha) @ trans(a, 0, 0) @ rot_z(theta) @ trans(0, 0, d)
    return t @ mat_from_pose(model.flange)


def base_matrix(q_v) -> np.ndarray:
    x, y, yaw = q_v
    return trans(x, y, 0.0) @ rot_z(yaw)


def whole_body_matrix(state, model) -> np.ndarray:
    return base_matrix(state.q_v) @ mat_from_pose(model.mount) @ arm_chain_matrix(state.q_r, model)


def matrix_gap(a: np.ndarray, b: np.ndarray) -> tuple:
    """(rotation geodesic rad, translation norm m) between two homogeneous matrices."""
    r = Rotation.from_matrix(a[:3, :3].T @ b[:3, :3])
    return float(np.linalg.norm(r.as_rotvec())), float(np.linalg.norm(a[:3, 3] - b[:3, 3]))


def random_pose(rng) -> Pose:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return Pose(q, rng.uniform(-2.0, 2.0, size=3))


def random_state(rng, model):
    from mcr_teleop.kinematics import WholeBodyState

    span = 0.9 * np.minimum(np.abs(model.limits_lo), np.abs(model.limits_hi))
    return WholeBodyState(
        q_v=rng.uniform(-3.0, 3.0, size=3),
        q_r=rng.uniform(-span, span),
        qd_v=np.zeros(3),
        qd_r=np.zeros(7),
    )


def random_interface_msg(rng):
    from mcr_teleop.protocol import Buttons, InterfaceMsg

    q = rng.normal(size=4)
    while np.linalg.norm(q) < 1e-3:
        q = rng.normal(size=4)
    return InterfaceMsg(
        seq=int(rng.integers(0, 2 ** 32)),
        timestamp_ms=int(rng.integers(0, 2 ** 32)),
        rotation=q,
        translation=rng.uniform(-5.0, 5.0, size=3),
        buttons=int(rng.integers(0, 256)),
        priority_arm=float(10.0 ** rng.uniform(-3, 6)),
        priority_base=float(10.0 ** rng.uniform(-3, 6)),
        impedance_scale=float(rng.uniform(0.0, 4.0)),
    )


def random_telemetry_msg(rng):
    from mcr_teleop.protocol import SessionMode, TelemetryMsg

    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return TelemetryMsg(
        clock=float(rng.uniform(0, 1e4)),
        q=rng.normal(size=10),
        qd=rng.normal(size=10),
        ee_rotation=q,
        ee_translation=rng.uniform(-3, 3, size=3),
        mode=SessionMode(int(rng.integers(0, 5))),
        lock_axis=[None, "x", "y", "yaw"][int(rng.integers(0, 4))],
        gripper_closed=bool(rng.integers(0, 2)),
        limit_flag=bool(rng.integers(0, 2)),
        ball_attached=bool(rng.integers(0, 2)),
        contact_active=bool(rng.integers(0, 2)),
        wrench=rng.normal(size=6),
        ball_position=rng.uniform(-3, 3, size=3),
        drawer_joint=float(rng.uniform(0, 0.3)),
        last_seq=int(rng.integers(0, 2 ** 32)),
    )
