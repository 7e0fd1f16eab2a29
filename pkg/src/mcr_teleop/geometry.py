"""SE(3) pose algebra on unit quaternions.

Poses are the universal currency of the framework: interface motion,
end-effector targets and odometry all travel as (quaternion, translation)
pairs. Quaternions are stored as [w, x, y, z] and renormalized after every
composition so long control loops do not accumulate scale drift. Homogeneous
4x4 matrices appear only at conversion boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUAT_ATOL = 1e-9


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise ValueError(f"quaternion must have 4 components, got shape {q.shape}")
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero quaternion cannot be normalized")
    return q / n


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    # terms are paired so that q (x) conj(q) cancels exactly in floats,
    # making the error of a pose against itself a true zero
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        (aw * bx + ax * bw) + (ay * bz - az * by),
        (aw * by + ay * bw) + (az * bx - ax * bz),
        (aw * bz + az * bw) + (ax * by - ay * bx),
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    # v + 2 * qv x (qv x v + w v), one cross product cheaper than the matrix
    qv = q[1:]
    t = 2.0 * np.cross(qv, v)
    return v + q[0] * t + np.cross(qv, t)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return np.array([
        [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
        [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
        [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
    ])


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    # Shepperd's method: pick the largest diagonal combination for stability
    t = np.trace(m)
    if t > 0.0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array([(m[2, 1] - m[1, 2]) / s,
                      0.25 * s,
                      (m[0, 1] + m[1, 0]) / s,
                      (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array([(m[0, 2] - m[2, 0]) / s,
                      (m[0, 1] + m[1, 0]) / s,
                      0.25 * s,
                      (m[1, 2] + m[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array([(m[1, 0] - m[0, 1]) / s,
                      (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s,
                      0.25 * s])
    return quat_normalize(q)


def quat_from_rotvec(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    angle = np.linalg.norm(r)
    if angle < 1e-12:
        # sin(a/2)/a ~ 1/2 - a^2/48
        half = 0.5 - angle * angle / 48.0
        return quat_normalize(np.array([1.0, *(half * r)]))
    axis = r / angle
    s = np.sin(0.5 * angle)
    return np.array([np.cos(0.5 * angle), *(s * axis)])


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    # Keep angle in [0, pi] by flipping sign into the w >= 0 hemisphere
    if q[0] < 0.0:
        q = -q
    vn = np.linalg.norm(q[1:])
    if vn < 1e-12:
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(vn, q[0])
    return (angle / vn) * q[1:]


def quat_angle(q: np.ndarray) -> float:
    """Geodesic rotation angle in [0, pi]."""
    return 2.0 * float(np.arctan2(np.linalg.norm(q[1:]), abs(q[0])))


def quat_from_yaw(yaw: float) -> np.ndarray:
    return np.array([np.cos(0.5 * yaw), 0.0, 0.0, np.sin(0.5 * yaw)])


@dataclass
class Pose:
    """Rigid transform: rotation as unit quaternion [w,x,y,z], translation in m."""

    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = quat_normalize(self.rotation)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3).copy()

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_parts(rotvec=None, translation=None, yaw: float | None = None) -> "Pose":
        if rotvec is not None and yaw is not None:
            raise ValueError("give either rotvec or yaw, not both")
        if yaw is not None:
            q = quat_from_yaw(yaw)
        elif rotvec is not None:
            q = quat_from_rotvec(np.asarray(rotvec, dtype=float))
        else:
            q = np.array([1.0, 0.0, 0.0, 0.0])
        t = np.zeros(3) if translation is None else np.asarray(translation, dtype=float)
        return Pose(q, t)

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        return Pose(quat_from_matrix(m[:3, :3]), m[:3, 3])

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.rotation)
        m[:3, 3] = self.translation
        return m

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def apply(self, point: np.ndarray) -> np.ndarray:
        return quat_rotate(self.rotation, np.asarray(point, dtype=float)) + self.translation

    def copy(self) -> "Pose":
        return Pose(self.rotation.copy(), self.translation.copy())


def compose(a: Pose, b: Pose) -> Pose:
    """a . b in SE(3); quaternion renormalized."""
    q = quat_normalize(quat_multiply(a.rotation, b.rotation))
    t = a.translation + quat_rotate(a.rotation, b.translation)
    return Pose(q, t)


def inverse(p: Pose) -> Pose:
    qc = quat_conjugate(p.rotation)
    return Pose(qc, -quat_rotate(qc, p.translation))


def relative(from_pose: Pose, to_pose: Pose) -> Pose:
    """Delta d with compose(from_pose, d) = to_pose, expressed in the `from` frame."""
    return compose(inverse(from_pose), to_pose)


def rotation_distance(a: Pose, b: Pose) -> float:
    """Geodesic angle (rad) between the rotations of two poses."""
    return quat_angle(quat_multiply(quat_conjugate(a.rotation), b.rotation))


def translation_distance(a: Pose, b: Pose) -> float:
    return float(np.linalg.norm(a.translation - b.translation))


def pose_error(target: Pose, actual: Pose) -> np.ndarray:
    """6-vector [translation error; rotation-vector error], world frame.

    The rotational part is the axis*angle of R_target . R_actual^T, i.e. the
    world-frame rotation that carries `actual` onto `target`.
    """
    dt = target.translation - actual.translation
    dq = quat_multiply(target.rotation, quat_conjugate(actual.rotation))
    return np.concatenate([dt, quat_to_rotvec(quat_normalize(dq))])


@dataclass
class Wrench:
    """6-D force/torque pair: force in N, torque in N*m."""

    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.force = np.asarray(self.force, dtype=float).reshape(3).copy()
        self.torque = np.asarray(self.torque, dtype=float).reshape(3).copy()
        if not (np.all(np.isfinite(self.force)) and np.all(np.isfinite(self.torque))):
            raise ValueError("wrench components must be finite")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])

    @staticmethod
    def from_vector(v) -> "Wrench":
        v = np.asarray(v, dtype=float).reshape(6)
        return Wrench(v[:3].copy(), v[3:].copy())

    @staticmethod
    def zero() -> "Wrench":
        return Wrench()

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.force) or np.any(self.torque))
