"""Whole-body controller: priority weighting, Cartesian impedance, and
weighted damped-least-squares velocity resolution.

The end-effector task is resolved into coordinated base + arm motion.
Relative cost of moving either part is set by a diagonal selection matrix H
(eta_base on the 3 base coordinates, eta_arm on the 7 arm joints) entering
the weighting W(q) = H^T M^-1(q) H. Motion is then distributed by minimizing
||J qd - xd_ref||^2 + lambda^2 qd^T W qd.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveWeight, SingularInertia
from .geometry import Pose, Wrench, pose_error
from .kinematics import ArmModel, WholeBodyState, whole_body_jacobian

# DLS damping: far from singularities the resolved velocity then matches the
# exact weighted pseudoinverse within ~1e-6 relative.
DEFAULT_LAMBDA = 1e-3


@dataclass
class PriorityWeights:
    """Penalty factors: larger eta_base makes the base more expensive to move."""

    eta_arm: float = 1.0
    eta_base: float = 1.0

    def __post_init__(self):
        if self.eta_arm <= 0 or self.eta_base <= 0:
            raise NonPositiveWeight(
                f"priority weights must be positive, got eta_arm={self.eta_arm}, "
                f"eta_base={self.eta_base}"
            )

    @classmethod
    def from_dict(cls, d: dict) -> "PriorityWeights":
        return cls(eta_arm=float(d["eta_arm"]), eta_base=float(d["eta_base"]))


@dataclass
class DynamicsModel:
    """Virtual inertia/damping of the base plus a simple arm inertia model.

    The arm inertia is a constant SPD matrix (diagonal by default); a
    configuration-dependent model and a Coriolis term can be plugged in via
    `arm_inertia_fn` / `coriolis_fn` when realism matters.
    """

    base_inertia: np.ndarray = field(default_factory=lambda: np.diag([20.0, 20.0, 4.0]))
    base_damping: np.ndarray = field(default_factory=lambda: np.diag([40.0, 40.0, 8.0]))
    arm_inertia: np.ndarray = field(default_factory=lambda: np.eye(7))
    gravity_torque: np.ndarray = field(default_factory=lambda: np.zeros(7))
    arm_inertia_fn: object = None
    coriolis_fn: object = None

    def __post_init__(self):
        self.base_inertia = _as_spd(self.base_inertia, 3, "base_inertia")
        self.base_damping = _as_spd(self.base_damping, 3, "base_damping")
        self.arm_inertia = _as_spd(self.arm_inertia, 7, "arm_inertia")
        self.gravity_torque = np.asarray(self.gravity_torque, dtype=float).reshape(7).copy()

    def mass_matrix(self, state: WholeBodyState) -> np.ndarray:
        m = np.zeros((10, 10))
        m[:3, :3] = self.base_inertia
        if self.arm_inertia_fn is not None:
            m[3:, 3:] = _as_spd(self.arm_inertia_fn(state.q_r), 7, "arm_inertia_fn result")
        else:
            m[3:, 3:] = self.arm_inertia
        return m

    def coriolis_torque(self, state: WholeBodyState) -> np.ndarray:
        if self.coriolis_fn is None:
            return np.zeros(7)
        return np.asarray(self.coriolis_fn(state.q_r, state.qd_r), dtype=float).reshape(7)

    @classmethod
    def from_dict(cls, d: dict) -> "DynamicsModel":
        return cls(
            base_inertia=np.diag(np.asarray(d["base_inertia"], dtype=float)),
            base_damping=np.diag(np.asarray(d["base_damping"], dtype=float)),
            arm_inertia=np.diag(np.asarray(d["arm_inertia"], dtype=float)),
            gravity_torque=np.asarray(d.get("gravity_torque", np.zeros(7)), dtype=float),
        )


def _as_spd(m, n: int, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (n, n):
        raise SingularInertia(f"{name} must be {n}x{n}, got {m.shape}")
    if not np.allclose(m, m.T, atol=1e-12):
        raise SingularInertia(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(m)) <= 0:
        raise SingularInertia(f"{name} must be positive definite")
    return m.copy()


@dataclass
class ImpedanceParams:
    """Diagonal Cartesian stiffness (N/m, N*m/rad) and damping."""

    stiffness: np.ndarray = field(
        default_factory=lambda: np.array([400.0, 400.0, 400.0, 15.0, 15.0, 15.0])
    )
    damping: np.ndarray = field(
        default_factory=lambda: np.array([10.0, 10.0, 10.0, 0.5, 0.5, 0.5])
    )

    def __post_init__(self):
        self.stiffness = np.asarray(self.stiffness, dtype=float).reshape(6).copy()
        self.damping = np.asarray(self.damping, dtype=float).reshape(6).copy()
        if np.any(self.stiffness < 0) or np.any(self.damping < 0):
            raise ValueError("impedance gains must be nonnegative")

    def scaled(self, factor: float) -> "ImpedanceParams":
        return ImpedanceParams(self.stiffness * factor, self.damping * factor)

    @classmethod
    def from_dict(cls, d: dict) -> "ImpedanceParams":
        return cls(
            stiffness=np.asarray(d["stiffness"], dtype=float),
            damping=np.asarray(d["damping"], dtype=float),
        )


@dataclass
class ControlParams:
    """Loop-level knobs: DLS damping, wrench-to-twist compliance, twist caps."""

    lambda_dls: float = DEFAULT_LAMBDA
    compliance_linear: float = 0.02    # (m/s) per N
    compliance_angular: float = 0.1    # (rad/s) per N*m
    clamp_linear: float = 0.5          # m/s
    clamp_angular: float = 1.0         # rad/s

    @classmethod
    def from_dict(cls, d: dict) -> "ControlParams":
        return cls(
            lambda_dls=float(d.get("lambda_dls", DEFAULT_LAMBDA)),
            compliance_linear=float(d["compliance"]["linear"]),
            compliance_angular=float(d["compliance"]["angular"]),
            clamp_linear=float(d["twist_clamp"]["linear"]),
            clamp_angular=float(d["twist_clamp"]["angular"]),
        )


@dataclass
class ControllerOutput:
    """Commanded joint velocities plus the equivalent task-space torques."""

    tau_v: np.ndarray
    tau_r: np.ndarray
    qd_command: np.ndarray
    ee_wrench: Wrench

    def __post_init__(self):
        self.tau_v = np.asarray(self.tau_v, dtype=float).reshape(3)
        self.tau_r = np.asarray(self.tau_r, dtype=float).reshape(7)
        self.qd_command = np.asarray(self.qd_command, dtype=float).reshape(10)


def selection_matrix(w: PriorityWeights) -> np.ndarray:
    return np.diag([w.eta_base] * 3 + [w.eta_arm] * 7)


def weighting_matrix(state: WholeBodyState, model: DynamicsModel,
                     w: PriorityWeights) -> np.ndarray:
    h = selection_matrix(w)
    m = model.mass_matrix(state)
    try:
        m_inv = np.linalg.inv(m)
    except np.linalg.LinAlgError as exc:  # unreachable while SPD holds
        raise SingularInertia("mass matrix is singular") from exc
    wmat = h.T @ m_inv @ h
    return 0.5 * (wmat + wmat.T)


def cartesian_impedance(target: Pose, actual: Pose, actual_twist,
                        params: ImpedanceParams) -> Wrench:
    err = pose_error(target, actual)
    twist = np.asarray(actual_twist, dtype=float).reshape(6)
    return Wrench.from_vector(params.stiffness * err - params.damping * twist)


def resolve_velocity(state: WholeBodyState, ee_twist_ref, wmat, arm: ArmModel,
                     lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    """Weighted damped-least-squares inverse of the whole-body Jacobian.

    W is normalized to trace 10 before solving so that scaling both priority
    weights by a common factor leaves the solution unchanged up to roundoff
    (only the ratio eta_base/eta_arm is meaningful).
    """
    xd = np.asarray(ee_twist_ref, dtype=float).reshape(6)
    if not np.any(xd):
        return np.zeros(10)
    wmat = np.asarray(wmat, dtype=float)
    wmat = wmat * (10.0 / np.trace(wmat))
    j = whole_body_jacobian(state, arm)
    w_inv_jt = np.linalg.solve(wmat, j.T)
    gram = j @ w_inv_jt + lam ** 2 * np.eye(6)
    return w_inv_jt @ np.linalg.solve(gram, xd)


def clamp_twist(twist, lin_max: float, ang_max: float) -> np.ndarray:
    """Scale the linear/angular blocks down to their caps, keeping direction."""
    t = np.asarray(twist, dtype=float).reshape(6).copy()
    lin, ang = np.linalg.norm(t[:3]), np.linalg.norm(t[3:])
    if lin > lin_max:
        t[:3] *= lin_max / lin
    if ang > ang_max:
        t[3:] *= ang_max / ang
    return t


def controller_step(state: WholeBodyState, ee_target: Pose, w: PriorityWeights,
                    model: DynamicsModel, arm: ArmModel,
                    impedance: ImpedanceParams, dt: float,
                    params: ControlParams = None,
                    ee_actual: Pose = None) -> ControllerOutput:
    """One control tick: impedance wrench at the EE, resolved to joint motion.

    The wrench is mapped to a reference twist through fixed compliance gains,
    clamped, and distributed over base + arm by resolve_velocity. Equivalent
    torques J^T F are reported alongside.
    """
    if not 0 < dt <= 0.05:
        raise ValueError(f"dt must be in (0, 0.05], got {dt}")
    if params is None:
        params = ControlParams()
    from .kinematics import whole_body_fk

    if ee_actual is None:
        ee_actual = whole_body_fk(state, arm)
    j = whole_body_jacobian(state, arm)
    actual_twist = j @ state.qd
    wrench = cartesian_impedance(ee_target, ee_actual, actual_twist, impedance)
    f = wrench.as_vector()
    twist_ref = np.concatenate([
        params.compliance_linear * f[:3],
        params.compliance_angular * f[3:],
    ])
    twist_ref = clamp_twist(twist_ref, params.clamp_linear, params.clamp_angular)
    wmat = weighting_matrix(state, model, w)
    qd = resolve_velocity(state, twist_ref, wmat, arm, lam=params.lambda_dls)
    tau = j.T @ f
    tau_r = tau[3:] + model.gravity_torque + model.coriolis_torque(state)
    return ControllerOutput(tau_v=tau[:3], tau_r=tau_r, qd_command=qd, ee_wrench=wrench)
