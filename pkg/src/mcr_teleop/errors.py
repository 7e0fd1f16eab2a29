"""Exception types shared across the framework."""


class JointLimitViolation(ValueError):
    """A joint angle is outside the arm model's declared limits."""

    def __init__(self, joint: int, value: float, lo: float, hi: float):
        super().__init__(
            f"joint {joint}: {value:.6f} rad outside [{lo:.6f}, {hi:.6f}]"
        )
        self.joint = joint
        self.value = value


class NonPositiveWeight(ValueError):
    """Priority weights must be strictly positive."""


class SingularInertia(ValueError):
    """Inertia matrix is not invertible (defensive; SPD inputs never hit this)."""


class InvalidLimits(ValueError):
    """Locomotion limits are inconsistent (e.g. dead zone >= saturation radius)."""


class AllZero(ValueError):
    """Dominant-axis selection called with an all-zero displacement."""


class InvalidSpec(ValueError):
    """A trajectory or scenario spec fails validation."""


class EmptyStream(ValueError):
    """An estimator stream or metric input contains no samples."""


class EmptyInput(ValueError):
    """An aggregate was requested over zero trials."""


class MalformedFrame(ValueError):
    """A wire frame failed magic/version/length checks."""


class IoFailure(OSError):
    """Report files could not be written."""
