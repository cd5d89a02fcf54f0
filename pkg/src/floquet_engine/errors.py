"""Exception types shared across the package."""


class FloquetEngineError(Exception):
    """Base class for all errors raised by this package."""


class ProtocolError(FloquetEngineError):
    """Raised for malformed protocol configurations or violated physical
    constraints (non-positive period, frequency constraint, bath physicality)."""


class StiffDynamicsError(FloquetEngineError):
    """Integrator failure (step-size underflow or non-finite state).

    Carries the time at which integration stopped in ``t_failure``.
    """

    def __init__(self, message, t_failure=None):
        super().__init__(message)
        self.t_failure = t_failure


class FloquetResonanceError(FloquetEngineError):
    """The one-period multiplier of a scalar linear equation is too close to 1,
    so no isolated periodic solution exists."""


class ParametricResonanceError(FloquetEngineError):
    """Degenerate one-period propagator: the two candidate periodic Riccati
    branches collide and no isolated branch can be selected."""


class FrameLogarithmError(FloquetEngineError):
    """A frame transformation requires a logarithm whose argument touches the
    branch cut (non-positive real axis)."""


class DegenerateSteadyStateError(FloquetEngineError):
    """The closed-form steady-state covariances have a vanishing denominator."""


class InstabilityError(FloquetEngineError):
    """A contraction fixed point was requested but the one-period moment map
    is not a contraction."""
