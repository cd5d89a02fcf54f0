"""Limit cycles, stability and thermodynamics of periodically driven
Gaussian bosonic systems.

The package solves the second-moment dynamics of a single damped bosonic
mode whose frequency, squeezing drive, coupling rate and bath parameters
are periodic in time.  The limit cycle is obtained in closed form through
a pair of time-periodic frame transformations; direct numerical
propagation of the moment equations is kept as an independent
cross-check.
"""

from .errors import (
    DegenerateSteadyStateError,
    FloquetEngineError,
    FloquetResonanceError,
    FrameLogarithmError,
    InstabilityError,
    ParametricResonanceError,
    ProtocolError,
    StiffDynamicsError,
)
from .dynamics import (
    ConvergenceReport,
    FockOracle,
    MomentTrajectory,
    PeriodMap,
    SecondMoments,
    convergence_report,
    fock_oracle,
    fock_oracle_build,
    fock_oracle_spectrum,
    moment_rhs,
    period_map,
    propagate,
    stroboscopic_fixed_point,
)
from .floquet import (
    DissipativeFrame,
    FloquetFrames,
    FloquetParams,
    StabilityReport,
    UnitaryFrame,
    dissipative_only_limit_cycle,
    floquet_parameters,
    lambda_bar_crosscheck,
    limit_cycle_moments,
    pinney_crosscheck,
    rotating_frame_spectrum,
    solve_dissipative_frame,
    solve_frames,
    solve_r1_r0,
    solve_r2,
    stability,
    steady_state_covariances,
    unitary_frame,
)
from .periodic_ode import (
    Trajectory,
    integrate,
    integrate_dense,
    monodromy_2x2,
    periodic_linear_solution,
)
from .thermo import (
    QuasistaticCycle,
    ReversibilityReport,
    ThermoLedger,
    energy,
    quasistatic_reference,
    reversibility_check,
    work_heat_ledger,
)
from .protocols import (
    CycleProtocol,
    MechanicalProtocol,
    as_bosonic,
    build_carnot_protocol,
    build_otto_protocol,
    load_protocol,
    mechanical_to_bosonic,
    thermal_bath_params,
    validate_protocol,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceReport",
    "CycleProtocol",
    "DegenerateSteadyStateError",
    "DissipativeFrame",
    "FloquetEngineError",
    "FloquetFrames",
    "FloquetParams",
    "FloquetResonanceError",
    "FockOracle",
    "FrameLogarithmError",
    "InstabilityError",
    "MechanicalProtocol",
    "MomentTrajectory",
    "ParametricResonanceError",
    "PeriodMap",
    "ProtocolError",
    "QuasistaticCycle",
    "ReversibilityReport",
    "SecondMoments",
    "StabilityReport",
    "StiffDynamicsError",
    "ThermoLedger",
    "Trajectory",
    "UnitaryFrame",
    "as_bosonic",
    "build_carnot_protocol",
    "build_otto_protocol",
    "convergence_report",
    "dissipative_only_limit_cycle",
    "energy",
    "floquet_parameters",
    "fock_oracle",
    "fock_oracle_build",
    "fock_oracle_spectrum",
    "integrate",
    "integrate_dense",
    "lambda_bar_crosscheck",
    "limit_cycle_moments",
    "load_protocol",
    "mechanical_to_bosonic",
    "moment_rhs",
    "monodromy_2x2",
    "period_map",
    "periodic_linear_solution",
    "pinney_crosscheck",
    "propagate",
    "quasistatic_reference",
    "reversibility_check",
    "rotating_frame_spectrum",
    "solve_dissipative_frame",
    "solve_frames",
    "solve_r1_r0",
    "solve_r2",
    "stability",
    "steady_state_covariances",
    "stroboscopic_fixed_point",
    "thermal_bath_params",
    "unitary_frame",
    "validate_protocol",
    "work_heat_ledger",
]
