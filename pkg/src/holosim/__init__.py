"""Simulator for holonomic gates on driven multilevel systems with dissipation.

The package is organized bottom-up:

- ``qcore``: labeled bases, states, operators.
- ``models``: the physical systems (spin in a rotating field, three- and
  four-level optical schemes, and a doubled variant with two excited levels),
  their drives, decay channels, and instantaneous dark states.
- ``dynamics``: conditional no-jump propagation, full master-equation
  integration, and stochastic jump trajectories.
- ``holonomy``: geometric transport along parameter loops, closed-form phase
  references, and gate extraction from propagators.
- ``schemes``: complete single-loop and loop-pair protocols plus parameter
  sweeps.
- ``verify``: release checks at frozen operating points.
- ``cli``: command-line entry point (``run``, ``verify``, ``sweep``).
"""

from .dynamics import (
    EnsembleResult,
    LoopSpec,
    MasterResult,
    NoJumpResult,
    TrajectoryRecord,
    integrate_master,
    integrate_nojump,
    run_ensemble,
    sample_trajectory,
)
from .errors import (
    AdiabaticityError,
    BasisMismatchError,
    ConfigError,
    DegeneracyCrossingError,
    HolosimError,
    LeakageError,
    NormGrowthError,
    NumericalError,
    UnknownLevelError,
    UnsupportedModelError,
)
from .holonomy import (
    GateReport,
    HolonomyMatrix,
    PhaseReport,
    analytic_phases,
    complex_berry_phase,
    complex_dynamical_phase,
    extract_gate,
    gate_distortion,
    holonomy_angle,
    wilson_holonomy,
)
from .models import ModelId, ParamSchedule, jump_set, schedule_for_loop
from .qcore import LevelBasis, QOperator, QState, basis_state, superposition
from .schemes import (
    EchoPairResult,
    Scheme,
    SchemeSpec,
    SweepResult,
    run_scheme,
    scaling_sweep,
)
from .verify import CheckResult, run_verify

__version__ = "0.1.0"

__all__ = [
    "AdiabaticityError",
    "BasisMismatchError",
    "CheckResult",
    "ConfigError",
    "DegeneracyCrossingError",
    "EchoPairResult",
    "EnsembleResult",
    "GateReport",
    "HolonomyMatrix",
    "HolosimError",
    "LeakageError",
    "LevelBasis",
    "LoopSpec",
    "MasterResult",
    "ModelId",
    "NoJumpResult",
    "NormGrowthError",
    "NumericalError",
    "ParamSchedule",
    "PhaseReport",
    "QOperator",
    "QState",
    "Scheme",
    "SchemeSpec",
    "SweepResult",
    "TrajectoryRecord",
    "UnknownLevelError",
    "UnsupportedModelError",
    "analytic_phases",
    "basis_state",
    "complex_berry_phase",
    "complex_dynamical_phase",
    "extract_gate",
    "gate_distortion",
    "holonomy_angle",
    "integrate_master",
    "integrate_nojump",
    "jump_set",
    "run_ensemble",
    "run_scheme",
    "run_verify",
    "sample_trajectory",
    "scaling_sweep",
    "schedule_for_loop",
    "superposition",
    "wilson_holonomy",
    "__version__",
]
