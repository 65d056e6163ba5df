"""Constrained adiabatic trajectory method: time propagation as one Floquet eigenproblem."""

from .errors import (
    CATMError,
    ConfigError,
    ConvergenceError,
    DefectiveMatrixError,
    DivergenceError,
    NearDegeneracyError,
    SelectionError,
)
from .timegrid import TimeGrid, apply_time_derivative, dvr_to_fbr, fbr_to_dvr, fourier_interpolate
from .spatial import (
    ComplexEigenbasis,
    SpatialGrid,
    SurfaceModel,
    bound_state_mask,
    build_eigenbasis,
    build_h0_grid,
    prediagonalize,
    project_dipole,
)
from .interaction import RepresentationConfig, back_transform
from .floquet import (
    AbsorberEnvelope,
    ConstrainedAbsorber,
    FloquetOperator,
    PulseEdgeWarning,
    PulseSpec,
    apply_floquet,
    assemble_dense,
    evaluate_absorber,
    evaluate_pulse,
)
from .solver import (
    FloquetSolution,
    MatrixOperator,
    SolverSettings,
    reconstruct_wavefunction,
    residue_epsilon,
    solve_constrained_floquet,
    transition_probabilities,
)

__version__ = "0.1.0"
