from .grid import ComplexField, Grid, l2_distance, trig_interpolate
from .norms import derivative, sigma_norm, sigma_terms, spectral_tail_fraction
from .rotate import rotate_field
from .snapshot import read_snapshot, write_snapshot
from .solver import (
    BlowUpError,
    BoundaryMassError,
    Mode,
    SolverError,
    SolverSpec,
    SplitStepSolver,
    solve,
    step,
)

__all__ = [
    "BlowUpError",
    "BoundaryMassError",
    "ComplexField",
    "Grid",
    "Mode",
    "SolverError",
    "SolverSpec",
    "SplitStepSolver",
    "derivative",
    "l2_distance",
    "read_snapshot",
    "rotate_field",
    "sigma_norm",
    "sigma_terms",
    "solve",
    "spectral_tail_fraction",
    "step",
    "trig_interpolate",
    "write_snapshot",
]
