"""Steady 2D solver for viscous incompressible nonhomogeneous micropolar flow.

The density is transported along streamlines, ``rho = eta(psi)``, the
microrotation solves a linear advection-diffusion-reaction problem and the
velocity is the fixed point of a linearized momentum solve in
stream-function form.
"""

from .boundary import BoundaryTrace, DensityLaw, GammaSpec
from .errors import (
    CompatibilityError,
    ConfigError,
    DensityError,
    DivergenceError,
    GridMismatchError,
    InflowError,
    LinearSolveError,
    MicropolarError,
)
from .fields import GridSpec, ScalarField, VectorField
from .microrotation import FluidParams
from .mms import build_mms_case
from .momentum import IterationData, apply_A, recover_pressure
from .picard import SolverOptions, run_fixed_point

__all__ = [
    "BoundaryTrace",
    "DensityLaw",
    "GammaSpec",
    "GridSpec",
    "ScalarField",
    "VectorField",
    "FluidParams",
    "IterationData",
    "SolverOptions",
    "apply_A",
    "recover_pressure",
    "run_fixed_point",
    "build_mms_case",
    "MicropolarError",
    "GridMismatchError",
    "CompatibilityError",
    "InflowError",
    "DensityError",
    "LinearSolveError",
    "DivergenceError",
    "ConfigError",
]

__version__ = "0.1.0"
