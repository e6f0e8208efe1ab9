"""Length-preserving, energy-decreasing IMEX-GSAV schemes for the Landau-Lifshitz equation."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    InvariantError,
    LLGError,
    NonFiniteError,
    ProjectionError,
    SolverError,
    StateError,
    UsageError,
)
from .spectral import Grid  # noqa: E402
from .stepper import BdfScheme, StepParams, Stepper, bdf_coefficients  # noqa: E402
from .model import Problem, ProblemParams  # noqa: E402
from .experiments import RunConfig, run_simulation  # noqa: E402
