"""Numerical construction and verification of bifurcating solutions to the
overdetermined Neumann problem on perturbed cylinders in R^N x R/2piZ."""

from .errors import (
    ConfigError,
    DegenerateCritical,
    DomainCollapse,
    FloorDominated,
    GridTooCoarse,
    HorizonTooShort,
    InvalidParameters,
    OverdetError,
    PositiveGroundEigenvalue,
    SolverFailure,
    StepFailure,
    ZeroDenominator,
)
from .radial_ode import OdeSolution, ProblemParams, RadialProfile, build_profile, integrate_ivp
from .sturm_liouville import BifurcationDatum, EigenPair, compute_datum
from .pullback import (
    PerturbationField,
    PerturbedState,
    TensorField,
    apply_linearized,
    apply_pullback,
    build_first_order_state,
    residual_scaling_study,
)
from .pipeline import BranchReport, PipelineConfig, convergence_sweep, run_pipeline

__version__ = "0.1.0"
