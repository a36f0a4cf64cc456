"""Shape-restricted additive Cox proportional-hazards regression.

Each covariate's effect on the log hazard is constrained to one of nine
shapes (linear, monotone, convex/concave and their combinations). Shaped
effects are expanded over step or wedge bases at data-driven knots, turning
the fit into a bound-constrained Cox regression solved by a primal
active-set algorithm that selects the informative knots automatically.
"""

from .basis import (
    SHAPE_LABELS,
    BasisExpansion,
    ComponentFunction,
    CovariateSpec,
    KnotSet,
    KnotStrategy,
    ModelSpec,
    basis_value,
    center_component,
    expand_design,
    reconstruct_component,
    select_knots,
)
from .exceptions import (
    ConvergenceError,
    DegenerateCovariateError,
    NumericalOverflowError,
    ProfileError,
    ShapeCoxError,
)
from .inference import LrInterval, linear_predictor, lr_standard_error, survival_curve
from .simulate import (
    EXPERIMENTS,
    ExperimentConfig,
    ExperimentSummary,
    export_component_curve,
    fit_pair,
    generate_dataset,
    run_experiment,
)
from .solver import (
    FitOptions,
    FitResult,
    IterationTrace,
    WorkingSet,
    feasibility_ratio,
    fit,
    initialize_working_set,
    select_entering_index,
)
from .survival import (
    BaselineHazard,
    DesignMatrix,
    Subject,
    SurvivalDataset,
    breslow_baseline,
    breslow_from_arrays,
    information,
    newton_fit,
    partial_log_likelihood,
    score,
)

__version__ = "0.1.0"

__all__ = [
    "SHAPE_LABELS",
    "BasisExpansion",
    "BaselineHazard",
    "ComponentFunction",
    "ConvergenceError",
    "CovariateSpec",
    "DegenerateCovariateError",
    "DesignMatrix",
    "EXPERIMENTS",
    "ExperimentConfig",
    "ExperimentSummary",
    "FitOptions",
    "FitResult",
    "IterationTrace",
    "KnotSet",
    "KnotStrategy",
    "LrInterval",
    "ModelSpec",
    "NumericalOverflowError",
    "ProfileError",
    "ShapeCoxError",
    "Subject",
    "SurvivalDataset",
    "WorkingSet",
    "basis_value",
    "breslow_baseline",
    "breslow_from_arrays",
    "center_component",
    "expand_design",
    "export_component_curve",
    "feasibility_ratio",
    "fit",
    "fit_pair",
    "generate_dataset",
    "information",
    "initialize_working_set",
    "linear_predictor",
    "lr_standard_error",
    "newton_fit",
    "partial_log_likelihood",
    "reconstruct_component",
    "run_experiment",
    "score",
    "select_entering_index",
    "select_knots",
    "survival_curve",
]
