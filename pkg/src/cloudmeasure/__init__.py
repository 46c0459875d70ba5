"""cloudmeasure: multiscale flatness and doubling statistics of weighted
point clouds treated as discrete surface measures."""

from .cascade import (
    CascadeConfig,
    CascadeResult,
    ExponentSchedule,
    check_schedule,
    default_start_radius,
    kappa_search,
    make_schedule,
    predicted_exponent,
    run_cascade,
)
from .doubling import (
    DensityReport,
    DoublingProfile,
    density_estimate,
    density_ratio,
    doubling_profile,
    doubling_ratio,
    holder_log_density,
    reliable_radius_grid,
    telescope_bound,
)
from .flatness import (
    ClassificationReport,
    FlatnessProfile,
    beta2_smooth,
    beta_inf,
    classify_points,
    fit_beta_exponent,
    flatness_profile,
    theta,
)
from .generators import GeneratorSpec, generate
from .geometry import (
    AffinePlane,
    SymmetricForm,
    grassmann_gap,
    hausdorff_distance,
    hausdorff_distance_max,
    plane_distance,
    sym_eigen,
)
from .measure import (
    Ball,
    WeightedCloud,
    ball_mass,
    blow_up,
    build_index,
    load_cloud,
    save_cloud,
    support_in_ball,
    unit_ball_volume,
)
from .moments import (
    FlatHypothesis,
    MomentPair,
    SpectrumReport,
    moment_form,
    moment_vector,
    quadratic_residual,
    spectrum_report,
    trace_deviation,
)

__version__ = "0.1.0"

__all__ = [
    "AffinePlane",
    "Ball",
    "CascadeConfig",
    "CascadeResult",
    "ClassificationReport",
    "DensityReport",
    "DoublingProfile",
    "ExponentSchedule",
    "FlatHypothesis",
    "FlatnessProfile",
    "GeneratorSpec",
    "MomentPair",
    "SpectrumReport",
    "SymmetricForm",
    "WeightedCloud",
    "ball_mass",
    "beta2_smooth",
    "beta_inf",
    "blow_up",
    "build_index",
    "check_schedule",
    "classify_points",
    "default_start_radius",
    "density_estimate",
    "density_ratio",
    "doubling_profile",
    "doubling_ratio",
    "fit_beta_exponent",
    "flatness_profile",
    "generate",
    "grassmann_gap",
    "hausdorff_distance",
    "hausdorff_distance_max",
    "holder_log_density",
    "kappa_search",
    "load_cloud",
    "make_schedule",
    "moment_form",
    "moment_vector",
    "plane_distance",
    "predicted_exponent",
    "quadratic_residual",
    "reliable_radius_grid",
    "run_cascade",
    "save_cloud",
    "spectrum_report",
    "support_in_ball",
    "sym_eigen",
    "telescope_bound",
    "theta",
    "trace_deviation",
    "unit_ball_volume",
]
