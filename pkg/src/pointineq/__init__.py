"""Numerical toolkit for a universal inverse-distance inequality on p points in R^m.

Evaluates both sides of the inequality, estimates best constants, searches
configurations for near-counterexamples and checks the equivalent critical,
Kelvin-transformed and spherical systems.
"""

__version__ = "0.1.0"

from pointineq.errors import (
    ToolkitError,
    InputError,
    NumericalError,
    DuplicatePointsError,
    DimensionMismatchError,
    NonfiniteCoordinateError,
    CenterTooCloseError,
    NonfiniteEntryError,
    ZeroWeightsError,
    NotOnSphereError,
    AnglesNotSortedError,
    DuplicateAnglesError,
    TooManyPointsError,
    InvalidDimensionError,
    InvalidOptionsError,
    ConvergenceFailure,
)
from pointineq.geometry import (
    PointConfig,
    SphereConfig,
    SimilarityMap,
    make_config,
    make_sphere_config,
    sphere_from_angles,
    pairwise_distances,
    normalize_config,
    apply_similarity,
    kelvin_point,
    kelvin_transform,
    stereographic_lift,
    affine_rank,
    affine_reduce,
    load_config,
    save_config,
)
from pointineq.forms import (
    FormsEvaluation,
    InteractionMatrix,
    interaction_matrix,
    interaction_gradient,
    interaction,
    eval_forms,
    i1_matrix_form,
    i1_rewrite_form,
    ratio_quotient,
    ratio_subgradient,
)
from pointineq.systems import (
    CriticalResiduals,
    SphereSystemMatrix,
    SpectrumReport,
    SignMatrix,
    critical_residuals,
    sphere_system,
    spectrum,
    sphere_inner_identity_check,
    kelvin_identity_check,
    infinity_residuals,
    augmented_quotient,
    augmented_ratio,
    bareiss_det,
    integer_rank,
    sign_matrix,
    chord_lengths,
    circle_system,
    circle_config,
)
from pointineq.optimize import (
    SearchOptions,
    SearchReport,
    min_ratio_over_U,
    brute_force_min_ratio,
    min_ratio_over_configs,
    min_sigma_over_configs,
    min_critical_residual,
    min_augmented_ratio,
    cluster_far_stress,
    far_cluster_config,
    stress_csv,
)
