"""Hard instances, exact oracles, and certified lower-bound verification for
linear-minimization-oracle methods over strongly convex and smooth sets."""

from .instances import (
    HardInstance,
    PermutedFamily,
    QuadraticObjective,
    SimplexSet,
    SmoothedInstance,
    WeightedBallSet,
    build_hard_instance,
    build_permuted_family,
    build_smoothed_instance,
    build_weighted_ball,
    compute_nu,
    compute_nu_beta,
    diameter,
    diameter_attaining_points,
    instance_from_dict,
    instance_to_dict,
    optimum_for_permutation,
)
from .lmo import (
    LmoResult,
    ProjectionResult,
    ZeroQueryError,
    boundary_scale,
    contains,
    eval_constraint,
    lmo_minkowski,
    lmo_simplex,
    lmo_weighted_ball,
    project_onto_weighted_ball,
    soft_threshold,
)
from .oracle import (
    CompletionResult,
    ResistingOracleState,
    brute_force_matching,
    complete_permutation,
    worst_case_matching,
)
from .algorithms import (
    VARIANTS,
    MethodSpec,
    Problem,
    Trajectory,
    line_search_step,
    run_method,
    run_on_hard_instance,
    run_on_smoothed,
    run_resisting,
)
from .harness import (
    BoundSpec,
    SuiteConfig,
    VerificationReport,
    bound_value,
    run_suite,
    sweep,
    verify_lower_bound,
    verify_set_structure,
    verify_zero_chain,
)

__version__ = "0.1.0"
