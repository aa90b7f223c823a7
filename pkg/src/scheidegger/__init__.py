"""Coalescing-walk drainage networks and their continuum scaling limits."""

from .cluster import (
    RootedTree,
    TreeSizeError,
    extract_cluster,
    extract_dual_tree,
    load_tree,
    save_tree,
    scale_tree,
    tree_diameter,
    tree_from_newick,
    tree_metric,
    tree_to_newick,
)
from .diagnostics import (
    conditioned_dual_metric,
    continuum_dual_metric,
    converge,
    depth_tail_mc,
    depth_tail_oracle,
    eta_estimate,
    horton,
    kappa_estimate,
    kappa_identity_check,
    summary_compare,
    uniform_binary_tree,
)
from .lattice import (
    ExplicitEnvironment,
    LatticeEnvironment,
    LatticePath,
    ParityError,
    Site,
    SliceEvolution,
    arrow,
    count_edge_crossings,
    dual_path,
    dual_site,
    envelope_walk,
    even_site,
    evolve_slice,
    forward_path,
    step_dual,
    step_forward,
)
from .metric import (
    FiniteMetricSpace,
    GHResult,
    MetricSizeError,
    four_point_check,
    gh_bounds,
    gh_exact,
    metric_from_csv,
    metric_to_csv,
)
from .paths import (
    BACKWARD,
    FORWARD,
    GridPath,
    PathFamily,
    ancestor_metric,
    first_meeting,
    path_distance,
    validate_tree_like,
)
from .rng import derive_seed
from .skeleton import (
    BoundaryPair,
    ConditionedPair,
    GammaResult,
    HorizonError,
    Skeleton,
    backward_skeleton,
    delta_raster,
    forward_skeleton,
    gamma_map,
    gamma_n_map,
    sample_boundary,
    sample_conditioned_pair,
    skeleton_from_json,
    skeleton_metric,
    skeleton_to_json,
)

__version__ = "0.1.0"
