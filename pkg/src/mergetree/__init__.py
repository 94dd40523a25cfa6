"""Hierarchical density cluster trees, the merge distortion metric and
consistency diagnostics against a grid oracle."""

from .density import KnnProfile, knn_density, knn_profile, rk_radius, unit_ball_volume
from .diagnostics import (
    ConsistencyReport,
    check_consistency,
    detect_improper_nesting,
    detect_over_segmentation,
    epsilon_sample_radius,
    hartigan_disjoint,
    minimality_defect,
    separation_defect,
    theorem_harness_min_sep_implies_hartigan,
)
from .metric import (
    Correspondence,
    consecutive_distance,
    convergence_curve,
    identity_correspondence,
    inclusion_correspondence,
    merge_distortion,
    snap_correspondence,
)
from .oracle import (
    DensityModel,
    GridDensity,
    brute_force_level_components,
    eval_density,
    gaussian_mixture,
    grid_cluster_tree,
    make_grid,
    piecewise_linear,
    sample,
    snap_to_grid,
)
from .rsl import NestedGraphFiltration, filtration_to_tree, rsl_filtration
from .split_tree import ProximityGraph, brute_force_split_components, proximity_graph, split_cluster_tree
from .tree import (
    HeightedClusterTree,
    LevelSetComponent,
    PointCloud,
    cluster_height,
    connected_at_level,
    merge_height,
    merge_height_matrix,
    separated_at_level,
    set_merge_height,
    smallest_containing_cluster,
    validate,
)

__version__ = "0.1.0"
