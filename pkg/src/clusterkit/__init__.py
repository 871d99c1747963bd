"""Wide-gap clusterability: certify, detect, transform and embed k-means
clusterings whose optimum is known in advance."""
from .core import (
    Criterion,
    DistanceMatrix,
    EmbeddedDataset,
    Partition,
    SeparabilityCertificate,
    beta,
    min_distance,
    min_inter_cluster_distance,
    pairwise_distances,
    quality,
    quality_euclidean,
)
from .separability import (
    brute_force_optimal,
    enumerate_partitions,
    is_residually_separable,
    is_variationally_separable,
)
from .clustering import (
    detect_range,
    estimate_hitting_probability,
    hitting_probability_bound,
    kernel_lloyd,
    kmeanspp_seed,
    res_kmeanspp_seed,
)
from .transforms import (
    TransformSpec,
    convergent_consistency,
    convergent_consistency_keep_min,
    scale,
    shift_squared,
    validate_transform,
)
from .embedding import analyze, embed, euclideanize, gram_matrix, symmetric_eigen

__version__ = "0.1.0"

__all__ = [
    "Criterion",
    "DistanceMatrix",
    "EmbeddedDataset",
    "Partition",
    "SeparabilityCertificate",
    "TransformSpec",
    "analyze",
    "beta",
    "brute_force_optimal",
    "convergent_consistency",
    "convergent_consistency_keep_min",
    "detect_range",
    "embed",
    "enumerate_partitions",
    "estimate_hitting_probability",
    "euclideanize",
    "gram_matrix",
    "hitting_probability_bound",
    "is_residually_separable",
    "is_variationally_separable",
    "kernel_lloyd",
    "kmeanspp_seed",
    "min_distance",
    "min_inter_cluster_distance",
    "pairwise_distances",
    "quality",
    "quality_euclidean",
    "res_kmeanspp_seed",
    "scale",
    "shift_squared",
    "symmetric_eigen",
    "validate_transform",
]
