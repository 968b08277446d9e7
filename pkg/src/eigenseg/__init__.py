"""Unsupervised spectral instance segmentation on patch-feature tensors.

The pipeline drops uninformative feature channels, builds a pairwise
similarity graph over pixels, and cuts it with the small eigenvectors of
a graph Laplacian: the second eigenvector separates foreground from
background, and k-means on the leading eigenvector embedding splits the
foreground into instances.
"""

__version__ = "0.1.0"

from .channel_select import dcr_select, entropy_scores, ncr_select, std_scores
from .errors import EigensegError
from .evaluate import (
    EvalReport,
    FilterCriteria,
    align_resolution,
    f_score,
    filter_dataset,
    hungarian,
    instance_miou,
    variance_ratio_mr,
)
from .pipeline import (
    FgBgConfig,
    InstanceConfig,
    KmeansParams,
    ThresholdRule,
    fgbg_segment,
    instance_segment,
    kmeans,
    post_process,
)
from .similarity import AffinityMatrix, MetricKind, build_affinity, covariance_context, metric_sim
from .spectral import EigenSegments, Laplacian, Normalization, fiedler, laplacian, smallest_eigenpairs
from .synth import InstanceSpec, NoiseSpec, SceneSpec, demo_scene, generate, inject_spikes, scene_from_dict
from .tensor_io import FeatureMap, LabelMask, load_mask, load_tensor, save_mask, save_matrix, save_tensor

__all__ = [
    "__version__",
    "AffinityMatrix",
    "EigenSegments",
    "EigensegError",
    "EvalReport",
    "FeatureMap",
    "FgBgConfig",
    "FilterCriteria",
    "InstanceConfig",
    "InstanceSpec",
    "KmeansParams",
    "LabelMask",
    "Laplacian",
    "MetricKind",
    "NoiseSpec",
    "Normalization",
    "SceneSpec",
    "ThresholdRule",
    "align_resolution",
    "build_affinity",
    "covariance_context",
    "dcr_select",
    "demo_scene",
    "entropy_scores",
    "f_score",
    "fgbg_segment",
    "fiedler",
    "filter_dataset",
    "generate",
    "hungarian",
    "inject_spikes",
    "instance_miou",
    "instance_segment",
    "kmeans",
    "laplacian",
    "load_mask",
    "load_tensor",
    "metric_sim",
    "ncr_select",
    "post_process",
    "save_mask",
    "save_matrix",
    "save_tensor",
    "scene_from_dict",
    "smallest_eigenpairs",
    "std_scores",
    "variance_ratio_mr",
]
