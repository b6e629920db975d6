"""Topology-guided brain-image analysis toolkit.

Four cooperating pieces: an adaptive anisotropic-diffusion denoiser, a
beta-skeleton/persistence segmenter, a clan-structured herd optimizer,
and a small conv + bidirectional-recurrent classifier, plus the metrics,
fixtures, and batch CLI that tie them together.
"""

from .checkpoint import load_model, save_model
from .classifier import (
    ConvRecurrentClassifier,
    bidirectional_memory,
    default_search_space,
    fuse_and_classify,
    stratified_split,
    tune_hyperparameters,
)
from .denoise import (
    DiffusionConfig,
    DiffusionDenoiser,
    denoise,
    diffusion_coefficient,
    estimate_threshold,
)
from .eho import (
    Continuous,
    Discrete,
    EhoConfig,
    ElephantHerdingOptimizer,
    SearchSpace,
    accuracy_fitness,
    optimize,
)
from .exceptions import (
    CheckpointError,
    ConfigError,
    DivergenceError,
    ImageFormatError,
    MalformedComplexError,
    OptimizerError,
    StageError,
)
from .fixtures import generate_fixtures
from .gradients import DirectionalGradients, gradients_4dir
from .image_io import load_image, save_image
from .metrics import (
    ConfusionCounts,
    accuracy,
    confusion_from_labels,
    dice,
    f1,
    multiclass_report,
    precision,
    psnr,
    recall,
)
from .pipeline import PipelineConfig, load_config, run_pipeline, save_config
from .segmentation import (
    RegionKind,
    RegionPartition,
    SegmentationConfig,
    TopologicalSegmenter,
    classify_regions,
    detect_edge_points,
    segment,
    split_merge_segment,
)
from .skeleton import (
    PointSet,
    SkeletonComplex,
    betti_b1,
    build_beta_skeleton,
    persistent_b1,
)

__version__ = "1.0.0"

__all__ = [
    "CheckpointError",
    "ConfigError",
    "ConfusionCounts",
    "Continuous",
    "ConvRecurrentClassifier",
    "DiffusionConfig",
    "DiffusionDenoiser",
    "DirectionalGradients",
    "Discrete",
    "DivergenceError",
    "EhoConfig",
    "ElephantHerdingOptimizer",
    "ImageFormatError",
    "MalformedComplexError",
    "OptimizerError",
    "PipelineConfig",
    "PointSet",
    "RegionKind",
    "RegionPartition",
    "SearchSpace",
    "SegmentationConfig",
    "SkeletonComplex",
    "StageError",
    "TopologicalSegmenter",
    "accuracy",
    "accuracy_fitness",
    "betti_b1",
    "bidirectional_memory",
    "build_beta_skeleton",
    "classify_regions",
    "confusion_from_labels",
    "default_search_space",
    "denoise",
    "detect_edge_points",
    "dice",
    "diffusion_coefficient",
    "estimate_threshold",
    "f1",
    "fuse_and_classify",
    "generate_fixtures",
    "gradients_4dir",
    "load_config",
    "load_image",
    "load_model",
    "multiclass_report",
    "optimize",
    "persistent_b1",
    "precision",
    "psnr",
    "recall",
    "run_pipeline",
    "save_config",
    "save_image",
    "save_model",
    "segment",
    "split_merge_segment",
    "stratified_split",
    "tune_hyperparameters",
]
