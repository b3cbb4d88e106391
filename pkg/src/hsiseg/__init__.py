"""Click-driven hyperspectral image segmentation toolkit."""

from .errors import FormatError, HsisegError, ValidationError
from .fileio import (
    load_cube,
    load_labels,
    load_probability_map,
    save_cube,
    save_labels,
    save_probability_map,
)
from .fusion import (
    FusionModel,
    TrainConfig,
    TrainingBatch,
    apply_fusion,
    dice_ce_loss,
    intersect,
    train_logistic_fusion,
)
from .metrics import (
    connected_components,
    d_at_max,
    d_at_threshold,
    dice,
    distance_transform,
    place_first_click,
    place_next_click,
)
from .protocol import EvalConfig, EvalItem, EvalReport, compute_method_map, evaluate
from .rasters import (
    UNLABELED,
    BandSelection,
    adaptive_selection,
    Click,
    ClickSet,
    HyperCube,
    LabelMap,
    RgbImage,
    SimilarityMap,
    pseudo_rgb,
)
from .rgb_branch import ChromaStandIn, ExternalMap, rgb_probability_map
from .scf import (
    ScfMethod,
    equalize,
    pcc,
    pcc_similarity,
    sa_similarity,
    scf_map,
    spectral_angle,
)
from .synth import ClassSpec, SceneSpec, Shading, apply_shading, generate_scene

__version__ = "0.1.0"

__all__ = [
    "BandSelection",
    "ChromaStandIn",
    "ClassSpec",
    "Click",
    "ClickSet",
    "EvalConfig",
    "EvalItem",
    "EvalReport",
    "ExternalMap",
    "FormatError",
    "FusionModel",
    "HsisegError",
    "HyperCube",
    "LabelMap",
    "RgbImage",
    "SceneSpec",
    "ScfMethod",
    "Shading",
    "SimilarityMap",
    "TrainConfig",
    "TrainingBatch",
    "UNLABELED",
    "ValidationError",
    "adaptive_selection",
    "apply_fusion",
    "apply_shading",
    "compute_method_map",
    "connected_components",
    "d_at_max",
    "d_at_threshold",
    "dice",
    "dice_ce_loss",
    "distance_transform",
    "equalize",
    "evaluate",
    "generate_scene",
    "intersect",
    "load_cube",
    "load_labels",
    "load_probability_map",
    "pcc",
    "pcc_similarity",
    "place_first_click",
    "place_next_click",
    "pseudo_rgb",
    "rgb_probability_map",
    "sa_similarity",
    "save_cube",
    "save_labels",
    "save_probability_map",
    "scf_map",
    "spectral_angle",
    "train_logistic_fusion",
]
