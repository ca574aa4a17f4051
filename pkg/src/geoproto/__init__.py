"""Edge-aware geodesic distance fields and adaptive prototypes for few-shot segmentation."""

from .adaptive import AdaptiveParams, derive_params, weight_field
from .features import FeatureConfig, extract
from .geodesic import RefineConfig, edt_init, refine, speed_function
from .losses import dice_score, hd95, loss_report
from .segmenter import Episode, PipelineConfig, align_episode, segment_episode
from .tensor_core import read_pgm, read_tensor, write_pgm, write_tensor

__all__ = [
    "AdaptiveParams", "derive_params", "weight_field",
    "FeatureConfig", "extract",
    "RefineConfig", "edt_init", "refine", "speed_function",
    "dice_score", "hd95", "loss_report",
    "Episode", "PipelineConfig", "align_episode", "segment_episode",
    "read_pgm", "read_tensor", "write_pgm", "write_tensor",
]
