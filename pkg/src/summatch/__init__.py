"""Evaluation of video keyframe summaries against user ground truth."""

__version__ = "0.1.0"

from .distance import Metric, ThresholdSpec, euclidean, manhattan, surf_distance  # noqa: E402
from .features import FeatureSpace, PixelImage, extract  # noqa: E402
from .matching import Matcher, MatchResult, build_distance_matrix, run_matcher  # noqa: E402
from .metrics import average_discrimination, discrimination_capacity, f_measure  # noqa: E402
from .protocol import (  # noqa: E402
    ProtocolConfig,
    evaluate_candidate,
    recommended_config,
    run_sweep,
    uniform_summary,
)

__all__ = [
    "FeatureSpace",
    "Matcher",
    "MatchResult",
    "Metric",
    "PixelImage",
    "ProtocolConfig",
    "ThresholdSpec",
    "average_discrimination",
    "build_distance_matrix",
    "discrimination_capacity",
    "euclidean",
    "evaluate_candidate",
    "extract",
    "f_measure",
    "manhattan",
    "recommended_config",
    "run_matcher",
    "run_sweep",
    "surf_distance",
    "uniform_summary",
]
