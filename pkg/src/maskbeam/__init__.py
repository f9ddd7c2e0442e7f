"""Mask-based multichannel beamforming: rank-1 MWF family, GEV, MVDR and friends."""

__version__ = "0.1.0"

from .estimators import CepstralFeatures, MaskBeamformer, StftTransformer
from .exceptions import ConvergenceError, DegenerateStatisticsError, SingularMatrixError
from .filters import CATALOGUE, compute_weights
from .masks import MaskPair, median_fuse, oracle_masks
from .scenes import generate_scene, oracle_covariances
from .stft import StftConfig, analyze, synthesize

__all__ = [
    "__version__",
    "CATALOGUE",
    "CepstralFeatures",
    "ConvergenceError",
    "DegenerateStatisticsError",
    "MaskBeamformer",
    "MaskPair",
    "SingularMatrixError",
    "StftConfig",
    "StftTransformer",
    "analyze",
    "compute_weights",
    "generate_scene",
    "median_fuse",
    "oracle_covariances",
    "oracle_masks",
    "synthesize",
]
