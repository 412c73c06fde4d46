"""Multi-level segmentation refinement.

Fuses scene-level and object-level class scores, proposes object regions
from the coarse labeling, and runs densely connected CRF mean-field
inference with appearance, spatial, and depth Gaussian kernels to produce
pixel-accurate waste-vs-background masks, plus evaluation metrics and CRF
parameter grid search.
"""

from .config import PRESETS, RunConfig, build_run_config
from .densecrf import CrfConfig, Kernel, MarginalField, build_kernels, energy, map_labels, mean_field
from .depthfill import fill_missing
from .fields import ColorField, DepthField, LabelField, LogitField, ProbabilityField
from .filtering import GaussianFilter, gaussian_filter_bruteforce, gaussian_filter_fast
from .metrics import ConfusionCounts, accumulate, iou, mean_iou, mean_precision, precision
from .proposer import ProposerConfig, RegionProposal, connected_components, propose
from .unary import RegionTranslation, UnaryField, fuse_object_unary, resample_bilinear, softmax, to_unary

__version__ = "0.1.0"

__all__ = [
    "PRESETS",
    "RunConfig",
    "build_run_config",
    "CrfConfig",
    "Kernel",
    "MarginalField",
    "build_kernels",
    "energy",
    "map_labels",
    "mean_field",
    "fill_missing",
    "ColorField",
    "DepthField",
    "LabelField",
    "LogitField",
    "ProbabilityField",
    "GaussianFilter",
    "gaussian_filter_bruteforce",
    "gaussian_filter_fast",
    "ConfusionCounts",
    "accumulate",
    "iou",
    "mean_iou",
    "mean_precision",
    "precision",
    "ProposerConfig",
    "RegionProposal",
    "connected_components",
    "propose",
    "RegionTranslation",
    "UnaryField",
    "fuse_object_unary",
    "resample_bilinear",
    "softmax",
    "to_unary",
]
