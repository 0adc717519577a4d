"""Topology and intersection-union constrained segmentation loss.

Pure numpy implementation of a multi-scale max-pooling topology loss, soft
anatomical constraint maps for nested eye structures (sclera, iris, pupil),
pixel losses, their analytic gradients, evaluation metrics, a synthetic
eye phantom and a gradient-descent demonstrator.
"""
from .composite import GradCheck, LossBreakdown, LossConfig, LossWeights, finite_diff_check, total_loss
from .config import RunConfig, load_config, parse_config
from .constraints import ConstraintMaps, constraint_maps, iu_loss, region_encoding
from .errors import (ConfigError, EmptyImageError, NumericalError, ShapeMismatchError, TIUError,
                     UnknownClassError, UnreadableFileError, ValidationError)
from .files import export_heatmap, read_map, read_mask, write_map, write_mask
from .grid import ClassSet, argmax_mask, normalize, one_hot
from .metrics import MetricReport, bootstrap_ci, dice_score, evaluate_pair, hd95, violation_count
from .optimize import OptimConfig, OptimTrace, ablate, fit
from .phantom import (DilatePupil, LabelNoise, Phantom, PhantomSpec, ScleraPupilOverlap, TranslatePupil,
                      corrupt, expected_violations, generate)
from .pixel_loss import PixelLossKind, cross_entropy, dice_loss
from .pool import build_pyramid, maxpool2d, topo_loss

__version__ = "0.1.0"
