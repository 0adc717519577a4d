"""The combined loss ``L_f = a1 * L1 + a2 * L2 + b * L_p`` on raw logits.

``total_loss`` runs the softmax, evaluates the multi-scale topology term,
the relationship term and the pixel term, and chains the summed gradient
back through the softmax so callers can optimise logits directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import constraints, pool
from .constraints import ConstraintMaps
from .errors import NumericalError, ShapeMismatchError, ValidationError
from .grid import ClassSet, check_mask, normalize, one_hot, softmax_backward
from .pixel_loss import DICE_EPS, PixelLossKind, cross_entropy, dice_loss

FD_STEP = 1e-5


@dataclass(frozen=True)
class LossWeights:
    alpha1: float = 1.0
    alpha2: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        vals = (self.alpha1, self.alpha2, self.beta)
        if any(not np.isfinite(v) or v < 0 for v in vals):
            raise ValidationError(f"loss weights must be finite and non-negative, got {vals}")
        if not any(vals):
            raise ValidationError("at least one loss weight must be positive")

    def scaled(self, factor: float) -> LossWeights:
        return LossWeights(self.alpha1 * factor, self.alpha2 * factor, self.beta * factor)


@dataclass(frozen=True)
class LossConfig:
    weights: LossWeights = field(default_factory=LossWeights)
    schedule: tuple[int, ...] = pool.DEFAULT_SCHEDULE
    pixel_loss: PixelLossKind = PixelLossKind.CROSS_ENTROPY
    dice_eps: float = DICE_EPS
    dice_include_background: bool = True
    topo_reduction: str = "mean"
    iu_reduction: str = "mean"
    classes: ClassSet | None = None

    def __post_init__(self):
        object.__setattr__(self, "schedule", pool.check_schedule(self.schedule))
        object.__setattr__(self, "pixel_loss", PixelLossKind(self.pixel_loss))
        for name in ("topo_reduction", "iu_reduction"):
            if getattr(self, name) not in ("mean", "sum"):
                raise ValidationError(f"{name} must be 'mean' or 'sum'")
        if self.dice_eps <= 0:
            raise ValidationError("dice_eps must be positive")

    def resolve_classes(self, n_channels: int) -> ClassSet:
        if self.classes is not None:
            if len(self.classes) != n_channels:
                raise ShapeMismatchError(
                    f"{n_channels} logit channels but {len(self.classes)} classes configured")
            return self.classes
        if n_channels not in (4, 5):
            raise ShapeMismatchError(
                f"cannot infer the class set for {n_channels} channels; pass LossConfig.classes")
        return ClassSet.eye(caruncle=n_channels == 5)


@dataclass(frozen=True)
class LossBreakdown:
    topo: float
    relation: float
    pixel: float
    total: float
    grad: np.ndarray
    maps: ConstraintMaps
    weights: LossWeights

    def scalars(self) -> dict[str, float]:
        w = self.weights
        return {"L1": self.topo, "L2": self.relation, "Lp": self.pixel, "Lf": self.total,
                "alpha1": w.alpha1, "alpha2": w.alpha2, "beta": w.beta}


def pixel_term(p: np.ndarray, g: np.ndarray, config: LossConfig):
    if config.pixel_loss is PixelLossKind.CROSS_ENTROPY:
        return cross_entropy(p, g)
    return dice_loss(p, g, eps=config.dice_eps, include_background=config.dice_include_background)


def total_loss(logits, target, config: LossConfig | None = None) -> LossBreakdown:
    """Evaluate the combined loss and its gradient w.r.t. ``logits``.

    Parameters
    ----------
    logits : (C, H, W) array
    target : (H, W) label mask
    config : LossConfig, optional
    """
    config = config or LossConfig()
    p = normalize(logits)
    classes = config.resolve_classes(p.shape[0])
    m = check_mask(target, classes)
    if m.shape != p.shape[1:]:
        raise ShapeMismatchError(f"logits are {p.shape[1:]} but target is {m.shape}")
    g = one_hot(m, classes)
    w = config.weights

    l1, g1 = pool.topo_loss(p, g, config.schedule, config.topo_reduction)
    l2, maps, g2 = constraints.iu_loss(p, classes, config.iu_reduction)
    lp, gp = pixel_term(p, g, config)

    total = w.alpha1 * l1 + w.alpha2 * l2 + w.beta * lp
    grad_p = w.alpha1 * g1 + w.alpha2 * g2 + w.beta * gp
    return LossBreakdown(l1, l2, lp, total, softmax_backward(p, grad_p), maps, w)


def smooth_logit_points(logits, target, config: LossConfig | None = None,
                        margin: float = 1e-3) -> np.ndarray:
    """Coordinates of ``logits`` away from every kink of the combined loss.

    A logit moves all channels of its pixel, so a pixel is dropped as a
    whole when any of its channels sits near a pooling tie, a pooled
    zero-difference or a relu/min kink.
    """
    config = config or LossConfig()
    p = normalize(logits)
    classes = config.resolve_classes(p.shape[0])
    g = one_hot(target, classes)
    ok = pool.smooth_points(p, g, config.schedule, margin).all(axis=0)
    ok &= constraints.smooth_points(p, classes, margin)
    return np.broadcast_to(ok, p.shape).copy()


@dataclass(frozen=True)
class GradCheck:
    max_rel_error: float
    worst_index: tuple[int, ...] | None
    analytic: np.ndarray
    numeric: np.ndarray
    checked: int


def finite_diff_check(fun: Callable[[np.ndarray], tuple[float, np.ndarray]], x,
                      step: float = FD_STEP, mask=None, floor: float = 1e-8) -> GradCheck:
    """Compare ``fun``'s analytic gradient with central differences.

    ``fun(x)`` must return ``(value, grad)``. The relative error
    ``|analytic - numeric| / |numeric|`` is reported over coordinates where
    either gradient exceeds ``floor`` in magnitude (and inside ``mask`` when
    given); the numeric estimate is the reference.
    """
    if step <= 0:
        raise ValidationError("finite-difference step must be positive")
    x = np.array(x, dtype=np.float64)
    value, analytic = fun(x.copy())
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != x.shape:
        raise ShapeMismatchError(f"gradient shape {analytic.shape} != input shape {x.shape}")
    if not np.isfinite(value):
        raise NumericalError("loss evaluated to a non-finite value at the base point")
    select = np.ones(x.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)

    numeric = np.full(x.shape, np.nan)
    flat = x.reshape(-1)
    for idx in np.flatnonzero(select.reshape(-1)):
        orig = flat[idx]
        flat[idx] = orig + step
        f_plus = fun(x)[0]
        flat[idx] = orig - step
        f_minus = fun(x)[0]
        flat[idx] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericalError(f"non-finite loss when perturbing coordinate {np.unravel_index(idx, x.shape)}")
        numeric.reshape(-1)[idx] = (f_plus - f_minus) / (2.0 * step)

    scale = np.maximum(np.abs(analytic), np.abs(np.nan_to_num(numeric)))
    use = select & (scale > floor)
    if not use.any():
        return GradCheck(0.0, None, analytic, numeric, 0)
    rel = np.zeros(x.shape)
    rel[use] = np.abs(analytic[use] - numeric[use]) / np.maximum(np.abs(numeric[use]), floor)
    worst = int(np.argmax(rel))
    return GradCheck(float(rel.reshape(-1)[worst]), tuple(int(i) for i in np.unravel_index(worst, x.shape)),
                     analytic, numeric, int(use.sum()))
