"""Pixel-level baselines: multi-class cross-entropy and soft Dice.

Both return ``(loss, grad)`` with the gradient taken w.r.t. the
probability map; :mod:`tiuloss.composite` chains it through the softmax.
"""
from __future__ import annotations

import enum

import numpy as np

from .errors import ValidationError
from .grid import same_shape

CE_FLOOR = 1e-7
DICE_EPS = 1e-6


class PixelLossKind(str, enum.Enum):
    CROSS_ENTROPY = "ce"
    SOFT_DICE = "dice"


def _check_onehot(g: np.ndarray) -> None:
    if not (np.all((g == 0) | (g == 1)) and np.all(g.sum(axis=0) == 1)):
        raise ValidationError("target must be one-hot: exactly one channel equal to 1 per pixel")


def cross_entropy(p, g):
    """Mean negative log-likelihood of the true class.

    Probabilities are clamped to ``[1e-7, 1]`` before the log; inside the
    clamped range the gradient is zero, matching the clamped function.
    """
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    same_shape(p, g, what="prediction and target")
    _check_onehot(g)
    n_pix = p.shape[1] * p.shape[2]
    pt = (p * g).sum(axis=0)
    clamped = np.clip(pt, CE_FLOOR, 1.0)
    loss = -np.log(clamped).sum() / n_pix
    inside = (pt >= CE_FLOOR) & (pt <= 1.0)
    grad = g * np.where(inside, -1.0 / (n_pix * clamped), 0.0)
    return float(loss), grad


def dice_loss(p, g, eps: float = DICE_EPS, include_background: bool = True):
    """Soft Dice loss ``1 - mean_c (2 sum(p g) + eps) / (sum p + sum g + eps)``."""
    if eps <= 0:
        raise ValidationError("dice smoothing eps must be positive")
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    same_shape(p, g, what="prediction and target")
    _check_onehot(g)
    first = 0 if include_background else 1
    if first >= p.shape[0]:
        raise ValidationError("no classes left after excluding background")

    pc, gc = p[first:], g[first:]
    num = 2.0 * (pc * gc).sum(axis=(1, 2)) + eps
    den = pc.sum(axis=(1, 2)) + gc.sum(axis=(1, 2)) + eps
    n_cls = pc.shape[0]
    loss = 1.0 - (num / den).mean()

    grad = np.zeros_like(p)
    # quotient rule per class: d(num/den)/dp = (2 g den - num) / den^2
    grad[first:] = -(2.0 * gc * den[:, None, None] - num[:, None, None]) / (den**2)[:, None, None] / n_cls
    return float(loss), grad
