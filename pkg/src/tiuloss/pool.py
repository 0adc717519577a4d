"""Non-overlapping max pooling and the multi-scale topology loss.

Pooling uses stride equal to the kernel size. When ``k`` does not divide
the image, the last row/column of windows is truncated (ceil mode), so
every pixel takes part at every scale.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ValidationError
from .grid import same_shape

DEFAULT_SCHEDULE = (2, 4, 8, 16)


def check_schedule(schedule: Sequence[int]) -> tuple[int, ...]:
    ks = tuple(schedule)
    if not ks:
        raise ValidationError("kernel schedule is empty")
    for k in ks:
        if isinstance(k, bool) or int(k) != k or k < 1:
            raise ValidationError(f"kernel sizes must be positive integers, got {k!r}")
    ks = tuple(int(k) for k in ks)
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValidationError(f"kernel schedule must be strictly increasing, got {ks}")
    return ks


def _windows(x: np.ndarray, k: int) -> np.ndarray:
    """View ``(..., H, W)`` as ``(..., Ho, Wo, k*k)`` windows, padded with -inf."""
    *lead, h, w = x.shape
    ho, wo = -(-h // k), -(-w // k)
    if ho * k != h or wo * k != w:
        padded = np.full((*lead, ho * k, wo * k), -np.inf)
        padded[..., :h, :w] = x
        x = padded
    x = x.reshape(*lead, ho, k, wo, k).swapaxes(-3, -2)
    return x.reshape(*lead, ho, wo, k * k)


def maxpool2d(grid, k: int) -> np.ndarray:
    """Max over non-overlapping ``k x k`` windows of the last two axes.

    Output shape is ``(..., ceil(H/k), ceil(W/k))``.
    """
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ValidationError(f"kernel size must be a positive integer, got {k!r}")
    x = np.asarray(grid, dtype=np.float64)
    if x.ndim < 2:
        raise ValidationError(f"need at least 2 dimensions, got shape {x.shape}")
    if k == 1:
        return x.copy()
    return _windows(x, int(k)).max(axis=-1)


def maxpool2d_argmax(grid, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pooled values plus the source (row, col) of each window maximum.

    Ties go to the first element of the window in row-major order.
    """
    x = np.asarray(grid, dtype=np.float64)
    k = int(k)
    win = _windows(x, k)
    local = np.argmax(win, axis=-1)
    pooled = win.max(axis=-1)
    ho, wo = local.shape[-2:]
    rows = np.arange(ho)[:, None] * k + local // k
    cols = np.arange(wo)[None, :] * k + local % k
    return pooled, rows, cols


def build_pyramid(p, schedule: Sequence[int] = DEFAULT_SCHEDULE) -> dict[int, np.ndarray]:
    """Pool every channel of a ``(C, H, W)`` map at each kernel size."""
    ks = check_schedule(schedule)
    x = np.asarray(p, dtype=np.float64)
    return {k: maxpool2d(x, k) for k in ks}


def topo_loss(p, g, schedule: Sequence[int] = DEFAULT_SCHEDULE, reduction: str = "mean"):
    """Multi-scale L1 loss between pooled prediction and pooled target.

    With ``reduction="mean"`` each scale contributes the mean absolute
    difference over its pooled grid; ``"sum"`` uses the raw sum instead.
    Scales are averaged.

    Returns
    -------
    loss : float
    grad : ndarray
        Subgradient w.r.t. ``p``, same shape as ``p``. Each pooled cell sends
        ``sign(P_k - G_k)`` to the pixel that won its window in ``p``.
    """
    ks = check_schedule(schedule)
    if reduction not in ("mean", "sum"):
        raise ValidationError(f"unknown reduction {reduction!r}")
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    same_shape(p, g, what="prediction and target")
    if p.ndim != 3:
        raise ValidationError(f"expected (C, H, W) maps, got shape {p.shape}")

    n_ch = p.shape[0]
    loss = 0.0
    grad = np.zeros_like(p)
    ch = np.arange(n_ch)[:, None, None]
    for k in ks:
        pk, rows, cols = maxpool2d_argmax(p, k)
        gk = maxpool2d(g, k)
        diff = pk - gk
        scale = 1.0 / len(ks)
        if reduction == "mean":
            scale /= diff.size
        loss += scale * np.abs(diff).sum()
        # windows are disjoint, so each (channel, row, col) target is hit at most once per scale
        grad[np.broadcast_to(ch, rows.shape), rows, cols] += scale * np.sign(diff)
    return float(loss), grad


def smooth_points(p, g, schedule: Sequence[int] = DEFAULT_SCHEDULE, margin: float = 1e-3) -> np.ndarray:
    """Boolean ``(C, H, W)`` mask of coordinates where the loss is locally linear.

    A coordinate is rejected when, at any scale, its window has a runner-up
    within ``margin`` of the maximum or the pooled difference lies within
    ``margin`` of zero. Finite-difference checks skip rejected coordinates.
    """
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    ok = np.ones(p.shape, dtype=bool)
    h, w = p.shape[-2:]
    for k in check_schedule(schedule):
        if k == 1:
            bad = np.abs(p - g) < margin
        else:
            win = np.sort(_windows(p, k), axis=-1)
            gap = win[..., -1] - win[..., -2]
            diff = win[..., -1] - maxpool2d(g, k)
            bad_cell = (gap < margin) | (np.abs(diff) < margin)
            bad = np.repeat(np.repeat(bad_cell, k, axis=-2), k, axis=-1)[..., :h, :w]
        ok &= ~bad
    return ok
