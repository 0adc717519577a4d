"""Intersection-union constraint maps and the relationship loss.

Three pointwise constraints tie the sclera (s), iris (i) and pupil (p)
channels together:

* exclusion  ``R_o    = relu(min(P_s, P_p))``
* enclosure  ``R_v_si = relu(P_i - P_s)``
* enclosure  ``R_v_ip = relu(P_p - P_i)``

The loss is the sum of the three maps, by default divided by the pixel
count so that its weight does not depend on resolution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ShapeMismatchError, ValidationError
from .grid import ClassSet, check_mask, same_shape


@dataclass(frozen=True)
class ConstraintMaps:
    exclusion: np.ndarray
    enclosure_si: np.ndarray
    enclosure_ip: np.ndarray

    def sums(self) -> tuple[float, float, float]:
        return (float(self.exclusion.sum()), float(self.enclosure_si.sum()),
                float(self.enclosure_ip.sum()))

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"exclusion": self.exclusion, "enclosure_si": self.enclosure_si,
                "enclosure_ip": self.enclosure_ip}


def exclusion_map(p_s, p_p) -> np.ndarray:
    a = np.asarray(p_s, dtype=np.float64)
    b = np.asarray(p_p, dtype=np.float64)
    same_shape(a, b, what="sclera and pupil grids")
    return np.maximum(0.0, np.minimum(a, b))


def violation_map(outer, inner) -> np.ndarray:
    """``relu(inner - outer)``: where the inner structure exceeds its container."""
    a = np.asarray(outer, dtype=np.float64)
    b = np.asarray(inner, dtype=np.float64)
    same_shape(a, b, what="outer and inner grids")
    return np.maximum(0.0, b - a)


def _channels(p: np.ndarray, classes: ClassSet) -> tuple[int, int, int]:
    s, i, q = classes.sclera, classes.iris, classes.pupil
    if p.ndim != 3:
        raise ShapeMismatchError(f"expected a (C, H, W) map, got shape {p.shape}")
    if p.shape[0] <= max(s, i, q):
        raise ValidationError(
            f"map has {p.shape[0]} channels but sclera/iris/pupil live at {s}/{i}/{q}")
    return s, i, q


def constraint_maps(p, classes: ClassSet | None = None) -> ConstraintMaps:
    classes = classes or ClassSet()
    p = np.asarray(p, dtype=np.float64)
    s, i, q = _channels(p, classes)
    return ConstraintMaps(
        exclusion=exclusion_map(p[s], p[q]),
        enclosure_si=violation_map(p[s], p[i]),
        enclosure_ip=violation_map(p[i], p[q]),
    )


def iu_loss(p, classes: ClassSet | None = None, reduction: str = "mean"):
    """Relationship loss and its subgradient w.r.t. ``p``.

    ``p`` only needs the sclera/iris/pupil channels to be meaningful; the
    map is not required to be normalised, so multi-hot region stacks are
    accepted as well.

    Subgradient conventions: relu'(0) = 0; where ``P_s == P_p`` the min
    routes to the sclera channel. Channels other than s/i/p get zero.

    Returns
    -------
    loss : float
    maps : ConstraintMaps
    grad : ndarray, same shape as ``p``
    """
    classes = classes or ClassSet()
    if reduction not in ("mean", "sum"):
        raise ValidationError(f"unknown reduction {reduction!r}")
    p = np.asarray(p, dtype=np.float64)
    s, i, q = _channels(p, classes)
    maps = constraint_maps(p, classes)
    scale = 1.0 / (p.shape[1] * p.shape[2]) if reduction == "mean" else 1.0
    loss = scale * sum(maps.sums())

    grad = np.zeros_like(p)
    ps, pi, pq = p[s], p[i], p[q]

    active = np.minimum(ps, pq) > 0
    to_sclera = active & (ps <= pq)
    grad[s] += scale * to_sclera
    grad[q] += scale * (active & ~to_sclera)

    active = pi - ps > 0
    grad[i] += scale * active
    grad[s] -= scale * active

    active = pq - pi > 0
    grad[q] += scale * active
    grad[i] -= scale * active
    return float(loss), maps, grad


def filled_region(region) -> np.ndarray:
    """Pixels of ``region`` plus every pixel it encloses.

    The complement is flood-filled from the image border with
    4-connectivity; whatever the flood cannot reach counts as enclosed.
    """
    return ndimage.binary_fill_holes(np.asarray(region, dtype=bool))


def region_encoding(mask, classes: ClassSet | None = None) -> np.ndarray:
    """Nested multi-hot stack for hard labels.

    The sclera and iris channels hold the *filled* region of the structure
    (the label plus what it encloses); every other channel is the plain
    label indicator. On this stack the enclosure maps light up where an
    inner structure escapes its container, the soft counterpart of the
    hard-label violation counts in :mod:`tiuloss.metrics`.

    A non-empty pupil inside the sclera region always shows up in the
    exclusion map here: pointwise nesting and sclera/pupil exclusion
    cannot both hold for binary channels.
    """
    classes = classes or ClassSet()
    m = check_mask(mask, classes)
    stack = (np.arange(len(classes))[:, None, None] == m[None]).astype(np.float64)
    for c in (classes.sclera, classes.iris):
        stack[c] = filled_region(m == c)
    return stack


def smooth_points(p, classes: ClassSet | None = None, margin: float = 1e-3) -> np.ndarray:
    """Boolean ``(H, W)`` mask of pixels where every relu/min argument is
    at least ``margin`` away from its kink."""
    classes = classes or ClassSet()
    p = np.asarray(p, dtype=np.float64)
    s, i, q = _channels(p, classes)
    ps, pi, pq = p[s], p[i], p[q]
    return ((np.abs(ps - pq) > margin) & (np.abs(np.minimum(ps, pq)) > margin)
            & (np.abs(pi - ps) > margin) & (np.abs(pq - pi) > margin))
