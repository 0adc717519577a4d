"""Evaluation metrics: Dice, HD95, anatomical violation counts, bootstrap CIs."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .constraints import filled_region
from .errors import ShapeMismatchError, ValidationError
from .grid import ClassSet, check_mask

BOOTSTRAP_RESAMPLES = 1000
BOOTSTRAP_LEVEL = 0.95


def _pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    a, b = check_mask(pred), check_mask(gt)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"prediction {a.shape} and ground truth {b.shape} differ in shape")
    return a, b


def dice_score(pred, gt, c: int) -> float:
    """Dice of class ``c``; 1.0 when both masks lack the class, 0.0 when only one does."""
    a, b = _pair(pred, gt)
    a, b = a == c, b == c
    na, nb = int(a.sum()), int(b.sum())
    if na + nb == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / (na + nb)


def boundary(region) -> np.ndarray:
    """Region pixels with a 4-neighbour outside the region or lying on the image border."""
    r = np.asarray(region, dtype=bool)
    padded = np.pad(r, 1, constant_values=False)
    inner = (padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:])
    return r & ~inner


def _directed(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    # exact Euclidean distance from every src pixel to the nearest dst pixel
    dist = ndimage.distance_transform_edt(~dst)
    return dist[src]


def hd95(pred, gt, c: int) -> float:
    """95th percentile of the pooled two-way boundary distances, in pixels.

    Empty in both masks gives 0; empty in exactly one gives the image
    diagonal. Percentile uses linear interpolation between order statistics.
    """
    a, b = _pair(pred, gt)
    a, b = a == c, b == c
    ea, eb = not a.any(), not b.any()
    if ea and eb:
        return 0.0
    if ea or eb:
        return float(np.hypot(*a.shape))
    ba, bb = boundary(a), boundary(b)
    d = np.concatenate([_directed(ba, bb), _directed(bb, ba)])
    return float(np.percentile(d, 95))


def violation_count(mask, classes: ClassSet | None = None) -> tuple[int, int, int]:
    """Hard-label violation counts ``(exclusion, sclera/iris, iris/pupil)``.

    ``mask`` is an ``(H, W)`` label mask or a ``(C, H, W)`` multi-label
    stack. Exclusion counts pixels carrying both sclera and pupil, which
    can only happen for stacks. An enclosure violation is an inner-class
    pixel lying outside the filled region of its outer class.
    """
    classes = classes or ClassSet()
    arr = np.asarray(mask)
    if arr.ndim == 2:
        m = check_mask(arr, classes)
        s, i, q = (m == classes.sclera), (m == classes.iris), (m == classes.pupil)
    elif arr.ndim == 3:
        if arr.shape[0] != len(classes):
            raise ShapeMismatchError(f"stack has {arr.shape[0]} channels for {len(classes)} classes")
        arr = arr.astype(bool)
        s, i, q = arr[classes.sclera], arr[classes.iris], arr[classes.pupil]
    else:
        raise ShapeMismatchError(f"expected (H, W) or (C, H, W), got shape {arr.shape}")
    excl = int((s & q).sum())
    si = int((i & ~filled_region(s)).sum())
    ip = int((q & ~filled_region(i)).sum())
    return excl, si, ip


def bootstrap_ci(values: Sequence[float], resamples: int = BOOTSTRAP_RESAMPLES,
                 level: float = BOOTSTRAP_LEVEL, seed: int = 0) -> tuple[float, float, float]:
    """Percentile bootstrap interval for the mean.

    Returns ``(mean, lower, upper)``; resampling is over the given values
    (images), with a generator seeded by ``seed``.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValidationError("bootstrap needs at least 2 values")
    if resamples < 100:
        raise ValidationError("bootstrap needs at least 100 resamples")
    if not 0 < level < 1:
        raise ValidationError("confidence level must be in (0, 1)")
    if not np.all(np.isfinite(x)):
        raise ValidationError("bootstrap values must be finite")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, x.size, size=(resamples, x.size))
    means = x[idx].mean(axis=1)
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [tail, 1.0 - tail])
    return float(x.mean()), float(lo), float(hi)


@dataclass
class ImageMetrics:
    name: str
    dice: dict[str, float]
    hd95: dict[str, float]
    violations: tuple[int, int, int]

    def mean_dice(self, skip: Sequence[str] = ("background",)) -> float:
        return float(np.mean([v for k, v in self.dice.items() if k not in skip]))

    def mean_hd95(self, skip: Sequence[str] = ("background",)) -> float:
        return float(np.mean([v for k, v in self.hd95.items() if k not in skip]))


def evaluate_pair(name: str, pred, gt, classes: ClassSet | None = None) -> ImageMetrics:
    classes = classes or ClassSet()
    a = check_mask(pred, classes)
    b = check_mask(gt, classes)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{name}: prediction {a.shape} and ground truth {b.shape} differ in shape")
    return ImageMetrics(
        name=name,
        dice={n: dice_score(a, b, c) for c, n in enumerate(classes.names)},
        hd95={n: hd95(a, b, c) for c, n in enumerate(classes.names)},
        violations=violation_count(a, classes),
    )


VIOLATION_KEYS = ("violations_exclusion", "violations_sclera_iris", "violations_iris_pupil")


@dataclass
class MetricReport:
    """Per-image metrics plus bootstrap aggregates.

    Mean Dice / HD95 skip the classes listed in ``skip`` (background by
    default) and are macro-averaged: per image first, then over images.
    """

    images: list[ImageMetrics]
    classes: ClassSet = field(default_factory=ClassSet)
    resamples: int = BOOTSTRAP_RESAMPLES
    level: float = BOOTSTRAP_LEVEL
    seed: int = 0
    skip: tuple[str, ...] = ("background",)

    def columns(self) -> list[str]:
        names = self.classes.names
        return ([f"dice_{n}" for n in names] + ["dice_mean"]
                + [f"hd95_{n}" for n in names] + ["hd95_mean"] + list(VIOLATION_KEYS))

    def row(self, im: ImageMetrics) -> dict[str, float]:
        out = {f"dice_{n}": im.dice[n] for n in self.classes.names}
        out["dice_mean"] = im.mean_dice(self.skip)
        out.update({f"hd95_{n}": im.hd95[n] for n in self.classes.names})
        out["hd95_mean"] = im.mean_hd95(self.skip)
        out.update(dict(zip(VIOLATION_KEYS, (float(v) for v in im.violations))))
        return out

    def aggregate(self) -> dict[str, tuple[float, float, float]]:
        """``column -> (mean, lower, upper)``; a single image gives a zero-width interval."""
        rows = [self.row(im) for im in self.images]
        agg = {}
        for col in self.columns():
            vals = [r[col] for r in rows]
            if len(vals) >= 2:
                agg[col] = bootstrap_ci(vals, self.resamples, self.level, self.seed)
            else:
                agg[col] = (vals[0], vals[0], vals[0])
        return agg

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = self.columns()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["image"] + cols)
        for im in self.images:
            r = self.row(im)
            w.writerow([im.name] + [_fmt(r[c]) for c in cols])
        agg = self.aggregate()
        for label, j in (("mean", 0), ("ci_lower", 1), ("ci_upper", 2)):
            w.writerow([label] + [_fmt(agg[c][j]) for c in cols])
        return buf.getvalue()

    def to_dict(self) -> dict:
        agg = self.aggregate()
        names = self.classes.names

        def ci(col):
            m, lo, hi = agg[col]
            return {"mean": m, "ci_lower": lo, "ci_upper": hi}

        return {
            "classes": list(names),
            "bootstrap": {"resamples": self.resamples, "level": self.level, "seed": self.seed},
            "images": [
                {"image": im.name, "dice": im.dice, "hd95": im.hd95,
                 "dice_mean": im.mean_dice(self.skip), "hd95_mean": im.mean_hd95(self.skip),
                 "violations": dict(zip(("exclusion", "sclera_iris", "iris_pupil"), im.violations))}
                for im in self.images
            ],
            "aggregate": {
                "dice": {n: ci(f"dice_{n}") for n in names} | {"mean": ci("dice_mean")},
                "hd95": {n: ci(f"hd95_{n}") for n in names} | {"mean": ci("hd95_mean")},
                "violations": {k.removeprefix("violations_"): ci(k) for k in VIOLATION_KEYS},
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def _fmt(v: float) -> str:
    return repr(float(v))
