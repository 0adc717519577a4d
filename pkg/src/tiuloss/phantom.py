"""Synthetic eye phantoms with known geometry.

A phantom is a layered rasterisation: background, sclera ellipse (the eye
opening), optional caruncle disk, iris disk, pupil disk; later layers
overwrite earlier ones. A pixel belongs to a shape when its centre
``(row + 0.5, col + 0.5)`` satisfies the shape's strict inequality.

Corruption operators edit the geometry (or the labels, for label noise)
and report the change in hard-label violation counts that the geometry
implies. That change is derived from lattice-point sets of the shapes,
not from the rasterised mask, so it can serve as a test oracle for
:func:`tiuloss.metrics.violation_count` and the constraint maps.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .grid import ClassSet

# minimum sclera band (pixels) kept between the ellipse edge and anything drawn inside it
RIM = 2.0
_THETA = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)


@dataclass(frozen=True)
class PhantomSpec:
    """Geometry of one eye phantom, in pixel units (row, col order)."""

    height: int = 64
    width: int = 64
    sclera_center: tuple[float, float] = (32.0, 32.0)
    sclera_axes: tuple[float, float] = (15.0, 22.0)
    iris_center: tuple[float, float] = (32.0, 32.0)
    iris_radius: float = 7.0
    pupil_fraction: float = 0.45
    caruncle: bool = False
    seed: int | None = None
    # set by corruption operators
    pupil_offset: tuple[float, float] = (0.0, 0.0)
    pupil_spill: float = 0.0

    def __post_init__(self):
        for name in ("sclera_center", "sclera_axes", "iris_center", "pupil_offset"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    @property
    def pupil_radius(self) -> float:
        return self.pupil_fraction * self.iris_radius

    @property
    def pupil_center(self) -> tuple[float, float]:
        return (self.iris_center[0] + self.pupil_offset[0], self.iris_center[1] + self.pupil_offset[1])

    @property
    def caruncle_radius(self) -> float:
        return 0.15 * self.sclera_axes[0]

    @property
    def caruncle_center(self) -> tuple[float, float]:
        # tangent to the ellipse at its left horizontal extreme
        cy, cx = self.sclera_center
        return (cy, cx - self.sclera_axes[1] - self.caruncle_radius)

    @property
    def classes(self) -> ClassSet:
        return ClassSet.eye(caruncle=self.caruncle)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def random(cls, seed: int, height: int = 64, width: int = 64, caruncle: bool = False,
               min_rim: float | None = None) -> PhantomSpec:
        """Draw a valid spec from ``seed``.

        ``min_rim`` is the sclera band kept around the iris (default
        ``RIM + 6`` pixels at 64 px, scaled with image size), which leaves
        room for pupil dilations of up to 5 pixels.
        """
        rng = np.random.default_rng(seed)
        s = min(height, width) / 64.0
        if min_rim is None:
            min_rim = (RIM + 6.0) * s
        for _ in range(1000):
            ay = rng.uniform(13.0, 16.0) * s
            ax = rng.uniform(19.0, 23.0) * s
            cy = height / 2 + rng.uniform(-1.5, 1.5) * s
            cx = width / 2 + rng.uniform(-1.5, 1.5) * s
            ri = rng.uniform(0.4, 0.55) * ay
            oy = rng.uniform(-0.1, 0.1) * (ay - ri)
            ox = rng.uniform(-0.3, 0.3) * (ax - ri)
            spec = cls(height, width, (cy, cx), (ay, ax), (cy + oy, cx + ox), ri,
                       pupil_fraction=rng.uniform(0.35, 0.6), caruncle=caruncle, seed=seed)
            if ri >= 3.0 * s and _ellipse_clearance(spec, spec.iris_center) - ri >= min_rim:
                try:
                    validate(spec)
                except ValidationError:
                    continue
                return spec
        raise ValidationError(f"could not draw a valid phantom for seed {seed}")


@dataclass(frozen=True)
class DilatePupil:
    """Pupil spills ``radius`` pixels past the iris rim, as a ring around the iris."""

    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValidationError("dilation radius must be >= 0")


@dataclass(frozen=True)
class TranslatePupil:
    dy: float
    dx: float


@dataclass(frozen=True)
class ScleraPupilOverlap:
    """Slide the pupil sideways until at least ``area`` pupil pixels sit on sclera."""

    area: int

    def __post_init__(self):
        if self.area < 0:
            raise ValidationError("overlap area must be >= 0")


@dataclass(frozen=True)
class LabelNoise:
    """Relabel exactly ``round(rate * H * W)`` pixels to a different random class."""

    rate: float

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValidationError("noise rate must be in [0, 1]")


CorruptionOp = DilatePupil | TranslatePupil | ScleraPupilOverlap | LabelNoise


@dataclass(frozen=True)
class Phantom:
    spec: PhantomSpec
    mask: np.ndarray = field(repr=False)
    noisy: bool = False

    @property
    def classes(self) -> ClassSet:
        return self.spec.classes


def _centers(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    return np.arange(h)[:, None] + 0.5, np.arange(w)[None, :] + 0.5


def _disk(spec: PhantomSpec, center, radius) -> np.ndarray:
    y, x = _centers(spec.height, spec.width)
    return (y - center[0]) ** 2 + (x - center[1]) ** 2 < radius ** 2


def _ellipse(spec: PhantomSpec) -> np.ndarray:
    y, x = _centers(spec.height, spec.width)
    (cy, cx), (ay, ax) = spec.sclera_center, spec.sclera_axes
    return ((y - cy) / ay) ** 2 + ((x - cx) / ax) ** 2 < 1.0


def _ellipse_clearance(spec: PhantomSpec, point) -> float:
    """Distance from ``point`` to the nearest point of the ellipse outline."""
    (cy, cx), (ay, ax) = spec.sclera_center, spec.sclera_axes
    by, bx = cy + ay * np.sin(_THETA), cx + ax * np.cos(_THETA)
    return float(np.min(np.hypot(by - point[0], bx - point[1])))


def _inside_ellipse(spec: PhantomSpec, point) -> bool:
    (cy, cx), (ay, ax) = spec.sclera_center, spec.sclera_axes
    return ((point[0] - cy) / ay) ** 2 + ((point[1] - cx) / ax) ** 2 < 1.0


def _disk_clearance(spec: PhantomSpec, center, radius) -> float:
    if not _inside_ellipse(spec, center):
        return -np.inf
    return _ellipse_clearance(spec, center) - radius


def validate(spec: PhantomSpec) -> None:
    """Raise :class:`ValidationError` naming the first broken geometric condition."""
    h, w = spec.height, spec.width
    if h < 1 or w < 1:
        raise ValidationError(f"image size must be positive, got {h}x{w}")
    (cy, cx), (ay, ax) = spec.sclera_center, spec.sclera_axes
    if ay <= 0 or ax <= 0:
        raise ValidationError("sclera semi-axes must be positive")
    if not (cy - ay >= 1 and cy + ay <= h - 1 and cx - ax >= 1 and cx + ax <= w - 1):
        raise ValidationError("sclera ellipse must lie inside the image with a 1-pixel border")
    if spec.iris_radius <= 0:
        raise ValidationError("iris radius must be positive")
    if not 0 < spec.pupil_fraction < 1:
        raise ValidationError("pupil radius must be smaller than the iris radius (0 < fraction < 1)")
    if _disk_clearance(spec, spec.iris_center, spec.iris_radius) < RIM:
        raise ValidationError(f"iris circle must lie inside the sclera ellipse with a {RIM:g}-pixel rim")
    if spec.pupil_spill < 0:
        raise ValidationError("pupil spill must be >= 0")
    if spec.pupil_spill > 0 and _disk_clearance(
            spec, spec.iris_center, spec.iris_radius + spec.pupil_spill) < RIM:
        raise ValidationError("dilated pupil leaves the sclera ellipse")
    if _disk_clearance(spec, spec.pupil_center, spec.pupil_radius) < RIM:
        raise ValidationError("pupil leaves the sclera ellipse")
    if spec.caruncle:
        (ky, kx), kr = spec.caruncle_center, spec.caruncle_radius
        if not (ky - kr >= 0 and ky + kr <= h and kx - kr >= 0 and kx + kr <= w):
            raise ValidationError("caruncle disk falls outside the image")


def rasterize(spec: PhantomSpec) -> np.ndarray:
    validate(spec)
    cls = spec.classes
    mask = np.zeros((spec.height, spec.width), dtype=np.int64)
    mask[_ellipse(spec)] = cls.sclera
    if spec.caruncle:
        mask[_disk(spec, spec.caruncle_center, spec.caruncle_radius)] = cls.caruncle
    if spec.pupil_spill > 0:
        mask[_disk(spec, spec.iris_center, spec.iris_radius + spec.pupil_spill)] = cls.pupil
    mask[_disk(spec, spec.iris_center, spec.iris_radius)] = cls.iris
    mask[_disk(spec, spec.pupil_center, spec.pupil_radius)] = cls.pupil
    return mask


def generate(spec: PhantomSpec | None = None) -> Phantom:
    """Rasterise ``spec`` into a label mask (deterministic)."""
    spec = spec or PhantomSpec()
    return Phantom(spec, rasterize(spec))


def expected_violations(spec: PhantomSpec) -> tuple[int, int, int]:
    """Hard-label violation counts implied by the geometry alone.

    Uses the shapes' lattice-point sets: the spill ring is pupil-labelled
    and lies outside the iris, so all of it escapes; the pupil disk escapes
    as a whole once any of its pixels lies on, or 4-touches, a pixel outside
    the iris disk, because the iris rim is then breached. The sclera band
    is kept intact by :func:`validate`, so iris pixels never escape.
    """
    iris = _disk(spec, spec.iris_center, spec.iris_radius)
    pupil = _disk(spec, spec.pupil_center, spec.pupil_radius)
    ring = np.zeros_like(iris)
    if spec.pupil_spill > 0:
        ring = _disk(spec, spec.iris_center, spec.iris_radius + spec.pupil_spill) & ~iris
    outside = np.pad(~iris, 1, constant_values=True)
    touches = (outside[1:-1, 1:-1] | outside[:-2, 1:-1] | outside[2:, 1:-1]
               | outside[1:-1, :-2] | outside[1:-1, 2:])
    if (pupil & touches).any():
        ip = int((ring | pupil).sum())
    else:
        ip = int((ring & ~pupil).sum())
    return 0, 0, ip


def _delta(before: PhantomSpec, after: PhantomSpec) -> tuple[int, int, int]:
    a, b = expected_violations(before), expected_violations(after)
    return tuple(int(y - x) for x, y in zip(a, b))


def corrupt(phantom: Phantom, op: CorruptionOp, seed: int = 0):
    """Apply ``op`` and return ``(new_phantom, expected_delta)``.

    ``expected_delta`` is the change in ``(exclusion, sclera/iris,
    iris/pupil)`` violation counts predicted from geometry, or ``None``
    for :class:`LabelNoise`, whose effect is random rather than geometric.
    """
    spec = phantom.spec
    if isinstance(op, LabelNoise):
        return _label_noise(phantom, op.rate, seed), None
    if phantom.noisy:
        raise ValidationError("geometric corruption needs a noise-free phantom")

    if isinstance(op, DilatePupil):
        new = replace(spec, pupil_spill=spec.pupil_spill + float(op.radius))
    elif isinstance(op, TranslatePupil):
        oy, ox = spec.pupil_offset
        new = replace(spec, pupil_offset=(oy + float(op.dy), ox + float(op.dx)))
    elif isinstance(op, ScleraPupilOverlap):
        new = _slide_pupil(spec, int(op.area))
    else:
        raise ValidationError(f"unknown corruption {op!r}")
    return Phantom(new, rasterize(new)), _delta(spec, new)


def _slide_pupil(spec: PhantomSpec, area: int) -> PhantomSpec:
    base = rasterize(spec)
    sclera = base == spec.classes.sclera
    oy, ox = spec.pupil_offset
    step = 0
    while True:
        cand = replace(spec, pupil_offset=(oy, ox + step))
        if _disk_clearance(cand, cand.pupil_center, cand.pupil_radius) < RIM:
            raise ValidationError(f"cannot place {area} pupil pixels on sclera inside the eye opening")
        covered = _disk(cand, cand.pupil_center, cand.pupil_radius) & sclera
        if covered.sum() >= area:
            return cand
        step += 1


def _label_noise(phantom: Phantom, rate: float, seed: int) -> Phantom:
    m = phantom.mask.copy()
    n_cls = len(phantom.classes)
    n = int(round(rate * m.size))
    rng = np.random.default_rng(seed)
    idx = rng.choice(m.size, size=n, replace=False)
    flat = m.reshape(-1)
    # shift by 1..C-1 so the new label always differs from the old one
    flat[idx] = (flat[idx] + rng.integers(1, n_cls, size=n)) % n_cls
    return Phantom(phantom.spec, m, noisy=True)
