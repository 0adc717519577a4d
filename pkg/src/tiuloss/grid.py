"""Grid types and conversions.

Arrays follow two layouts throughout the package:

* label masks are ``(H, W)`` integer arrays of class indices;
* logit and probability maps are ``(C, H, W)`` float arrays, channel first.

Probability maps are produced by a channel-wise softmax, so every pixel
carries a distribution over the classes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ShapeMismatchError, UnknownClassError, ValidationError

PROB_ATOL = 1e-6

BACKGROUND, SCLERA, IRIS, PUPIL, CARUNCLE = "background", "sclera", "iris", "pupil", "caruncle"

_DEFAULT_COLORS = {
    BACKGROUND: (0, 0, 0),
    SCLERA: (255, 255, 255),
    IRIS: (40, 120, 200),
    PUPIL: (230, 40, 40),
    CARUNCLE: (240, 170, 60),
}


@dataclass(frozen=True)
class ClassSet:
    """Ordered class list; position in ``names`` is the label index.

    Index 0 must be background. Sclera, iris and pupil are mandatory
    because the anatomical constraints refer to them.
    """

    names: tuple[str, ...] = (BACKGROUND, SCLERA, IRIS, PUPIL)
    colors: tuple[tuple[int, int, int], ...] = field(default=())

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate class names in {names}")
        if not names or names[0] != BACKGROUND:
            raise ValidationError("class 0 must be 'background'")
        for required in (SCLERA, IRIS, PUPIL):
            if required not in names:
                raise ValidationError(f"class set is missing required class {required!r}")
        if len(names) > 256:
            raise ValidationError("at most 256 classes fit an 8-bit mask")
        colors = tuple(tuple(int(v) for v in c) for c in self.colors)
        if not colors:
            colors = tuple(_DEFAULT_COLORS[n] if n in _DEFAULT_COLORS else _fallback_color(i)
                           for i, n in enumerate(names))
        if len(colors) != len(names):
            raise ValidationError(f"{len(colors)} colors given for {len(names)} classes")
        for c in colors:
            if len(c) != 3 or not all(0 <= v <= 255 for v in c):
                raise ValidationError(f"invalid RGB color {c}")
        object.__setattr__(self, "colors", colors)

    @classmethod
    def eye(cls, caruncle: bool = False) -> ClassSet:
        names = (BACKGROUND, SCLERA, IRIS, PUPIL) + ((CARUNCLE,) if caruncle else ())
        return cls(names)

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError(f"unknown class name {name!r}") from None

    @property
    def sclera(self) -> int:
        return self.index(SCLERA)

    @property
    def iris(self) -> int:
        return self.index(IRIS)

    @property
    def pupil(self) -> int:
        return self.index(PUPIL)

    @property
    def caruncle(self) -> int | None:
        return self.names.index(CARUNCLE) if CARUNCLE in self.names else None


def _fallback_color(i: int) -> tuple[int, int, int]:
    rng = np.random.default_rng(i)
    return tuple(int(v) for v in rng.integers(0, 256, size=3))


def _num_classes(classes: ClassSet | int) -> int:
    n = len(classes) if isinstance(classes, ClassSet) else int(classes)
    if n < 1:
        raise ValidationError("need at least one class")
    return n


def check_logits(logits) -> np.ndarray:
    """Return ``logits`` as a float64 ``(C, H, W)`` array, rejecting non-finite entries."""
    x = np.asarray(logits, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeMismatchError(f"expected a (C, H, W) grid, got shape {x.shape}")
    bad = ~np.isfinite(x)
    if bad.any():
        c, y, xx = np.argwhere(bad)[0]
        raise NumericalError(f"non-finite value {x[c, y, xx]} at channel {c}, pixel ({y}, {xx})")
    return x


def check_probmap(p, atol: float = PROB_ATOL) -> np.ndarray:
    """Validate range and per-pixel normalisation of a probability map."""
    p = check_logits(p)
    if p.min() < -atol or p.max() > 1 + atol:
        raise ValidationError(f"probabilities outside [0, 1]: min {p.min()}, max {p.max()}")
    err = np.abs(p.sum(axis=0) - 1.0)
    if err.max() > atol:
        y, x = np.unravel_index(np.argmax(err), err.shape)
        raise ValidationError(f"channel sum {p[:, y, x].sum()} != 1 at pixel ({y}, {x})")
    return p


def check_mask(mask, classes: ClassSet | int | None = None) -> np.ndarray:
    """Validate a label mask; returns it as an ``int64`` array."""
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ShapeMismatchError(f"expected an (H, W) mask, got shape {m.shape}")
    if m.size and not np.issubdtype(m.dtype, np.integer):
        if not np.all(np.mod(m, 1) == 0):
            raise ValidationError("mask holds non-integer labels")
    m = m.astype(np.int64)
    if classes is not None and m.size:
        n = _num_classes(classes)
        bad = (m < 0) | (m >= n)
        if bad.any():
            y, x = np.argwhere(bad)[0]
            raise UnknownClassError(f"unknown class {m[y, x]} at pixel ({y}, {x}); {n} classes configured")
    return m


def normalize(logits) -> np.ndarray:
    """Channel-wise softmax of a ``(C, H, W)`` logit grid."""
    x = check_logits(logits)
    z = np.exp(x - x.max(axis=0, keepdims=True))
    return z / z.sum(axis=0, keepdims=True)


def softmax_backward(p: np.ndarray, grad_p: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. softmax outputs back to the logits.

    ``dL/dx_c = p_c * (dL/dp_c - sum_k p_k dL/dp_k)`` per pixel.
    """
    return p * (grad_p - (p * grad_p).sum(axis=0, keepdims=True))


def one_hot(mask, classes: ClassSet | int) -> np.ndarray:
    """Encode an ``(H, W)`` label mask as a ``(C, H, W)`` float map."""
    n = _num_classes(classes)
    m = check_mask(mask, n)
    return (np.arange(n)[:, None, None] == m[None]).astype(np.float64)


def argmax_mask(p) -> np.ndarray:
    """Hard labels from a probability map; ties resolve to the lowest index."""
    p = np.asarray(p)
    if p.ndim != 3:
        raise ShapeMismatchError(f"expected a (C, H, W) grid, got shape {p.shape}")
    return np.argmax(p, axis=0).astype(np.int64)


def same_shape(*arrays: np.ndarray, what: str = "inputs") -> None:
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise ShapeMismatchError(f"{what} differ in shape: {sorted(shapes)}")
