"""On-disk formats: label masks, probability/logit maps and heatmaps.

* Masks are 8-bit single-channel PNGs (palette mode) whose pixel value is
  the class index.
* Probability and logit maps use a flat binary layout: a 16-byte header of
  four little-endian uint32 (magic, C, H, W) followed by C*H*W float32
  values, channel-major then row-major. The magic tells the two apart.
* Heatmaps are 8-bit grayscale PNGs with a ``.txt`` sidecar holding the
  exact scaling bounds.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (EmptyImageError, NumericalError, UnknownClassError,
                     UnreadableFileError, ValidationError)
from .grid import ClassSet, check_logits, check_mask, check_probmap

PROB_MAGIC = int.from_bytes(b"PMAP", "little")
LOGIT_MAGIC = int.from_bytes(b"LGIT", "little")
_HEADER = struct.Struct("<4I")
MAP_SUFFIX = ".pmap"


def write_mask(mask, path, classes: ClassSet | None = None) -> Path:
    classes = classes or ClassSet.eye(caruncle=True)
    m = check_mask(mask, classes)
    if m.size == 0:
        raise EmptyImageError("cannot write a mask with a zero dimension")
    img = Image.fromarray(m.astype(np.uint8))
    palette = [v for c in classes.colors for v in c]
    img.putpalette(palette + [0] * (768 - len(palette)))
    path = Path(path)
    img.save(path, format="PNG")
    return path


def read_mask(path, classes: ClassSet | None = None) -> np.ndarray:
    """Read a class-index PNG; validates every value against ``classes``."""
    classes = classes or ClassSet.eye(caruncle=True)
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            mode, size = img.mode, img.size
            arr = np.array(img)
    except (OSError, UnidentifiedImageError, SyntaxError) as exc:
        raise UnreadableFileError(f"{path}: cannot read mask ({exc})") from None
    if size[0] == 0 or size[1] == 0:
        raise EmptyImageError(f"{path}: image has a zero dimension {size}")
    if mode not in ("L", "P"):
        raise ValidationError(f"{path}: expected an 8-bit single-channel image, got mode {mode}")
    bad = arr >= len(classes)
    if bad.any():
        y, x = np.argwhere(bad)[0]
        raise UnknownClassError(
            f"{path}: unknown class {int(arr[y, x])} at pixel ({y}, {x}); {len(classes)} classes configured")
    return arr.astype(np.int64)


def write_map(arr, path, kind: str = "prob") -> Path:
    """Write a ``(C, H, W)`` probability (``kind="prob"``) or logit map."""
    if kind not in ("prob", "logit"):
        raise ValidationError(f"unknown map kind {kind!r}")
    a = check_probmap(arr) if kind == "prob" else check_logits(arr)
    if 0 in a.shape:
        raise EmptyImageError("cannot write a map with a zero dimension")
    magic = PROB_MAGIC if kind == "prob" else LOGIT_MAGIC
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, *a.shape))
        fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())
    return path


def read_map(path) -> tuple[np.ndarray, str]:
    """Return ``(array, kind)`` with ``kind`` in {"prob", "logit"}."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise UnreadableFileError(f"{path}: {exc}") from None
    if len(raw) < _HEADER.size:
        raise UnreadableFileError(f"{path}: truncated header")
    magic, c, h, w = _HEADER.unpack_from(raw)
    if magic not in (PROB_MAGIC, LOGIT_MAGIC):
        raise UnreadableFileError(f"{path}: bad magic {magic:#x}")
    if 0 in (c, h, w):
        raise EmptyImageError(f"{path}: zero dimension in header ({c}, {h}, {w})")
    if len(raw) != _HEADER.size + 4 * c * h * w:
        raise UnreadableFileError(f"{path}: payload size does not match header ({c}, {h}, {w})")
    arr = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(c, h, w).astype(np.float64)
    if magic == PROB_MAGIC:
        return check_probmap(arr), "prob"
    return check_logits(arr), "logit"


def probs_to_logits(p: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """Log-probabilities; softmax of the result gives ``p`` back (up to the floor)."""
    return np.log(np.clip(p, floor, None))


def export_heatmap(grid, path) -> Path:
    """Min-max scale a non-negative grid to 8-bit grayscale.

    All zeros map to black; any other constant grid maps to 128. The
    bounds go to ``<path>.txt`` next to the image.
    """
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2:
        raise ValidationError(f"heatmap needs a 2-D grid, got shape {g.shape}")
    if g.size == 0:
        raise EmptyImageError("cannot export an empty heatmap")
    if not np.all(np.isfinite(g)):
        raise NumericalError("heatmap grid contains non-finite values")
    lo, hi = float(g.min()), float(g.max())
    if hi > lo:
        img = np.rint((g - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        img = np.full(g.shape, 0 if hi == 0 else 128, dtype=np.uint8)
    path = Path(path)
    Image.fromarray(img).save(path, format="PNG")
    path.with_suffix(path.suffix + ".txt").write_text(f"min {lo!r}\nmax {hi!r}\n")
    return path
