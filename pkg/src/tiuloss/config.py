"""Run configuration: one YAML document, parsed strictly.

Every section is optional; unknown keys anywhere are an error. Example::

    seed: 0
    classes:
      names: [background, sclera, iris, pupil]
    loss:
      alpha1: 1.0
      alpha2: 1.0
      beta: 1.0
      schedule: [2, 4, 8, 16]
      pixel_loss: ce          # or dice
    bootstrap:
      resamples: 1000
      level: 0.95
    phantom:
      count: 10
      height: 64
      width: 64
      corruption: {label_noise: 0.1}
    optimize:
      step: 1.0
      max_iter: 2000
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .composite import LossConfig, LossWeights
from .errors import ConfigError, TIUError
from .grid import ClassSet
from .optimize import OptimConfig
from .phantom import (DilatePupil, LabelNoise, PhantomSpec, ScleraPupilOverlap,
                      TranslatePupil)
from .pixel_loss import PixelLossKind


@dataclass(frozen=True)
class BootstrapConfig:
    resamples: int = 1000
    level: float = 0.95


@dataclass(frozen=True)
class PhantomConfig:
    count: int = 10
    height: int = 64
    width: int = 64
    caruncle: bool = False
    random: bool = True
    geometry: PhantomSpec | None = None
    corruption: Any = None

    def spec(self, seed: int) -> PhantomSpec:
        if self.geometry is not None:
            return replace(self.geometry, seed=seed)
        if self.random:
            return PhantomSpec.random(seed, self.height, self.width, caruncle=self.caruncle)
        s = min(self.height, self.width) / 64.0
        h2, w2 = self.height / 2, self.width / 2
        return PhantomSpec(self.height, self.width, (h2, w2), (15 * s, 22 * s), (h2, w2), 7 * s,
                           caruncle=self.caruncle, seed=seed)


@dataclass(frozen=True)
class GradcheckConfig:
    instances: int = 5
    height: int = 8
    width: int = 8
    step: float = 1e-5
    threshold: float = 1e-3


@dataclass(frozen=True)
class PathsConfig:
    pred: str | None = None
    gt: str | None = None
    out: str | None = None


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    classes: ClassSet = field(default_factory=ClassSet)
    loss: LossConfig = field(default_factory=LossConfig)
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    phantom: PhantomConfig = field(default_factory=PhantomConfig)
    optimize: OptimConfig = field(default_factory=OptimConfig)
    gradcheck: GradcheckConfig = field(default_factory=GradcheckConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def __post_init__(self):
        if self.loss.classes is None:
            object.__setattr__(self, "loss", replace(self.loss, classes=self.classes))
        if self.optimize.loss.classes is None:
            object.__setattr__(self, "optimize", replace(self.optimize, loss=self.loss))

    def with_seed(self, seed: int) -> RunConfig:
        return replace(self, seed=seed, optimize=replace(self.optimize, seed=seed))


_LOSS_KEYS = {"alpha1", "alpha2", "beta", "schedule", "pixel_loss", "dice_eps",
              "dice_include_background", "topo_reduction", "iu_reduction"}
_OPT_KEYS = {"step", "max_iter", "tol", "log_every", "init_scale"}
_CORRUPTIONS = {
    "dilate_pupil": lambda v: DilatePupil(float(v)),
    "translate_pupil": lambda v: TranslatePupil(*(float(x) for x in v)),
    "sclera_pupil_overlap": lambda v: ScleraPupilOverlap(int(v)),
    "label_noise": lambda v: LabelNoise(float(v)),
}


def _section(doc: dict, name: str, allowed: set[str]) -> dict:
    sec = doc.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(sorted(map(str, unknown)))}")
    return sec


def _typed(value, typ, where: str):
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    raise AssertionError(typ)


def _simple(cls, sec: dict, name: str):
    kwargs = {}
    for f in fields(cls):
        if f.name in sec:
            typ = {"int": int, "float": float, "bool": bool}.get(str(f.type), str)
            kwargs[f.name] = _typed(sec[f.name], typ, f"{name}.{f.name}")
    return kwargs


def parse_config(doc: dict | None) -> RunConfig:
    """Build a :class:`RunConfig` from a parsed YAML mapping."""
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping at the top level")
    top = {"seed", "classes", "loss", "bootstrap", "phantom", "optimize", "gradcheck", "paths"}
    unknown = set(doc) - top
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(map(str, unknown)))}")
    try:
        return _parse(doc)
    except ConfigError:
        raise
    except (TIUError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _parse(doc: dict) -> RunConfig:
    seed = _typed(doc.get("seed", 0), int, "seed")

    sec = _section(doc, "classes", {"names", "colors"})
    classes = ClassSet(tuple(sec.get("names", ClassSet().names)), tuple(map(tuple, sec.get("colors", ()))))

    sec = _section(doc, "loss", _LOSS_KEYS)
    weights = LossWeights(*(_typed(sec.get(k, 1.0), float, f"loss.{k}") for k in ("alpha1", "alpha2", "beta")))
    loss = LossConfig(
        weights=weights,
        schedule=tuple(sec.get("schedule", LossConfig().schedule)),
        pixel_loss=PixelLossKind(_typed(sec.get("pixel_loss", "ce"), str, "loss.pixel_loss")),
        dice_eps=_typed(sec.get("dice_eps", LossConfig().dice_eps), float, "loss.dice_eps"),
        dice_include_background=_typed(sec.get("dice_include_background", True), bool,
                                       "loss.dice_include_background"),
        topo_reduction=_typed(sec.get("topo_reduction", "mean"), str, "loss.topo_reduction"),
        iu_reduction=_typed(sec.get("iu_reduction", "mean"), str, "loss.iu_reduction"),
        classes=classes,
    )

    sec = _section(doc, "bootstrap", {"resamples", "level"})
    bootstrap = BootstrapConfig(**_simple(BootstrapConfig, sec, "bootstrap"))

    sec = _section(doc, "phantom", {"count", "height", "width", "caruncle", "random", "geometry", "corruption"})
    kw = _simple(PhantomConfig, {k: v for k, v in sec.items() if k not in ("geometry", "corruption")}, "phantom")
    if sec.get("geometry") is not None:
        kw["geometry"] = _geometry(sec["geometry"], kw)
    if sec.get("corruption") is not None:
        kw["corruption"] = _corruption(sec["corruption"])
    phantom = PhantomConfig(**kw)
    if phantom.count < 1:
        raise ConfigError("phantom.count must be >= 1")
    if phantom.caruncle and "caruncle" not in classes.names:
        raise ConfigError("phantom.caruncle needs a 'caruncle' entry in classes.names")

    sec = _section(doc, "optimize", _OPT_KEYS)
    optimize = OptimConfig(loss=loss, seed=seed, **_simple(OptimConfig, sec, "optimize"))

    sec = _section(doc, "gradcheck", {"instances", "height", "width", "step", "threshold"})
    gradcheck = GradcheckConfig(**_simple(GradcheckConfig, sec, "gradcheck"))

    sec = _section(doc, "paths", {"pred", "gt", "out"})
    paths = PathsConfig(**_simple(PathsConfig, sec, "paths"))

    return RunConfig(seed, classes, loss, bootstrap, phantom, optimize, gradcheck, paths)


def _geometry(sec, kw) -> PhantomSpec:
    if not isinstance(sec, dict):
        raise ConfigError("phantom.geometry must be a mapping")
    allowed = {"sclera_center", "sclera_axes", "iris_center", "iris_radius", "pupil_fraction"}
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in 'phantom.geometry': {', '.join(sorted(unknown))}")
    base = PhantomSpec()
    return PhantomSpec(
        height=kw.get("height", base.height), width=kw.get("width", base.width),
        sclera_center=tuple(sec.get("sclera_center", base.sclera_center)),
        sclera_axes=tuple(sec.get("sclera_axes", base.sclera_axes)),
        iris_center=tuple(sec.get("iris_center", base.iris_center)),
        iris_radius=float(sec.get("iris_radius", base.iris_radius)),
        pupil_fraction=float(sec.get("pupil_fraction", base.pupil_fraction)),
        caruncle=kw.get("caruncle", False),
    )


def _corruption(sec):
    if not isinstance(sec, dict) or len(sec) != 1:
        raise ConfigError(f"phantom.corruption must hold exactly one of {sorted(_CORRUPTIONS)}")
    (name, value), = sec.items()
    if name not in _CORRUPTIONS:
        raise ConfigError(f"unknown corruption {name!r}; expected one of {sorted(_CORRUPTIONS)}")
    return _CORRUPTIONS[name](value)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    return parse_config(doc)
