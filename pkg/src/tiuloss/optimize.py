"""Direct-optimisation demonstrator.

Instead of training a network, a free logit grid is fitted to a target
mask by plain gradient descent on the combined loss. Comparing runs with
and without the topology/relationship terms shows what those terms do to
the final segmentation.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .composite import LossConfig, LossWeights, total_loss
from .errors import NumericalError, ShapeMismatchError, ValidationError
from .grid import argmax_mask, check_logits, check_mask, normalize
from .metrics import (BOOTSTRAP_LEVEL, BOOTSTRAP_RESAMPLES, bootstrap_ci, dice_score,
                      evaluate_pair, violation_count)

WINDOW = 10


@dataclass(frozen=True)
class OptimConfig:
    step: float = 1.0
    max_iter: int = 2000
    tol: float = 0.0
    loss: LossConfig = field(default_factory=LossConfig)
    log_every: int = 10
    seed: int = 0
    init_scale: float = 0.01
    name: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.step) and self.step > 0):
            raise ValidationError("step size must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        if self.tol < 0:
            raise ValidationError("tolerance must be >= 0")
        if self.log_every < 1:
            raise ValidationError("log_every must be >= 1")
        if self.init_scale < 0:
            raise ValidationError("init_scale must be >= 0")

    def with_weights(self, alpha1: float, alpha2: float, beta: float, name: str = "") -> OptimConfig:
        loss = replace(self.loss, weights=LossWeights(alpha1, alpha2, beta))
        return replace(self, loss=loss, name=name or self.name)


TRACE_FIELDS = ("iteration", "L1", "L2", "Lp", "Lf", "dice_mean",
                "violations_exclusion", "violations_sclera_iris", "violations_iris_pupil")


@dataclass
class OptimTrace:
    rows: list[dict[str, float]] = field(default_factory=list)

    def append(self, row: dict[str, float]) -> None:
        if self.rows and row["iteration"] <= self.rows[-1]["iteration"]:
            raise ValueError("trace iterations must increase")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=TRACE_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (int(r[k]) if k == "iteration" or k.startswith("violations") else repr(float(r[k])))
                        for k in TRACE_FIELDS})
        return buf.getvalue()


@dataclass
class FitResult:
    probs: np.ndarray
    logits: np.ndarray
    trace: OptimTrace
    iterations: int
    converged: bool

    @property
    def mask(self) -> np.ndarray:
        return argmax_mask(self.probs)


def initial_logits(shape: tuple[int, int, int], cfg: OptimConfig) -> np.ndarray:
    return cfg.init_scale * np.random.default_rng(cfg.seed).standard_normal(shape)


def fit(target, cfg: OptimConfig | None = None, init=None, reference=None) -> FitResult:
    """Gradient descent on the logits of a ``(C, H, W)`` grid.

    Parameters
    ----------
    target : (H, W) label mask used as supervision
    cfg : OptimConfig
    init : (C, H, W) logits, optional. Drawn from ``cfg.seed`` when omitted.
    reference : (H, W) label mask, optional
        Mask the trace's Dice is measured against; defaults to ``target``.
        Pass the clean mask when supervising with corrupted labels.
    """
    cfg = cfg or OptimConfig()
    target = check_mask(target)
    n_cls = len(cfg.loss.classes) if cfg.loss.classes is not None else 4
    if init is None:
        x = initial_logits((n_cls, *target.shape), cfg)
    else:
        x = check_logits(init).copy()
        if x.shape[1:] != target.shape:
            raise ShapeMismatchError(f"init logits {x.shape} do not match target {target.shape}")
    classes = cfg.loss.resolve_classes(x.shape[0])
    n_pix = target.size
    reference = target if reference is None else check_mask(reference, classes)

    trace = OptimTrace()
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        out = total_loss(x, target, cfg.loss)
        if not np.isfinite(out.total) or not np.all(np.isfinite(out.grad)):
            raise NumericalError(f"loss diverged at iteration {it} with step size {cfg.step}")
        history.append(out.total)
        done = (len(history) > WINDOW and abs(history[-1] - history[-1 - WINDOW]) < cfg.tol)
        if it % cfg.log_every == 0 or it == 1 or done or it == cfg.max_iter:
            trace.append(_trace_row(it, out, x, reference, classes))
        if done:
            converged = True
            break
        with np.errstate(over="ignore", invalid="ignore"):
            x = x - (cfg.step * n_pix) * out.grad
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"logits diverged at iteration {it} with step size {cfg.step}")
    return FitResult(normalize(x), x, trace, it, converged)


def _trace_row(it, out, x, reference, classes) -> dict[str, float]:
    pred = argmax_mask(normalize(x))
    dice = float(np.mean([dice_score(pred, reference, c) for c in range(1, len(classes))]))
    v = violation_count(pred, classes)
    return {"iteration": it, "L1": out.topo, "L2": out.relation, "Lp": out.pixel, "Lf": out.total,
            "dice_mean": dice, "violations_exclusion": v[0], "violations_sclera_iris": v[1],
            "violations_iris_pupil": v[2]}


ABLATION_FIELDS = ("dice_mean", "hd95_mean", "violations_total")


@dataclass
class AblationRow:
    name: str
    per_target: dict[str, list[float]]
    summary: dict[str, tuple[float, float, float]]


@dataclass
class AblationTable:
    rows: list[AblationRow]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["config"] + [f"{f}_{s}" for f in ABLATION_FIELDS for s in ("mean", "ci_lower", "ci_upper")])
        for r in self.rows:
            w.writerow([r.name] + [repr(float(v)) for f in ABLATION_FIELDS for v in r.summary[f]])
        return buf.getvalue()


def ablate(targets, configs, references=None, resamples: int = BOOTSTRAP_RESAMPLES,
           level: float = BOOTSTRAP_LEVEL, seed: int = 0) -> AblationTable:
    """Fit every target under every config and summarise the final masks.

    Each row holds the mean and bootstrap interval, over targets, of the
    foreground mean Dice, foreground mean HD95 and total violation count,
    all measured against ``references`` (defaults to the targets).
    """
    targets = list(targets)
    configs = list(configs)
    if not targets or not configs:
        raise ValidationError("ablate needs at least one target and one config")
    references = targets if references is None else list(references)
    if len(references) != len(targets):
        raise ShapeMismatchError(f"{len(references)} references for {len(targets)} targets")

    rows = []
    for j, cfg in enumerate(configs):
        vals: dict[str, list[float]] = {f: [] for f in ABLATION_FIELDS}
        for t, ref in zip(targets, references):
            res = fit(t, cfg, reference=ref)
            classes = cfg.loss.resolve_classes(res.probs.shape[0])
            m = evaluate_pair("", res.mask, ref, classes)
            vals["dice_mean"].append(m.mean_dice())
            vals["hd95_mean"].append(m.mean_hd95())
            vals["violations_total"].append(float(sum(m.violations)))
        summary = {}
        for f, v in vals.items():
            summary[f] = bootstrap_ci(v, resamples, level, seed) if len(v) >= 2 else (v[0], v[0], v[0])
        rows.append(AblationRow(cfg.name or f"config{j}", vals, summary))
    return AblationTable(rows)

