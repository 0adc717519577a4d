"""Finite-difference verification of every analytic gradient in the package."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import constraints, pool
from .composite import FD_STEP, GradCheck, LossConfig, finite_diff_check, smooth_logit_points, total_loss
from .grid import ClassSet, normalize, one_hot
from .pixel_loss import cross_entropy, dice_loss

TERMS = ("topo", "iu", "ce", "dice", "total")
KINK_MARGIN = 1e-3


@dataclass(frozen=True)
class Instance:
    logits: np.ndarray
    target: np.ndarray

    @property
    def probs(self) -> np.ndarray:
        return normalize(self.logits)


def random_instance(seed: int, height: int = 8, width: int = 8,
                    classes: ClassSet | None = None) -> Instance:
    classes = classes or ClassSet()
    rng = np.random.default_rng(seed)
    logits = rng.standard_normal((len(classes), height, width))
    target = rng.integers(0, len(classes), size=(height, width))
    return Instance(logits, target)


def check_instance(inst: Instance, config: LossConfig | None = None,
                   step: float = FD_STEP) -> dict[str, GradCheck]:
    """Run all five checks on one instance.

    The four component terms are differentiated w.r.t. the probability map
    they consume; the combined loss w.r.t. the logits.
    """
    config = config or LossConfig()
    classes = config.resolve_classes(inst.logits.shape[0])
    p = inst.probs
    g = one_hot(inst.target, classes)
    sched = config.schedule

    topo_ok = pool.smooth_points(p, g, sched, KINK_MARGIN)
    iu_ok = np.broadcast_to(constraints.smooth_points(p, classes, KINK_MARGIN), p.shape)
    # CE and Dice are smooth for probabilities well above the clamp floor
    return {
        "topo": finite_diff_check(lambda x: pool.topo_loss(x, g, sched, config.topo_reduction),
                                  p, step, topo_ok),
        "iu": finite_diff_check(lambda x: _drop_maps(constraints.iu_loss(x, classes, config.iu_reduction)),
                                p, step, iu_ok),
        "ce": finite_diff_check(lambda x: cross_entropy(x, g), p, step),
        "dice": finite_diff_check(
            lambda x: dice_loss(x, g, config.dice_eps, config.dice_include_background), p, step),
        "total": finite_diff_check(lambda x: _value_grad(x, inst.target, config), inst.logits, step,
                                   smooth_logit_points(inst.logits, inst.target, config, KINK_MARGIN)),
    }


def _drop_maps(out):
    loss, _, grad = out
    return loss, grad


def _value_grad(x, target, config):
    out = total_loss(x, target, config)
    return out.total, out.grad


def gradient_suite(instances: int = 100, height: int = 8, width: int = 8,
                   config: LossConfig | None = None, step: float = FD_STEP,
                   seed: int = 0) -> dict[str, dict]:
    """Worst relative error per term over ``instances`` seeded instances.

    Returns ``{term: {"max_rel_error", "worst_seed", "checked"}}``, where
    ``checked`` is the total number of compared coordinates.
    """
    config = config or LossConfig()
    classes = config.resolve_classes(len(config.classes) if config.classes is not None else 4)
    report = {t: {"max_rel_error": 0.0, "worst_seed": None, "checked": 0} for t in TERMS}
    for k in range(instances):
        s = seed + k
        res = check_instance(random_instance(s, height, width, classes), config, step)
        for t, r in res.items():
            entry = report[t]
            entry["checked"] += r.checked
            if r.max_rel_error > entry["max_rel_error"] or entry["worst_seed"] is None:
                entry["max_rel_error"] = r.max_rel_error
                entry["worst_seed"] = s
    return report
