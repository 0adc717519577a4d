"""Command-line entry point: ``tiuloss <command> ...``.

Exit codes: 0 success, 1 usage error, 2 invalid input, 3 numerical failure.
Errors go to stderr as ``tiuloss: error[<code>]: <message>``.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .composite import total_loss
from .config import RunConfig, load_config
from .constraints import constraint_maps, region_encoding
from .errors import NumericalError, TIUError, ValidationError
from .files import MAP_SUFFIX, export_heatmap, probs_to_logits, read_map, read_mask, write_map, write_mask
from .gradcheck import gradient_suite
from .grid import argmax_mask, normalize
from .metrics import MetricReport, evaluate_pair, violation_count
from .optimize import fit
from .phantom import corrupt, expected_violations, generate

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3
MAP_NAMES = ("exclusion", "enclosure_sclera_iris", "enclosure_iris_pupil")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=d, help="override the configured seed")
    parser.add_argument("--out", default=d, help="output directory")
    parser.add_argument("--jobs", type=int, default=d if suppress else 1, help="worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tiuloss", description="Topology and intersection-union loss toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", parents=[common], help="score prediction masks against ground truth")
    p.add_argument("pred_dir", nargs="?")
    p.add_argument("gt_dir", nargs="?")

    p = sub.add_parser("loss", parents=[common], help="evaluate the combined loss on one prediction")
    p.add_argument("pred", help=f"probability or logit map ({MAP_SUFFIX})")
    p.add_argument("gt", help="ground-truth mask (PNG)")

    p = sub.add_parser("violations", parents=[common], help="export constraint heatmaps")
    p.add_argument("pred", help=f"mask (PNG) or probability/logit map ({MAP_SUFFIX})")

    sub.add_parser("phantom", parents=[common], help="write a synthetic mask dataset")

    p = sub.add_parser("optimize", parents=[common], help="fit a logit grid by gradient descent")
    p.add_argument("--target", help="mask to fit instead of a generated phantom")

    sub.add_parser("gradcheck", parents=[common], help="verify analytic gradients")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.jobs is not None and args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except NumericalError as exc:
        return _fail(exc.code, str(exc), EXIT_NUMERICAL)
    except TIUError as exc:
        return _fail(exc.code, str(exc), EXIT_INVALID)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_INVALID)


def _fail(code: str, message: str, status: int) -> int:
    print(f"tiuloss: error[{code}]: {message}", file=sys.stderr)
    return status


def _out_dir(args, cfg: RunConfig, default: str = ".") -> Path:
    out = Path(args.out or cfg.paths.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _pmap_logits(path) -> np.ndarray:
    arr, kind = read_map(path)
    return probs_to_logits(arr) if kind == "prob" else arr


def cmd_eval(args, cfg: RunConfig) -> int:
    pred_dir = args.pred_dir or cfg.paths.pred
    gt_dir = args.gt_dir or cfg.paths.gt
    if not pred_dir or not gt_dir:
        raise UsageError("eval needs prediction and ground-truth directories")
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise ValidationError(f"{d} is not a directory")
    preds = {p.stem: p for p in pred_dir.glob("*.png")}
    gts = {p.stem: p for p in gt_dir.glob("*.png")}
    unmatched = sorted(set(preds) ^ set(gts))
    if unmatched:
        raise ValidationError(f"unmatched files (no partner by stem): {', '.join(unmatched)}")
    if not preds:
        raise ValidationError(f"no PNG masks found in {pred_dir}")

    classes = cfg.classes

    def one(stem):
        return evaluate_pair(stem, read_mask(preds[stem], classes), read_mask(gts[stem], classes), classes)

    with ThreadPoolExecutor(max_workers=args.jobs or 1) as pool:
        images = list(pool.map(one, sorted(preds)))
    report = MetricReport(images, classes, cfg.bootstrap.resamples, cfg.bootstrap.level, cfg.seed)
    out = _out_dir(args, cfg)
    (out / "metrics.csv").write_text(report.to_csv())
    (out / "metrics.json").write_text(report.to_json())
    agg = report.aggregate()
    print(_dump({"images": len(images), "dice_mean": agg["dice_mean"][0], "hd95_mean": agg["hd95_mean"][0],
                 "csv": str(out / "metrics.csv"), "json": str(out / "metrics.json")}), end="")
    return EXIT_OK


def cmd_loss(args, cfg: RunConfig) -> int:
    logits = _pmap_logits(args.pred)
    gt = read_mask(args.gt, cfg.classes)
    out = total_loss(logits, gt, cfg.loss)
    doc = out.scalars()
    doc["constraint_sums"] = dict(zip(MAP_NAMES, out.maps.sums()))
    print(_dump(doc), end="")
    return EXIT_OK


def cmd_violations(args, cfg: RunConfig) -> int:
    path = Path(args.pred)
    classes = cfg.classes
    if path.suffix == MAP_SUFFIX:
        arr, kind = read_map(path)
        if kind == "logit":
            arr = normalize(arr)
        maps = constraint_maps(arr, classes)
        hard = argmax_mask(arr)
    else:
        hard = read_mask(path, classes)
        maps = constraint_maps(region_encoding(hard, classes), classes)
    out = _out_dir(args, cfg)
    for name, grid in zip(MAP_NAMES, (maps.exclusion, maps.enclosure_si, maps.enclosure_ip)):
        export_heatmap(grid, out / f"{name}.png")
    counts = violation_count(hard, classes)
    doc = {"map_sums": dict(zip(MAP_NAMES, maps.sums())),
           "violation_counts": dict(zip(("exclusion", "sclera_iris", "iris_pupil"), counts))}
    (out / "violations.json").write_text(_dump(doc))
    print(_dump(doc), end="")
    return EXIT_OK


def cmd_phantom(args, cfg: RunConfig) -> int:
    pc = cfg.phantom
    seeds = [cfg.seed + k for k in range(pc.count)]

    def one(seed):
        ph = generate(pc.spec(seed))
        if pc.corruption is None:
            return seed, ph, None, None
        bad, delta = corrupt(ph, pc.corruption, seed=seed)
        return seed, ph, bad, delta

    with ThreadPoolExecutor(max_workers=args.jobs or 1) as pool:
        results = list(pool.map(one, seeds))
    out = _out_dir(args, cfg)
    (out / "gt").mkdir(exist_ok=True)
    if pc.corruption is not None:
        (out / "corrupted").mkdir(exist_ok=True)
    index = []
    for seed, ph, bad, delta in results:
        name = f"phantom_{seed:04d}"
        write_mask(ph.mask, out / "gt" / f"{name}.png", ph.classes)
        entry = {"name": name, "seed": seed, "spec": ph.spec.to_dict(),
                 "expected_violations": list(expected_violations(ph.spec))}
        if bad is not None:
            write_mask(bad.mask, out / "corrupted" / f"{name}.png", bad.classes)
            entry["corruption"] = {type(pc.corruption).__name__: vars(pc.corruption)}
            entry["expected_delta"] = None if delta is None else list(delta)
        index.append(entry)
    (out / "phantoms.json").write_text(_dump(index))
    print(_dump({"count": len(index), "out": str(out)}), end="")
    return EXIT_OK


def cmd_optimize(args, cfg: RunConfig) -> int:
    classes = cfg.classes
    if args.target:
        target = read_mask(args.target, classes)
        reference = target
    else:
        ph = generate(cfg.phantom.spec(cfg.seed))
        reference = ph.mask
        target = ph.mask
        if cfg.phantom.corruption is not None:
            target = corrupt(ph, cfg.phantom.corruption, seed=cfg.seed)[0].mask
    ocfg = replace(cfg.optimize, seed=cfg.seed, loss=replace(cfg.optimize.loss, classes=classes))
    res = fit(target, ocfg, reference=reference)
    out = _out_dir(args, cfg)
    (out / "trace.csv").write_text(res.trace.to_csv())
    write_mask(res.mask, out / "final_mask.png", classes)
    write_map(res.probs, out / f"final_probs{MAP_SUFFIX}", "prob")
    last = res.trace.rows[-1]
    doc = {"iterations": res.iterations, "converged": res.converged,
           "final": {k: (int(v) if isinstance(v, (int, np.integer)) else float(v)) for k, v in last.items()}}
    (out / "summary.json").write_text(_dump(doc))
    print(_dump(doc), end="")
    return EXIT_OK


def cmd_gradcheck(args, cfg: RunConfig) -> int:
    gc = cfg.gradcheck
    report = gradient_suite(gc.instances, gc.height, gc.width, replace(cfg.loss, classes=cfg.classes),
                            gc.step, cfg.seed)
    worst = max(r["max_rel_error"] for r in report.values())
    doc = {"instances": gc.instances, "shape": [len(cfg.classes), gc.height, gc.width],
           "threshold": gc.threshold, "max_rel_error": worst, "passed": worst <= gc.threshold,
           "terms": report}
    if args.out or cfg.paths.out:
        (_out_dir(args, cfg) / "gradcheck.json").write_text(_dump(doc))
    print(_dump(doc), end="")
    if worst > gc.threshold:
        raise NumericalError(f"max relative gradient error {worst:.3e} exceeds {gc.threshold:g}")
    return EXIT_OK


COMMANDS = {"eval": cmd_eval, "loss": cmd_loss, "violations": cmd_violations, "phantom": cmd_phantom,
            "optimize": cmd_optimize, "gradcheck": cmd_gradcheck}


if __name__ == "__main__":
    sys.exit(main())
