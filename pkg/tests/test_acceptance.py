"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py`` (lines appear in the
terminal summary) or ``python tests/test_acceptance.py``.
"""
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES, brute_hd95, brute_maxpool

from tiuloss.cli import main as cli_main
from tiuloss.composite import LossConfig, LossWeights, total_loss
from tiuloss.constraints import constraint_maps, iu_loss, region_encoding
from tiuloss.gradcheck import gradient_suite
from tiuloss.grid import ClassSet
from tiuloss.metrics import bootstrap_ci, dice_score, hd95, violation_count
from tiuloss.optimize import OptimConfig, fit
from tiuloss.phantom import DilatePupil, LabelNoise, PhantomSpec, corrupt, expected_violations, generate
from tiuloss.pool import maxpool2d

pytestmark = pytest.mark.acceptance
CS = ClassSet()


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def report(label: str, ok: bool, detail: str, elapsed: float, budget: float) -> None:
    in_time = elapsed < budget
    status = "PASS" if ok and in_time else "FAIL"
    line = f"{status} criterion {label}: {detail} [{elapsed:.1f}s / budget {budget:g}s]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
    assert in_time, line


def test_criterion_1_gradients():
    with Timer() as t:
        res = gradient_suite(instances=100, height=8, width=8)
    worst = {k: v["max_rel_error"] for k, v in res.items()}
    ok = all(v < 1e-4 for v in worst.values()) and all(v["checked"] > 0 for v in res.values())
    detail = "max rel err " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()) + " (< 1e-4, 100 seeds)"
    report("1 gradient correctness", ok, detail, t.elapsed, 60)


def test_criterion_2_pooling_oracle():
    rng = np.random.default_rng(2)
    mismatches = 0
    with Timer() as t:
        for _ in range(100):
            x = rng.standard_normal((int(rng.integers(1, 10)), int(rng.integers(1, 10))))
            for k in range(1, 6):
                mismatches += not np.array_equal(maxpool2d(x, k), brute_maxpool(x, k))
    report("2 pooling oracle", mismatches == 0, f"{mismatches} mismatches over 100 grids x k=1..5",
           t.elapsed, 5)


def test_criterion_3_protrusion_oracle():
    bad_cases = []
    with Timer() as t:
        for seed in range(50):
            ph = generate(PhantomSpec.random(seed))
            for r in range(1, 6):
                dil, delta = corrupt(ph, DilatePupil(r))
                got = constraint_maps(region_encoding(dil.mask, CS), CS).enclosure_ip.sum()
                if got != delta[2] or delta[2] != expected_violations(dil.spec)[2]:
                    bad_cases.append((seed, r))
    report("3a constraint exactness (dilation)", not bad_cases,
           f"sum R_v(i,p) == ring-area oracle in {250 - len(bad_cases)}/250 cases", t.elapsed, 10)


def test_criterion_3_valid_phantoms_zero_l2():
    nonzero = []
    with Timer() as t:
        for seed in range(50):
            m = generate(PhantomSpec.random(seed)).mask
            loss = iu_loss(region_encoding(m, CS), CS)[0]
            if loss != 0:
                nonzero.append(loss * m.size)
    detail = (f"L2 == 0 on {50 - len(nonzero)}/50 uncorrupted phantoms"
              + (f"; residual L2*HW equals the pupil area (min {min(nonzero):.0f})" if nonzero else ""))
    report("3b constraint exactness (valid phantoms)", not nonzero, detail, t.elapsed, 10)


def test_criterion_4_hd95_oracle():
    rng = np.random.default_rng(4)
    worst = 0.0
    with Timer() as t:
        for _ in range(50):
            a = rng.random((16, 16)) < rng.uniform(0.1, 0.6)
            b = rng.random((16, 16)) < rng.uniform(0.1, 0.6)
            a[0, 0] = b[15, 15] = True
            worst = max(worst, abs(hd95(a.astype(int), b.astype(int), 1) - brute_hd95(a, b)))
    report("4 HD95 oracle", worst <= 1e-9, f"max |hd95 - brute force| = {worst:.1e} over 50 pairs",
           t.elapsed, 10)


def test_criterion_5_metric_sanity():
    with Timer() as t:
        a = np.zeros((8, 8), int)
        b = np.zeros((8, 8), int)
        a[2:6, 1:5] = 1
        b[2:6, 3:7] = 1
        half = dice_score(a, b, 1)
        m = generate().mask
        same = all(dice_score(m, m, c) == 1.0 and hd95(m, m, c) == 0.0 for c in range(4))
        rng = np.random.default_rng(5)
        ratios = []
        for trial in range(50):
            w100 = np.subtract(*bootstrap_ci(rng.random(100), seed=trial)[2:0:-1])
            w400 = np.subtract(*bootstrap_ci(rng.random(400), seed=trial)[2:0:-1])
            ratios.append(w400 / w100)
        ratio = float(np.mean(ratios))
    ok = half == 0.5 and same and 0.4 <= ratio <= 0.6
    report("5 metric sanity", ok, f"half-overlap dice={half}, identical ok={same}, "
           f"CI width ratio n=400/n=100 = {ratio:.3f}", t.elapsed, 30)


def test_criterion_6_convergence():
    with Timer() as t:
        m = generate(PhantomSpec()).mask
        res = fit(m, OptimConfig(step=1.0, max_iter=2000, seed=0))
        dice = res.trace.rows[-1]["dice_mean"]
    report("6 demonstrator convergence", dice >= 0.99,
           f"mean Dice {dice:.4f} after {res.iterations} iterations (>= 0.99)", t.elapsed, 120)


def test_criterion_7_directional_claim():
    ce_cfg = OptimConfig().with_weights(0, 0, 1)
    tiu_cfg = OptimConfig()
    ce_v, tiu_v = [], []
    with Timer() as t:
        for seed in range(10):
            ph = generate(PhantomSpec.random(seed))
            noisy, _ = corrupt(ph, LabelNoise(0.1), seed=seed)
            for cfg, out in ((ce_cfg, ce_v), (tiu_cfg, tiu_v)):
                res = fit(noisy.mask, cfg, reference=ph.mask)
                out.append(sum(violation_count(res.mask)))
    wins = sum(b <= a for a, b in zip(ce_v, tiu_v))
    ok = wins >= 8 and np.mean(tiu_v) < np.mean(ce_v)
    report("7 directional claim", ok,
           f"CE+TIU <= CE in {wins}/10 runs; mean violations CE={np.mean(ce_v):.1f}, "
           f"CE+TIU={np.mean(tiu_v):.1f}", t.elapsed, 600)


def test_criterion_8_composition():
    rng = np.random.default_rng(8)
    worst, removal_ok = 0.0, True
    with Timer() as t:
        for _ in range(10):
            x = rng.standard_normal((4, 8, 8))
            m = rng.integers(0, 4, (8, 8))
            w = rng.uniform(0.1, 3.0, 3)
            out = total_loss(x, m, LossConfig(weights=LossWeights(*w)))
            worst = max(worst, abs(out.total - (w[0] * out.topo + w[1] * out.relation + w[2] * out.pixel)))
            terms = (out.topo, out.relation, out.pixel)
            for drop in range(3):
                wz = w.copy()
                wz[drop] = 0.0
                z = total_loss(x, m, LossConfig(weights=LossWeights(*wz)))
                removal_ok &= abs((out.total - z.total) - w[drop] * terms[drop]) <= 1e-9
    report("8 composition identities", worst <= 1e-9 and removal_ok,
           f"max |L_f - sum| = {worst:.1e}; single-weight removal exact = {removal_ok}", t.elapsed, 1)


def test_criterion_9_determinism(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("seed: 11\nphantom: {count: 5, corruption: {label_noise: 0.1}}\n"
                   "optimize: {max_iter: 200, log_every: 20}\n")
    with Timer() as t:
        trees = []
        for tag in ("first", "second"):
            out = tmp_path / tag
            codes = [cli_main(["--config", str(cfg), "--out", str(out / "ph"), "phantom"]),
                     cli_main(["--config", str(cfg), "--out", str(out / "opt"), "optimize"]),
                     cli_main(["--config", str(cfg), "--out", str(out / "ev"), "eval",
                               str(out / "ph" / "corrupted"), str(out / "ph" / "gt")])]
            assert codes == [0, 0, 0]
            trees.append({p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
        capsys.readouterr()
    same = trees[0] == trees[1]
    report("9 determinism", same, f"{len(trees[0])} artifacts (CSV/JSON/PNG/pmap) byte-identical = {same}",
           t.elapsed, 60)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
