import numpy as np
import pytest
from conftest import brute_hd95

from tiuloss.errors import ShapeMismatchError, ValidationError
from tiuloss.grid import ClassSet
from tiuloss.metrics import (MetricReport, bootstrap_ci, boundary, dice_score, evaluate_pair, hd95,
                             violation_count)
from tiuloss.phantom import PhantomSpec, TranslatePupil, corrupt, generate


def test_dice_identical(rng):
    m = rng.integers(0, 4, (10, 10))
    assert all(dice_score(m, m, c) == 1.0 for c in range(4))


def test_dice_half_overlap():
    a = np.zeros((8, 8), int)
    b = np.zeros((8, 8), int)
    a[2:6, 1:5] = 1
    b[2:6, 3:7] = 1
    assert dice_score(a, b, 1) == 0.5


def test_dice_matches_sets(rng):
    for _ in range(30):
        a, b = rng.integers(0, 3, (9, 7)), rng.integers(0, 3, (9, 7))
        for c in range(3):
            sa = {(y, x) for y, x in zip(*np.nonzero(a == c))}
            sb = {(y, x) for y, x in zip(*np.nonzero(b == c))}
            expect = 1.0 if not sa and not sb else 2 * len(sa & sb) / (len(sa) + len(sb))
            assert dice_score(a, b, c) == pytest.approx(expect, abs=1e-15)
            assert dice_score(a, b, c) == dice_score(b, a, c)


def test_hd95_identical(rng):
    m = rng.integers(0, 3, (12, 12))
    assert hd95(m, m, 1) == 0.0


def test_hd95_three_four_five():
    a = np.zeros((8, 8), int)
    b = np.zeros((8, 8), int)
    a[0, 0] = 1
    b[3, 4] = 1
    assert hd95(a, b, 1) == 5.0


def test_hd95_offset_squares():
    a = np.zeros((16, 16), int)
    b = np.zeros((16, 16), int)
    a[3:8, 4:9] = 1
    b[5:10, 4:9] = 1
    assert hd95(a, b, 1) == pytest.approx(brute_hd95(a == 1, b == 1), abs=1e-9)


def test_hd95_random_vs_brute(rng):
    for _ in range(10):
        a, b = rng.integers(0, 2, (16, 16)), rng.integers(0, 2, (16, 16))
        assert hd95(a, b, 1) == pytest.approx(brute_hd95(a == 1, b == 1), abs=1e-9)
        assert hd95(a, b, 1) == hd95(b, a, 1)


def test_hd95_empty_cases():
    z = np.zeros((6, 8), int)
    one = z.copy()
    one[2, 2] = 1
    assert hd95(z, z, 1) == 0.0
    assert hd95(z, one, 1) == 10.0


def test_hd95_bounded_by_diagonal(rng):
    for _ in range(20):
        a, b = rng.integers(0, 4, (7, 11)), rng.integers(0, 4, (7, 11))
        assert hd95(a, b, 3) <= np.hypot(7, 11)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_hd95_dilated_disk(r):
    yy, xx = np.mgrid[:32, :32]
    d2 = (yy - 16) ** 2 + (xx - 16) ** 2
    a = (d2 < 36).astype(int)
    b = (d2 < (6 + r) ** 2).astype(int)
    assert hd95(a, b, 1) <= r * np.sqrt(2) + 1


def test_boundary_includes_image_edge():
    r = np.ones((3, 3), bool)
    b = boundary(r)
    assert b.sum() == 8 and not b[1, 1]


def test_violations_clean_and_translated():
    ph = generate(PhantomSpec())
    assert violation_count(ph.mask) == (0, 0, 0)
    bad, _ = corrupt(ph, TranslatePupil(0, 11))
    assert violation_count(bad.mask)[2] == int((bad.mask == 3).sum())


def test_violations_on_stack():
    s = np.zeros((4, 5, 5))
    s[1, 1:4, 1:4] = 1
    s[3, 2, 2] = 1
    s[3, 0, 0] = 1
    assert violation_count(s) == (1, 0, 2)


def test_bootstrap_degenerate():
    assert bootstrap_ci([0.5] * 10) == (0.5, 0.5, 0.5)


def test_bootstrap_contains_mean():
    r = np.random.default_rng(7)
    for _ in range(1000):
        x = r.exponential(size=int(r.integers(5, 30)))
        m, lo, hi = bootstrap_ci(x, resamples=200, seed=int(r.integers(1 << 30)))
        assert lo <= m <= hi


def test_bootstrap_deterministic(rng):
    x = rng.random(20)
    assert bootstrap_ci(x, seed=3) == bootstrap_ci(x, seed=3)


def test_bootstrap_rejects_bad_input():
    with pytest.raises(ValidationError):
        bootstrap_ci([1.0])
    with pytest.raises(ValidationError):
        bootstrap_ci([1.0, np.nan])


def test_report_rows_and_shape_check(rng):
    cs = ClassSet()
    ims = [evaluate_pair(f"im{i}", rng.integers(0, 4, (8, 8)), rng.integers(0, 4, (8, 8)), cs) for i in range(4)]
    rep = MetricReport(ims, cs)
    lines = rep.to_csv().splitlines()
    assert len(lines) == 1 + 4 + 3
    assert [l.split(",")[0] for l in lines[-3:]] == ["mean", "ci_lower", "ci_upper"]
    assert rep.to_dict()["aggregate"]["dice"]["mean"]["mean"] == pytest.approx(
        np.mean([im.mean_dice() for im in ims]))
    with pytest.raises(ShapeMismatchError):
        evaluate_pair("x", np.zeros((3, 3), int), np.zeros((3, 4), int), cs)
