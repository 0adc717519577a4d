import math

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def brute_maxpool(x, k):
    """Window max by explicit loops over ceil-mode windows."""
    h, w = x.shape
    ho, wo = math.ceil(h / k), math.ceil(w / k)
    out = np.empty((ho, wo))
    for i in range(ho):
        for j in range(wo):
            out[i, j] = max(x[a, b] for a in range(i * k, min(h, i * k + k))
                            for b in range(j * k, min(w, j * k + k)))
    return out


def linear_percentile(values, q):
    """Percentile with linear interpolation between sorted order statistics."""
    v = sorted(values)
    pos = (len(v) - 1) * q / 100.0
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (v[hi] - v[lo]) * (pos - lo)


def brute_boundary(region):
    h, w = region.shape
    pts = []
    for y in range(h):
        for x in range(w):
            if not region[y, x]:
                continue
            nbrs = [(y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)]
            if any(not (0 <= a < h and 0 <= b < w) or not region[a, b] for a, b in nbrs):
                pts.append((y, x))
    return pts


def brute_hd95(a, b):
    pa, pb = brute_boundary(a), brute_boundary(b)
    d = [min(math.hypot(y - v, x - u) for v, u in pb) for y, x in pa]
    d += [min(math.hypot(y - v, x - u) for v, u in pa) for y, x in pb]
    return linear_percentile(d, 95)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
