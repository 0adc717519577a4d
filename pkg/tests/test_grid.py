import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tiuloss.errors import NumericalError, UnknownClassError, ValidationError
from tiuloss.grid import ClassSet, argmax_mask, check_mask, check_probmap, normalize, one_hot, softmax_backward


def test_zero_logits_give_uniform():
    p = normalize(np.zeros((3, 2, 2)))
    np.testing.assert_allclose(p, 1 / 3)


def test_large_logit_dominates():
    x = np.zeros((3, 1, 1))
    x[2] = 800.0
    p = normalize(x)
    np.testing.assert_allclose(p[:, 0, 0], [0, 0, 1], atol=1e-12)


def test_channel_sums(rng):
    p = normalize(rng.standard_normal((3, 4, 4)) * 5)
    np.testing.assert_allclose(p.sum(axis=0), 1.0, atol=1e-6)
    check_probmap(p)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 3, 5), elements=st.floats(-50, 50)), st.floats(-100, 100))
def test_shift_invariance(x, c):
    np.testing.assert_allclose(normalize(x), normalize(x + c), atol=1e-9)


def test_nonfinite_logit_named():
    x = np.zeros((2, 3, 3))
    x[1, 2, 0] = np.nan
    with pytest.raises(NumericalError, match=r"channel 1, pixel \(2, 0\)"):
        normalize(x)


def test_one_hot_single_pixel():
    np.testing.assert_array_equal(one_hot(np.array([[2]]), 4)[:, 0, 0], [0, 0, 1, 0])


def test_one_hot_background():
    g = one_hot(np.zeros((3, 3), int), 4)
    assert np.all(g[0] == 1) and np.all(g[1:] == 0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.int64, (6, 7), elements=st.integers(0, 3)))
def test_one_hot_argmax_roundtrip(m):
    np.testing.assert_array_equal(argmax_mask(one_hot(m, 4)), m)


def test_argmax_tie_goes_low():
    assert argmax_mask(np.full((3, 1, 1), 1 / 3))[0, 0] == 0


def test_argmax_stable_under_small_noise():
    # every 2x2 mask over 3 classes, perturbed below 0.4
    rng = np.random.default_rng(0)
    for labels in itertools.product(range(3), repeat=4):
        m = np.array(labels).reshape(2, 2)
        p = one_hot(m, 3) + rng.uniform(-0.39, 0.39, size=(3, 2, 2)) / 2
        np.testing.assert_array_equal(argmax_mask(p), m)


def test_unknown_class_names_value_and_pixel():
    m = np.zeros((3, 3), int)
    m[1, 2] = 7
    with pytest.raises(UnknownClassError, match=r"7 at pixel \(1, 2\)"):
        check_mask(m, ClassSet())


def test_probmap_validation():
    with pytest.raises(ValidationError):
        check_probmap(np.full((2, 2, 2), 0.6))


def test_classset_rules():
    cs = ClassSet.eye(caruncle=True)
    assert len(cs) == 5 and cs.caruncle == 4 and cs.pupil == 3
    with pytest.raises(ValidationError):
        ClassSet(("sclera", "background", "iris", "pupil"))
    with pytest.raises(ValidationError):
        ClassSet(("background", "iris", "pupil"))


def test_softmax_backward_matches_fd(rng):
    x = rng.standard_normal((4, 3, 3))
    w = rng.standard_normal(x.shape)
    grad = softmax_backward(normalize(x), w)
    h = 1e-6
    for idx in [(0, 0, 0), (2, 1, 2), (3, 2, 1)]:
        e = np.zeros_like(x)
        e[idx] = h
        fd = ((normalize(x + e) * w).sum() - (normalize(x - e) * w).sum()) / (2 * h)
        assert abs(fd - grad[idx]) < 1e-8
