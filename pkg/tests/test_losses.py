import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereokit.imgio import GridError
from stereokit.losses import (
    LossWeights,
    autocorr,
    loss_deep_corr,
    loss_distilled_matting,
    loss_l1,
    loss_perceptual,
    loss_smoothness,
    random_features,
    stage1_total,
    stage2_total,
    two_view_total,
)


def brute_autocorr(f, k):
    c, h, w = f.shape
    r = k // 2
    out = np.zeros((k * k, h, w))
    for y in range(h):
        for x in range(w):
            o = 0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w:
                        a = [float(v) for v in f[:, y, x]]
                        b = [float(v) for v in f[:, yy, xx]]
                        dot = sum(p * q for p, q in zip(a, b))
                        na = sum(p * p for p in a) ** 0.5
                        nb = sum(q * q for q in b) ** 0.5
                        out[o, y, x] = dot / (na * nb + 1e-8)
                    o += 1
    return out


# -- l1 ---------------------------------------------------------------------

def test_l1_basic(rng):
    t = rng.random((4, 5, 3)) * 0.8
    assert loss_l1(t, t) == 0.0
    assert loss_l1(t + 0.1, t) == pytest.approx(0.1, abs=1e-12)


def test_l1_masked():
    target = np.zeros((2, 4, 3))
    pred = target.copy()
    pred[:, :2] = 0.2
    pred[:, 2:] = 9.0
    valid = np.zeros((2, 4), bool)
    valid[:, :2] = True
    assert loss_l1(pred, target, valid) == pytest.approx(0.2, abs=1e-12)
    assert loss_l1(pred, target, np.zeros((2, 4), bool)) == 0.0


def test_l1_shape_mismatch():
    with pytest.raises(GridError):
        loss_l1(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))


# -- perceptual -------------------------------------------------------------

def test_perceptual(rng):
    feats = [rng.normal(size=(4, 8, 8)), rng.normal(size=(8, 4, 4))]
    assert loss_perceptual(feats, feats) == 0.0
    a = np.zeros((2, 3, 3))
    assert loss_perceptual([a], [a + 0.5]) == pytest.approx(0.5)
    b = np.zeros((1, 4, 4))
    assert loss_perceptual([a, b], [a + 0.2, b - 0.4]) == pytest.approx(0.3)
    with pytest.raises(GridError):
        loss_perceptual([a], [a, b])


# -- smoothness -------------------------------------------------------------

def test_smoothness_constant(rng):
    assert loss_smoothness(np.full((5, 6), 3.0), rng.random((5, 6, 3))) == 0.0


def test_smoothness_ramp_constant_guide():
    disp = np.tile(np.arange(1, 9, dtype=float), (4, 1))   # mean 4.5
    assert loss_smoothness(disp, np.full((4, 8, 3), 0.5)) == pytest.approx(1 / 4.5, rel=1e-12)


def test_smoothness_edge_aware():
    disp = np.ones((6, 10))
    disp[:, 5:] = 4.0
    edge = np.zeros((6, 10, 3))
    edge[:, 5:] = 1.0
    flat = np.full((6, 10, 3), 0.5)
    assert loss_smoothness(disp, edge) < loss_smoothness(disp, flat)


# -- autocorrelation --------------------------------------------------------

def test_autocorr_k1(backend, rng):
    f = rng.normal(size=(3, 4, 5))
    np.testing.assert_allclose(autocorr(f, 1), 1.0, atol=1e-8)


def test_autocorr_constant_interior(backend):
    out = autocorr(np.full((2, 5, 5), 0.7), 3)
    np.testing.assert_allclose(out[:, 1:-1, 1:-1], 1.0, atol=1e-7)
    assert out[0, 0, 0] == 0.0    # offset (-1, -1) leaves the map


def test_autocorr_orthogonal_neighbours(backend):
    f = np.zeros((2, 1, 2))
    f[:, 0, 0] = [1, 0]
    f[:, 0, 1] = [0, 1]
    out = autocorr(f, 3)
    # offset (dy, dx) = (0, +1) is channel 5 in row-major order
    assert out[5, 0, 0] == 0.0
    assert out[4, 0, 0] == pytest.approx(1.0, abs=1e-7)


def test_autocorr_brute_force(backend, rng):
    f = rng.normal(size=(3, 5, 6))
    np.testing.assert_allclose(autocorr(f, 3), brute_autocorr(f, 3), atol=1e-12)
    np.testing.assert_allclose(autocorr(f, 5), brute_autocorr(f, 5), atol=1e-12)


def test_autocorr_even_k():
    with pytest.raises(GridError, match="odd"):
        autocorr(np.ones((1, 3, 3)), 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_autocorr_bounded_and_scale_invariant(seed):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(4, 5, 5))
    scale = rng.uniform(0.5, 20, (1, 5, 5))
    a = autocorr(f, 3)
    assert np.all(np.abs(a) <= 1.0 + 1e-12)
    np.testing.assert_allclose(autocorr(f * scale, 3), a, atol=1e-6)


# -- deep correlation -------------------------------------------------------

def test_deep_corr(rng):
    f = rng.normal(size=(4, 6, 6))
    assert loss_deep_corr(f, f) == 0.0
    assert loss_deep_corr(np.full((2, 4, 4), 3.0), np.full((5, 4, 4), 0.2)) == pytest.approx(0, abs=1e-7)
    with pytest.raises(GridError, match="spatial"):
        loss_deep_corr(f, f[:, :5])


def test_deep_corr_hand_maps():
    a = np.array([[[1.0, -2.0, 0.5], [3.0, 1.0, -1.0], [0.2, 0.4, -0.3]]])
    b = np.array([[[0.5, 0.5, -1.0], [-2.0, 1.0, 1.0], [1.5, -0.7, 2.0]]])
    expected = np.abs(brute_autocorr(a, 3) - brute_autocorr(b, 3)).mean()
    assert loss_deep_corr(a, b, 3) == pytest.approx(expected, abs=1e-12)


# -- distilled matting ------------------------------------------------------

def test_distilled_matting():
    d = np.full((4, 4), 10.0)
    assert loss_distilled_matting(d, d, np.ones((4, 4))) == 0.0
    assert loss_distilled_matting(d, d - 2, np.zeros((4, 4))) == 0.0
    assert loss_distilled_matting(d, np.full((4, 4), 8.0), np.ones((4, 4))) == pytest.approx(0.2)
    with pytest.raises(GridError, match="max"):
        loss_distilled_matting(np.zeros((2, 2)), np.zeros((2, 2)), np.ones((2, 2)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_loss_symmetry_and_bounds(seed):
    rng = np.random.default_rng(seed)
    d = rng.uniform(1, 50, (5, 5))
    m = d + rng.uniform(-1, 1, (5, 5)) * d
    mask = rng.random((5, 5)) > 0.5
    a = loss_distilled_matting(d, m, mask)
    assert 0 <= a <= 1
    p, t = rng.random((5, 5, 3)), rng.random((5, 5, 3))
    assert loss_l1(p, t, mask) == loss_l1(t, p, mask) >= 0
    # matted with the same maximum: symmetric under the swap
    m2 = d.copy()
    m2[d < d.max()] *= 0.5
    assert loss_distilled_matting(d, m2, mask) == pytest.approx(loss_distilled_matting(m2, d, mask))


# -- stage totals -----------------------------------------------------------

def test_stage1_examples():
    assert stage1_total(1, 0, 0) == 1.0
    assert stage1_total(0, 1, 1) == 0.0104
    assert stage1_total(0, 0, 0) == 0


def test_stage2_examples():
    assert stage2_total(1, 0, 0, 0) == 1.0
    assert stage2_total(0, 1, 1, 0) == 0.26
    assert two_view_total(0.2, 0.4) == pytest.approx(0.3)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=4, max_size=4), st.floats(0.01, 1))
def test_stage_totals_linear(parts, delta):
    w = LossWeights()
    l1, lp, lds, lm = parts
    base = stage1_total(l1, lp, lds)
    assert stage1_total(l1, lp + delta, lds) - base == pytest.approx(w.alpha_p * delta, abs=1e-12)
    assert stage1_total(l1, lp, lds + delta) - base == pytest.approx(w.alpha_ds * delta, abs=1e-12)
    b2 = stage2_total(base, lp, lds, lm)
    assert stage2_total(base, lp + delta, lds, lm) - b2 == pytest.approx(w.alpha_dm * delta, abs=1e-12)
    assert stage2_total(base, lp, lds + delta, lm) - b2 == pytest.approx(w.alpha_dc * delta, abs=1e-12)
    assert stage2_total(base, lp, lds, lm + delta) - b2 == pytest.approx(delta, abs=1e-12)


def test_weights_validation():
    with pytest.raises(GridError):
        LossWeights(alpha_p=-1)


# -- feature extractor ------------------------------------------------------

def test_random_features_shapes_and_determinism(rng):
    img = rng.random((16, 20, 3))
    a = random_features(img)
    b = random_features(img)
    assert [f.shape for f in a] == [(8, 8, 10), (16, 4, 5), (32, 2, 3)]
    for x, y in zip(a, b):
        assert x.tobytes() == y.tobytes()
    disp = random_features(rng.uniform(1, 9, (16, 20)))
    assert disp[-1].shape == a[-1].shape
