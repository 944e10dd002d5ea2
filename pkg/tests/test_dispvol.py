import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereokit.dispvol import (
    LEFT,
    RIGHT,
    extract_disparity,
    make_schedule,
    postprocess_flip,
    project_logits_to_right,
    shift_constant,
    softmax_volume,
    synthesize_right,
    warp_horizontal,
)
from stereokit.imgio import GridError

from oracles import scalar_sample


# -- schedule ---------------------------------------------------------------

def test_schedule_endpoints_and_midpoint():
    s = make_schedule(2, 300, 48)
    assert s.n_planes == 49
    assert s.d[0] == pytest.approx(2.0, rel=1e-12)
    assert s.d[48] == 300.0
    assert s.d[24] == pytest.approx(24.494897427831784, rel=1e-12)


@pytest.mark.parametrize("args", [(0, 300, 4), (5, 5, 4), (300, 2, 4), (2, 300, 0), (-1, 3, 2)])
def test_schedule_rejects(args):
    with pytest.raises(GridError):
        make_schedule(*args)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 50), st.floats(1.01, 100), st.integers(1, 128))
def test_schedule_geometric(d_min, ratio, n):
    s = make_schedule(d_min, d_min * ratio, n)
    assert np.all(np.diff(s.d) > 0)
    r = s.d[1:] / s.d[:-1]
    np.testing.assert_allclose(r, r[0], rtol=1e-9)
    assert s.d[0] == pytest.approx(d_min, rel=1e-9)
    assert s.d[-1] == d_min * ratio


# -- softmax ----------------------------------------------------------------

def test_softmax_uniform():
    np.testing.assert_allclose(softmax_volume(np.zeros((4, 2, 3))), 0.25)


def test_softmax_no_overflow():
    logits = np.zeros((4, 1, 1))
    logits[0] = 1000.0
    p = softmax_volume(logits)[:, 0, 0]
    np.testing.assert_allclose(p, [1, 0, 0, 0], atol=1e-12)


def test_softmax_two_planes():
    logits = np.array([1.0, 2.0]).reshape(2, 1, 1)
    p = softmax_volume(logits)[:, 0, 0]
    np.testing.assert_allclose(p, [0.2689414213699951, 0.7310585786300049], rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-50, 50))
def test_softmax_shift_invariance(seed, shift):
    logits = np.random.default_rng(seed).normal(0, 5, (6, 3, 4))
    offset = shift * np.random.default_rng(seed + 1).random((1, 3, 4))
    p = softmax_volume(logits)
    q = softmax_volume(logits + offset)
    np.testing.assert_allclose(p.sum(axis=0), 1.0, atol=1e-6)
    np.testing.assert_allclose(p, q, atol=1e-6)
    np.testing.assert_array_equal(p.argmax(axis=0), q.argmax(axis=0))


# -- warp -------------------------------------------------------------------

def test_zero_warp_identity(backend, rng):
    img = rng.random((6, 9, 3))
    out, valid = warp_horizontal(img, np.zeros((6, 9)), LEFT)
    assert out.tobytes() == img.tobytes()
    assert valid.all()
    out, valid = warp_horizontal(img[:, :, 0], np.zeros((6, 9)), RIGHT)
    np.testing.assert_array_equal(out, img[:, :, 0])


def test_integer_shift_ramp(backend):
    w = 10
    ramp = np.tile(np.arange(w) / w, (3, 1))
    out, valid = warp_horizontal(ramp, np.ones((3, w)), LEFT)
    np.testing.assert_allclose(out[:, :-1], np.tile((np.arange(w - 1) + 1) / w, (3, 1)), atol=1e-15)
    assert not valid[:, -1].any() and valid[:, :-1].all()
    assert np.all(out[:, -1] == 0)


def test_half_pixel_shift_ramp(backend):
    w = 10
    ramp = np.tile(np.arange(w) / w, (2, 1))
    out, valid = warp_horizontal(ramp, np.full((2, w), 0.5), LEFT)
    np.testing.assert_allclose(out[:, :-1], np.tile((np.arange(w - 1) + 0.5) / w, (2, 1)), atol=1e-15)
    assert not valid[:, -1].any()


def test_right_sign_samples_backwards(backend):
    row = np.arange(8, dtype=float)[None, :]
    out, valid = warp_horizontal(row, np.full((1, 8), 2.0), RIGHT)
    np.testing.assert_array_equal(out[0, 2:], np.arange(6.0))
    assert not valid[0, :2].any()


def test_warp_matches_scalar_oracle(backend, rng):
    img = rng.random((5, 13, 3))
    disp = rng.uniform(-3, 8, (5, 13))
    for sign, step in ((LEFT, 1.0), (RIGHT, -1.0)):
        out, valid = warp_horizontal(img, disp, sign)
        for y in range(5):
            for x in range(13):
                for c in range(3):
                    ref = scalar_sample(list(img[y, :, c]), x + step * disp[y, x])
                    if ref is None:
                        assert not valid[y, x] and out[y, x, c] == 0.0
                    else:
                        assert valid[y, x] and out[y, x, c] == ref


def test_warp_shape_mismatch():
    with pytest.raises(GridError, match="shape"):
        warp_horizontal(np.zeros((4, 5)), np.zeros((4, 6)))
    with pytest.raises(GridError):
        warp_horizontal(np.zeros((4, 5)), np.zeros((4, 5)), "up")


# -- projection -------------------------------------------------------------

def test_project_zero_logits_uniform(backend):
    s = make_schedule(2, 300, 3)
    p = project_logits_to_right(np.zeros((4, 5, 6)), s)
    np.testing.assert_allclose(p, 0.25)


def test_project_two_planes_symmetric():
    s = make_schedule(2, 3, 1)
    p = project_logits_to_right(np.zeros((2, 4, 10)), s)
    np.testing.assert_allclose(p[:, :, :7], 0.5)


def test_project_one_hot_shifts_mass(backend):
    s = make_schedule(2, 32, 4)        # d = 2, 4, 8, 16, 32
    k = 1
    logits = np.zeros((5, 3, 20))
    logits[k, :, 3:7] = 50.0
    p = project_logits_to_right(logits, s)
    expected, _ = shift_constant(softmax_volume(logits)[k], s.d[k], LEFT)
    np.testing.assert_allclose(p[k, :, :16], expected[:, :16], atol=1e-12)
    # columns 3..6 moved left by d_k = 4 land on 0..2 (column -1 is outside)
    assert np.all(p[k, :, :3] > 0.99)
    assert np.all(p[k, :, 3:16] < 0.3)


def test_project_plane_mismatch():
    with pytest.raises(GridError, match="plane count"):
        project_logits_to_right(np.zeros((3, 2, 2)), make_schedule(2, 300, 48))


# -- synthesis --------------------------------------------------------------

def brute_force_synth(img, probs, d):
    h, w, c = img.shape
    out = np.zeros_like(img)
    for y in range(h):
        for x in range(w):
            for ch in range(c):
                acc = 0.0
                for k in range(len(d)):
                    v = scalar_sample(list(img[y, :, ch]), x + d[k])
                    acc += (0.0 if v is None else v) * probs[k, y, x]
                out[y, x, ch] = min(max(acc, 0.0), 1.0)
    return out


def test_synth_constant_image():
    s = make_schedule(2, 8, 2)
    probs = softmax_volume(np.random.default_rng(0).normal(size=(3, 6, 16)))
    out = synthesize_right(np.full((6, 16, 3), 0.5), probs, s)
    np.testing.assert_allclose(out[:, :16 - 8], 0.5, atol=1e-12)


def test_synth_single_plane_equals_shift(backend, rng):
    s = make_schedule(2, 300, 48)
    img = rng.random((8, 40, 3))
    probs = np.zeros((49, 8, 40))
    probs[0] = 1.0
    out = synthesize_right(img, probs, s)
    ref, _ = shift_constant(img, s.d[0], LEFT)
    np.testing.assert_allclose(out, ref, atol=1e-12)
    # d_0 == 2 (up to rounding): content moved left by two pixels
    np.testing.assert_allclose(out[:, :30], img[:, 2:32], atol=1e-12)


def test_synth_piecewise_matches_brute_force(backend, rng):
    s = make_schedule(1.5, 6, 3)
    img = rng.random((4, 12, 3))
    probs = np.zeros((4, 4, 12))
    probs[1, :, :6] = 1.0
    probs[3, :, 6:] = 1.0
    np.testing.assert_allclose(synthesize_right(img, probs, s), brute_force_synth(img, probs, s.d), atol=1e-12)


def test_synth_random_probs_brute_force(backend, rng):
    s = make_schedule(1, 5, 3)
    img = rng.random((3, 9, 3))
    probs = softmax_volume(rng.normal(size=(4, 3, 9)))
    np.testing.assert_allclose(synthesize_right(img, probs, s), brute_force_synth(img, probs, s.d), atol=1e-12)


# -- extraction -------------------------------------------------------------

def test_extract_one_hot():
    s = make_schedule(2, 300, 48)
    probs = np.zeros((49, 3, 3))
    probs[10] = 1.0
    np.testing.assert_allclose(extract_disparity(probs, s), s.d[10], rtol=1e-15)


def test_extract_two_planes():
    s = make_schedule(2, 300, 1)
    np.testing.assert_allclose(extract_disparity(np.full((2, 2, 2), 0.5), s), 151.0, rtol=1e-12)
    probs = np.stack([np.full((2, 2), 0.75), np.full((2, 2), 0.25)])
    np.testing.assert_allclose(extract_disparity(probs, s), 76.5, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 20))
def test_extract_bounded(seed, n):
    s = make_schedule(2, 300, n)
    probs = softmax_volume(np.random.default_rng(seed).normal(0, 10, (n + 1, 4, 4)))
    d = extract_disparity(probs, s)
    assert np.all(d >= 2) and np.all(d <= 300)


# -- post-processing --------------------------------------------------------

def test_postprocess_flip():
    a = np.full((3, 3), 10.0)
    np.testing.assert_array_equal(postprocess_flip(a, a), a)
    np.testing.assert_array_equal(postprocess_flip(a, np.full((3, 3), 20.0)), 15.0)
    assert np.all(np.isfinite(postprocess_flip(a, a * 3)))
    with pytest.raises(GridError):
        postprocess_flip(a, np.zeros((2, 3)))
