import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halodeconv.imaging import (Convolver, as_image, convolve, correlate, crop,
                                dilate, dilate_by, erode, flip_center,
                                largest_component, zero_pad)

from conftest import brute_convolve


@pytest.mark.parametrize("shape", [(8, 8), (7, 9), (6, 5), (1, 4)])
def test_convolution_matches_loop_oracle(rng, shape):
    a = rng.standard_normal(shape)
    b = rng.standard_normal(shape)
    ref = brute_convolve(a, b)
    got = convolve(a, b)
    assert np.max(np.abs(got - ref)) <= 1e-10 * np.max(np.abs(ref))


def test_centred_delta_is_identity(rng):
    a = rng.standard_normal((10, 11))
    delta = np.zeros_like(a)
    delta[5, 5] = 1.0
    np.testing.assert_allclose(convolve(a, delta), a, atol=1e-12)


def test_full_convolution_conserves_mass(rng):
    a = rng.random((9, 12))
    b = rng.random((9, 12))
    full = convolve(a, b, crop=False)
    assert full.shape == (17, 23)
    assert full.sum() == pytest.approx(a.sum() * b.sum(), rel=1e-12)


def _rel(x, y):
    return abs(x - y) / max(abs(x), abs(y), 1e-300)


def test_adjoint_identity_seeded_triples():
    # correlate is the adjoint once the kernel frame has room for its flip
    worst = 0.0
    for seed in range(100):
        g = np.random.default_rng(seed)
        shape = tuple(g.integers(4, 20, size=2))
        a, b, c = (zero_pad(g.standard_normal(shape), 2) for _ in range(3))
        worst = max(worst, _rel(np.vdot(convolve(a, b), c), np.vdot(a, correlate(c, b))))
    assert worst < 1e-10


def test_convolver_adjoint_exact_any_size():
    worst = 0.0
    for seed in range(100):
        g = np.random.default_rng(1000 + seed)
        shape = tuple(g.integers(2, 20, size=2))
        a, b, c = (g.standard_normal(shape) for _ in range(3))
        conv = Convolver(b)
        worst = max(worst, _rel(np.vdot(conv(a), c), np.vdot(a, conv.adjoint(c))))
    assert worst < 1e-10


def test_correlate_matches_flipped_oracle(rng):
    a = rng.standard_normal((8, 8))
    b = rng.standard_normal((8, 8))
    ref = brute_convolve(a, flip_center(b))
    assert np.max(np.abs(correlate(a, b) - ref)) <= 1e-10 * np.max(np.abs(ref))


def test_correlate_symmetric_kernel_is_convolution(rng):
    a = rng.standard_normal((9, 9))
    b = rng.standard_normal((9, 9))
    b = b + b[::-1, ::-1]
    np.testing.assert_allclose(correlate(a, b), convolve(a, b), atol=1e-12)


def test_convolver_adjoint_equals_correlate_odd(rng):
    a = rng.standard_normal((11, 9))
    k = rng.standard_normal((11, 9))
    np.testing.assert_allclose(Convolver(k).adjoint(a), correlate(a, k), atol=1e-11)


def test_flip_center_is_involution_on_odd_frames(rng):
    b = rng.standard_normal((7, 9))
    np.testing.assert_array_equal(flip_center(flip_center(b)), b)
    assert flip_center(b)[3, 4] == b[3, 4]


def test_flip_center_even_frame_drops_edge():
    b = np.arange(16.0).reshape(4, 4)
    f = flip_center(b)
    assert np.all(f[0, :] == 0) and np.all(f[:, 0] == 0)
    assert f[2, 2] == b[2, 2] and f[1, 3] == b[3, 1]


def test_convolver_rejects_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        Convolver(np.ones((4, 4))).forward(np.ones((4, 5)))
    with pytest.raises(ValueError, match="dimension mismatch"):
        convolve(np.ones((3, 3)), np.ones((4, 4)))


@pytest.mark.parametrize("bad", [np.ones(4), np.full((2, 2), np.nan), np.zeros((0, 3))])
def test_as_image_rejects(bad):
    with pytest.raises(ValueError):
        as_image(bad)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 15), st.integers(1, 15), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_zero_pad_crop_roundtrip(ny, nx, factor):
    a = np.arange(ny * nx, dtype=float).reshape(ny, nx) + 1
    big = zero_pad(a, factor)
    assert big.shape[0] >= ny * factor - 1e-9 and big.sum() == a.sum()
    np.testing.assert_array_equal(crop(big, a.shape), a)


def test_zero_pad_rejects_shrink():
    with pytest.raises(ValueError):
        zero_pad(np.ones((3, 3)), 0.5)


def test_dilate_by_is_chebyshev_ball():
    m = np.zeros((11, 11), bool)
    m[5, 5] = True
    grown = dilate_by(m, 3)
    assert grown.sum() == 49 and grown[2:9, 2:9].all()


def test_closing_fills_single_hole():
    m = np.ones((7, 7), bool)
    m[3, 3] = False
    closed = erode(dilate(m))
    assert closed[3, 3]


def test_largest_component_eight_connected():
    m = np.zeros((8, 8), bool)
    m[1, 1] = m[2, 2] = m[3, 3] = True      # diagonal chain, 3 px
    m[6, 5:8] = True
    m[5, 7] = True                           # 4 px
    lc = largest_component(m)
    assert lc.sum() == 4 and lc[5, 7]
    assert not largest_component(np.zeros((3, 3), bool)).any()
