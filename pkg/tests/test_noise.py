import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from halodeconv.noise import (NoiseModel, estimate_background, estimate_noise,
                              weights_from_data, weights_from_model)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(-1.0, 1.0)
    with pytest.raises(ValueError):
        NoiseModel(1.0, 0.0)
    with pytest.raises(ValueError):
        NoiseModel(np.nan, 1.0)


def test_variance_clamps_negative_intensity():
    nm = NoiseModel(2.0, 3.0)
    np.testing.assert_array_equal(nm.variance(np.array([-5.0, 0.0, 4.0])), [3, 3, 11])


@given(st.floats(0, 10), st.floats(0.01, 100), st.floats(0.01, 100))
def test_scaled_variance(eta, v_ron, c):
    nm = NoiseModel(eta, v_ron)
    x = np.linspace(-1, 50, 7)
    np.testing.assert_allclose(nm.scaled(c).variance(x), c * nm.variance(x), rtol=1e-12)


def test_weights_from_data_excluded():
    nm = NoiseModel(1.0, 4.0)
    d = np.array([[0.0, 12.0], [-3.0, 4.0]])
    excl = np.array([[False, False], [False, True]])
    w = weights_from_data(d, nm, excl)
    np.testing.assert_array_equal(w, [[0.25, 1 / 16], [0.25, 0.0]])


def test_weights_from_model_hard_discard():
    nm = NoiseModel(0.0, 2.0)
    rob = np.array([[1.0, 0.5], [0.51, 0.0]])
    w = weights_from_model(np.zeros((2, 2)), nm, rob, 0.5)
    np.testing.assert_array_equal(w, [[0.5, 0.0], [0.5, 0.0]])
    with pytest.raises(ValueError):
        weights_from_model(np.zeros((2, 2)), nm, rob, 1.0)


def test_estimate_background_ignores_object():
    d = np.full((64, 64), 7.0)
    d[20:40, 20:40] = 1000.0
    mask = d > 500
    assert estimate_background(d, mask) == 7.0


def test_estimate_noise_pure_gaussian():
    g = np.random.default_rng(7)
    d = 3.0 * g.standard_normal((128, 128))
    nm = estimate_noise(d)
    assert 8.1 <= nm.v_ron <= 9.9
    assert nm.eta < 0.05


def test_estimate_noise_bright_flat_region():
    g = np.random.default_rng(8)
    signal = np.zeros((128, 128))
    signal[32:96, 32:96] = 500.0
    truth = NoiseModel(2.0, 9.0)
    d = signal + g.standard_normal(signal.shape) * np.sqrt(truth.variance(signal))
    nm = estimate_noise(d, signal > 0)
    assert nm.eta == pytest.approx(2.0, rel=0.2)
    assert nm.v_ron == pytest.approx(9.0, rel=0.2)


def test_estimate_noise_disk_on_halo():
    # the background carries photon noise from a smooth halo
    g = np.random.default_rng(3)
    yy, xx = np.mgrid[:256, :256]
    r = np.hypot(xx - 128, yy - 128)
    signal = np.where(r < 40, 1000.0, 0.0) + 300.0 / (1 + (r / 40) ** 2)
    truth = NoiseModel(1.0, 25.0)
    d = signal + g.standard_normal(signal.shape) * np.sqrt(truth.variance(signal))
    nm = estimate_noise(d, r < 40)
    assert nm.eta == pytest.approx(1.0, rel=0.25)
    assert nm.v_ron == pytest.approx(25.0, rel=0.25)


def test_estimate_noise_offset_invariance():
    g = np.random.default_rng(9)
    signal = np.zeros((96, 96))
    signal[30:60, 30:60] = 800.0
    d = signal + g.standard_normal(signal.shape) * np.sqrt(signal + 16.0)
    mask = signal > 0
    base = estimate_noise(d - estimate_background(d, mask), mask)
    shifted = d + 123.0
    other = estimate_noise(shifted - estimate_background(shifted, mask), mask)
    assert other.eta == pytest.approx(base.eta, rel=1e-9)
    assert other.v_ron == pytest.approx(base.v_ron, rel=1e-9)


def test_estimate_noise_rejects_constant():
    with pytest.raises(ValueError, match="zero variance"):
        estimate_noise(np.zeros((64, 64)))


def test_estimate_noise_needs_background():
    d = np.random.default_rng(0).random((20, 20))
    with pytest.raises(ValueError, match="background pixels"):
        estimate_noise(d, np.ones((20, 20), bool))
