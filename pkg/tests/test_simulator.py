import math

import numpy as np
import pytest

from halodeconv.detection import significance_map
from halodeconv.io import write_image
from halodeconv.noise import NoiseModel
from halodeconv.psfcore import MoffatParams
from halodeconv.simulator import (SceneSpec, SceneTruth, load_truth, make_object,
                                  make_psf, make_scene, noiseless_frame,
                                  predicted_significance, save_truth,
                                  simulate_frame)

SMALL = SceneSpec(size=96, moon_distances=(8.0, 12.0, 6.0), n_cosmic=3, n_dead=4)


def test_disk_area():
    obj = make_object("disk", (201, 201), level=2.0, radius=40.0)
    assert obj.sum() / 2.0 == pytest.approx(math.pi * 40 ** 2, rel=0.01)
    assert set(np.unique(obj)) == {0.0, 2.0}


def test_dumbbell_gradient_and_support():
    obj = make_object("dumbbell", (128, 128), level=100.0)
    inside = obj[obj > 0]
    assert inside.min() == pytest.approx(95.0) and inside.max() == pytest.approx(105.0)
    assert obj[:, :10].sum() == 0 and obj[:10, :].sum() == 0


def test_object_kind_errors(tmp_path):
    with pytest.raises(ValueError):
        make_object("torus")
    with pytest.raises(ValueError):
        make_object("disk", level=0.0)


def test_mask_file_roundtrip(tmp_path):
    m = make_object("disk", (32, 32), radius=5.0)
    write_image(m, tmp_path / "m.fits")
    np.testing.assert_array_equal(make_object("mask_file", path=tmp_path / "m.fits"), m)


def test_psf_unit_sum_positive():
    core = MoffatParams(1.0, 32, 32, 3.0, 3.0, 0.0, 2.0)
    for count in (0, 6):
        psf = make_psf(core, (64, 64), ring_radius=15.0, count=count, seed=3)
        assert psf.sum() == pytest.approx(1.0, rel=1e-12)
        assert psf.min() > 0
        assert np.unravel_index(psf.argmax(), psf.shape) == (32, 32)


def test_speckles_raise_ring_level():
    core = MoffatParams(1.0, 64, 64, 3.0, 3.0, 0.0, 2.0)
    plain = make_psf(core, (128, 128), 30.0, 0)
    speckled = make_psf(core, (128, 128), 30.0, 8, contrast=0.5, seed=2)
    ratio = speckled / plain * (speckled.sum() / plain.sum())
    assert ratio.max() > 1.3


def test_scene_deterministic():
    a, b = make_scene(SMALL), make_scene(SMALL)
    assert a.to_dict() == b.to_dict()
    np.testing.assert_array_equal(simulate_frame(a), simulate_frame(b))
    other = make_scene(SceneSpec(**{**SMALL.__dict__, "seed": 2}))
    assert other.to_dict() != a.to_dict()


def test_scene_contents():
    t = make_scene(SMALL)
    assert len(t.moons) == 3
    kinds = [o[3] for o in t.outliers]
    assert kinds.count("cosmic") == 3 and kinds.count("dead") == 4
    d = simulate_frame(t)
    for x, y, amp, kind in t.outliers:
        if kind == "dead":
            assert d[y, x] == 0.0
        else:
            assert amp > 0


def test_moon_fluxes_hit_target_significance():
    t = make_scene(SMALL)
    for (x, y, f), target in zip(t.moons, SMALL.moon_sigmas):
        assert predicted_significance(t, x, y, f) == pytest.approx(target, rel=1e-12)


def test_moons_detected_with_truth_model():
    # matched filter on residuals against the true model, true weights
    t = make_scene(SMALL)
    t.outliers = []
    d = simulate_frame(t)
    signal = noiseless_frame(SceneTruth(t.object_true, t.psf_true, noise=t.noise))
    w = 1.0 / t.noise.variance(signal)
    sig = significance_map(d - signal, t.psf_true, w).sigma_map
    for (x, y, _), target in zip(t.moons, SMALL.moon_sigmas):
        assert abs(sig[y, x] - target) < 4.0


def test_noise_variance_monte_carlo():
    obj = make_object("disk", (48, 48), level=400.0, radius=10.0)
    psf = np.zeros((48, 48))
    psf[24, 24] = 1.0
    nm = NoiseModel(1.5, 9.0)
    frames = np.stack([simulate_frame(SceneTruth(obj, psf, noise=nm, seed=s))
                       for s in range(400)])
    var = frames.var(axis=0)
    inside, outside = obj > 0, obj == 0
    assert var[inside].mean() == pytest.approx(1.5 * 400 + 9.0, rel=0.03)
    assert var[outside].mean() == pytest.approx(9.0, rel=0.03)


def test_truth_validation():
    psf = np.zeros((8, 8))
    psf[4, 4] = 1.0
    obj = np.zeros((8, 8))
    obj[2, 2] = 1.0
    with pytest.raises(ValueError, match="unit sum"):
        SceneTruth(obj, psf * 2)
    with pytest.raises(ValueError, match="on the object"):
        SceneTruth(obj, psf, moons=[(2, 2, 1.0)])
    with pytest.raises(ValueError, match="kind"):
        SceneTruth(obj, psf, outliers=[(1, 1, 0.0, "bird")])


def test_save_load_truth(tmp_path):
    t = make_scene(SMALL)
    save_truth(t, tmp_path / "truth")
    back = load_truth(tmp_path / "truth")
    assert back.to_dict() == t.to_dict()
    np.testing.assert_array_equal(back.psf_true, t.psf_true)
    np.testing.assert_array_equal(simulate_frame(back), simulate_frame(t))
