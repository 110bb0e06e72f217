import json

import numpy as np
import pytest

from halodeconv import cli
from halodeconv.cli import EXIT_INPUT, EXIT_OK, load_result_for_detection, main
from halodeconv.detection import detect
from halodeconv.io import read_image, write_image
from halodeconv.simulator import load_truth

pytestmark = pytest.mark.slow

SMALL_INI = """
[simulator]
size = 96
moon_distances = 8, 12, 6
n_cosmic = 3
n_dead = 4
[object]
mu = 0.3
max_iters = 120
[psf]
mu = 5.0
irls_outer = 2
max_iters = 120
[pipeline]
outer_max = 1
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "small.ini").write_text(SMALL_INI)
    return root


@pytest.fixture(scope="module")
def simulated(workdir):
    assert main(["simulate", "--config", str(workdir / "small.ini"),
                 "--out", str(workdir / "sim"), "--png"]) == EXIT_OK
    return workdir / "sim"


@pytest.fixture(scope="module")
def ran(workdir, simulated):
    out = workdir / "run"
    assert main(["run", "--config", str(workdir / "small.ini"),
                 "--in", str(simulated / "frame.fits"), "--out", str(out)]) == EXIT_OK
    return out


def test_simulate_outputs(simulated):
    frame = read_image(simulated / "frame.fits")
    assert frame.shape == (96, 96)
    truth = load_truth(simulated / "truth")
    assert len(truth.moons) == 3
    assert (simulated / "frame.png").exists()


def test_run_writes_result(ran):
    for name in cli.RESULT_IMAGES:
        assert (ran / f"{name}.fits").exists()
    report = json.loads((ran / "report.json").read_text())
    assert {"noise", "psf_core", "mu_obj", "mu_psf", "alternations"} <= set(report)
    assert read_image(ran / "psf.fits").sum() == pytest.approx(1.0, rel=1e-12)


def test_detect_from_files_matches_memory(ran, capsys):
    assert main(["detect", "--in", str(ran), "--threshold", "4"]) == EXIT_OK
    printed = capsys.readouterr().out
    r = load_result_for_detection(ran)
    maps, cands, _ = detect(r["residuals"], r["psf"], r["d_mod"], r["rob"],
                            r["objmask"], r["noise"], threshold=4.0)
    on_disk = read_image(ran / "sigma.fits")
    assert np.max(np.abs(on_disk - maps.sigma_map)) <= 1e-12
    listed = json.loads((ran / "candidates.json").read_text())
    assert listed == [c.to_dict() for c in cands]
    assert len(printed.splitlines()) == len(cands)


def test_run_deterministic_report(workdir, simulated, ran):
    out = workdir / "run2"
    assert main(["run", "--config", str(workdir / "small.ini"),
                 "--in", str(simulated / "frame.fits"), "--out", str(out)]) == EXIT_OK
    assert (out / "report.json").read_bytes() == (ran / "report.json").read_bytes()
    assert (out / "psf.fits").read_bytes() == (ran / "psf.fits").read_bytes()


def test_run_two_frames_layout(workdir, simulated, tmp_path):
    frame = read_image(simulated / "frame.fits")
    write_image(frame, tmp_path / "a.fits")
    write_image(frame, tmp_path / "b.raw")
    code = main(["run", "--config", str(workdir / "small.ini"), "--in",
                 str(tmp_path / "a.fits"), str(tmp_path / "b.raw"),
                 "--out", str(tmp_path / "out")])
    assert code == EXIT_OK
    a = read_image(tmp_path / "out" / "a" / "object.fits")
    b = read_image(tmp_path / "out" / "b" / "object.fits")
    assert np.array_equal(a, b)


def test_baseline(simulated, tmp_path):
    out = tmp_path / "cor.fits"
    assert main(["baseline", "--in", str(simulated / "frame.fits"),
                 "--window", "5", "--out", str(out)]) == EXIT_OK
    assert read_image(out).shape == (96, 96)
    assert main(["baseline", "--in", str(simulated / "frame.fits"),
                 "--window", "4", "--out", str(out)]) == EXIT_INPUT


def test_config_prints_effective(workdir, capsys):
    assert main(["config", "--config", str(workdir / "small.ini")]) == EXIT_OK
    text = capsys.readouterr().out
    assert "size = 96" in text and "[detection]" in text


@pytest.mark.parametrize("argv", [
    ["run", "--in", "missing.fits", "--out", "x"],
    ["detect", "--in", "no-such-dir"],
    ["baseline", "--in", "missing.fits"],
    ["simulate", "--config", "missing.ini", "--out", "x"],
])
def test_missing_input_exit_code(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path, capsys):
    (tmp_path / "bad.ini").write_text("[object]\nmu_obj = 1\n")
    assert main(["config", "--config", str(tmp_path / "bad.ini")]) == EXIT_INPUT
    assert "unknown key" in capsys.readouterr().err


def test_blank_frame_exit_code(tmp_path):
    write_image(np.zeros((32, 32)), tmp_path / "blank.fits")
    assert main(["run", "--in", str(tmp_path / "blank.fits"),
                 "--out", str(tmp_path / "o")]) == EXIT_INPUT


def test_corrupt_frame_exit_code(tmp_path):
    (tmp_path / "bad.fits").write_bytes(b"garbage")
    assert main(["run", "--in", str(tmp_path / "bad.fits"),
                 "--out", str(tmp_path / "o")]) == EXIT_INPUT


def test_usage_error_is_input_error(capsys):
    assert main(["frobnicate"]) == EXIT_INPUT
    assert main(["--help"]) == EXIT_OK


def test_numerical_failure_exit_code(simulated, tmp_path, monkeypatch):
    from halodeconv.pipeline import PipelineError

    def boom(d, cfg):
        raise PipelineError("psf", FloatingPointError("non-finite cost"))

    monkeypatch.setattr(cli, "run_blind_deconv", boom)
    assert main(["run", "--in", str(simulated / "frame.fits"),
                 "--out", str(tmp_path / "o")]) == cli.EXIT_NUMERIC
