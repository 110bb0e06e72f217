"""Command-line interface: ``halodeconv {simulate,run,detect,baseline}``.

Exit codes: 0 on success, 1 for bad input (missing files, malformed
images or configs), 2 when a numerical stage fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, dump_config, load_config
from .detection import detect, median_coronagraph_baseline
from .io import ImageFormatError, read_image, render_png, write_image
from .noise import NoiseModel
from .pipeline import PipelineError, run_blind_deconv
from .simulator import make_scene, save_truth, simulate_frame

log = logging.getLogger("halodeconv")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2

RESULT_IMAGES = ("object", "psf", "d_mod", "residuals", "rob", "weights", "objmask")


class InputError(Exception):
    pass


def _config(path):
    if path is None:
        return RunConfig()
    if not Path(path).exists():
        raise InputError(f"config file not found: {path}")
    return load_config(path)


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, "to_dict"):
        return value.to_dict()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def cmd_simulate(args):
    cfg = _config(args.config)
    spec = cfg.simulator
    if args.seed is not None:
        spec.seed = args.seed
    truth = make_scene(spec)
    frame = simulate_frame(truth)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_image(frame, out / "frame.fits")
    save_truth(truth, out / "truth")
    if args.png:
        render_png(frame, out / "frame.png", stretch="dual-linear")
    log.info("wrote %s (%d moons, %d outliers)", out / "frame.fits",
             len(truth.moons), len(truth.outliers))
    return EXIT_OK


def save_result(res, out, png=False):
    """Persist a :class:`PipelineResult` as FITS images and ``report.json``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for name in RESULT_IMAGES:
        write_image(getattr(res, name), out / f"{name}.fits")
    report = dict(res.report)
    report["noise"] = res.noise.to_dict()
    report["psf_core"] = res.psf_core.to_dict()
    _write_json(report, out / "report.json")
    if png:
        render_png(res.object, out / "object.png", stretch="dual-linear")
        render_png(res.psf, out / "psf.png", stretch="log")
        render_png(res.residuals, out / "residuals.png", stretch="linear")


def _run_one(frame_path, out, config_path, png):
    """Worker for one frame; returns an exit code (picklable for --jobs)."""
    cfg = _config(config_path)
    d = read_image(frame_path)
    res = run_blind_deconv(d, cfg.pipeline)
    save_result(res, out, png)
    return EXIT_OK


def cmd_run(args):
    _config(args.config)  # fail fast on a bad config
    frames = [Path(p) for p in args.inputs]
    for p in frames:
        if not p.exists():
            raise InputError(f"input frame not found: {p}")
    out = Path(args.out)
    if len(frames) == 1:
        targets = [out]
    else:
        stems = [p.stem for p in frames]
        if len(set(stems)) != len(stems):
            raise InputError("input frames must have distinct file names")
        targets = [out / s for s in stems]
    jobs = [(str(p), str(t), args.config, args.png) for p, t in zip(frames, targets)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_run_one, *j) for j in jobs]
            codes = [f.result() for f in futures]
    else:
        codes = [_run_one(*j) for j in jobs]
    return max(codes)


def load_result_for_detection(directory):
    """Read the files written by ``run`` that ``detect`` needs."""
    src = Path(directory)
    report_path = src / "report.json"
    if not report_path.exists():
        raise InputError(f"no report.json in {src}")
    report = json.loads(report_path.read_text())
    images = {}
    for name in ("residuals", "psf", "d_mod", "rob", "objmask"):
        path = src / f"{name}.fits"
        if not path.exists():
            raise InputError(f"missing result image: {path}")
        images[name] = read_image(path)
    images["objmask"] = images["objmask"] > 0.5
    images["noise"] = NoiseModel(**report["noise"])
    return images


def cmd_detect(args):
    cfg = _config(args.config)
    threshold = args.threshold if args.threshold is not None else cfg.detection.threshold
    r = load_result_for_detection(args.inputs)
    maps, cands, w = detect(r["residuals"], r["psf"], r["d_mod"], r["rob"],
                            r["objmask"], r["noise"], threshold=threshold,
                            iso_thresh=cfg.detection.iso_thresh,
                            vicinity=cfg.detection.vicinity)
    out = Path(args.out or args.inputs)
    out.mkdir(parents=True, exist_ok=True)
    write_image(maps.sigma_map, out / "sigma.fits")
    write_image(maps.valid, out / "valid.fits")
    write_image(w, out / "detection_weights.fits")
    _write_json([c.to_dict() for c in cands], out / "candidates.json")
    if args.png:
        render_png(maps.sigma_map, out / "sigma.png", stretch="linear")
    for c in cands:
        print(f"{c.x:5d} {c.y:5d} {c.sigma:8.2f} {c.flux:12.4g}")
    return EXIT_OK


def cmd_baseline(args):
    if not Path(args.inputs).exists():
        raise InputError(f"input frame not found: {args.inputs}")
    d = read_image(args.inputs)
    img = median_coronagraph_baseline(d, args.window)
    out = Path(args.out) if args.out else Path(args.inputs).with_name("coronagraph.fits")
    write_image(img, out)
    if args.png:
        render_png(img, out.with_suffix(".png"), stretch="linear")
    return EXIT_OK


def cmd_show_config(args):
    sys.stdout.write(dump_config(_config(args.config)))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="halodeconv",
        description="Blind PSF-wing deconvolution of extended bodies and "
                    "moon detection in the residual halo.",
        epilog="Run 'halodeconv config' to print every config key with its default.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic frame and its truth")
    p.add_argument("--config", help="INI config ([simulator] section)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override simulator.seed")
    p.add_argument("--png", action="store_true", help="also write a preview")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="blind deconvolution of one or more frames")
    p.add_argument("--config", help="INI config")
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   help="input frame(s): FITS or raw float64 with JSON sidecar")
    p.add_argument("--out", required=True,
                   help="output directory (one subdirectory per frame if several)")
    p.add_argument("--jobs", type=int, default=1, help="frames processed in parallel")
    p.add_argument("--png", action="store_true", help="also write previews")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("detect", help="significance map and moon candidates")
    p.add_argument("--config", help="INI config ([detection] section)")
    p.add_argument("--in", dest="inputs", required=True, help="directory written by 'run'")
    p.add_argument("--threshold", type=float, help="detection threshold in sigma (default 5)")
    p.add_argument("--out", help="output directory (default: the input directory)")
    p.add_argument("--png", action="store_true")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("baseline", help="median-filter coronagraph image")
    p.add_argument("--in", dest="inputs", required=True, help="input frame")
    p.add_argument("--window", type=int, default=9, help="odd median window (default 9)")
    p.add_argument("--out", help="output image (default: coronagraph.fits next to input)")
    p.add_argument("--png", action="store_true")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("config", help="print the effective configuration")
    p.add_argument("--config", help="INI config to merge over the defaults")
    p.set_defaults(func=cmd_show_config)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; 2 is reserved for numerics
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, ConfigError, ImageFormatError, FileNotFoundError) as exc:
        print(f"halodeconv: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PipelineError as exc:
        if exc.stage in ("input", "binarize"):
            print(f"halodeconv: input error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        print(f"halodeconv: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"halodeconv: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"halodeconv: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
