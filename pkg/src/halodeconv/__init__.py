"""Blind AO-PSF deconvolution of extended bodies and moon detection."""

from .detection import (DetectionCandidate, DetectionMaps, detect,
                        extract_candidates, median_coronagraph_baseline,
                        significance_map)
from .noise import NoiseModel, estimate_noise
from .pipeline import PipelineConfig, PipelineError, PipelineResult, run_blind_deconv
from .psfcore import MoffatParams, eval_moffat, fit_moffat
from .simulator import SceneSpec, SceneTruth, make_scene, simulate_frame

__version__ = "0.1.0"

__all__ = [
    "DetectionCandidate", "DetectionMaps", "MoffatParams", "NoiseModel",
    "PipelineConfig", "PipelineError", "PipelineResult", "SceneSpec",
    "SceneTruth", "detect", "estimate_noise", "eval_moffat",
    "extract_candidates", "fit_moffat", "make_scene",
    "median_coronagraph_baseline", "run_blind_deconv", "significance_map",
    "simulate_frame",
]
