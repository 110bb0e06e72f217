"""Blind deconvolution of a single frame: core fit, object, PSF wings.

The three steps run once in order and the object and PSF steps are then
alternated until the total cost stops decreasing.  The object/PSF scale
degeneracy is fixed by keeping the PSF at unit sum.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from . import kernels
from .imaging import Convolver, as_image, check_same_shape, dilate_by
from .noise import NoiseModel, estimate_background, estimate_noise
from .objdeconv import ObjectSolverConfig, data_term_value_grad, solve_object
from .psfcore import (MoffatParams, binarize_object, eval_moffat, fit_moffat,
                      fit_zone)
from .psfdeconv import PsfSolverConfig, irls_weights, solve_psf, spike_weights

log = logging.getLogger(__name__)

MU_GRID = (1e-2, 1e-1, 1.0, 1e1, 1e2)


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class NoiseConfig:
    eta: Optional[float] = None
    v_ron: Optional[float] = None
    scale: float = 1.0
    subtract_background: bool = True


@dataclass
class CoreConfig:
    frac: float = 0.5
    fwhm_guess: float = 4.0
    max_iter: int = 200


@dataclass
class PipelineConfig:
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    core: CoreConfig = field(default_factory=CoreConfig)
    object: ObjectSolverConfig = field(default_factory=ObjectSolverConfig)
    psf: PsfSolverConfig = field(default_factory=PsfSolverConfig)
    # object support: core mask grown by this many pixels
    support_margin: int = 3
    outer_max: int = 4
    outer_tol: float = 1e-4
    mu_grid: Tuple[float, ...] = MU_GRID
    # iteration cap of the trial solves that rank the grid values
    mu_search_iters: int = 300


@dataclass
class PipelineResult:
    object: np.ndarray
    psf: np.ndarray
    d_mod: np.ndarray
    residuals: np.ndarray
    rob: np.ndarray
    weights: np.ndarray
    noise: NoiseModel
    psf_core: MoffatParams
    objmask: np.ndarray
    background: float
    report: dict = field(default_factory=dict)


def total_cost(d, o, h, w, mu_obj, eps_obj, mu_psf):
    """WLS data term plus both weighted regularizers."""
    d = as_image(d, "data")
    check_same_shape(d, o, h, w, names=["data", "object", "psf", "weights"])
    conv = Convolver(h)
    cost, _ = data_term_value_grad(d, conv(o), w, conv.adjoint)
    if mu_obj:
        cost += mu_obj * kernels.tv_value_grad(np.asarray(o, float), eps_obj)[0]
    if mu_psf:
        cost += mu_psf * kernels.logsmooth_value_grad(np.asarray(h, float))[0]
    return cost


def checkerboard(shape):
    yy, xx = np.indices(shape)
    return (xx + yy) % 2 == 0


def _heldout_chi2(d, model, w, held):
    """Per-pixel weighted squared residuals on the held-out pixels."""
    sel = held & (w > 0)
    r = d[sel] - model[sel]
    return w[sel] * r * r


def one_se_choice(grid, chis):
    """Pick a grid index from per-pixel held-out residuals of each trial.

    Every trial is scored on the same pixels, so the standard error of each
    score is taken on its per-pixel difference from the best trial.  The
    held-out fit keeps improving, ever more slowly, as the weight drops,
    because a weaker prior lets the PSF and the object trade structure
    freely; among fits within one standard error of the best the most
    regularized one is kept.

    Returns ``(index, scores, errors)``.
    """
    scores = np.array([float(np.mean(c)) for c in chis])
    best = int(np.argmin(scores))
    errors = np.array([float(np.std(c - chis[best]) / math.sqrt(c.size))
                       for c in chis])
    ok = np.flatnonzero(scores <= scores[best] + errors)
    k = int(ok[np.argmax(np.asarray(grid, float)[ok])])
    return k, scores.tolist(), errors.tolist()


def initial_psf(core, shape):
    """Unit-sum PSF image of the fitted core, without background."""
    m = eval_moffat(replace(core, b0=0.0), shape[1], shape[0])
    return m / m.sum(), float(m.sum())


def _choose_mu_obj(d, h, w, cfg, o_init, support, grid, search_iters):
    conv = Convolver(h)
    data0, _ = data_term_value_grad(d, conv(o_init), w, conv.adjoint)
    reg0, _ = kernels.tv_value_grad(o_init, cfg.eps)
    mu0 = data0 / max(reg0, 1e-300)
    train = checkerboard(d.shape)
    chis = []
    for g in grid:
        trial = replace(cfg, mu=mu0 * g, max_iters=min(cfg.max_iters, search_iters))
        o, _ = solve_object(d, h, np.where(train, w, 0.0), trial, o_init, support)
        chis.append(_heldout_chi2(d, conv(o), w, ~train))
    best, scores, errors = one_se_choice(grid, chis)
    return mu0 * grid[best], {"mu0": mu0, "grid": list(grid), "scores": scores,
                              "errors": errors}


def _choose_mu_psf(d, o, nm, cfg, h_init, grid, excluded, search_iters):
    conv = Convolver(o)
    w0 = spike_weights(d, nm, cfg.gamma, cfg.w_bar)[1]
    if excluded is not None:
        w0 = np.where(excluded, 0.0, w0)
    data0, _ = data_term_value_grad(d, conv(h_init), w0, conv.adjoint)
    floor = cfg.floor * float(h_init.max())
    reg0, _ = kernels.logsmooth_value_grad(np.maximum(h_init, floor))
    mu0 = data0 / max(reg0, 1e-300)
    train = checkerboard(d.shape)
    held_out = ~train if excluded is None else (~train | excluded)
    chis = []
    for g in grid:
        trial = replace(cfg, mu=mu0 * g, irls_outer=2,
                        max_iters=min(cfg.max_iters, search_iters))
        res = solve_psf(d, o, nm, trial, h_init, robust_start=False,
                        excluded=held_out)
        # common weights for every trial: a trial's own robust mask would
        # hide its misfit
        chis.append(_heldout_chi2(d, conv(res.psf) * res.scale, w0, ~train))
    best, scores, errors = one_se_choice(grid, chis)
    return mu0 * grid[best], {"mu0": mu0, "grid": list(grid), "scores": scores,
                              "errors": errors}


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except (ValueError, FloatingPointError) as exc:
        raise PipelineError(name, exc) from exc


def run_blind_deconv(d, config=None):
    """Full blind deconvolution of the frame ``d``.

    Returns a :class:`PipelineResult`; stage failures raise
    :class:`PipelineError` tagged with the failing stage.
    """
    cfg = config or PipelineConfig()
    d_in = _stage("input", as_image, d, "frame")
    report = {"stages": {}}

    mask0 = _stage("binarize", binarize_object, d_in, cfg.core.frac)
    background = 0.0
    if cfg.noise.subtract_background:
        background = _stage("background", estimate_background, d_in, mask0)
    dd = d_in - background
    objmask = _stage("binarize", binarize_object, dd, cfg.core.frac)

    if cfg.noise.eta is not None and cfg.noise.v_ron is not None:
        nm = NoiseModel(cfg.noise.eta, cfg.noise.v_ron)
    else:
        nm = _stage("noise", estimate_noise, dd, objmask)
        nm = NoiseModel(cfg.noise.eta if cfg.noise.eta is not None else nm.eta,
                        cfg.noise.v_ron if cfg.noise.v_ron is not None else nm.v_ron)
    nm = nm.scaled(cfg.noise.scale)
    report["noise"] = nm.to_dict()
    report["background"] = background

    # step 1: binary object and Moffat core; single-pixel spikes get no
    # weight from the start so they cannot steer the regularization scales
    w_data = spike_weights(dd, nm, cfg.psf.gamma, cfg.psf.w_bar)[1]
    zone = fit_zone(objmask, cfg.core.fwhm_guess)
    core = _stage("core_fit", fit_moffat, dd, objmask, zone, w_data,
                  max_iter=cfg.core.max_iter)
    report["psf_core"] = core.to_dict()
    h, flux = initial_psf(core, dd.shape)
    o = objmask * flux
    support = dilate_by(objmask, cfg.support_margin)

    ocfg = replace(cfg.object)
    if ocfg.eps is None:
        ocfg.eps = 1e-3 * float(np.percentile(o[objmask], 99.9))
    pcfg = replace(cfg.psf)

    # step 2: object with the core PSF
    if ocfg.mu is None:
        ocfg.mu, report["stages"]["mu_obj_selection"] = _stage(
            "object_mu", _choose_mu_obj, dd, h, w_data, ocfg, o, support,
            cfg.mu_grid, cfg.mu_search_iters)
    o, info = _stage("object", solve_object, dd, h, w_data, ocfg, o, support)
    report["stages"]["object_0"] = info.to_dict()

    # step 3: PSF wings; the first IRLS pass cannot trust a core-only model
    if pcfg.mu is None:
        pcfg.mu, report["stages"]["mu_psf_selection"] = _stage(
            "psf_mu", _choose_mu_psf, dd, o, nm, pcfg, h, cfg.mu_grid, None,
            cfg.mu_search_iters)
    res = _stage("psf", solve_psf, dd, o, nm, pcfg, h, robust_start=False)
    h = res.psf
    o = o * res.scale
    report["stages"]["psf_0"] = {"n_discarded": res.n_discarded,
                                 "passes": [t.to_dict() for t in res.traces]}

    alternations = []
    for k in range(1, cfg.outer_max + 1):
        w_k = res.weights
        before = total_cost(dd, o, h, w_k, ocfg.mu, ocfg.eps, pcfg.mu)
        o_new, oinfo = _stage("object", solve_object, dd, h, w_k, ocfg, o, support)
        res_new = _stage("psf", solve_psf, dd, o_new, nm, pcfg, h)
        h_new = res_new.psf
        o_new = o_new * res_new.scale
        after = total_cost(dd, o_new, h_new, w_k, ocfg.mu, ocfg.eps, pcfg.mu)
        entry = {"cost_before": before, "cost_after": after,
                 "object_iters": oinfo.n_iter,
                 "n_discarded": res_new.n_discarded}
        alternations.append(entry)
        if not after < before:
            warnings.warn(f"alternation {k} increased the total cost "
                          f"({before:.6g} -> {after:.6g}); keeping the best pair",
                          RuntimeWarning, stacklevel=2)
            entry["rolled_back"] = True
            break
        o, h, res = o_new, h_new, res_new
        if (before - after) / max(abs(before), 1e-300) < cfg.outer_tol:
            break
    report["alternations"] = alternations
    report["mu_obj"] = ocfg.mu
    report["eps_obj"] = ocfg.eps
    report["mu_psf"] = pcfg.mu

    model = Convolver(h)(o)
    rob, w_final = irls_weights(dd, model, nm, pcfg.gamma, pcfg.w_bar)
    d_mod = model + background
    residuals = d_in - d_mod
    return PipelineResult(object=o, psf=h, d_mod=d_mod, residuals=residuals,
                          rob=rob, weights=w_final, noise=nm, psf_core=core,
                          objmask=objmask, background=background, report=report)
