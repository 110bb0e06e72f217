"""PSF wing deconvolution with Cauchy-IRLS outlier rejection.

The object is held fixed and the full PSF (core and faint wings) is fitted
under a smoothness prior on ``log h``.  Outliers such as cosmic rays,
defective pixels and companions are down-weighted by the Cauchy robust
weights and hard-rejected below ``w_bar``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .imaging import Convolver, as_image, check_same_shape, dilate, erode
from .noise import NoiseModel, weights_from_model
from .objdeconv import data_term_value_grad
from .optim import projected_gradient

log = logging.getLogger(__name__)

CAUCHY_GAMMA = 2.385


@dataclass
class PsfSolverConfig:
    mu: Optional[float] = None
    gamma: float = CAUCHY_GAMMA
    w_bar: float = 0.5
    # lower bound of h relative to the peak of h_init
    floor: float = 1e-12
    irls_outer: int = 5
    max_iters: int = 1000
    # the faint wings are flat directions of the cost; stop late
    tol: float = 1e-9

    def validate(self):
        if self.mu is not None and not self.mu >= 0:
            raise ValueError(f"psf.mu must be >= 0, got {self.mu}")
        if not self.gamma > 0:
            raise ValueError(f"psf.gamma must be > 0, got {self.gamma}")
        if not 0.0 < self.w_bar < 1.0:
            raise ValueError(f"psf.w_bar must lie in (0, 1), got {self.w_bar}")
        if not self.floor > 0:
            raise ValueError(f"psf.floor must be > 0, got {self.floor}")
        if self.irls_outer < 1 or self.max_iters < 1:
            raise ValueError("psf.irls_outer and psf.max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("psf.tol must be > 0")
        return self


def cauchy_rho(r, gamma=CAUCHY_GAMMA):
    """Cauchy loss ``gamma^2 / 2 * log(1 + r^2 / gamma^2)``."""
    r = np.asarray(r, dtype=np.float64)
    return 0.5 * gamma * gamma * np.log1p((r / gamma) ** 2)


def cauchy_weight(r, gamma=CAUCHY_GAMMA):
    """IRLS weight ``rho'(r) / r = 1 / (1 + r^2 / gamma^2)``."""
    r = np.asarray(r, dtype=np.float64)
    return 1.0 / (1.0 + (r / gamma) ** 2)


def robust_weight_map(d, d_mod, w, gamma=CAUCHY_GAMMA):
    """Cauchy weights of the whitened residuals ``sqrt(w) (d - d_mod)``.

    Pixels with ``w == 0`` carry no evidence and report 1.
    """
    d = as_image(d, "data")
    d_mod = as_image(d_mod, "model")
    w = as_image(w, "weights")
    check_same_shape(d, d_mod, w, names=["data", "model", "weights"])
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    rob = cauchy_weight(np.sqrt(w) * (d - d_mod), gamma)
    rob[w == 0] = 1.0
    return rob


def reg_psf_value_grad(h, psf_floor):
    """Squared gradient of ``log h`` and its derivative with respect to h."""
    h = np.asarray(h, dtype=np.float64)
    if not psf_floor > 0:
        raise ValueError(f"psf_floor must be > 0, got {psf_floor}")
    if np.any(h < psf_floor):
        raise ValueError(
            f"PSF below its floor {psf_floor:g} (min {float(h.min()):g})")
    return kernels.logsmooth_value_grad(h)


@dataclass
class PsfSolveResult:
    psf: np.ndarray
    rob: np.ndarray
    weights: np.ndarray
    scale: float = 1.0
    n_discarded: list = field(default_factory=list)
    traces: list = field(default_factory=list)


def irls_weights(d, d_mod, nm, gamma, w_bar):
    """Robust map and effective weights for one IRLS pass.

    The effective weight is ``w_model * w_rob`` with a hard zero wherever
    ``w_rob <= w_bar``.
    """
    w_noise = 1.0 / nm.variance(d_mod)
    rob = robust_weight_map(d, d_mod, w_noise, gamma)
    w_eff = weights_from_model(d_mod, nm, rob, w_bar) * rob
    return rob, w_eff


def spike_weights(d, nm, gamma=CAUCHY_GAMMA, w_bar=0.5):
    """Robust weights that reject isolated single-pixel spikes.

    Residuals are taken against a 3x3 running median of the data, so no
    PSF model is needed and the result can seed the first IRLS pass.
    Only flagged pixels that a one-pixel closing fills in are rejected:
    cosmic rays and dead pixels are isolated, whereas the flags along a
    sharp body edge form connected runs and keep their weight.
    """
    med = kernels.median_filter(d, 3)
    w_noise = 1.0 / nm.variance(med)
    rob = robust_weight_map(d, med, w_noise, gamma)
    good = rob > w_bar
    isolated = erode(dilate(good)) & ~good
    rob = np.where(isolated, rob, 1.0)
    return rob, np.where(isolated, 0.0, w_noise)


def solve_psf(d, o, nm: NoiseModel, cfg: PsfSolverConfig, h_init,
              robust_start=True, excluded=None):
    """Cauchy-IRLS deconvolution of the PSF for a fixed object.

    Each outer pass recomputes the model ``o * h``, the robust weight map
    and the effective weights, then solves the bound-constrained problem
    ``0.5 sum w_eff (d - o * h)^2 + mu R(log h)`` with ``h >= floor``
    warm-started from the previous PSF.  The inner solve runs on
    ``u = log h`` with the bound ``u >= log floor``: the log-gradient prior
    is quadratic in ``u``, which conditions the problem far better than
    the ``1 / h`` chain rule in ``h`` itself, and ``u`` is further rescaled
    pixel-wise by the square root of the diagonal curvature.

    With ``robust_start=False`` the first pass does not trust ``o * h_init``
    (a core-only PSF would flag the whole halo as outliers); it only drops
    single-pixel spikes found against a 3x3 running median of the data.

    The returned PSF is renormalized to unit sum; callers holding the
    object must multiply it by ``result.scale`` to keep ``o * h`` unchanged.
    """
    cfg.validate()
    if cfg.mu is None:
        raise ValueError("PSF solver needs an explicit mu")
    d = as_image(d, "data")
    o = as_image(o, "object")
    h = as_image(h_init, "initial psf")
    check_same_shape(d, o, h, names=["data", "object", "psf"])
    floor = cfg.floor * float(h.max())
    if not floor > 0:
        raise ValueError("initial PSF has no positive pixel")
    h = np.maximum(h, floor)
    log_floor = math.log(floor)
    conv = Convolver(o)
    mu = float(cfg.mu)

    result = PsfSolveResult(psf=h, rob=np.ones_like(d), weights=None)
    for k in range(cfg.irls_outer):
        d_mod = conv(h)
        if k == 0 and not robust_start:
            rob, w_eff = spike_weights(d, nm, cfg.gamma, cfg.w_bar)
            if excluded is not None:
                w_eff[excluded] = 0.0
        else:
            rob, w_eff = irls_weights(d, d_mod, nm, cfg.gamma, cfg.w_bar)
            if excluded is not None:
                w_eff[excluded] = 0.0
        n_disc = int(np.count_nonzero(w_eff == 0))
        if n_disc == d.size:
            raise ValueError("every pixel was discarded as an outlier")
        result.n_discarded.append(n_disc)

        # diagonal rescaling u = v / s, with s^2 the curvature of the
        # data term (in log h) plus that of the prior
        curv = Convolver(o * o).adjoint(w_eff)
        s = np.sqrt(np.maximum(curv, 0.0) * h * h + 8.0 * mu) + 1e-300
        if mu == 0:
            s = np.maximum(s, 1e-12 * s.max())

        def fun(v, w_eff=w_eff, s=s):
            x = np.exp(v / s)
            cost, grad = data_term_value_grad(d, conv(x), w_eff, conv.adjoint)
            if mu > 0:
                rc, rg = kernels.logsmooth_value_grad(x)
                cost += mu * rc
                grad += mu * rg
            return cost, grad * x / s

        v, info = projected_gradient(
            fun, np.log(h) * s, lambda v, s=s: np.maximum(v, log_floor * s),
            max_iter=cfg.max_iters, tol=cfg.tol)
        h = np.maximum(np.exp(v / s), floor)
        result.traces.append(info)
        log.debug("irls pass %d: %d discarded, cost %.6g -> %.6g", k, n_disc,
                  info.costs[0], info.costs[-1])
    d_mod = conv(h)
    rob, w_eff = irls_weights(d, d_mod, nm, cfg.gamma, cfg.w_bar)
    scale = float(h.sum())
    result.psf = h / scale
    result.scale = scale
    result.rob = rob
    result.weights = w_eff
    return result
