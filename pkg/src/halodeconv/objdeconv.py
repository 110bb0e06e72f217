"""Non-negative object deconvolution with an edge-preserving prior."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .imaging import Convolver, as_image, check_same_shape
from .optim import projected_gradient


@dataclass
class ObjectSolverConfig:
    """Hyperparameters of the object step.

    ``mu`` and ``eps`` may be left as ``None`` for the pipeline to choose
    them from the data.
    """

    mu: Optional[float] = None
    eps: Optional[float] = None
    max_iters: int = 1000
    tol: float = 1e-8

    def validate(self):
        if self.mu is not None and not self.mu >= 0:
            raise ValueError(f"object.mu must be >= 0, got {self.mu}")
        if self.eps is not None and not self.eps > 0:
            raise ValueError(f"object.eps must be > 0, got {self.eps}")
        if self.max_iters < 1:
            raise ValueError("object.max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("object.tol must be > 0")
        return self


def reg_obj_value_grad(o, eps):
    """Smoothed total variation ``sum sqrt(|grad o|^2 + eps^2) - eps``."""
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    return kernels.tv_value_grad(np.asarray(o, dtype=np.float64), float(eps))


def data_term_value_grad(d, model, w, adjoint):
    """``0.5 sum w (d - model)^2`` and its gradient pulled back by ``adjoint``."""
    wr = w * (d - model)
    cost = 0.5 * float(np.sum(wr * (d - model)))
    return cost, -adjoint(wr)


def data_term_value_grad_obj(d, o, h, w, conv=None):
    """Weighted least squares ``0.5 sum w (d - o * h)^2`` and d/do."""
    d = as_image(d, "data")
    o = as_image(o, "object")
    w = as_image(w, "weights")
    check_same_shape(d, o, h, w, names=["data", "object", "psf", "weights"])
    conv = conv or Convolver(h)
    return data_term_value_grad(d, conv(o), w, conv.adjoint)


def solve_object(d, h, w, cfg, o_init, support=None):
    """Minimize WLS + mu * TV over ``o >= 0`` for a fixed PSF ``h``.

    ``support`` optionally restricts the object to a pixel mask (zero
    elsewhere).  Returns ``(o, info)`` with the accepted-cost trace in
    ``info.costs``.
    """
    cfg.validate()
    if cfg.mu is None or cfg.eps is None:
        raise ValueError("object solver needs explicit mu and eps")
    d = as_image(d, "data")
    w = as_image(w, "weights")
    o_init = as_image(o_init, "initial object")
    check_same_shape(d, h, w, o_init, names=["data", "psf", "weights", "object"])
    conv = Convolver(h)
    mu, eps = float(cfg.mu), float(cfg.eps)

    def fun(o):
        cost, grad = data_term_value_grad(d, conv(o), w, conv.adjoint)
        if mu > 0:
            rc, rg = kernels.tv_value_grad(o, eps)
            cost += mu * rc
            grad += mu * rg
        return cost, grad

    if support is None:
        def project(o):
            return np.maximum(o, 0.0)
    else:
        keep = np.asarray(support, bool)
        check_same_shape(d, keep, names=["data", "support"])

        def project(o):
            return np.where(keep, np.maximum(o, 0.0), 0.0)

    return projected_gradient(fun, o_init, project, max_iter=cfg.max_iters,
                              tol=cfg.tol)
