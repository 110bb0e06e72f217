"""Initial estimate: binary object convolved with an elliptical Moffat core.

The data near the body is approximated by a sharp-edged flat object (a
thresholded copy of the data) blurred by a parametric core.  Pixels far
from the body are halo dominated and left out of the fit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import optimize

from .imaging import Convolver, as_image, check_same_shape, dilate_by, largest_component

log = logging.getLogger(__name__)

BETA_BOUNDS = (1.01, 10.0)
ALPHA_BOUNDS = (0.3, 50.0)


@dataclass(frozen=True)
class MoffatParams:
    """Elliptical Moffat profile ``b0 + A (1 + u)^-beta``.

    ``u = (x'1 / alpha1)^2 + (x'2 / alpha2)^2`` where ``x'`` is the offset
    from ``(c1, c2)`` rotated by ``-theta``.  ``c1`` is the column and
    ``c2`` the row coordinate, in pixels.
    """

    amplitude: float
    c1: float
    c2: float
    alpha1: float
    alpha2: float
    theta: float = 0.0
    beta: float = 2.0
    b0: float = 0.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be > 0, got {self.amplitude}")
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ValueError(
                f"widths must be > 0, got ({self.alpha1}, {self.alpha2})")
        if not self.beta > 1:
            raise ValueError(f"beta must be > 1, got {self.beta}")
        vals = (self.c1, self.c2, self.theta, self.b0)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("non-finite Moffat parameter")

    @property
    def fwhm(self):
        """Geometric-mean full width at half maximum, in pixels."""
        return 2.0 * math.sqrt(self.alpha1 * self.alpha2) * math.sqrt(
            2.0 ** (1.0 / self.beta) - 1.0)

    def to_dict(self):
        return {k: float(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: float(v) for k, v in d.items()})


def _rotated_offsets(p, width, height):
    x1 = np.arange(width, dtype=np.float64)[None, :] - p.c1
    x2 = np.arange(height, dtype=np.float64)[:, None] - p.c2
    ct, st = math.cos(p.theta), math.sin(p.theta)
    r1 = ct * x1 + st * x2
    r2 = -st * x1 + ct * x2
    return r1, r2


def eval_moffat(p, width, height):
    """Moffat image on a ``height x width`` pixel grid."""
    r1, r2 = _rotated_offsets(p, width, height)
    u = (r1 / p.alpha1) ** 2 + (r2 / p.alpha2) ** 2
    return p.b0 + p.amplitude * (1.0 + u) ** (-p.beta)


def moffat_jacobian(p, width, height):
    """Profile (without ``b0``) and its derivatives.

    Returns ``(m, derivs)`` where ``derivs`` stacks d/dA, d/dc1, d/dc2,
    d/dalpha1, d/dalpha2, d/dtheta, d/dbeta.
    """
    r1, r2 = _rotated_offsets(p, width, height)
    a1, a2 = p.alpha1, p.alpha2
    u = (r1 / a1) ** 2 + (r2 / a2) ** 2
    f = 1.0 + u
    shape = f ** (-p.beta)
    m = p.amplitude * shape
    dm_du = -p.beta * m / f
    ct, st = math.cos(p.theta), math.sin(p.theta)
    du_dr1 = 2.0 * r1 / a1 ** 2
    du_dr2 = 2.0 * r2 / a2 ** 2
    derivs = np.stack([
        shape,
        dm_du * (-ct * du_dr1 + st * du_dr2),
        dm_du * (-st * du_dr1 - ct * du_dr2),
        dm_du * (-2.0 * r1 ** 2 / a1 ** 3),
        dm_du * (-2.0 * r2 ** 2 / a2 ** 3),
        dm_du * (2.0 * r1 * r2 * (1.0 / a1 ** 2 - 1.0 / a2 ** 2)),
        -m * np.log(f),
    ])
    return m, derivs


def binarize_object(d, frac=0.5, percentile=99.9):
    """Sharp-edged object mask: largest 8-connected blob above ``frac`` of peak.

    The peak is the ``percentile`` intensity, which ignores a handful of
    hot pixels.
    """
    d = as_image(d, "data")
    ref = float(np.percentile(d, percentile))
    mask = largest_component(d > frac * ref) if ref > 0 else np.zeros(d.shape, bool)
    if not mask.any():
        raise ValueError("no object found: nothing above the binarization threshold")
    return mask


def fit_zone(objmask, fwhm_guess):
    """Pixels kept for the core fit: the object grown by two FWHM."""
    if not fwhm_guess > 0:
        raise ValueError(f"fwhm_guess must be > 0, got {fwhm_guess}")
    return dilate_by(objmask, math.ceil(2.0 * fwhm_guess))


_PACK = ("amplitude", "c1", "c2", "alpha1", "alpha2", "theta", "beta", "b0")


def _pack(p):
    return np.array([getattr(p, k) for k in _PACK])


def _unpack(v):
    theta = (v[5] + math.pi / 2) % math.pi - math.pi / 2
    return MoffatParams(v[0], v[1], v[2], v[3], v[4], theta, v[6], v[7])


def _bounds(width, height):
    inf = np.inf
    lower = np.array([0.0, 0.0, 0.0, ALPHA_BOUNDS[0], ALPHA_BOUNDS[0], -inf,
                      BETA_BOUNDS[0], -inf])
    upper = np.array([inf, width - 1.0, height - 1.0, ALPHA_BOUNDS[1],
                      ALPHA_BOUNDS[1], inf, BETA_BOUNDS[1], inf])
    return lower, upper


class _CoreModel:
    """``mask * moffat(p) + b0`` restricted to the fit zone."""

    def __init__(self, objmask, zone, shape):
        self.shape = shape
        self.zone = zone
        self._conv = Convolver(objmask.astype(np.float64))

    def value(self, v):
        p = _unpack(v)
        m = eval_moffat(replace(p, b0=0.0), self.shape[1], self.shape[0])
        return self._conv(m)[self.zone] + v[7]

    def value_jac(self, v):
        p = _unpack(v)
        m, derivs = moffat_jacobian(p, self.shape[1], self.shape[0])
        model = self._conv(m)[self.zone] + v[7]
        jac = np.empty((model.size, 8))
        for k in range(7):
            jac[:, k] = self._conv(derivs[k])[self.zone]
        jac[:, 7] = 1.0
        return model, jac


def fit_moffat(d, objmask, zone, w, max_iter=200, gtol=1e-6, init=None):
    """Weighted least-squares fit of the Moffat core on the zone pixels.

    Bounded trust-region least squares (``scipy.optimize.least_squares``)
    with the analytic Jacobian.  The object level is folded into the
    amplitude.  ``max_iter`` caps the number of model evaluations and
    ``gtol`` is the gradient tolerance handed to the solver.
    """
    d = as_image(d, "data")
    objmask = np.asarray(objmask, bool)
    zone = np.asarray(zone, bool)
    w = as_image(w, "weights")
    check_same_shape(d, objmask, zone, w, names=["data", "objmask", "zone", "weights"])
    if not objmask.any():
        raise ValueError("empty object mask")
    ny, nx = d.shape
    model = _CoreModel(objmask, zone, d.shape)
    dz = d[zone]
    sw = np.sqrt(w[zone])

    if init is None:
        cy, cx = ny // 2, nx // 2
        v = _pack(MoffatParams(1.0, float(cx), float(cy), 2.0, 2.0, 0.0, 1.8, 0.0))
        m0 = model.value(v)
        denom = np.sum(sw ** 2 * m0 * m0)
        if not denom > 0:
            raise ValueError("fit zone carries no weight")
        v[0] = max(np.sum(sw ** 2 * m0 * dz) / denom, 1e-12)
    else:
        v = _pack(init)
    lower, upper = _bounds(nx, ny)
    v = np.clip(v, lower, upper)

    # value and Jacobian share their convolutions; keep the last pair
    cache = {}

    def evaluate(x):
        key = x.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = model.value_jac(x)
        return cache[key]

    def residual(x):
        return sw * (evaluate(x)[0] - dz)

    def jacobian(x):
        return evaluate(x)[1] * sw[:, None]

    if not np.all(np.isfinite(residual(v))):
        raise FloatingPointError("non-finite cost at Moffat initialization")
    sol = optimize.least_squares(residual, v, jac=jacobian, bounds=(lower, upper),
                                 method="trf", x_scale="jac", gtol=gtol,
                                 max_nfev=max_iter)
    if not np.isfinite(sol.cost):
        raise FloatingPointError(f"non-finite cost in Moffat fit: {_unpack(sol.x)}")
    v, cost, n_iter = sol.x, sol.cost, sol.nfev
    p = _unpack(v)
    log.debug("moffat fit: %d iterations, cost %.6g, %s", n_iter, cost, p)
    return p
