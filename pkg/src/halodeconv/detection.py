"""Matched-filter moon detection in the halo residuals.

The significance map is the weighted correlation of the residuals with the
unit-sum PSF, normalized so that pure noise has unit standard deviation.
Isolated outliers flagged by the robust weights are given zero weight
before correlating; pixel clusters (resolved or bright moons) are kept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .imaging import (Convolver, as_image, check_same_shape, crop, dilate,
                      dilate_by, erode, frame_center, zero_pad)

ISO_THRESH = 0.10
VICINITY_RADIUS = 3
MERGE_RADIUS = 2.0


@dataclass(frozen=True)
class DetectionCandidate:
    x: int
    y: int
    sigma: float
    flux: float

    def to_dict(self):
        return {"x": int(self.x), "y": int(self.y), "sigma": float(self.sigma),
                "flux": float(self.flux)}


@dataclass
class DetectionMaps:
    sigma_map: np.ndarray
    valid: np.ndarray
    # sqrt(p^2 (x) w): converts significance to flux
    norm: np.ndarray


def isolated_outlier_mask(rob, iso_thresh=ISO_THRESH):
    """Pixels below ``iso_thresh`` that a one-pixel closing fills in."""
    good = np.asarray(rob) > iso_thresh
    closed = erode(dilate(good))
    return closed & ~good


def detection_weights(d_mod, nm, rob, iso, objmask, iso_thresh=ISO_THRESH,
                      vicinity=VICINITY_RADIUS):
    """Model-based weights with isolated outliers and body-edge rejects zeroed."""
    d_mod = as_image(d_mod, "model")
    check_same_shape(d_mod, rob, iso, objmask,
                     names=["model", "rob", "isolated", "objmask"])
    w = 1.0 / nm.variance(d_mod)
    w[np.asarray(iso, bool)] = 0.0
    near_body = dilate_by(objmask, vicinity)
    w[near_body & (np.asarray(rob) <= iso_thresh)] = 0.0
    return w


def _embed_centered(psf, shape):
    out = np.zeros(shape)
    cy, cx = frame_center(psf.shape)
    oy, ox = shape[0] // 2 - cy, shape[1] // 2 - cx
    out[oy:oy + psf.shape[0], ox:ox + psf.shape[1]] = psf
    return out


def significance_map(residuals, psf, w, pad_factor=2.0, rel_floor=1e-12):
    """``sigma = p (x) (w r) / sqrt(p^2 (x) w)`` with ``(x)`` the correlation.

    Maps are zero-padded by ``pad_factor`` before correlating.  Pixels whose
    squared denominator is below ``rel_floor`` times its maximum (transform
    round-off level) or below 1e-30 are invalid and get sigma = 0.
    """
    r = as_image(residuals, "residuals")
    psf = as_image(psf, "psf")
    w = as_image(w, "weights")
    check_same_shape(r, psf, w, names=["residuals", "psf", "weights"])
    total = float(psf.sum())
    if not total > 0:
        raise ValueError(f"PSF sum must be positive, got {total}")
    p = psf / total
    big_wr = zero_pad(w * r, pad_factor)
    big_w = zero_pad(w, pad_factor)
    p_big = _embed_centered(p, big_w.shape)
    num = crop(Convolver(p_big).adjoint(big_wr), r.shape)
    den2 = crop(Convolver(p_big * p_big).adjoint(big_w), r.shape)
    peak = float(den2.max())
    valid = den2 > max(1e-30, rel_floor * peak)
    norm = np.where(valid, np.sqrt(np.where(valid, den2, 1.0)), 0.0)
    sigma = np.zeros_like(r)
    sigma[valid] = num[valid] / norm[valid]
    return DetectionMaps(sigma_map=sigma, valid=valid, norm=norm)


def extract_candidates(maps, threshold=5.0, merge_radius=MERGE_RADIUS):
    """Local maxima of the significance map at or above ``threshold``.

    Maxima closer than ``merge_radius`` pixels to a stronger one are
    dropped.  Sorted by decreasing significance.
    """
    sig = maps.sigma_map
    peaks = kernels.strict_local_maxima(sig) & maps.valid & (sig >= threshold)
    ys, xs = np.nonzero(peaks)
    order = np.argsort(-sig[ys, xs], kind="stable")
    kept = []
    for i in order:
        x, y = int(xs[i]), int(ys[i])
        if any((x - k.x) ** 2 + (y - k.y) ** 2 < merge_radius ** 2 for k in kept):
            continue
        kept.append(DetectionCandidate(x, y, float(sig[y, x]),
                                       float(sig[y, x] / maps.norm[y, x])))
    return kept


def detect(residuals, psf, d_mod, rob, objmask, nm, threshold=5.0,
           iso_thresh=ISO_THRESH, vicinity=VICINITY_RADIUS):
    """Robust significance map and candidates from a deconvolution result."""
    iso = isolated_outlier_mask(rob, iso_thresh)
    w = detection_weights(d_mod, nm, rob, iso, objmask, iso_thresh, vicinity)
    maps = significance_map(residuals, psf, w)
    return maps, extract_candidates(maps, threshold), w


def median_coronagraph_baseline(d, window=9):
    """Frame minus its running median (replicate boundary)."""
    d = as_image(d, "frame")
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    return d - kernels.median_filter(d, int(window))
