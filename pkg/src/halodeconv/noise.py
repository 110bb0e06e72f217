"""Pixel noise model and the inverse-variance weights of the data term."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import as_image, check_same_shape, dilate_by, erode

MAD_TO_STD = 1.4826
# 5-point Laplacian of white noise: four unit taps and a -4 centre
_LAP_GAIN = 20.0


@dataclass(frozen=True)
class NoiseModel:
    """Variance model ``var(x) = eta * I(x) + v_ron``."""

    eta: float
    v_ron: float

    def __post_init__(self):
        if not np.isfinite(self.eta) or self.eta < 0:
            raise ValueError(f"eta must be finite and >= 0, got {self.eta}")
        if not np.isfinite(self.v_ron) or self.v_ron <= 0:
            raise ValueError(f"v_ron must be finite and > 0, got {self.v_ron}")

    def variance(self, intensity):
        return self.eta * np.maximum(intensity, 0.0) + self.v_ron

    def scaled(self, factor):
        """Noise model with every variance multiplied by ``factor``."""
        return NoiseModel(self.eta * factor, self.v_ron * factor)

    def to_dict(self):
        return {"eta": float(self.eta), "v_ron": float(self.v_ron)}


def weights_from_data(d, nm, excluded=None):
    """Inverse-variance weights ``1 / (eta max(d, 0) + v_ron)``.

    Pixels set in ``excluded`` get weight exactly 0.
    """
    d = as_image(d, "data")
    w = 1.0 / nm.variance(d)
    if excluded is not None:
        check_same_shape(d, excluded, names=["data", "excluded"])
        w[np.asarray(excluded, bool)] = 0.0
    return w


def weights_from_model(d_mod, nm, rob, w_bar=0.5):
    """Model-based weights with hard rejection of robust outliers.

    Weight is 0 where ``rob <= w_bar``, otherwise
    ``1 / (eta max(d_mod, 0) + v_ron)``.
    """
    if not 0.0 < w_bar < 1.0:
        raise ValueError(f"w_bar must lie in (0, 1), got {w_bar}")
    d_mod = as_image(d_mod, "model")
    rob = np.asarray(rob, dtype=np.float64)
    check_same_shape(d_mod, rob, names=["model", "robust weights"])
    w = 1.0 / nm.variance(d_mod)
    w[rob <= w_bar] = 0.0
    return w


def _laplace_residual(d):
    # 5-point Laplacian; blind to locally linear signal
    lap = np.zeros_like(d)
    lap[:, 1:-1] += d[:, :-2] - 2.0 * d[:, 1:-1] + d[:, 2:]
    lap[1:-1, :] += d[:-2, :] - 2.0 * d[1:-1, :] + d[2:, :]
    valid = np.zeros(d.shape, bool)
    valid[1:-1, 1:-1] = True
    return lap, valid


def _robust_var(values):
    med = np.median(values)
    return (MAD_TO_STD * np.median(np.abs(values - med))) ** 2


def background_pixels(d, object_mask, margin=5):
    """Pixels outside the object mask grown by ``margin`` pixels."""
    if object_mask is None:
        return np.ones(d.shape, bool)
    return ~dilate_by(np.asarray(object_mask, bool), margin)


def estimate_background(d, object_mask, margin=5):
    """Median of the background pixels (the constant sky offset)."""
    bg = background_pixels(d, object_mask, margin)
    if bg.sum() == 0:
        raise ValueError("no background pixels to estimate the offset")
    return float(np.median(d[bg]))


def estimate_noise(d, object_mask=None, tile=8, min_background=100, margin=5):
    """Empirical noise model estimated from the frame itself.

    Variances are robust (MAD) estimates measured on a second-difference
    residual, so that smooth structure does not inflate them.  ``eta`` is
    the non-negative slope of tile variance against tile median, fitted
    through the background point on ``tile x tile`` tiles brighter than
    the noise; ``v_ron`` is the background variance minus the photon part
    ``eta * median(background)``.

    Raises ValueError when fewer than ``min_background`` background pixels
    are available or the frame has no measurable noise.
    """
    d = as_image(d, "data")
    bg = background_pixels(d, object_mask, margin)
    lap, valid = _laplace_residual(d)
    bg_valid = bg & valid
    n_bg = int(bg_valid.sum())
    if n_bg < min_background:
        raise ValueError(
            f"only {n_bg} background pixels outside the object "
            f"(need >= {min_background})")
    v_bg = _robust_var(lap[bg_valid]) / _LAP_GAIN
    if not v_bg > 0:
        raise ValueError("degenerate frame: background has zero variance")
    m_bg = max(float(np.median(d[bg_valid])), 0.0)

    # tiles cut by the object edge see the step, not the noise
    edge = np.zeros(d.shape, bool)
    if object_mask is not None:
        m = np.asarray(object_mask, bool)
        edge = dilate_by(m, 2) & ~erode(erode(m))
    ny, nx = d.shape
    means, varis = [], []
    for y0 in range(1, ny - tile, tile):
        for x0 in range(1, nx - tile, tile):
            sl = (slice(y0, y0 + tile), slice(x0, x0 + tile))
            if edge[sl].any():
                continue
            means.append(np.median(d[sl]))
            varis.append(_robust_var(lap[sl]) / _LAP_GAIN)
    means = np.asarray(means, dtype=np.float64)
    varis = np.asarray(varis)
    # line through the background point (m_bg, v_bg), fitted on bright tiles
    bright = means > m_bg + 10.0 * np.sqrt(v_bg)
    eta = 0.0
    if bright.sum() >= 3:
        m, e = means[bright] - m_bg, varis[bright] - v_bg
        eta = max(0.0, float(np.sum(m * e) / np.sum(m * m)))
    # the background itself may carry photon noise from a faint halo
    v_ron = max(v_bg - eta * m_bg, 0.05 * v_bg)
    return NoiseModel(eta=eta, v_ron=float(v_ron))
