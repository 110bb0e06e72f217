"""Vectorized numpy implementations of the per-pixel kernels."""

import numpy as np
from scipy import ndimage


def forward_diff(a, axis):
    """Forward difference along image axis 1 (columns) or 2 (rows).

    The last column/row is a replicate boundary and holds zero.
    """
    out = np.zeros_like(a)
    if axis == 1:
        out[:, :-1] = a[:, 1:] - a[:, :-1]
    elif axis == 2:
        out[:-1, :] = a[1:, :] - a[:-1, :]
    else:
        raise ValueError(f"axis must be 1 or 2, got {axis!r}")
    return out


def forward_diff_adjoint(p, axis):
    # adjoint of forward_diff; p is assumed zero on the replicate edge
    out = np.zeros_like(p)
    if axis == 1:
        out[:, :-1] -= p[:, :-1]
        out[:, 1:] += p[:, :-1]
    else:
        out[:-1, :] -= p[:-1, :]
        out[1:, :] += p[:-1, :]
    return out


def tv_value_grad(o, eps):
    g1 = forward_diff(o, 1)
    g2 = forward_diff(o, 2)
    s = np.sqrt(g1 * g1 + g2 * g2 + eps * eps)
    cost = float(np.sum(s - eps))
    grad = forward_diff_adjoint(g1 / s, 1) + forward_diff_adjoint(g2 / s, 2)
    return cost, grad


def logsmooth_value_grad(h):
    lg = np.log(h)
    g1 = forward_diff(lg, 1)
    g2 = forward_diff(lg, 2)
    cost = float(np.sum(g1 * g1) + np.sum(g2 * g2))
    grad_log = 2.0 * (forward_diff_adjoint(g1, 1) + forward_diff_adjoint(g2, 2))
    return cost, grad_log / h


def dilate3(mask):
    return ndimage.binary_dilation(mask, structure=np.ones((3, 3), bool),
                                   border_value=0)


def erode3(mask):
    return ndimage.binary_erosion(mask, structure=np.ones((3, 3), bool),
                                  border_value=0)


def strict_local_maxima(img):
    """Pixels strictly greater than every in-frame 8-neighbour."""
    padded = np.pad(img, 1, mode="constant", constant_values=-np.inf)
    ny, nx = img.shape
    out = np.ones(img.shape, bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            out &= img > padded[1 + dy:1 + dy + ny, 1 + dx:1 + dx + nx]
    return out


def median_filter(img, window):
    return ndimage.median_filter(img, size=window, mode="nearest")
