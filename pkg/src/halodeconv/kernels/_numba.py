"""Loop kernels compiled with numba.

Each function mirrors its counterpart in ``_numpy`` and must agree with it
to rounding.  Reductions run in a fixed sequential order so results do not
depend on the thread count.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def forward_diff(a, axis):
    ny, nx = a.shape
    out = np.zeros_like(a)
    if axis == 1:
        for i in range(ny):
            for j in range(nx - 1):
                out[i, j] = a[i, j + 1] - a[i, j]
    elif axis == 2:
        for i in range(ny - 1):
            for j in range(nx):
                out[i, j] = a[i + 1, j] - a[i, j]
    else:
        raise ValueError("axis must be 1 or 2")
    return out


@njit(cache=True)
def forward_diff_adjoint(p, axis):
    ny, nx = p.shape
    out = np.zeros_like(p)
    if axis == 1:
        for i in range(ny):
            for j in range(nx - 1):
                out[i, j] -= p[i, j]
                out[i, j + 1] += p[i, j]
    else:
        for i in range(ny - 1):
            for j in range(nx):
                out[i, j] -= p[i, j]
                out[i + 1, j] += p[i, j]
    return out


@njit(cache=True)
def tv_value_grad(o, eps):
    ny, nx = o.shape
    grad = np.zeros_like(o)
    cost = 0.0
    for i in range(ny):
        for j in range(nx):
            g1 = o[i, j + 1] - o[i, j] if j < nx - 1 else 0.0
            g2 = o[i + 1, j] - o[i, j] if i < ny - 1 else 0.0
            s = np.sqrt(g1 * g1 + g2 * g2 + eps * eps)
            cost += s - eps
            p1 = g1 / s
            p2 = g2 / s
            if j < nx - 1:
                grad[i, j] -= p1
                grad[i, j + 1] += p1
            if i < ny - 1:
                grad[i, j] -= p2
                grad[i + 1, j] += p2
    return cost, grad


@njit(cache=True)
def logsmooth_value_grad(h):
    ny, nx = h.shape
    lg = np.log(h)
    grad = np.zeros_like(h)
    cost = 0.0
    for i in range(ny):
        for j in range(nx):
            if j < nx - 1:
                g1 = lg[i, j + 1] - lg[i, j]
                cost += g1 * g1
                grad[i, j] -= 2.0 * g1
                grad[i, j + 1] += 2.0 * g1
            if i < ny - 1:
                g2 = lg[i + 1, j] - lg[i, j]
                cost += g2 * g2
                grad[i, j] -= 2.0 * g2
                grad[i + 1, j] += 2.0 * g2
    for i in range(ny):
        for j in range(nx):
            grad[i, j] /= h[i, j]
    return cost, grad


@njit(cache=True)
def dilate3(mask):
    ny, nx = mask.shape
    out = np.zeros_like(mask)
    for i in range(ny):
        for j in range(nx):
            if mask[i, j]:
                for di in range(-1, 2):
                    for dj in range(-1, 2):
                        ii = i + di
                        jj = j + dj
                        if 0 <= ii < ny and 0 <= jj < nx:
                            out[ii, jj] = True
    return out


@njit(cache=True)
def erode3(mask):
    ny, nx = mask.shape
    out = np.zeros_like(mask)
    for i in range(1, ny - 1):
        for j in range(1, nx - 1):
            keep = True
            for di in range(-1, 2):
                for dj in range(-1, 2):
                    if not mask[i + di, j + dj]:
                        keep = False
            out[i, j] = keep
    return out


@njit(cache=True)
def strict_local_maxima(img):
    ny, nx = img.shape
    out = np.zeros(img.shape, np.bool_)
    for i in range(ny):
        for j in range(nx):
            v = img[i, j]
            is_max = True
            for di in range(-1, 2):
                for dj in range(-1, 2):
                    if di == 0 and dj == 0:
                        continue
                    ii = i + di
                    jj = j + dj
                    if 0 <= ii < ny and 0 <= jj < nx and not v > img[ii, jj]:
                        is_max = False
            out[i, j] = is_max
    return out


@njit(cache=True)
def median_filter(img, window):
    ny, nx = img.shape
    half = window // 2
    out = np.empty_like(img)
    buf = np.empty(window * window, img.dtype)
    for i in range(ny):
        for j in range(nx):
            k = 0
            for di in range(-half, half + 1):
                ii = min(max(i + di, 0), ny - 1)
                for dj in range(-half, half + 1):
                    jj = min(max(j + dj, 0), nx - 1)
                    buf[k] = img[ii, jj]
                    k += 1
            out[i, j] = np.median(buf)
    return out
