"""Image primitives: linear convolution, padding, differences, morphology.

Images are plain 2D ``float64`` numpy arrays indexed ``[x2, x1]`` (row,
column); masks are boolean arrays of the same shape.  Axis 1 of the
finite-difference operators runs along columns (x1), axis 2 along rows (x2).

Convolutions are aperiodic.  Both operands share one frame size ``(ny, nx)``;
they are zero-padded to at least ``(2 ny - 1, 2 nx - 1)`` and the full result
is cropped back so that a unit delta at the frame centre ``(ny // 2, nx // 2)``
acts as the identity.
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from . import kernels


def as_image(a, name="image"):
    """Return ``a`` as a finite 2D float64 array, or raise ValueError."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_shape(*arrays, names=None):
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        names = names or [f"arg{i}" for i in range(len(arrays))]
        desc = ", ".join(f"{n}={np.shape(a)}" for n, a in zip(names, arrays))
        raise ValueError(f"dimension mismatch: {desc}")


def frame_center(shape):
    return shape[0] // 2, shape[1] // 2


def _pad_shape(shape):
    return tuple(sfft.next_fast_len(2 * n - 1, real=True) for n in shape)


class Convolver:
    """Linear convolution by a fixed kernel, with its exact adjoint.

    ``forward(x)`` is ``convolve(x, kernel)`` and ``adjoint(y)`` is
    ``correlate(y, kernel)``; the kernel spectrum is computed once.
    """

    def __init__(self, kernel):
        kernel = as_image(kernel, "kernel")
        self.shape = kernel.shape
        self.pad_shape = _pad_shape(kernel.shape)
        self.center = frame_center(kernel.shape)
        self._kf = sfft.rfft2(kernel, s=self.pad_shape)

    def _check(self, x):
        if x.shape != self.shape:
            raise ValueError(
                f"dimension mismatch: operand {x.shape} vs kernel {self.shape}")

    def full(self, x):
        """Uncropped aperiodic convolution, shape ``(2 ny - 1, 2 nx - 1)``."""
        self._check(x)
        out = sfft.irfft2(sfft.rfft2(x, s=self.pad_shape) * self._kf,
                          s=self.pad_shape)
        return out[:2 * self.shape[0] - 1, :2 * self.shape[1] - 1]

    def forward(self, x):
        self._check(x)
        out = sfft.irfft2(sfft.rfft2(x, s=self.pad_shape) * self._kf,
                          s=self.pad_shape)
        cy, cx = self.center
        ny, nx = self.shape
        return np.ascontiguousarray(out[cy:cy + ny, cx:cx + nx])

    __call__ = forward

    def adjoint(self, y):
        self._check(y)
        cy, cx = self.center
        ny, nx = self.shape
        emb = np.zeros(self.pad_shape)
        emb[cy:cy + ny, cx:cx + nx] = y
        out = sfft.irfft2(sfft.rfft2(emb) * np.conj(self._kf), s=self.pad_shape)
        return np.ascontiguousarray(out[:ny, :nx])


def flip_center(b):
    """Point reflection about the frame centre: ``out[k] = b[2 c - k]``.

    Entries whose mirror falls outside the frame (first row/column of an
    even-sized frame) are dropped and the vacated pixels set to zero.
    """
    b = np.asarray(b, dtype=np.float64)
    out = np.zeros_like(b)
    ny, nx = b.shape
    cy, cx = frame_center(b.shape)
    ky0, kx0 = max(0, 2 * cy - ny + 1), max(0, 2 * cx - nx + 1)
    ky1, kx1 = min(ny - 1, 2 * cy), min(nx - 1, 2 * cx)
    out[ky0:ky1 + 1, kx0:kx1 + 1] = b[2 * cy - ky1:2 * cy - ky0 + 1,
                                      2 * cx - kx1:2 * cx - kx0 + 1][::-1, ::-1]
    return out


def convolve(a, b, crop=True):
    """Aperiodic convolution ``a * b`` returned on ``a``'s frame.

    With ``crop=False`` the full ``(2 ny - 1, 2 nx - 1)`` result is returned,
    on which total mass is conserved exactly: ``sum = a.sum() * b.sum()``.
    """
    a = as_image(a, "a")
    b = as_image(b, "b")
    check_same_shape(a, b, names=["a", "b"])
    conv = Convolver(b)
    return conv.forward(a) if crop else conv.full(a)


def correlate(a, b):
    """Correlation of ``a`` by ``b``, i.e. ``convolve(a, flip_center(b))``."""
    a = as_image(a, "a")
    b = as_image(b, "b")
    check_same_shape(a, b, names=["a", "b"])
    return convolve(a, flip_center(b))


def _padded_shape(shape, factor):
    return tuple(int(np.ceil(factor * n - 1e-9)) for n in shape)


def zero_pad(a, factor):
    """Embed ``a`` in the centre of a zero frame ``ceil(factor)`` times larger."""
    if not factor >= 1:
        raise ValueError(f"padding factor must be >= 1, got {factor}")
    a = np.asarray(a, dtype=np.float64)
    shape = _padded_shape(a.shape, factor)
    out = np.zeros(shape)
    oy, ox = (shape[0] - a.shape[0]) // 2, (shape[1] - a.shape[1]) // 2
    out[oy:oy + a.shape[0], ox:ox + a.shape[1]] = a
    return out


def crop(a, shape):
    """Inverse of :func:`zero_pad`: extract the centred ``shape`` window."""
    oy, ox = (a.shape[0] - shape[0]) // 2, (a.shape[1] - shape[1]) // 2
    return a[oy:oy + shape[0], ox:ox + shape[1]].copy()


def finite_diff(a, axis):
    return kernels.forward_diff(np.asarray(a, dtype=np.float64), axis)


def dilate(mask):
    """Dilation by the 3x3 square; out-of-frame neighbours count as unset."""
    return kernels.dilate3(np.asarray(mask, dtype=bool))


def erode(mask):
    """Erosion by the 3x3 square; out-of-frame neighbours count as unset."""
    return kernels.erode3(np.asarray(mask, dtype=bool))


def dilate_by(mask, radius):
    """Dilate ``radius`` times by the 3x3 square (Chebyshev ball)."""
    out = np.asarray(mask, dtype=bool)
    for _ in range(int(radius)):
        out = dilate(out)
    return out


def threshold_mask(a, t):
    return np.asarray(a) > t


def largest_component(mask):
    """Largest 8-connected component of ``mask`` (empty mask stays empty)."""
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), int))
    if n == 0:
        return np.zeros_like(mask, dtype=bool)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == int(np.argmax(sizes))
