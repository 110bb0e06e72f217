"""Image files (FITS primary HDU or raw float64 + JSON sidecar) and PNG previews.

The FITS support covers what the pipeline needs: a single 2D primary
array, read from BITPIX 8, 16, 32, -32 or -64 (with BSCALE/BZERO) and
written as -32 or -64.  Extensions after the primary HDU are ignored.  No
astropy dependency.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

BLOCK = 2880
CARD = 80


class ImageFormatError(ValueError):
    """Malformed or unsupported image file."""


def _card(key, value=None, comment=""):
    if value is None:
        text = f"{key:<8}"
    else:
        if isinstance(value, bool):
            v = f"{'T' if value else 'F':>20}"
        elif isinstance(value, int):
            v = f"{value:>20}"
        elif isinstance(value, float):
            v = f"{repr(value).upper():>20}"
        else:
            # strings start in column 11, padded to at least 8 characters
            quoted = str(value).replace("'", "''")
            v = f"'{quoted:<8}'"
        text = f"{key:<8}= {v}"
        if comment:
            text += f" / {comment}"
    if len(text) > CARD:
        raise ImageFormatError(f"FITS card too long: {text!r}")
    return text.ljust(CARD)


def _write_fits(img, path, bitpix=-64, header=None):
    dtype = ">f8" if bitpix == -64 else ">f4"
    ny, nx = img.shape
    cards = [
        _card("SIMPLE", True, "conforms to FITS standard"),
        _card("BITPIX", bitpix),
        _card("NAXIS", 2),
        _card("NAXIS1", nx),
        _card("NAXIS2", ny),
    ]
    for key, value in (header or {}).items():
        cards.append(_card(key.upper()[:8], value))
    cards.append(_card("END"))
    head = "".join(cards)
    head += " " * (-len(head) % BLOCK)
    data = np.ascontiguousarray(img, dtype=dtype).tobytes()
    data += b"\0" * (-len(data) % BLOCK)
    with open(path, "wb") as fh:
        fh.write(head.encode("ascii"))
        fh.write(data)


def _parse_value(raw):
    raw = raw.strip()
    if raw.startswith("'"):
        end = raw.find("'", 1)
        while end != -1 and raw[end + 1:end + 2] == "'":
            end = raw.find("'", end + 2)
        return raw[1:end].replace("''", "'").rstrip()
    raw = raw.split("/", 1)[0].strip()
    if raw in ("T", "F"):
        return raw == "T"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw.replace("D", "E"))
    except ValueError:
        return raw


def read_fits_header(fh, path):
    header = {}
    offset = 0
    while True:
        block = fh.read(BLOCK)
        if len(block) < BLOCK:
            raise ImageFormatError(
                f"{path}: truncated FITS header at byte {offset + len(block)}")
        for i in range(0, BLOCK, CARD):
            card = block[i:i + CARD].decode("ascii", errors="replace")
            key = card[:8].strip()
            if key == "END":
                return header, offset + BLOCK
            if card[8:10] == "= ":
                header[key] = _parse_value(card[10:])
        offset += BLOCK
        if offset > 1000 * BLOCK:
            raise ImageFormatError(f"{path}: no END card in FITS header")


def _read_fits(path):
    with open(path, "rb") as fh:
        header, data_start = read_fits_header(fh, path)
        if header.get("SIMPLE") is not True:
            raise ImageFormatError(f"{path}: missing SIMPLE = T")
        naxis = header.get("NAXIS")
        if naxis != 2:
            raise ImageFormatError(f"{path}: expected a 2D image, NAXIS = {naxis}")
        bitpix = header.get("BITPIX")
        dtypes = {-64: ">f8", -32: ">f4", 16: ">i2", 32: ">i4", 8: "u1"}
        if bitpix not in dtypes:
            raise ImageFormatError(f"{path}: unsupported BITPIX = {bitpix}")
        nx, ny = header.get("NAXIS1"), header.get("NAXIS2")
        if not (isinstance(nx, int) and isinstance(ny, int) and nx > 0 and ny > 0):
            raise ImageFormatError(f"{path}: bad NAXIS1/NAXIS2 = {nx}/{ny}")
        dtype = np.dtype(dtypes[bitpix])
        expected = nx * ny * dtype.itemsize
        payload = fh.read(expected)
    if len(payload) < expected:
        raise ImageFormatError(
            f"{path}: truncated data: expected {expected} bytes after offset "
            f"{data_start}, found {len(payload)}")
    img = np.frombuffer(payload, dtype=dtype).reshape(ny, nx).astype(np.float64)
    bscale = float(header.get("BSCALE", 1.0))
    bzero = float(header.get("BZERO", 0.0))
    if bscale != 1.0 or bzero != 0.0:
        img = img * bscale + bzero
    return img


def _sidecar(path):
    return Path(str(path) + ".json")


def _write_raw(img, path):
    with open(path, "wb") as fh:
        fh.write(np.ascontiguousarray(img, dtype="<f8").tobytes())
    with open(_sidecar(path), "w") as fh:
        json.dump({"width": int(img.shape[1]), "height": int(img.shape[0])}, fh)


def _read_raw(path):
    side = _sidecar(path)
    if not side.exists():
        raise ImageFormatError(f"{path}: missing sidecar {side}")
    try:
        meta = json.loads(side.read_text())
        nx, ny = int(meta["width"]), int(meta["height"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ImageFormatError(f"{side}: bad sidecar ({exc})") from exc
    payload = Path(path).read_bytes()
    expected = nx * ny * 8
    if len(payload) != expected:
        raise ImageFormatError(
            f"{path}: expected {expected} bytes for {nx}x{ny} float64, "
            f"found {len(payload)}")
    return np.frombuffer(payload, dtype="<f8").reshape(ny, nx).copy()


def _is_raw(path):
    return str(path).endswith((".raw", ".bin", ".f64"))


def write_image(img, path, bitpix=-64, header=None):
    """Write a 2D image as FITS, or raw float64 for ``.raw``/``.bin``/``.f64``."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ImageFormatError(f"only 2D images can be written, got {img.shape}")
    if img.dtype == bool:
        img = img.astype(np.float64)
    if _is_raw(path):
        _write_raw(img, path)
    else:
        if bitpix not in (-32, -64):
            raise ImageFormatError(f"BITPIX must be -32 or -64, got {bitpix}")
        _write_fits(img, path, bitpix, header)


def read_image(path):
    """Read a 2D image written by :func:`write_image` (or any simple FITS)."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such image file: {path}")
    if _is_raw(path):
        return _read_raw(path)
    return _read_fits(path)


def _stretch(img, mode, quantile):
    lo, hi = float(img.min()), float(img.max())
    if mode == "linear":
        if hi == lo:
            return np.full(img.shape, 128, np.uint8)
        return np.round(255.0 * (img - lo) / (hi - lo)).astype(np.uint8)
    if mode == "log":
        shifted = img - lo
        pos = shifted[shifted > 0]
        if pos.size == 0:
            return np.full(img.shape, 128, np.uint8)
        floor = max(float(pos.min()), float(pos.max()) * 1e-6)
        lg = np.log10(np.maximum(shifted, floor))
        return _stretch(lg, "linear", quantile)
    if mode == "dual-linear":
        brk = float(np.quantile(img, quantile))
        if hi == lo:
            return np.full(img.shape, 128, np.uint8)
        out = np.empty(img.shape, np.float64)
        low = img <= brk
        span_lo = brk - lo
        out[low] = 200.0 * (img[low] - lo) / span_lo if span_lo > 0 else 0.0
        span_hi = hi - brk
        if span_hi > 0:
            out[~low] = 201.0 + 54.0 * (img[~low] - brk) / span_hi
        return np.round(out).astype(np.uint8)
    raise ValueError(f"unknown stretch {mode!r}")


def render_png(img, path, stretch="linear", quantile=0.98):
    """Save an 8-bit grayscale PNG preview.

    ``dual-linear`` maps values up to the ``quantile`` break onto 0..200 and
    the bright remainder onto 201..255, so a bright body and its faint
    surroundings are both visible.
    """
    from PIL import Image

    img = np.asarray(img, dtype=np.float64)
    if img.size == 0:
        raise ValueError("cannot render an empty image")
    img = np.nan_to_num(img)
    Image.fromarray(_stretch(img, stretch, quantile), mode="L").save(path)
