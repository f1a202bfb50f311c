"""PNG reading and 16-bit writing."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import png


def read_png(path) -> tuple[np.ndarray, int]:
    """Return ``(pixels, bitdepth)``; pixels are (H, W) or (H, W, C) unsigned ints.

    Palette images are expanded; alpha channels are kept.
    """
    reader = png.Reader(filename=str(path))
    width, height, rows, info = reader.asDirect()
    planes = info["planes"]
    bitdepth = info["bitdepth"]
    dtype = np.uint16 if bitdepth > 8 else np.uint8
    arr = np.vstack([np.asarray(r, dtype=dtype) for r in rows]).reshape(height, width, planes)
    return (arr[..., 0] if planes == 1 else arr), bitdepth


def read_unit(path) -> np.ndarray:
    """Read a PNG and scale it to [0, 1] by its bit depth."""
    arr, bitdepth = read_png(path)
    return arr.astype(np.float64) / (2**bitdepth - 1)


def write_png16(path, img) -> None:
    """Write (H, W) or (H, W, C) values in [0, 1] as a 16-bit PNG, value = round(v * 65535)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    h, w, c = img.shape
    if c not in (1, 3):
        raise ValueError("write_png16 supports 1 or 3 channels")
    q = np.rint(np.clip(img, 0, 1) * 65535).astype(np.uint16)
    writer = png.Writer(width=w, height=h, bitdepth=16, greyscale=(c == 1))
    with open(Path(path), "wb") as f:
        writer.write(f, q.reshape(h, w * c))


def write_png8(path, img) -> None:
    """Write (H, W) or (H, W, 3) values in [0, 1] as an 8-bit PNG."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    h, w, c = img.shape
    q = np.rint(np.clip(img, 0, 1) * 255).astype(np.uint8)
    writer = png.Writer(width=w, height=h, bitdepth=8, greyscale=(c == 1))
    with open(Path(path), "wb") as f:
        writer.write(f, q.reshape(h, w * c))
