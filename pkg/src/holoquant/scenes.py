"""Synthetic RGB-D scenes standing in for a hologram dataset."""

from __future__ import annotations

import numpy as np


def _blobs(rng, h, w, n, channels):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    out = np.zeros((channels, h, w))
    for _ in range(n):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        r = rng.uniform(0.05, 0.3) * min(h, w)
        g = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))
        out += rng.uniform(0, 1, (channels, 1, 1)) * g
    return out


def synthetic_rgbd(rng, height: int, width: int, blobs: int = 6) -> np.ndarray:
    """One (1, 4, H, W) float32 RGB-D image in [0, 1].

    Colour and depth are sums of Gaussian blobs plus a little pixel noise.
    Each scene gets its own contrast and brightness, so value ranges vary
    from scene to scene the way real images do.
    """
    rng = np.random.default_rng(rng)
    rgb = _blobs(rng, height, width, blobs, 3)
    rgb /= max(rgb.max(), 1e-12)
    lo = rng.uniform(0.0, 0.3)
    hi = rng.uniform(0.5, 1.0)
    rgb = lo + (hi - lo) * rgb + rng.normal(0, 0.01, rgb.shape)
    depth = _blobs(rng, height, width, max(1, blobs // 2), 1)
    depth = (depth - depth.min()) / max(np.ptp(depth), 1e-12)
    img = np.concatenate([rgb, depth])[None]
    return np.clip(img, 0, 1).astype(np.float32)


def uniform_rgbd(rng, height: int, width: int) -> np.ndarray:
    """White-noise RGB-D input, uniform in [0, 1)."""
    rng = np.random.default_rng(rng)
    return rng.random((1, 4, height, width)).astype(np.float32)
