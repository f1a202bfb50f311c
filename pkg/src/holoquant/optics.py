"""Scalar wave optics: complex fields, point-source holograms, angular spectrum.

Coordinates: pixel ``(iy, ix)`` sits at ``x = (ix - W/2) * pitch``,
``y = (iy - H/2) * pitch``, so the grid centre is the optical axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WAVELENGTHS_RGB = (638e-9, 520e-9, 450e-9)
PITCH = 8.0e-6


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft(x, axis: int = -1, inverse: bool = False) -> np.ndarray:
    """Unitary radix-2 decimation-in-time FFT along ``axis``.

    Natural-order input and output; both directions scale by 1/sqrt(N), so an
    inverse after a forward transform returns the input.
    """
    x = np.moveaxis(np.asarray(x, dtype=np.complex128), axis, -1)
    n = x.shape[-1]
    if not _is_pow2(n):
        raise ValueError(f"FFT length must be a power of two, got {n}")
    a = x[..., _bit_reverse(n)]
    sign = 1.0 if inverse else -1.0
    m = 2
    while m <= n:
        half = m // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / m)
        a = a.reshape(*a.shape[:-1], n // m, m)
        even = a[..., :half]
        odd = a[..., half:] * tw
        a = np.concatenate([even + odd, even - odd], axis=-1).reshape(*x.shape)
        m *= 2
    a = a / np.sqrt(n)
    return np.moveaxis(a, -1, axis)


def fft2(x, inverse: bool = False) -> np.ndarray:
    return fft(fft(x, -1, inverse), -2, inverse)


def ifft2(x) -> np.ndarray:
    return fft2(x, inverse=True)


@dataclass(frozen=True)
class ComplexField:
    values: np.ndarray  # (H, W) complex128
    pitch: float
    wavelength: float

    def __post_init__(self):
        if self.pitch <= 0 or self.wavelength <= 0:
            raise ValueError("pitch and wavelength must be positive")
        if np.asarray(self.values).ndim != 2:
            raise ValueError("field values must be a 2D array")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))


@dataclass(frozen=True)
class ScenePoint:
    x: float
    y: float
    z: float
    amplitude: float = 1.0


def field_from_amp_phase(amp, phase01, pitch: float = PITCH, wavelength: float = 520e-9) -> ComplexField:
    """Complex field ``amp * exp(i * (phase01 - 0.5) * 2pi)``."""
    amp = np.asarray(amp, dtype=np.float64)
    phase01 = np.asarray(phase01, dtype=np.float64)
    if amp.shape != phase01.shape:
        raise ValueError(f"amplitude {amp.shape} and phase {phase01.shape} differ in shape")
    return ComplexField(amp * np.exp(1j * (phase01 - 0.5) * 2 * np.pi), pitch, wavelength)


def intensity(field: ComplexField) -> np.ndarray:
    v = field.values
    return (v.real**2 + v.imag**2).astype(np.float32)


def spatial_frequencies(n: int, pitch: float) -> np.ndarray:
    """FFT-order frequencies k / (n * pitch), k = 0..n/2-1, -n/2..-1."""
    k = np.arange(n)
    k = np.where(k < (n + 1) // 2, k, k - n)
    return k / (n * pitch)


def transfer_function(shape, pitch: float, wavelength: float, z: float) -> np.ndarray:
    """Angular-spectrum transfer function with evanescent waves cut off."""
    h, w = shape
    fy = spatial_frequencies(h, pitch)[:, None]
    fx = spatial_frequencies(w, pitch)[None, :]
    arg = wavelength**-2 - fx**2 - fy**2
    prop = arg >= 0
    kz = np.sqrt(np.where(prop, arg, 0.0))
    return np.where(prop, np.exp(2j * np.pi * z * kz), 0.0)


def asm_propagate(field: ComplexField, z: float) -> ComplexField:
    """Propagate ``field`` a distance ``z`` (negative = backwards)."""
    h, w = field.shape
    if not (_is_pow2(h) and _is_pow2(w)):
        raise ValueError(f"field dimensions must be powers of two, got {field.shape}")
    tf = transfer_function(field.shape, field.pitch, field.wavelength, z)
    out = ifft2(fft2(field.values) * tf)
    return ComplexField(out, field.pitch, field.wavelength)


def grid_coordinates(height: int, width: int, pitch: float) -> tuple[np.ndarray, np.ndarray]:
    y = (np.arange(height) - height / 2) * pitch
    x = (np.arange(width) - width / 2) * pitch
    return y, x


def pbm_hologram(
    points,
    height: int,
    width: int,
    pitch: float = PITCH,
    wavelength: float = 520e-9,
    sign: int = 1,
    antialias: bool = True,
) -> ComplexField:
    """Sum of spherical waves ``a / r * exp(sign * i 2pi r / lambda)`` from each point.

    No occlusion handling. ``sign=-1`` gives the complex conjugate hologram.
    With ``antialias`` each wave is kept only where its local spatial
    frequency along x and y is below the grid's Nyquist limit 1/(2 pitch);
    outside that support the sampled wave aliases and back-propagates to
    ghost foci offset by multiples of lambda*z/pitch.
    """
    points = list(points)
    if not points:
        raise ValueError("need at least one scene point")
    if any(p.z <= 0 for p in points):
        raise ValueError("scene points must lie in front of the hologram (z > 0)")
    ys, xs = grid_coordinates(height, width, pitch)
    k = sign * 2 * np.pi / wavelength
    out = np.zeros((height, width), dtype=np.complex128)
    for p in points:
        dx = xs[None, :] - p.x
        dy = ys[:, None] - p.y
        r = np.sqrt(dx**2 + dy**2 + p.z**2)
        wave = p.amplitude / r * np.exp(1j * k * r)
        if antialias:
            # local frequency of exp(i 2pi r / lambda) along x is dx / (lambda r)
            limit = wavelength * r / (2 * pitch)
            wave = np.where((np.abs(dx) <= limit) & (np.abs(dy) <= limit), wave, 0)
        out += wave
    return ComplexField(out, pitch, wavelength)


def points_from_rgbd(channel, depth, z_near: float = 3e-3, z_far: float = 9e-3, pitch: float = PITCH, stride: int = 1):
    """One scene point per (strided) pixel: amplitude from ``channel``, z from ``depth``.

    Depth in [0, 1] maps linearly onto [z_near, z_far].
    """
    channel = np.asarray(channel, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if channel.shape != depth.shape:
        raise ValueError("colour and depth maps differ in shape")
    h, w = channel.shape
    ys, xs = grid_coordinates(h, w, pitch)
    pts = []
    for iy in range(0, h, stride):
        for ix in range(0, w, stride):
            a = channel[iy, ix]
            if a > 0:
                z = z_near + depth[iy, ix] * (z_far - z_near)
                pts.append(ScenePoint(xs[ix], ys[iy], z, a))
    return pts


def pad_to_pow2(img: np.ndarray) -> tuple[np.ndarray, tuple[int, int]]:
    """Zero-pad the last two axes up to powers of two, centred. Returns (padded, (top, left))."""
    h, w = img.shape[-2:]
    H = 1 << max(0, (h - 1).bit_length())
    W = 1 << max(0, (w - 1).bit_length())
    top, left = (H - h) // 2, (W - w) // 2
    pad = [(0, 0)] * (img.ndim - 2) + [(top, H - h - top), (left, W - w - left)]
    return np.pad(img, pad), (top, left)
