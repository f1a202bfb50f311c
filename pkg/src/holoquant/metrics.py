"""Image-quality and model-size metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .model.store import manifest_bytes

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, max_value: float = 1.0) -> float:
    """10 log10(max^2 / MSE) in dB; ``inf`` for identical images."""
    if max_value <= 0:
        raise ValueError("max_value must be positive")
    err = mse(a, b)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(max_value**2 / err)


def hologram_loss(target_amp, target_phase, pred_amp, pred_phase) -> float:
    """Sum over colour channels of MSE(amplitude) + MSE(phase) / (2 pi).

    Arguments are (N, H, W) stacks, one image per colour channel; phases are
    in radians.
    """
    ta, tp = np.asarray(target_amp), np.asarray(target_phase)
    pa, pp = np.asarray(pred_amp), np.asarray(pred_phase)
    if not (len(ta) == len(tp) == len(pa) == len(pp)):
        raise ValueError("amplitude and phase stacks must have the same channel count")
    return float(
        sum(mse(ta[n], pa[n]) + mse(tp[n], pp[n]) / (2 * np.pi) for n in range(len(ta)))
    )


def _gaussian(size: int, sigma: float) -> np.ndarray:
    k = np.arange(size) - (size - 1) / 2
    g = np.exp(-(k**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img, g):
    n = len(g)
    out = sliding_window_view(img, n, axis=0) @ g
    return sliding_window_view(out, n, axis=1) @ g


def ssim_map(a, b, max_value: float = 1.0) -> np.ndarray:
    a, b = _pair(a, b)
    if a.ndim != 2:
        raise ValueError("ssim expects 2D images")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels on each side")
    g = _gaussian(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * max_value) ** 2
    c2 = (SSIM_K2 * max_value) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, max_value: float = 1.0) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03."""
    return float(ssim_map(a, b, max_value).mean())


@dataclass(frozen=True)
class QualityReport:
    psnr_amplitude: float
    psnr_phase: float
    ssim_amplitude: float
    ssim_phase: float

    def to_dict(self) -> dict:
        # JSON has no infinity; identical images report the string "inf"
        return {k: ("inf" if v == math.inf else v) for k, v in asdict(self).items()}

    def table(self) -> str:
        def fmt(v, digits):
            return "inf" if v == math.inf else f"{v:.{digits}f}"

        rows = [
            f"{'':10}{'PSNR (dB)':>22}{'SSIM':>22}",
            f"{'':10}{'Amplitude':>11}{'Phase':>11}{'Amplitude':>11}{'Phase':>11}",
            f"{'':10}{fmt(self.psnr_amplitude, 2):>11}{fmt(self.psnr_phase, 2):>11}"
            f"{fmt(self.ssim_amplitude, 4):>11}{fmt(self.ssim_phase, 4):>11}",
        ]
        return "\n".join(rows)


def quality_report(ref_amp, ref_phase, test_amp, test_phase) -> QualityReport:
    """PSNR and SSIM of amplitude and (normalized [0, 1]) phase images.

    Inputs are (C, H, W) stacks in [0, 1]; each metric is averaged over C.
    """
    stacks = [np.asarray(s, dtype=np.float64) for s in (ref_amp, ref_phase, test_amp, test_phase)]
    for s in stacks:
        if s.ndim != 3:
            raise ValueError("expected (C, H, W) image stacks")
    ra, rp, ta, tp = stacks

    def avg(fn, r, t):
        return float(np.mean([fn(r[c], t[c]) for c in range(len(r))]))

    return QualityReport(
        psnr_amplitude=avg(psnr, ra, ta),
        psnr_phase=avg(psnr, rp, tp),
        ssim_amplitude=avg(ssim, ra, ta),
        ssim_phase=avg(ssim, rp, tp),
    )


def split_output(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(1, 6, H, W) network output -> (amplitude (3, H, W), phase (3, H, W))."""
    y = np.asarray(y)
    if y.ndim == 4:
        y = y[0]
    return y[:3], y[3:6]


def phase_radians(phase01):
    return (np.asarray(phase01, dtype=np.float64) - 0.5) * 2 * np.pi


def size_report(store) -> dict:
    """Byte accounting of a weight store as it would be written to disk."""
    manifest = manifest_bytes(store)
    per_tensor = [
        {"name": k, "dtype": v.dtype.name, "shape": list(v.shape), "bytes": int(v.nbytes)}
        for k, v in store.tensors.items()
    ]
    payload = sum(t["bytes"] for t in per_tensor)
    return {
        "kind": store.kind,
        "payload_bytes": payload,
        "manifest_bytes": len(manifest),
        "file_bytes": 8 + len(manifest) + payload,
        "per_tensor": per_tensor,
    }
