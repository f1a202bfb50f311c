"""FP32 tensor kernels on NCHW numpy arrays.

Every function is pure: inputs are never modified and the result for a given
input is bit-reproducible. Convolutions use stride 1 and zero "same" padding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# Upper bound on the im2col buffer (elements) built per GEMM call.
_COLS_BUDGET = 1 << 23


@dataclass(frozen=True)
class ConvDescriptor:
    in_channels: int
    out_channels: int
    kernel: tuple[int, int] = (3, 3)
    groups: int = 1

    def __post_init__(self):
        kh, kw = self.kernel
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError(f"kernel must be odd, got {self.kernel}")
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise ValueError("channel counts must be divisible by groups")

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels // self.groups, *self.kernel)

    @property
    def padding(self) -> tuple[int, int]:
        return ((self.kernel[0] - 1) // 2, (self.kernel[1] - 1) // 2)


@dataclass(frozen=True)
class BatchNormParams:
    """Inference-mode batch normalization statistics for one layer."""

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5

    def __post_init__(self):
        n = len(self.gamma)
        if not (len(self.beta) == len(self.running_mean) == len(self.running_var) == n):
            raise ValueError("batch norm vectors must have equal length")

    @property
    def channels(self) -> int:
        return len(self.gamma)

    @classmethod
    def identity(cls, channels: int, eps: float = 1e-5) -> "BatchNormParams":
        return cls(
            gamma=np.ones(channels, np.float32),
            beta=np.zeros(channels, np.float32),
            running_mean=np.zeros(channels, np.float32),
            running_var=np.ones(channels, np.float32),
            eps=eps,
        )


def _check_conv_shapes(x, weight, groups):
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError("conv2d expects NCHW input and OIHW weights")
    out_ch, cin_g, kh, kw = weight.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"kernel must be odd, got {(kh, kw)}")
    if x.shape[1] != cin_g * groups:
        raise ValueError(
            f"input has {x.shape[1]} channels, weights expect {cin_g * groups}"
        )
    if out_ch % groups:
        raise ValueError("out_channels must be divisible by groups")


def im2col_gemm(x: np.ndarray, weight: np.ndarray, groups: int = 1) -> np.ndarray:
    """Correlate ``x`` (N,C,H,W) with ``weight`` (O,C/g,kh,kw), zero padded.

    Arithmetic happens in the common dtype of the two operands, so the same
    routine serves float kernels and integer accumulation. Columns are laid
    out (c, i, j) so each output is a dot product in that fixed order.
    """
    _check_conv_shapes(x, weight, groups)
    n, c, h, w = x.shape
    out_ch, cin_g, kh, kw = weight.shape
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    dtype = np.result_type(x, weight)
    xp = np.pad(x.astype(dtype, copy=False), ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    # (N, C, H, W, kh, kw) view onto the padded input
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win.reshape(n, groups, cin_g, h, w, kh, kw)
    og = out_ch // groups
    wmat = weight.astype(dtype, copy=False).reshape(groups, og, cin_g * kh * kw)

    out = np.empty((n, groups, og, h, w), dtype=dtype)
    k = cin_g * kh * kw
    rows = max(1, min(h, _COLS_BUDGET // max(1, w * k)))
    for b in range(n):
        for g in range(groups):
            wt = np.ascontiguousarray(wmat[g].T)
            for y0 in range(0, h, rows):
                y1 = min(h, y0 + rows)
                cols = win[b, g, :, y0:y1].transpose(1, 2, 0, 3, 4).reshape(-1, k)
                res = cols @ wt
                out[b, g, :, y0:y1] = res.T.reshape(og, y1 - y0, w)
    return out.reshape(n, out_ch, h, w)


def conv2d(x, weight, bias=None, groups: int = 1) -> np.ndarray:
    """Stride-1, same-padded 2D convolution (cross-correlation) in NCHW.

    Float32 operands give a float32 result; float64 operands keep float64.
    Float32 convolutions accumulate in float64 and round once at the end, so
    the result does not depend on the order the GEMM sums in.
    """
    x = np.asarray(x)
    weight = np.asarray(weight)
    out_dtype = np.result_type(x, weight)
    if bias is not None:
        bias = np.asarray(bias)
        if bias.shape != (weight.shape[0],):
            raise ValueError(f"bias must have shape ({weight.shape[0]},)")
    acc = np.float64 if out_dtype == np.float32 else out_dtype
    out = im2col_gemm(x.astype(acc, copy=False), weight.astype(acc, copy=False), groups)
    if bias is not None:
        out += bias.astype(acc, copy=False)[None, :, None, None]
    return out.astype(out_dtype, copy=False)


def batchnorm_apply(x: np.ndarray, bn: BatchNormParams) -> np.ndarray:
    if x.shape[1] != bn.channels:
        raise ValueError(f"input has {x.shape[1]} channels, batch norm has {bn.channels}")
    dt = x.dtype
    inv = (bn.gamma / np.sqrt(bn.running_var + bn.eps)).astype(dt)
    mean = bn.running_mean.astype(dt)
    beta = bn.beta.astype(dt)
    return (x - mean[:, None, None]) * inv[:, None, None] + beta[:, None, None]


def fold_batchnorm(weight, bias, bn: BatchNormParams):
    """Fold an inference batch norm into the preceding convolution.

    Returns ``(weight', bias')`` with conv2d(x, w', b') equal to
    batchnorm_apply(conv2d(x, w, b), bn).
    """
    weight = np.asarray(weight)
    if bn.channels != weight.shape[0]:
        raise ValueError("batch norm channel count must equal out_channels")
    if np.any(np.asarray(bn.running_var) < 0):
        raise ValueError("batch norm running_var must be non-negative")
    bias = np.zeros(weight.shape[0], weight.dtype) if bias is None else np.asarray(bias)
    # fold in float64, then return in the weight dtype
    inv = bn.gamma.astype(np.float64) / np.sqrt(bn.running_var.astype(np.float64) + bn.eps)
    w = weight.astype(np.float64) * inv[:, None, None, None]
    b = (bias.astype(np.float64) - bn.running_mean) * inv + bn.beta
    return w.astype(weight.dtype), b.astype(weight.dtype)


def relu6(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0, 6).astype(x.dtype, copy=False)


def hardtanh01(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0, 1).astype(x.dtype, copy=False)


def concat_channels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.dtype != b.dtype:
        raise ValueError(f"element kinds differ: {a.dtype} vs {b.dtype}")
    if a.ndim != 4 or b.ndim != 4 or a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ValueError(f"cannot concatenate {a.shape} and {b.shape} along channels")
    return np.concatenate([a, b], axis=1)


def add_residual(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a + b
