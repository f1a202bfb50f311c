"""Uniform integer quantization and the INT8 kernels built on it.

A real value ``x`` maps to ``clamp(round(x / S) + Z)`` with round-half-even and
saturation to the signed b-bit range; ``(x_q - Z) * S`` maps back. Scales are
FP32-representable values carried as Python floats; all arithmetic that
involves them (division, requantization multipliers) runs in double.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .tensor import im2col_gemm

SYMMETRIC = "symmetric"
ASYMMETRIC = "asymmetric"
_SCHEMES = (SYMMETRIC, ASYMMETRIC)

INT32_MAX = 2**31 - 1


def qrange(bits: int) -> tuple[int, int]:
    return -(2 ** (bits - 1)), 2 ** (bits - 1) - 1


@dataclass(frozen=True)
class QuantParams:
    scale: float
    zero_point: int
    bits: int = 8
    scheme: str = ASYMMETRIC
    alpha: float = field(default=0.0)
    beta: float = field(default=1.0)

    def __post_init__(self):
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        if not self.alpha < self.beta:
            raise ValueError(f"clip range must satisfy alpha < beta, got [{self.alpha}, {self.beta}]")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == SYMMETRIC and self.zero_point != 0:
            raise ValueError("symmetric quantization requires zero_point == 0")
        if not 2 <= self.bits <= 8:
            raise ValueError("bits must lie in [2, 8]")

    @property
    def qmin(self) -> int:
        return qrange(self.bits)[0]

    @property
    def qmax(self) -> int:
        return qrange(self.bits)[1]

    def to_dict(self) -> dict:
        return {
            "scale": repr(float(self.scale)),
            "zero_point": int(self.zero_point),
            "bits": int(self.bits),
            "scheme": self.scheme,
            "range": [float(self.alpha), float(self.beta)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantParams":
        alpha, beta = d["range"]
        return cls(
            scale=float(d["scale"]),
            zero_point=int(d["zero_point"]),
            bits=int(d["bits"]),
            scheme=d["scheme"],
            alpha=float(alpha),
            beta=float(beta),
        )


def scale_from_range(alpha: float, beta: float, bits: int = 8) -> float:
    if bits < 2:
        raise ValueError("bits must be at least 2")
    if not beta > alpha:
        raise ValueError(f"degenerate clip range [{alpha}, {beta}]")
    s = (float(beta) - float(alpha)) / (2**bits - 1)
    # Keep S representable in FP32, rounding toward zero so [alpha, beta] stays
    # inside the integer range. This also breaks exact half-way ties between
    # integer accumulators and ranges measured from those same accumulators.
    s32 = np.float32(s)
    # compare in double: NumPy would otherwise cast ``s`` down to float32
    if float(s32) > s:
        s32 = np.nextafter(s32, np.float32(0))
    if s32 < np.finfo(np.float32).tiny:
        raise ValueError(f"clip range [{alpha}, {beta}] is too narrow for FP32 scale")
    return float(s32)


def zero_point_asymmetric(alpha: float, scale: float, bits: int = 8) -> int:
    if not scale > 0:
        raise ValueError("scale must be positive")
    return int(-np.rint(np.float64(alpha) / scale) - 2 ** (bits - 1))


def qparams_from_range(alpha: float, beta: float, bits: int = 8, scheme: str = ASYMMETRIC) -> QuantParams:
    """Quantization parameters for the clip range ``[alpha, beta]``.

    The symmetric scheme first widens the range to ``[-m, m]`` with
    ``m = max(|alpha|, |beta|)`` and pins the zero-point to 0.
    """
    alpha, beta = float(alpha), float(beta)
    if scheme == SYMMETRIC:
        m = max(abs(alpha), abs(beta))
        alpha, beta = -m, m
        s = scale_from_range(alpha, beta, bits)
        return QuantParams(s, 0, bits, SYMMETRIC, alpha, beta)
    s = scale_from_range(alpha, beta, bits)
    return QuantParams(s, zero_point_asymmetric(alpha, s, bits), bits, ASYMMETRIC, alpha, beta)


def quantize(x, qp: QuantParams) -> np.ndarray:
    """Map reals to saturated signed integer codes (int8 storage)."""
    x = np.asarray(x, dtype=np.float64)
    q = np.rint(x / qp.scale) + qp.zero_point
    return np.clip(q, qp.qmin, qp.qmax).astype(np.int8)


def dequantize(xq, qp: QuantParams, dtype=np.float32) -> np.ndarray:
    xq = np.asarray(xq)
    return ((xq.astype(np.float64) - qp.zero_point) * qp.scale).astype(dtype, copy=False)


def fake_quantize(x, qp: QuantParams) -> np.ndarray:
    """quantize followed by dequantize, returned in the input's float dtype."""
    x = np.asarray(x)
    dt = x.dtype if np.issubdtype(x.dtype, np.floating) else np.float32
    return dequantize(quantize(x, qp), qp, dtype=dt)


@dataclass(frozen=True)
class MinMaxObserver:
    """Running min/max envelope of everything observed so far."""

    running_min: float = np.inf
    running_max: float = -np.inf
    count: int = 0

    def merge(self, other: "MinMaxObserver") -> "MinMaxObserver":
        return MinMaxObserver(
            min(self.running_min, other.running_min),
            max(self.running_max, other.running_max),
            self.count + other.count,
        )

    def qparams(self, bits: int = 8, scheme: str = ASYMMETRIC) -> QuantParams:
        if self.count == 0:
            raise ValueError("observer has seen no data")
        return _widened_qparams(self.running_min, self.running_max, bits, scheme)


def observe(obs: MinMaxObserver, x) -> MinMaxObserver:
    x = np.asarray(x)
    if x.size == 0:
        return replace(obs, count=obs.count + 1)
    return MinMaxObserver(
        min(obs.running_min, float(x.min())),
        max(obs.running_max, float(x.max())),
        obs.count + 1,
    )


def _widened_qparams(lo: float, hi: float, bits: int, scheme: str) -> QuantParams:
    if scheme == SYMMETRIC:
        m = max(abs(lo), abs(hi))
        if 2 * m / (2**bits - 1) < np.finfo(np.float32).tiny:
            lo, hi = -0.5, 0.5
    elif (hi - lo) / (2**bits - 1) < np.finfo(np.float32).tiny:
        # constant activation (or a spread below FP32 resolution): give it a
        # unit-width range around the value
        lo, hi = lo - 0.5, lo + 0.5
    return qparams_from_range(lo, hi, bits, scheme)


def dynamic_qparams(x, bits: int = 8, scheme: str = ASYMMETRIC) -> QuantParams:
    """Clip range taken from the array itself, as done at inference time."""
    x = np.asarray(x)
    if x.size == 0:
        raise ValueError("cannot compute a range for an empty array")
    lo, hi = float(x.min()), float(x.max())
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError("array contains non-finite values")
    return _widened_qparams(lo, hi, bits, scheme)


def quantize_weights(w, bits: int = 8) -> tuple[np.ndarray, QuantParams]:
    """Per-tensor symmetric weight quantization. All-zero tensors are rejected."""
    w = np.asarray(w)
    m = float(np.abs(w).max()) if w.size else 0.0
    if m == 0:
        raise ValueError("weight tensor has a zero-width range")
    qp = qparams_from_range(-m, m, bits, SYMMETRIC)
    return quantize(w, qp), qp


def quantize_bias(bias, input_scale: float, weight_scale: float) -> np.ndarray:
    """Bias in the accumulator domain: scale S_x * S_w, zero-point 0, int32."""
    q = np.rint(np.asarray(bias, dtype=np.float64) / (input_scale * weight_scale))
    if np.any(np.abs(q) > INT32_MAX):
        raise OverflowError("quantized bias does not fit in int32")
    return q.astype(np.int32)


def activation_code_bounds(qp: QuantParams, activation: str | None) -> tuple[int, int]:
    """Integer clamp equivalent to applying ``activation`` before quantizing.

    Quantization is monotone, so quantize(clip(y, a, b)) equals
    clip(quantize(y), quantize(a), quantize(b)).
    """
    lo, hi = qp.qmin, qp.qmax
    if activation is None:
        return lo, hi
    if activation == "relu6":
        top = 6.0
    elif activation == "hardtanh01":
        top = 1.0
    else:
        raise ValueError(f"unknown activation {activation!r}")
    qlo = int(quantize(0.0, qp))
    qhi = int(quantize(top, qp))
    return max(lo, qlo), min(hi, qhi)


def requantize(values: np.ndarray, out_qp: QuantParams, activation: str | None = None) -> np.ndarray:
    """Round real-valued codes (already divided by the output scale) to int8."""
    lo, hi = activation_code_bounds(out_qp, activation)
    q = np.rint(values) + out_qp.zero_point
    return np.clip(q, lo, hi).astype(np.int8)


def qconv2d(
    x_q: np.ndarray,
    x_qp: QuantParams,
    w_q: np.ndarray,
    w_qp: QuantParams,
    bias_q: np.ndarray | None,
    out_qp: QuantParams,
    groups: int = 1,
    activation: str | None = None,
) -> np.ndarray:
    """INT8 convolution with INT32 accumulation and double-precision requantization.

    Padding is applied in the shifted domain (x_q - Z_x), i.e. padded pixels
    dequantize to exactly zero. ``activation`` fuses ReLU6/Hardtanh as an
    integer clamp on the output codes.
    """
    acc = qconv2d_accumulate(x_q, x_qp, w_q, w_qp, bias_q, groups)
    mult = (x_qp.scale * w_qp.scale) / out_qp.scale
    return requantize(acc * mult, out_qp, activation)


def _exact_dtype(bound: int):
    # Integers with magnitude < 2**mantissa_bits are exact in a float type, and
    # every partial sum of the dot product is bounded by ``bound``, so the float
    # GEMM returns the exact integer result whatever its summation order.
    if bound < 2**24:
        return np.float32
    if bound < 2**53:
        return np.float64
    return np.int64


def qconv2d_accumulate(x_q, x_qp, w_q, w_qp, bias_q=None, groups: int = 1, exact_gemm: bool = True) -> np.ndarray:
    """The INT32 accumulator of :func:`qconv2d`, before requantization.

    With ``exact_gemm`` the multiply-accumulate runs on a float GEMM whose
    mantissa provably holds every partial sum; otherwise it is a plain int32
    matrix product. Both give identical results.
    """
    xs = np.asarray(x_q).astype(np.int32) - np.int32(x_qp.zero_point)
    ws = np.asarray(w_q).astype(np.int32) - np.int32(w_qp.zero_point)
    k = ws.shape[1] * ws.shape[2] * ws.shape[3]
    bmax = 0 if bias_q is None else int(np.abs(np.asarray(bias_q, np.int64)).max(initial=0))
    xmax = int(np.abs(xs).max(initial=0))
    wmax = int(np.abs(ws).max(initial=0))
    # x_qp.zero_point can be far outside int8 when the clip range excludes 0
    if abs(x_qp.zero_point) + 2**x_qp.bits > INT32_MAX or k * xmax * wmax + bmax > INT32_MAX:
        raise OverflowError("int32 accumulator could overflow for these operands")
    if exact_gemm:
        dt = _exact_dtype(k * xmax * wmax)
        acc = im2col_gemm(xs.astype(dt), ws.astype(dt), groups).astype(np.int32)
    else:
        acc = im2col_gemm(xs, ws, groups)
    if bias_q is not None:
        acc += np.asarray(bias_q, dtype=np.int32)[None, :, None, None]
    return acc


def qadd(a_q, a_qp: QuantParams, b_q, b_qp: QuantParams, out_qp: QuantParams, activation=None):
    """Saturating INT8 addition; both addends are rescaled onto the output scale."""
    if np.shape(a_q) != np.shape(b_q):
        raise ValueError(f"shape mismatch: {np.shape(a_q)} vs {np.shape(b_q)}")
    ra = (np.asarray(a_q, np.int32) - a_qp.zero_point) * (a_qp.scale / out_qp.scale)
    rb = (np.asarray(b_q, np.int32) - b_qp.zero_point) * (b_qp.scale / out_qp.scale)
    return requantize(ra + rb, out_qp, activation)


def qrescale(x_q, in_qp: QuantParams, out_qp: QuantParams, activation=None):
    """Move INT8 codes from one set of quantization parameters to another."""
    r = (np.asarray(x_q, np.int32) - in_qp.zero_point) * (in_qp.scale / out_qp.scale)
    return requantize(r, out_qp, activation)
