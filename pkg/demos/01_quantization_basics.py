"""Uniform INT8 quantization on a handful of numbers.

Walks through scale and zero-point selection for a ReLU6-style range, what
rounding and saturation do, and how dynamic ranges differ from calibrated
ones.

    python3 demos/01_quantization_basics.py
"""

import numpy as np

from holoquant import quant as Q

# A ReLU6 activation lives in [0, 6]. With 8 bits the 256 codes span that
# range, so the step is 6/255 and the zero-point puts 0.0 at code -128.
qp = Q.qparams_from_range(0.0, 6.0)
print(f"range [0, 6]: scale={qp.scale:.6f}  zero_point={qp.zero_point}")

x = np.array([0.0, 0.01, 1.0, 2.9999, 6.0, 7.5, -1.0])
codes = Q.quantize(x, qp)
back = Q.dequantize(codes, qp)
for v, c, b in zip(x, codes, back):
    print(f"  x={v:8.4f} -> code {int(c):5d} -> {b:8.4f}")
# 7.5 and -1.0 lie outside the range and saturate to the end codes.

# Weights use the symmetric scheme: zero-point 0, range [-max|w|, max|w|].
rng = np.random.default_rng(0)
w = rng.standard_normal(1000) * 0.2
w_q, w_qp = Q.quantize_weights(w)
err = np.abs(w - Q.dequantize(w_q, w_qp, np.float64))
print(f"\nweights: scale={w_qp.scale:.6f}, max error {err.max():.2e} (half a step is {w_qp.scale / 2:.2e})")

# Static quantization fixes the range from calibration data. Dynamic
# quantization measures each tensor as it arrives.
calib = Q.MinMaxObserver()
for batch in (rng.uniform(0, 2, 100), rng.uniform(0.5, 3, 100)):
    calib = Q.observe(calib, batch)
print(f"\ncalibrated envelope: [{calib.running_min:.3f}, {calib.running_max:.3f}]")

live = rng.uniform(0, 0.5, 100)
static_err = np.abs(live - Q.fake_quantize(live, calib.qparams())).max()
dynamic_err = np.abs(live - Q.fake_quantize(live, Q.dynamic_qparams(live))).max()
print(f"small-valued tensor: static error {static_err:.2e}, dynamic error {dynamic_err:.2e}")
