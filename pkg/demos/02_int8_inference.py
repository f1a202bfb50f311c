"""FP32 versus INT8 inference on the hologram network.

Builds the reference network with random weights, calibrates it on a few
synthetic RGB-D scenes, and compares the static and dynamic INT8 outputs to
the FP32 output. It also checks the integer path code for code against a
floating-point fake-quantization simulation of the same graph.

    python3 demos/02_int8_inference.py
"""

import time

import numpy as np

from holoquant import metrics
from holoquant.model import (
    build_reference_arch,
    calibrate,
    convert_int8_static,
    forward_fp32,
    forward_int8_dynamic,
    forward_int8_static,
    init_weights,
    simulate_fake_quant,
    trace_int8_static,
)
from holoquant.scenes import synthetic_rgbd

arch = build_reference_arch()
print(f"{len(arch.trunk_convs)} trunk convolutions, {len(arch.sites)} quantized activation sites")

store = init_weights(arch, seed=0)
rng = np.random.default_rng(1)
calib = [synthetic_rgbd(rng, 96, 96) for _ in range(8)]

t0 = time.perf_counter()
record = calibrate(store, calib)
qstore = convert_int8_static(store, record)
print(f"calibrated on {len(calib)} scenes in {time.perf_counter() - t0:.2f} s")

x = synthetic_rgbd(rng, 96, 96)
ref = forward_fp32(store, x)
y_static = forward_int8_static(qstore, x)
y_dynamic = forward_int8_dynamic(store, x)

ref_amp, ref_phase = metrics.split_output(ref)
print("\n              PSNR amp   PSNR phase   SSIM amp   SSIM phase")
for name, y in (("INT8 static", y_static), ("INT8 dynamic", y_dynamic)):
    amp, phase = metrics.split_output(y)
    r = metrics.quality_report(ref_amp, ref_phase, amp, phase)
    print(f"{name:13s} {r.psnr_amplitude:9.2f} {r.psnr_phase:11.2f} {r.ssim_amplitude:10.4f} {r.ssim_phase:11.4f}")

# The integer pipeline must agree code for code with a float64 simulation
# that quantizes and dequantizes at every site.
codes, oracle = trace_int8_static(qstore, x), simulate_fake_quant(qstore, x)
diff = sum(int(np.count_nonzero(codes[s] != oracle[s])) for s in oracle)
print(f"\ninteger path vs fake-quant simulation: {diff} differing codes over {len(oracle)} sites")

# Calibrating on the inference image itself makes static and dynamic agree.
same = convert_int8_static(store, calibrate(store, [x]))
print("static calibrated on x == dynamic on x:",
      np.array_equal(forward_int8_static(same, x), forward_int8_dynamic(store, x)))
