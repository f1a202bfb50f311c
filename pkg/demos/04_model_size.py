"""Where the bytes go in FP32 and INT8 weight files.

    python3 demos/04_model_size.py
"""

from collections import defaultdict

from holoquant import metrics
from holoquant.model import calibrate, convert_int8_dynamic, convert_int8_static, init_weights
from holoquant.scenes import synthetic_rgbd

store = init_weights(seed=0)
static = convert_int8_static(store, calibrate(store, [synthetic_rgbd(s, 32, 32) for s in range(4)]))
dynamic = convert_int8_dynamic(store)

reports = [metrics.size_report(s) for s in (store, static, dynamic)]
fp = reports[0]
print(f"{'kind':14s}{'payload':>10s}{'manifest':>10s}{'file':>10s}{'vs fp32 file':>14s}")
for r in reports:
    print(f"{r['kind']:14s}{r['payload_bytes']:>10d}{r['manifest_bytes']:>10d}{r['file_bytes']:>10d}"
          f"{r['file_bytes'] / fp['file_bytes']:>14.3f}")

# Batch norm statistics disappear in the INT8 files because they are folded
# into the convolutions. Biases grow relative to weights: they stay 32-bit.
for r in (fp, reports[1]):
    by_kind = defaultdict(int)
    for t in r["per_tensor"]:
        name = t["name"]
        key = "bn." + name.split(".bn.")[1] if ".bn." in name else name.rsplit(".", 1)[1]
        by_kind[key] += t["bytes"]
    print(f"\n{r['kind']} payload by tensor type:")
    for k, v in sorted(by_kind.items(), key=lambda kv: -kv[1]):
        print(f"  {k:16s}{v:>8d}")
