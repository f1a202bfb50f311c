"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 data/format error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
import png

from . import metrics, optics, pngio
from .model import (
    FP32,
    INT8_DYNAMIC,
    INT8_STATIC,
    WeightFileError,
    build_reference_arch,
    calibrate,
    convert_int8_dynamic,
    convert_int8_static,
    expected_shapes,
    forward_fp32,
    forward_int8_dynamic,
    forward_int8_static,
    init_weights,
    load_weights,
    save_weights,
)
from .scenes import synthetic_rgbd

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
DEFAULT_SEED = 0
CALIB_DEFAULT = 8


class DataError(Exception):
    pass


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# ------------------------------------------------------------------ inputs


def load_rgbd(rgb_path, depth_path) -> np.ndarray:
    """(1, 4, H, W) float32 tensor from an RGB PNG and a depth PNG."""
    rgb = pngio.read_unit(rgb_path)
    depth = pngio.read_unit(depth_path)
    if rgb.ndim != 3 or rgb.shape[2] < 3:
        raise DataError(f"{rgb_path}: expected a 3-channel colour image")
    if depth.ndim != 2:
        raise DataError(f"{depth_path}: expected a single-channel depth map")
    if rgb.shape[:2] != depth.shape:
        raise DataError(f"colour {rgb.shape[:2]} and depth {depth.shape} sizes differ")
    x = np.concatenate([rgb[..., :3].transpose(2, 0, 1), depth[None]])
    return x[None].astype(np.float32)


def save_rgbd(x: np.ndarray, rgb_path, depth_path) -> None:
    x = np.asarray(x)[0]
    pngio.write_png8(rgb_path, x[:3].transpose(1, 2, 0))
    pngio.write_png16(depth_path, x[3])


def calibration_pairs(calib_dir) -> list[tuple[Path, Path]]:
    d = Path(calib_dir)
    if not d.is_dir():
        raise DataError(f"calibration directory {d} does not exist")
    pairs = []
    for rgb in sorted(d.glob("*_rgb.png")):
        depth = rgb.with_name(rgb.name[: -len("_rgb.png")] + "_depth.png")
        if depth.exists():
            pairs.append((rgb, depth))
    return pairs


def _read_stack(path) -> np.ndarray:
    img = pngio.read_unit(path)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DataError(f"{path}: expected a 3-channel image")
    return img.transpose(2, 0, 1)


# ---------------------------------------------------------------- commands


def cmd_gen_weights(args) -> int:
    arch = build_reference_arch(num_blocks=args.blocks, width=args.width)
    store = init_weights(arch, seed=args.seed, bn=args.bn)
    size = save_weights(store, args.out)
    _log(f"wrote {args.out}: {size} bytes, payload crc32 {store.checksum():08x}")
    return EXIT_OK


def cmd_gen_scenes(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    for i in range(args.count):
        x = synthetic_rgbd(rng, args.height, args.width)
        save_rgbd(x, out / f"scene{i:03d}_rgb.png", out / f"scene{i:03d}_depth.png")
    _log(f"wrote {args.count} RGB-D pairs to {out}")
    return EXIT_OK


def cmd_quantize(args) -> int:
    store = load_weights(args.weights)
    if store.kind != FP32:
        raise DataError(f"quantize needs an fp32 store, got {store.kind}")
    if args.mode == "dynamic":
        qstore = convert_int8_dynamic(store)
    else:
        if not args.calib_dir:
            raise DataError("static quantization requires --calib-dir")
        pairs = calibration_pairs(args.calib_dir)[: args.calib_limit]
        if not pairs:
            raise DataError(f"no *_rgb.png / *_depth.png pairs in {args.calib_dir}")
        record = calibrate(store, [load_rgbd(r, d) for r, d in pairs])
        qstore = convert_int8_static(store, record)
        _log(f"calibrated {len(record.qparams)} activation sites on {len(pairs)} images")
    size = save_weights(qstore, args.out)
    ratio = qstore.payload_bytes / store.payload_bytes
    _log(f"wrote {args.out} ({qstore.kind}): {size} bytes, payload ratio {ratio:.3f} of fp32")
    return EXIT_OK


def _run(store, x, precision):
    if precision == "fp32":
        if store.kind != FP32:
            raise DataError(f"precision fp32 needs an fp32 store, got {store.kind}")
        return forward_fp32(store, x)
    if precision == "int8-static":
        if store.kind != INT8_STATIC:
            raise DataError(f"precision int8-static needs an int8-static store, got {store.kind}")
        return forward_int8_static(store, x)
    if store.kind not in (FP32, INT8_DYNAMIC):
        raise DataError(f"precision int8-dynamic needs an fp32 or int8-dynamic store, got {store.kind}")
    return forward_int8_dynamic(store, x)


def cmd_infer(args) -> int:
    store = load_weights(args.weights)
    x = load_rgbd(args.rgb, args.depth)
    y = _run(store, x, args.precision)
    amp, phase = metrics.split_output(y)
    pngio.write_png16(args.out_amp, amp.transpose(1, 2, 0))
    pngio.write_png16(args.out_phase, phase.transpose(1, 2, 0))

    ref = None
    if args.reference:
        ref = forward_fp32(load_weights(args.reference), x)
    elif args.precision != "fp32" and store.kind == FP32:
        ref = forward_fp32(store, x)
    if ref is not None:
        ra, rp = metrics.split_output(ref)
        _log(
            f"PSNR vs fp32: amplitude {metrics.psnr(ra, amp):.2f} dB, "
            f"phase {metrics.psnr(rp, phase):.2f} dB"
        )
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    amp = _read_stack(args.amp)
    phase = _read_stack(args.phase)
    if amp.shape != phase.shape:
        raise DataError(f"amplitude {amp.shape} and phase {phase.shape} differ")
    wavelengths = [float(w) * 1e-9 for w in args.wavelengths.split(",")]
    if len(wavelengths) != amp.shape[0]:
        raise DataError(f"need {amp.shape[0]} wavelengths, got {len(wavelengths)}")
    z = args.z * 1e-3
    pitch = args.pitch * 1e-6
    h, w = amp.shape[1:]
    amp_p, (top, left) = optics.pad_to_pow2(amp)
    phase_p, _ = optics.pad_to_pow2(phase)
    # padded pixels get amplitude 0, so their phase value is irrelevant
    out = []
    for c, lam in enumerate(wavelengths):
        field = optics.field_from_amp_phase(amp_p[c], phase_p[c], pitch, lam)
        img = optics.intensity(optics.asm_propagate(field, -z))
        out.append(img[top : top + h, left : left + w])
    out = np.stack(out)
    peak = float(out.max())
    if peak > 0:
        out = out / peak
    pngio.write_png16(args.out, out.transpose(1, 2, 0))
    meta = {
        "z_mm": args.z,
        "wavelengths_nm": [w * 1e9 for w in wavelengths],
        "pitch_um": args.pitch,
        "padded_shape": list(amp_p.shape[1:]),
        "pad_offset": [top, left],
        "normalization": peak,
    }
    Path(str(args.out) + ".json").write_text(json.dumps(meta, indent=2))
    return EXIT_OK


def cmd_compare(args) -> int:
    report = metrics.quality_report(
        _read_stack(args.a_amp), _read_stack(args.a_phase), _read_stack(args.b_amp), _read_stack(args.b_phase)
    )
    print(report.table())
    if args.json:
        text = json.dumps(report.to_dict(), indent=2)
        if args.json == "-":
            print(text)
        else:
            Path(args.json).write_text(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.iters < 1:
        raise DataError("--iters must be at least 1")
    store = load_weights(args.weights)
    x = synthetic_rgbd(args.seed, args.height, args.width)
    for _ in range(args.warmup):
        _run(store, x, args.precision)
    times = []
    for _ in range(args.iters):
        t0 = time.perf_counter()
        _run(store, x, args.precision)
        times.append((time.perf_counter() - t0) * 1e3)
    fp32_equiv = sum(4 * int(np.prod(shape)) for shape in expected_shapes(store.arch, FP32).values())
    result = {
        "precision": args.precision,
        "resolution": [args.width, args.height],
        "batch": 1,
        "iters": args.iters,
        "median_ms": float(np.median(times)),
        "p10_ms": float(np.percentile(times, 10)),
        "p90_ms": float(np.percentile(times, 90)),
        "fps": 1e3 / float(np.median(times)),
        "weight_bytes": store.payload_bytes,
        "fp32_weight_bytes": fp32_equiv,
        "weight_traffic_ratio": store.payload_bytes / fp32_equiv,
    }
    print(json.dumps(result, indent=2))
    return EXIT_OK


def cmd_size(args) -> int:
    rep = metrics.size_report(load_weights(args.weights))
    if not args.per_tensor:
        rep.pop("per_tensor")
    print(json.dumps(rep, indent=2))
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holoquant", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-weights", help="write randomly initialized fp32 weights")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"RNG seed (default {DEFAULT_SEED})")
    s.add_argument("--out", required=True)
    s.add_argument("--bn", choices=("identity", "random"), default="identity")
    s.add_argument("--blocks", type=int, default=14)
    s.add_argument("--width", type=int, default=24)
    s.set_defaults(func=cmd_gen_weights)

    s = sub.add_parser("gen-scenes", help="write synthetic RGB-D PNG pairs")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--count", type=int, default=CALIB_DEFAULT)
    s.add_argument("--width", type=int, default=64)
    s.add_argument("--height", type=int, default=64)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.set_defaults(func=cmd_gen_scenes)

    s = sub.add_parser("quantize", help="post-training static or dynamic quantization")
    s.add_argument("--weights", required=True)
    s.add_argument("--calib-dir")
    s.add_argument("--calib-limit", type=int, default=CALIB_DEFAULT)
    s.add_argument("--mode", choices=("static", "dynamic"), default="static")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_quantize)

    s = sub.add_parser("infer", help="compute a complex hologram from an RGB-D image")
    s.add_argument("--weights", required=True)
    s.add_argument("--rgb", required=True)
    s.add_argument("--depth", required=True)
    s.add_argument("--precision", choices=("fp32", "int8-static", "int8-dynamic"), default="fp32")
    s.add_argument("--out-amp", required=True)
    s.add_argument("--out-phase", required=True)
    s.add_argument("--reference", help="fp32 weights to report PSNR against")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("reconstruct", help="angular-spectrum reconstruction of a hologram")
    s.add_argument("--amp", required=True)
    s.add_argument("--phase", required=True)
    s.add_argument("--z", type=float, default=6.0, help="distance in mm (default 6)")
    s.add_argument("--wavelengths", default="638,520,450", help="nm, one per channel")
    s.add_argument("--pitch", type=float, default=8.0, help="pixel pitch in um (default 8)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("compare", help="PSNR/SSIM of two holograms")
    s.add_argument("--a-amp", required=True)
    s.add_argument("--a-phase", required=True)
    s.add_argument("--b-amp", required=True)
    s.add_argument("--b-phase", required=True)
    s.add_argument("--json", help="write the report as JSON to this path ('-' for stdout)")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("bench", help="latency and frame rate at batch size 1")
    s.add_argument("--weights", required=True)
    s.add_argument("--precision", choices=("fp32", "int8-static", "int8-dynamic"), default="fp32")
    s.add_argument("--width", type=int, default=1280)
    s.add_argument("--height", type=int, default=720)
    s.add_argument("--iters", type=int, default=5)
    s.add_argument("--warmup", type=int, default=3)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("size", help="byte accounting of a weight file")
    s.add_argument("--weights", required=True)
    s.add_argument("--per-tensor", action="store_true")
    s.set_defaults(func=cmd_size)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataError, WeightFileError, OSError, ValueError, png.Error) as exc:
        _log(f"error: {exc}")
        return EXIT_DATA
    except (AssertionError, OverflowError, FloatingPointError) as exc:
        _log(f"internal error: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
