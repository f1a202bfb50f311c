"""FP32, INT8-static and INT8-dynamic inference, calibration and conversion.

The INT8 graph executor is shared by three callers that differ only in where
activation quantization parameters come from:

* static inference looks them up in the store,
* dynamic inference derives them from each activation as it is produced,
* calibration derives them from the min-max envelope over all calibration
  images, processed layer by layer in lockstep.

Because the observed values at a site are the ones the integer pipeline
itself produces, calibrating on a single image yields exactly the parameters
dynamic inference computes for that image.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import quant as Q
from ..quant import MinMaxObserver, QuantParams
from ..tensor import (
    BatchNormParams,
    add_residual,
    batchnorm_apply,
    concat_channels,
    conv2d,
    fold_batchnorm,
    hardtanh01,
    relu6,
)
from .arch import INPUT_SITE, Add, ArchitectureSpec, Concat, Conv
from .store import FP32, INT8_DYNAMIC, INT8_STATIC, WeightStore, check_store

_ACT = {None: lambda x: x, "relu6": relu6, "hardtanh01": hardtanh01}


def _as_input(store: WeightStore, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.ndim == 3:
        x = x[None]
    if x.ndim != 4 or x.shape[1] != store.arch.in_channels:
        raise ValueError(
            f"expected input of shape (N, {store.arch.in_channels}, H, W), got {x.shape}"
        )
    return x


def _bn(store: WeightStore, name: str) -> BatchNormParams:
    t = store.tensors
    return BatchNormParams(
        t[f"{name}.bn.gamma"],
        t[f"{name}.bn.beta"],
        t[f"{name}.bn.running_mean"],
        t[f"{name}.bn.running_var"],
        store.bn_eps,
    )


def _require(store: WeightStore, kind: str) -> None:
    if store.kind != kind:
        raise ValueError(f"expected a {kind} store, got {store.kind}")
    check_store(store)


def _release_plan(arch: ArchitectureSpec) -> dict[str, int]:
    """Index of the last layer reading each site."""
    last: dict[str, int] = {}
    for i, layer in enumerate(arch.layers):
        for s in (layer.srcs if hasattr(layer, "srcs") else (layer.src,)):
            last[s] = i
    return last


def _run_float(arch, x, conv_fn):
    vals = {INPUT_SITE: x}
    last = _release_plan(arch)
    for i, layer in enumerate(arch.layers):
        if isinstance(layer, Conv):
            y = _ACT[layer.activation](conv_fn(layer, vals[layer.src]))
        elif isinstance(layer, Add):
            y = _ACT[layer.activation](add_residual(vals[layer.srcs[0]], vals[layer.srcs[1]]))
        else:
            y = concat_channels(vals[layer.srcs[0]], vals[layer.srcs[1]])
        vals[layer.name] = y
        for s in list(vals):
            if s != layer.name and last.get(s, -1) <= i:
                del vals[s]
    return vals[arch.output]


def forward_fp32(store: WeightStore, x) -> np.ndarray:
    """Reference FP32 forward with batch norm applied as a separate layer."""
    _require(store, FP32)
    x = _as_input(store, x)
    t = store.tensors

    def conv_fn(layer: Conv, v):
        y = conv2d(v, t[f"{layer.name}.weight"], t[f"{layer.name}.bias"], layer.groups)
        return batchnorm_apply(y, _bn(store, layer.name)) if layer.bn else y

    return _run_float(store.arch, x, conv_fn)


def folded_weights(store: WeightStore) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-conv (weight, bias) in FP32 with batch norm folded in."""
    _require(store, FP32)
    out = {}
    for conv in store.arch.convs:
        w = store.tensors[f"{conv.name}.weight"]
        b = store.tensors[f"{conv.name}.bias"]
        out[conv.name] = fold_batchnorm(w, b, _bn(store, conv.name)) if conv.bn else (w, b)
    return out


def forward_fp32_folded(store: WeightStore, x) -> np.ndarray:
    folded = folded_weights(store)
    x = _as_input(store, x)
    return _run_float(store.arch, x, lambda layer, v: conv2d(v, *folded[layer.name], layer.groups))


# ---------------------------------------------------------------- INT8 graph


@dataclass
class _QConv:
    w_q: np.ndarray
    w_qp: QuantParams
    bias_f: np.ndarray | None = None
    bias_q: np.ndarray | None = None


def _quantized_convs(store: WeightStore) -> dict[str, _QConv]:
    if store.kind == FP32:
        out = {}
        for name, (w, b) in folded_weights(store).items():
            w_q, w_qp = Q.quantize_weights(w)
            out[name] = _QConv(w_q, w_qp, bias_f=b)
        return out
    out = {}
    for conv in store.arch.convs:
        w = f"{conv.name}.weight"
        b = store.tensors[f"{conv.name}.bias"]
        if store.kind == INT8_STATIC:
            out[conv.name] = _QConv(store.tensors[w], store.weight_qparams[w], bias_q=b)
        else:
            out[conv.name] = _QConv(store.tensors[w], store.weight_qparams[w], bias_f=b)
    return out


@dataclass
class CalibrationRecord:
    observers: dict[str, MinMaxObserver] = field(default_factory=dict)
    qparams: dict[str, QuantParams] = field(default_factory=dict)


def _execute_int8(arch, qconvs, inputs, qparams, observers=None, trace=False):
    """Run the integer graph on each array in ``inputs``.

    Sites missing from ``qparams`` are resolved from the min-max envelope of
    their real values over all of ``inputs`` and written back into
    ``qparams`` (and ``observers`` if given). Returns a list of
    ``{site: codes}`` dicts, one per input.
    """

    def resolve(site, reals):
        if site not in qparams:
            obs = MinMaxObserver()
            for r in reals():
                obs = Q.observe(obs, r)
            qparams[site] = obs.qparams()
            if observers is not None:
                observers[site] = obs
        return qparams[site]

    qin = resolve(INPUT_SITE, lambda: inputs)
    codes = [{INPUT_SITE: Q.quantize(x, qin)} for x in inputs]
    last = _release_plan(arch)

    for i, layer in enumerate(arch.layers):
        name = layer.name
        if isinstance(layer, Conv):
            qc = qconvs[name]
            src_qp = qparams[layer.src]
            bias_q = qc.bias_q
            if bias_q is None:
                bias_q = Q.quantize_bias(qc.bias_f, src_qp.scale, qc.w_qp.scale)
            accs = [
                Q.qconv2d_accumulate(c[layer.src], src_qp, qc.w_q, qc.w_qp, bias_q, layer.groups)
                for c in codes
            ]
            sxw = src_qp.scale * qc.w_qp.scale
            act = _ACT[layer.activation]
            out_qp = resolve(name, lambda: (act(a * sxw) for a in accs))
            mult = sxw / out_qp.scale
            for c, a in zip(codes, accs):
                c[name] = Q.requantize(a * mult, out_qp, layer.activation)
        elif isinstance(layer, Add):
            sa, sb = layer.srcs
            qa, qb = qparams[sa], qparams[sb]
            act = _ACT[layer.activation]
            out_qp = resolve(
                name,
                lambda: (
                    act(Q.dequantize(c[sa], qa, np.float64) + Q.dequantize(c[sb], qb, np.float64))
                    for c in codes
                ),
            )
            for c in codes:
                c[name] = Q.qadd(c[sa], qa, c[sb], qb, out_qp, layer.activation)
        else:
            sa, sb = layer.srcs
            qa, qb = qparams[sa], qparams[sb]
            out_qp = resolve(
                name,
                lambda: (
                    r
                    for c in codes
                    for r in (Q.dequantize(c[sa], qa, np.float64), Q.dequantize(c[sb], qb, np.float64))
                ),
            )
            for c in codes:
                c[name] = np.concatenate(
                    [Q.qrescale(c[sa], qa, out_qp), Q.qrescale(c[sb], qb, out_qp)], axis=1
                )
        if not trace:
            for c in codes:
                for s in list(c):
                    if s != name and last.get(s, -1) <= i:
                        del c[s]
    return codes


def _decode_output(arch, codes, qp) -> np.ndarray:
    out = Q.dequantize(codes, qp[arch.output], np.float32)
    return hardtanh01(out)


def calibrate(store: WeightStore, calib_inputs) -> CalibrationRecord:
    """Min-max calibration of every activation site over ``calib_inputs``.

    ``calib_inputs`` is a sequence of (1, C, H, W) or (C, H, W) arrays, or a
    single (N, C, H, W) batch; images may differ in size.
    """
    if isinstance(calib_inputs, np.ndarray) and calib_inputs.ndim == 4:
        calib_inputs = list(calib_inputs[:, None])
    inputs = [_as_input(store, x) for x in calib_inputs]
    if not inputs:
        raise ValueError("calibration needs at least one input")
    if store.kind not in (FP32, INT8_DYNAMIC):
        raise ValueError("calibration needs an FP32 or dynamic store")
    check_store(store)
    rec = CalibrationRecord()
    _execute_int8(store.arch, _quantized_convs(store), inputs, rec.qparams, rec.observers)
    return rec


def convert_int8_static(store: WeightStore, record: CalibrationRecord) -> WeightStore:
    """Fold batch norm, quantize weights and biases, embed activation qparams."""
    _require(store, FP32)
    missing = [s for s in store.arch.sites if s not in record.qparams]
    if missing:
        raise ValueError(f"calibration record lacks sites: {missing}")
    tensors: dict[str, np.ndarray] = {}
    wq: dict[str, QuantParams] = {}
    for name, qc in _quantized_convs(store).items():
        src = store.arch.layer(name).src
        tensors[f"{name}.weight"] = qc.w_q
        tensors[f"{name}.bias"] = Q.quantize_bias(qc.bias_f, record.qparams[src].scale, qc.w_qp.scale)
        wq[f"{name}.weight"] = qc.w_qp
    acts = {s: record.qparams[s] for s in store.arch.sites}
    return WeightStore(store.arch, INT8_STATIC, tensors, wq, acts, store.bn_eps)


def convert_int8_dynamic(store: WeightStore) -> WeightStore:
    """INT8 weights with FP32 biases; activations are quantized per call."""
    _require(store, FP32)
    tensors: dict[str, np.ndarray] = {}
    wq: dict[str, QuantParams] = {}
    for name, qc in _quantized_convs(store).items():
        tensors[f"{name}.weight"] = qc.w_q
        tensors[f"{name}.bias"] = np.asarray(qc.bias_f, dtype=np.float32)
        wq[f"{name}.weight"] = qc.w_qp
    return WeightStore(store.arch, INT8_DYNAMIC, tensors, wq, {}, store.bn_eps)


def forward_int8_static(store: WeightStore, x, return_codes: bool = False):
    _require(store, INT8_STATIC)
    x = _as_input(store, x)
    qp = dict(store.activation_qparams)
    codes = _execute_int8(store.arch, _quantized_convs(store), [x], qp)[0][store.arch.output]
    return codes if return_codes else _decode_output(store.arch, codes, qp)


def trace_int8_static(store: WeightStore, x) -> dict[str, np.ndarray]:
    """Integer codes at every activation site."""
    _require(store, INT8_STATIC)
    qp = dict(store.activation_qparams)
    return _execute_int8(store.arch, _quantized_convs(store), [_as_input(store, x)], qp, trace=True)[0]


def forward_int8_dynamic(store: WeightStore, x, return_codes: bool = False):
    """Dynamic quantization; each image in the batch gets its own ranges."""
    if store.kind not in (FP32, INT8_DYNAMIC):
        raise ValueError("dynamic inference needs an FP32 or int8-dynamic store")
    check_store(store)
    x = _as_input(store, x)
    qconvs = _quantized_convs(store)
    outs = []
    for img in x:
        qp: dict[str, QuantParams] = {}
        codes = _execute_int8(store.arch, qconvs, [img[None]], qp)[0][store.arch.output]
        outs.append(codes if return_codes else _decode_output(store.arch, codes, qp))
    return np.concatenate(outs, axis=0)


def simulate_fake_quant(store: WeightStore, x) -> dict[str, np.ndarray]:
    """Float64 fake-quantization simulation of a static INT8 store.

    Every conv runs in floating point on dequantized weights, biases and
    activations; every site output is passed through fake_quantize. Returns
    the integer codes at every site, for comparison with the integer path.
    """
    _require(store, INT8_STATIC)
    qp = store.activation_qparams
    t = store.tensors
    x = _as_input(store, x).astype(np.float64)
    vals = {INPUT_SITE: Q.fake_quantize(x, qp[INPUT_SITE])}
    for layer in store.arch.layers:
        if isinstance(layer, Conv):
            w_qp = store.weight_qparams[f"{layer.name}.weight"]
            w = Q.dequantize(t[f"{layer.name}.weight"], w_qp, np.float64)
            b = t[f"{layer.name}.bias"].astype(np.float64) * (qp[layer.src].scale * w_qp.scale)
            y = _ACT[layer.activation](conv2d(vals[layer.src], w, b, layer.groups))
        elif isinstance(layer, Add):
            y = _ACT[layer.activation](vals[layer.srcs[0]] + vals[layer.srcs[1]])
        else:
            y = concat_channels(vals[layer.srcs[0]], vals[layer.srcs[1]])
        vals[layer.name] = Q.fake_quantize(y, qp[layer.name])
    return {s: Q.quantize(v, qp[s]) for s, v in vals.items()}
