"""Weight container and the ``.holow`` file format.

File layout::

    u64 little-endian  manifest length M
    M bytes            UTF-8 JSON manifest ("format": "holow/1")
    payload            little-endian tensor blobs, back to back

The manifest lists every tensor (dtype, shape, byte offset/length, CRC-32)
and carries the payload CRC-32 plus a CRC-32 of the manifest bytes
themselves, computed with its own hex digits zeroed.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..quant import QuantParams
from .arch import ArchitectureSpec, build_reference_arch

FORMAT = "holow/1"
FP32 = "fp32"
INT8_STATIC = "int8-static"
INT8_DYNAMIC = "int8-dynamic"
KINDS = (FP32, INT8_STATIC, INT8_DYNAMIC)

_DTYPES = {"float32": np.dtype("<f4"), "int8": np.dtype("i1"), "int32": np.dtype("<i4")}
_CRC_KEY = b'"manifest_crc32":"'
_CRC_BLANK = b"00000000"

CONVENTIONS = {
    "layout": "NCHW",
    "output_channels": "0-2 amplitude RGB, 3-5 phase RGB; phase radians = (p - 0.5) * 2pi",
    "rounding": "half-even",
    "weight_quant": "per-tensor symmetric",
    "activation_quant": "per-tensor asymmetric, min-max",
    "bias_quant": "int32, scale S_in * S_w, zero-point 0",
}


class WeightFileError(ValueError):
    """A weight file is truncated, corrupted or of an unknown version."""


@dataclass(eq=False)
class WeightStore:
    arch: ArchitectureSpec
    kind: str = FP32
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    weight_qparams: dict[str, QuantParams] = field(default_factory=dict)
    activation_qparams: dict[str, QuantParams] = field(default_factory=dict)
    bn_eps: float = 1e-5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown store kind {self.kind!r}")
        for name, arr in self.tensors.items():
            if arr.dtype.name not in _DTYPES:
                raise ValueError(f"tensor {name} has unsupported dtype {arr.dtype}")

    def payload(self) -> bytes:
        return b"".join(
            np.ascontiguousarray(a, dtype=_DTYPES[a.dtype.name]).tobytes() for a in self.tensors.values()
        )

    @property
    def payload_bytes(self) -> int:
        return sum(a.nbytes for a in self.tensors.values())

    def checksum(self) -> int:
        return zlib.crc32(self.payload())

    def manifest(self) -> dict:
        entries = []
        offset = 0
        for name, arr in self.tensors.items():
            entry = {
                "name": name,
                "dtype": arr.dtype.name,
                "shape": list(arr.shape),
                "offset": offset,
                "length": arr.nbytes,
                "crc32": f"{zlib.crc32(np.ascontiguousarray(arr, dtype=_DTYPES[arr.dtype.name]).tobytes()):08x}",
            }
            if name in self.weight_qparams:
                entry["qparams"] = self.weight_qparams[name].to_dict()
            entries.append(entry)
            offset += arr.nbytes
        return {
            "format": FORMAT,
            "kind": self.kind,
            "architecture": self.arch.to_dict(),
            "conventions": dict(CONVENTIONS, bn_eps=self.bn_eps),
            "tensors": entries,
            "activations": {k: v.to_dict() for k, v in self.activation_qparams.items()},
            "payload_bytes": offset,
            "payload_crc32": f"{self.checksum():08x}",
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        if self.manifest() != other.manifest():
            return False
        return all(
            a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.tensors.values(), other.tensors.values())
        )


def manifest_bytes(store: WeightStore) -> bytes:
    """The manifest exactly as written to disk, checksum included."""
    m = store.manifest()
    m["manifest_crc32"] = _CRC_BLANK.decode()
    raw = json.dumps(m, separators=(",", ":")).encode("utf-8")
    crc = f"{zlib.crc32(raw):08x}".encode()
    return raw.replace(_CRC_KEY + _CRC_BLANK, _CRC_KEY + crc, 1)


def serialize(store: WeightStore) -> bytes:
    manifest = manifest_bytes(store)
    return struct.pack("<Q", len(manifest)) + manifest + store.payload()


def save_weights(store: WeightStore, path) -> int:
    """Write ``store`` to ``path``; returns the file size in bytes."""
    data = serialize(store)
    Path(path).write_bytes(data)
    return len(data)


def _verify_manifest_crc(raw: bytes) -> None:
    pos = raw.find(_CRC_KEY)
    if pos < 0 or raw.find(_CRC_KEY, pos + 1) >= 0:
        raise WeightFileError("manifest checksum field missing")
    start = pos + len(_CRC_KEY)
    stored = raw[start : start + 8]
    blank = raw[:start] + _CRC_BLANK + raw[start + 8 :]
    if stored != f"{zlib.crc32(blank):08x}".encode():
        raise WeightFileError("manifest checksum mismatch")


def deserialize(data: bytes) -> WeightStore:
    if len(data) < 8:
        raise WeightFileError("file too short for a manifest header")
    (mlen,) = struct.unpack("<Q", data[:8])
    if mlen > len(data) - 8:
        raise WeightFileError("truncated file: manifest extends past end of data")
    raw = data[8 : 8 + mlen]
    _verify_manifest_crc(raw)
    try:
        m = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightFileError(f"malformed manifest: {exc}") from exc
    if m.get("format") != FORMAT:
        raise WeightFileError(f"unsupported manifest version {m.get('format')!r}")
    payload = data[8 + mlen :]
    if len(payload) != m["payload_bytes"]:
        raise WeightFileError(
            f"payload is {len(payload)} bytes, manifest says {m['payload_bytes']}"
        )
    if f"{zlib.crc32(payload):08x}" != m["payload_crc32"]:
        raise WeightFileError("payload checksum mismatch")

    tensors: dict[str, np.ndarray] = {}
    wq: dict[str, QuantParams] = {}
    expected = 0
    for e in m["tensors"]:
        dt = _DTYPES[e["dtype"]]
        n = int(np.prod(e["shape"], dtype=np.int64))
        if e["offset"] != expected or e["length"] != n * dt.itemsize:
            raise WeightFileError(f"inconsistent table entry for {e['name']}")
        blob = payload[e["offset"] : e["offset"] + e["length"]]
        if f"{zlib.crc32(blob):08x}" != e["crc32"]:
            raise WeightFileError(f"tensor checksum mismatch for {e['name']}")
        tensors[e["name"]] = np.frombuffer(blob, dtype=dt).reshape(e["shape"]).astype(dt.newbyteorder("="))
        if "qparams" in e:
            wq[e["name"]] = QuantParams.from_dict(e["qparams"])
        expected += e["length"]
    if expected != len(payload):
        raise WeightFileError("tensor table does not cover the payload")

    return WeightStore(
        arch=ArchitectureSpec.from_dict(m["architecture"]),
        kind=m["kind"],
        tensors=tensors,
        weight_qparams=wq,
        activation_qparams={k: QuantParams.from_dict(v) for k, v in m["activations"].items()},
        bn_eps=float(m["conventions"]["bn_eps"]),
    )


def load_weights(path) -> WeightStore:
    return deserialize(Path(path).read_bytes())


def init_weights(
    arch: ArchitectureSpec | None = None,
    seed: int = 0,
    bn: str = "identity",
    residual_gain: float | None = None,
    head_gain: float = 0.1,
) -> WeightStore:
    """Deterministic random FP32 weights.

    Convolution kernels are He-normal (std sqrt(2 / fan_in)); biases are
    uniform in +-1/sqrt(fan_in). The second conv of each residual block is
    further scaled by ``residual_gain`` (default 1/sqrt(num_blocks)) and the
    output projection by ``head_gain`` with its bias set to 0.5, so an
    untrained network is well conditioned and its outputs sit inside (0, 1)
    instead of saturating. ``bn="identity"`` gives gamma=1, beta=0, mean=0,
    var=1; ``bn="random"`` draws non-trivial statistics, which is useful for
    exercising batch-norm folding.
    """
    if bn not in ("identity", "random"):
        raise ValueError("bn must be 'identity' or 'random'")
    arch = arch or build_reference_arch()
    if residual_gain is None:
        residual_gain = 1.0 / np.sqrt(max(arch.num_blocks, 1))
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for conv in arch.convs:
        shape = conv.desc.weight_shape
        fan_in = shape[1] * shape[2] * shape[3]
        gain = np.sqrt(2.0 / fan_in)
        if conv.name.endswith(".conv2"):
            gain *= residual_gain
        elif conv.name == arch.output:
            gain *= head_gain
        tensors[f"{conv.name}.weight"] = (rng.standard_normal(shape) * gain).astype(np.float32)
        bound = 1.0 / np.sqrt(fan_in)
        bias = rng.uniform(-bound, bound, shape[0])
        if conv.name == arch.output:
            bias = np.full(shape[0], 0.5)
        tensors[f"{conv.name}.bias"] = bias.astype(np.float32)
        if conv.bn:
            c = shape[0]
            if bn == "identity":
                stats = (np.ones(c), np.zeros(c), np.zeros(c), np.ones(c))
            else:
                stats = (
                    rng.uniform(0.5, 1.5, c),
                    rng.uniform(-0.2, 0.2, c),
                    rng.uniform(-0.3, 0.3, c),
                    rng.uniform(0.5, 2.0, c),
                )
            for key, val in zip(("gamma", "beta", "running_mean", "running_var"), stats):
                tensors[f"{conv.name}.bn.{key}"] = np.asarray(val, dtype=np.float32)
    return WeightStore(arch=arch, kind=FP32, tensors=tensors)


def expected_shapes(arch: ArchitectureSpec, kind: str = FP32) -> dict[str, tuple]:
    """Tensor names and shapes a store of ``kind`` must carry for ``arch``."""
    out: dict[str, tuple] = {}
    for conv in arch.convs:
        out[f"{conv.name}.weight"] = conv.desc.weight_shape
        out[f"{conv.name}.bias"] = (conv.desc.out_channels,)
        if conv.bn and kind == FP32:
            for key in ("gamma", "beta", "running_mean", "running_var"):
                out[f"{conv.name}.bn.{key}"] = (conv.desc.out_channels,)
    return out


def check_store(store: WeightStore) -> None:
    """Raise ValueError if ``store`` does not match its architecture."""
    want = expected_shapes(store.arch, store.kind)
    have = {k: tuple(v.shape) for k, v in store.tensors.items()}
    if want != have:
        missing = sorted(set(want) - set(have))
        extra = sorted(set(have) - set(want))
        bad = sorted(k for k in set(want) & set(have) if want[k] != have[k])
        raise ValueError(f"store/architecture mismatch: missing={missing} extra={extra} shape={bad}")
    if store.kind != FP32:
        weights = {f"{c.name}.weight" for c in store.arch.convs}
        if set(store.weight_qparams) != weights:
            raise ValueError("int8 store must carry qparams for every weight tensor")
    if store.kind == INT8_STATIC and set(store.activation_qparams) != set(store.arch.sites):
        raise ValueError("static int8 store must carry qparams for every activation site")
