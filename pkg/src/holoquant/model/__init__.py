"""The refined hologram CNN: architecture, weights, inference and quantization."""

from .arch import INPUT_SITE, Add, ArchitectureSpec, Concat, Conv, build_reference_arch
from .forward import (
    CalibrationRecord,
    calibrate,
    convert_int8_dynamic,
    convert_int8_static,
    folded_weights,
    forward_fp32,
    forward_fp32_folded,
    forward_int8_dynamic,
    forward_int8_static,
    simulate_fake_quant,
    trace_int8_static,
)
from .store import (
    FP32,
    INT8_DYNAMIC,
    INT8_STATIC,
    WeightFileError,
    WeightStore,
    check_store,
    deserialize,
    expected_shapes,
    init_weights,
    load_weights,
    manifest_bytes,
    save_weights,
    serialize,
)
