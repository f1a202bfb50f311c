import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holoquant import metrics
from holoquant.model import convert_int8_dynamic


def test_mse_examples():
    rng = np.random.default_rng(0)
    x = rng.random((16, 16))
    assert metrics.mse(x, x) == 0
    assert metrics.mse(np.zeros((4, 4)), np.full((4, 4), 0.1)) == pytest.approx(0.01)
    y = rng.random((16, 16))
    naive = sum((x[i, j] - y[i, j]) ** 2 for i in range(16) for j in range(16)) / 256
    assert metrics.mse(x, y) == pytest.approx(naive, rel=1e-12)
    with pytest.raises(ValueError):
        metrics.mse(x, y[:4])


def test_psnr_examples():
    a = np.random.default_rng(1).random((32, 32)) * 0.8
    assert metrics.psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-9)
    assert metrics.psnr(a, a + 0.05) - metrics.psnr(a, a + 0.1) == pytest.approx(6.0206, abs=1e-4)
    assert metrics.psnr(a, a) == math.inf
    with pytest.raises(ValueError):
        metrics.psnr(a, a, max_value=0)


def test_psnr_decreases_with_mse():
    a = np.zeros((8, 8))
    vals = [metrics.psnr(a, a + d) for d in (0.01, 0.02, 0.05, 0.2)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_hologram_loss_examples():
    rng = np.random.default_rng(2)
    amp, ph = rng.random((3, 8, 8)), rng.uniform(-np.pi, np.pi, (3, 8, 8))
    assert metrics.hologram_loss(amp, ph, amp, ph) == 0
    ta, tp = np.zeros((1, 4, 4)), np.zeros((1, 4, 4))
    pa = np.full((1, 4, 4), 0.2)
    pp = np.full((1, 4, 4), math.sqrt(2 * math.pi))
    assert metrics.hologram_loss(ta, tp, pa, pp) == pytest.approx(1.04, abs=1e-6)
    base = metrics.hologram_loss(ta, tp, ta, pp)
    assert metrics.hologram_loss(ta, tp, ta, pp * 2 * np.pi) == pytest.approx(base * (2 * np.pi) ** 2)
    assert metrics.hologram_loss(amp, ph, amp + 0.1, ph) > 0
    with pytest.raises(ValueError):
        metrics.hologram_loss(amp, ph, amp[:2], ph)


def test_ssim_examples():
    rng = np.random.default_rng(3)
    x = rng.random((32, 32))
    assert metrics.ssim(x, x) == 1.0
    binary = (rng.random((32, 32)) > 0.5).astype(float)
    assert metrics.ssim(binary, 1 - binary) < 0
    y = np.clip(x + rng.normal(0, 0.1, x.shape), 0, 1)
    assert abs(metrics.ssim(x, y) - metrics.ssim(y, x)) <= 1e-12
    assert -1 <= metrics.ssim(x, y) < 1
    with pytest.raises(ValueError):
        metrics.ssim(np.zeros((10, 20)), np.zeros((10, 20)))
    with pytest.raises(ValueError):
        metrics.ssim(np.zeros((2, 20, 20)), np.zeros((2, 20, 20)))


def test_ssim_matches_skimage():
    skm = pytest.importorskip("skimage.metrics")
    rng = np.random.default_rng(4)
    for shape in ((11, 11), (32, 48), (64, 64)):
        a = rng.random(shape)
        b = np.clip(a + rng.normal(0, 0.2, shape), 0, 1)
        want = skm.structural_similarity(
            a, b, data_range=1.0, gaussian_weights=True, sigma=1.5, use_sample_covariance=False
        )
        assert metrics.ssim(a, b) == pytest.approx(want, abs=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pixel_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((12, 12)), rng.random((12, 12))
    perm = rng.permutation(a.size)
    pa, pb = a.ravel()[perm].reshape(a.shape), b.ravel()[perm].reshape(b.shape)
    assert metrics.mse(pa, pb) == pytest.approx(metrics.mse(a, b), rel=1e-12)
    assert metrics.psnr(pa, pb) == pytest.approx(metrics.psnr(a, b), rel=1e-12)


def test_quality_report_and_table():
    rng = np.random.default_rng(5)
    amp, ph = rng.random((3, 16, 16)), rng.random((3, 16, 16))
    same = metrics.quality_report(amp, ph, amp, ph)
    assert same.psnr_amplitude == math.inf and same.ssim_phase == 1.0
    assert same.to_dict()["psnr_phase"] == "inf"
    rep = metrics.quality_report(amp, ph, amp * 0.9, ph)
    rows = rep.table().splitlines()
    assert "PSNR (dB)" in rows[0] and "SSIM" in rows[0]
    assert rows[1].split() == ["Amplitude", "Phase", "Amplitude", "Phase"]
    assert float(rows[2].split()[0]) == pytest.approx(rep.psnr_amplitude, abs=0.005)
    with pytest.raises(ValueError):
        metrics.quality_report(amp[0], ph[0], amp[0], ph[0])


def test_split_and_phase_decode():
    y = np.arange(6 * 4).reshape(1, 6, 2, 2).astype(float)
    amp, ph = metrics.split_output(y)
    assert amp.shape == ph.shape == (3, 2, 2) and ph[0, 0, 0] == 12
    assert metrics.phase_radians(0.5) == 0
    assert metrics.phase_radians(0.0) == pytest.approx(-np.pi)


def test_size_report(fp32_store, static_store):
    fp = metrics.size_report(fp32_store)
    q = metrics.size_report(static_store)
    for rep, store in ((fp, fp32_store), (q, static_store)):
        assert sum(t["bytes"] for t in rep["per_tensor"]) == rep["payload_bytes"] == store.payload_bytes
    assert abs(fp["file_bytes"] - 631_000) <= 0.15 * 631_000
    assert q["payload_bytes"] / fp["payload_bytes"] <= 0.30
    d = metrics.size_report(convert_int8_dynamic(fp32_store))
    assert d["payload_bytes"] < 0.3 * fp["payload_bytes"]
