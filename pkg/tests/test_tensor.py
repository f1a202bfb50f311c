import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import naive_conv2d
from holoquant.tensor import (
    BatchNormParams,
    ConvDescriptor,
    add_residual,
    batchnorm_apply,
    concat_channels,
    conv2d,
    fold_batchnorm,
    hardtanh01,
    relu6,
)


def random_bn(rng, c, eps=1e-5):
    return BatchNormParams(
        rng.uniform(0.5, 2.0, c).astype(np.float32),
        rng.uniform(-1, 1, c).astype(np.float32),
        rng.uniform(-1, 1, c).astype(np.float32),
        rng.uniform(0.1, 3.0, c).astype(np.float32),
        eps,
    )


def test_descriptor_rules():
    d = ConvDescriptor(4, 24)
    assert d.weight_shape == (24, 4, 3, 3)
    assert d.padding == (1, 1)
    assert ConvDescriptor(28, 28, groups=28).weight_shape == (28, 1, 3, 3)
    with pytest.raises(ValueError):
        ConvDescriptor(4, 24, kernel=(2, 3))
    with pytest.raises(ValueError):
        ConvDescriptor(6, 4, groups=4)


def test_conv_zero_input():
    w = np.random.default_rng(0).standard_normal((2, 1, 3, 3)).astype(np.float32)
    out = conv2d(np.zeros((1, 1, 3, 3), np.float32), w, np.zeros(2, np.float32))
    assert out.shape == (1, 2, 3, 3)
    assert not out.any()


def test_conv_identity_kernel_is_exact():
    x = np.random.default_rng(1).standard_normal((2, 3, 7, 5)).astype(np.float32)
    w = np.zeros((3, 3, 3, 3), np.float32)
    for c in range(3):
        w[c, c, 1, 1] = 1
    assert np.array_equal(conv2d(x, w, np.zeros(3, np.float32)), x)
    w1 = np.zeros((1, 1, 3, 3), np.float32)
    w1[0, 0, 1, 1] = 1
    x1 = x[:1, :1, :3, :3]
    assert np.array_equal(conv2d(x1, w1), x1)


def test_conv_matches_naive_oracle():
    rng = np.random.default_rng(2)
    x = rng.random((1, 4, 8, 8)).astype(np.float32)
    w = rng.standard_normal((24, 4, 3, 3)).astype(np.float32)
    b = rng.standard_normal(24).astype(np.float32)
    got = conv2d(x, w, b)
    assert got.dtype == np.float32
    np.testing.assert_allclose(got, naive_conv2d(x, w, b), atol=1e-6, rtol=0)


@pytest.mark.parametrize("groups,kernel", [(4, (3, 3)), (2, (3, 3)), (1, (1, 1)), (1, (5, 3))])
def test_conv_grouped_and_kernel_shapes(groups, kernel):
    rng = np.random.default_rng(3)
    x = rng.random((2, 4, 9, 6)).astype(np.float32)
    w = rng.standard_normal((8, 4 // groups, *kernel)).astype(np.float32)
    np.testing.assert_allclose(conv2d(x, w, groups=groups), naive_conv2d(x, w, groups=groups), atol=1e-5)


def test_conv_row_chunking_is_exact(monkeypatch):
    import holoquant.tensor as T

    rng = np.random.default_rng(4)
    x = rng.random((1, 4, 20, 16)).astype(np.float32)
    w = rng.standard_normal((6, 4, 3, 3)).astype(np.float32)
    full = conv2d(x, w)
    monkeypatch.setattr(T, "_COLS_BUDGET", 16 * 36 * 3)
    assert np.array_equal(conv2d(x, w), full)


def test_conv_errors():
    x = np.zeros((1, 4, 5, 5), np.float32)
    with pytest.raises(ValueError):
        conv2d(x, np.zeros((2, 3, 3, 3), np.float32))
    with pytest.raises(ValueError):
        conv2d(x, np.zeros((2, 4, 2, 2), np.float32))
    with pytest.raises(ValueError):
        conv2d(x, np.zeros((2, 4, 3, 3), np.float32), np.zeros(3, np.float32))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_conv_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((1, 3, 6, 6)).astype(np.float32)
    y = rng.standard_normal((1, 3, 6, 6)).astype(np.float32)
    w = rng.standard_normal((5, 3, 3, 3)).astype(np.float32) * 0.3
    lhs = conv2d((a * x + b * y).astype(np.float32), w)
    rhs = a * conv2d(x, w) + b * conv2d(y, w)
    np.testing.assert_allclose(lhs, rhs, atol=1e-5)


def test_conv_deterministic():
    rng = np.random.default_rng(5)
    x = rng.random((1, 24, 32, 32)).astype(np.float32)
    w = rng.standard_normal((24, 24, 3, 3)).astype(np.float32)
    first = conv2d(x, w)
    for _ in range(3):
        assert np.array_equal(conv2d(x.copy(), w.copy()), first)


def test_batchnorm_examples():
    bn = BatchNormParams(np.ones(1), np.zeros(1), np.zeros(1), np.ones(1), eps=0.0)
    x = np.random.default_rng(6).standard_normal((1, 1, 4, 4)).astype(np.float32)
    assert np.array_equal(batchnorm_apply(x, bn), x)
    bn = BatchNormParams(np.array([2.0]), np.array([1.0]), np.array([0.5]), np.array([4.0]), eps=0.0)
    assert batchnorm_apply(np.full((1, 1, 1, 1), 0.5), bn)[0, 0, 0, 0] == 1.0
    with pytest.raises(ValueError):
        batchnorm_apply(np.zeros((1, 2, 3, 3)), bn)
    with pytest.raises(ValueError):
        BatchNormParams(np.ones(2), np.ones(1), np.ones(2), np.ones(2))


def test_batchnorm_scalar_oracle():
    rng = np.random.default_rng(7)
    bn = random_bn(rng, 3)
    x = rng.standard_normal((2, 3, 4, 4)).astype(np.float32)
    got = batchnorm_apply(x, bn)
    want = np.empty_like(got)
    for n in range(2):
        for c in range(3):
            for i in range(4):
                for j in range(4):
                    v = float(x[n, c, i, j])
                    want[n, c, i, j] = (v - bn.running_mean[c]) * bn.gamma[c] / np.sqrt(
                        float(bn.running_var[c]) + bn.eps
                    ) + bn.beta[c]
    np.testing.assert_allclose(got, want, atol=1e-6)


def test_fold_examples():
    rng = np.random.default_rng(8)
    w = rng.standard_normal((2, 3, 3, 3)).astype(np.float32)
    b = rng.standard_normal(2).astype(np.float32)
    wf, bf = fold_batchnorm(w, b, BatchNormParams.identity(2, eps=0.0))
    assert np.array_equal(wf, w) and np.array_equal(bf, b)
    bn = BatchNormParams(np.full(2, 2.0), np.zeros(2), np.zeros(2), np.zeros(2), eps=1.0)
    wf, _ = fold_batchnorm(w, b, bn)
    assert np.array_equal(wf, 2 * w)
    with pytest.raises(ValueError):
        fold_batchnorm(w, b, BatchNormParams(np.ones(2), np.zeros(2), np.zeros(2), np.array([1.0, -1.0])))
    with pytest.raises(ValueError):
        fold_batchnorm(w, b, BatchNormParams.identity(3))


def test_fold_equivalence_100_instances():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        cin, cout = rng.integers(1, 6), rng.integers(1, 6)
        w = (rng.standard_normal((cout, cin, 3, 3)) * 0.3).astype(np.float32)
        b = rng.standard_normal(cout).astype(np.float32)
        bn = random_bn(rng, cout)
        x = rng.random((1, cin, 8, 8)).astype(np.float32)
        wf, bf = fold_batchnorm(w, b, bn)
        diff = np.abs(conv2d(x, wf, bf) - batchnorm_apply(conv2d(x, w, b), bn)).max()
        worst = max(worst, float(diff))
    assert worst <= 1e-5


def test_activations():
    x = np.array([-1.0, 3.0, 7.5], np.float32)
    assert relu6(x).tolist() == [0.0, 3.0, 6.0]
    assert hardtanh01(np.array([0.5, -0.2, 1.3], np.float32)).tolist() == [0.5, 0.0, 1.0]
    assert relu6(x).dtype == np.float32
    assert np.isnan(relu6(np.array([np.nan]))).all()


def test_concat():
    rng = np.random.default_rng(10)
    a = rng.random((1, 24, 5, 5)).astype(np.float32)
    b = rng.random((1, 4, 5, 5)).astype(np.float32)
    c = concat_channels(a, b)
    assert c.shape == (1, 28, 5, 5)
    assert np.array_equal(c[:, 24], b[:, 0])
    assert np.array_equal(concat_channels(a, np.zeros((1, 0, 5, 5), np.float32)), a)
    with pytest.raises(ValueError):
        concat_channels(a, b[:, :, :4])
    with pytest.raises(ValueError):
        concat_channels(a, b.astype(np.int8))


def test_add_residual():
    rng = np.random.default_rng(11)
    a = rng.standard_normal((1, 2, 3, 3)).astype(np.float32)
    b = rng.standard_normal((1, 2, 3, 3)).astype(np.float32)
    assert np.array_equal(add_residual(a, np.zeros_like(a)), a)
    assert not add_residual(a, -a).any()
    s = add_residual(a, b)
    for idx in np.ndindex(a.shape):
        assert s[idx] == a[idx] + b[idx]
    with pytest.raises(ValueError):
        add_residual(a, b[:, :1])
