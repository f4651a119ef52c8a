import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cocosum import tensor as T
from cocosum.tensor import Tensor

from oracles import numeric_grad


def leaf(a):
    return Tensor(np.array(a, dtype=np.float64), requires_grad=True)


def test_sum_gradient_is_ones():
    x = leaf([0.3, -1.0, 2.0])
    grads = T.backward(x.sum(), wrt=[x])
    np.testing.assert_array_equal(grads[x], [1.0, 1.0, 1.0])


def test_square_gradient():
    x = leaf([1.0, -2.0])
    grads = T.backward((x * x).sum(), wrt=[x])
    np.testing.assert_array_equal(grads[x], [2.0, -4.0])


def test_matmul_gradient_matches_outer_rule_and_fd():
    rng = np.random.default_rng(1)
    a, b = leaf(rng.normal(size=(4, 3))), leaf(rng.normal(size=(3, 2)))
    grads = T.backward((a @ b).sum(), wrt=[a, b])
    np.testing.assert_allclose(grads[a], np.ones((4, 2)) @ b.data.T, rtol=0, atol=1e-12)
    fd = numeric_grad(lambda: (a.data @ b.data).sum(), a.data, eps=1e-6)
    np.testing.assert_allclose(grads[a], fd, rtol=1e-6, atol=1e-8)


def test_matmul_inner_dim_mismatch():
    with pytest.raises(T.ShapeError):
        leaf(np.ones((2, 3))) @ leaf(np.ones((2, 3)))


def test_elementwise_binary_shape_mismatch():
    with pytest.raises(T.ShapeError):
        T.elementwise("add", leaf(np.ones(3)), leaf(np.ones(4)))


def test_concat_routes_gradient_and_empty_is_neutral():
    a, b = leaf(np.arange(6.0).reshape(2, 3)), leaf(np.ones((2, 2)))
    c = T.concat([a, b], axis=1)
    assert c.shape == (2, 5)
    grads = T.backward((c * c).sum(), wrt=[a, b])
    np.testing.assert_array_equal(grads[a], 2 * a.data)
    np.testing.assert_array_equal(grads[b], 2 * b.data)
    empty = Tensor(np.zeros((2, 0)))
    np.testing.assert_array_equal(T.concat([a, empty], axis=1).data, a.data)


def test_softmax_ties_and_mask():
    s = T.softmax(Tensor(np.array([2.0, 2.0, 2.0])))
    assert s.data[0] == s.data[1] == s.data[2]
    m = T.softmax(Tensor(np.array([[1.0, 5.0, 3.0]])), axis=1, mask=np.array([[True, False, True]]))
    assert m.data[0, 1] == 0.0
    assert abs(m.data.sum() - 1) < 1e-15
    with pytest.raises(T.ShapeError):
        T.softmax(Tensor(np.array([1.0, 2.0])), mask=np.array([False, False]))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-50, 50)))
def test_softmax_on_simplex(x):
    p = T.softmax(Tensor(x)).data
    assert np.all(p >= 0) and np.all(p <= 1)
    assert abs(p.sum() - 1) <= 1e-6


def test_softmax_fuzz_1000():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        x = rng.uniform(-50, 50, size=(rng.integers(1, 5), rng.integers(1, 20)))
        p = T.softmax(Tensor(x), axis=1).data
        assert p.min() >= 0 and p.max() <= 1
        assert np.abs(p.sum(axis=1) - 1).max() <= 1e-6


def _random_shape(rng):
    return tuple(int(s) for s in rng.integers(1, 5, size=rng.integers(1, 3)))


UNARY = {
    "sigmoid": T.sigmoid,
    "tanh": T.tanh,
    "leaky_relu": lambda x: T.leaky_relu(x, 0.2),
    "exp": T.exp,
    "log": lambda x: T.log(T.exp(x)),
    "neg": lambda x: -x,
    "sum_axis0": lambda x: x.sum(axis=0),
    "mean": lambda x: T.mean(x, axis=-1, keepdims=True),
    "softmax": lambda x: T.softmax(x, axis=-1),
    "reshape": lambda x: x.reshape(-1),
    "getitem": lambda x: x[..., :1],
}
BINARY = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_op_gradients(name):
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    for _ in range(20):
        shape = _random_shape(rng)
        x = leaf(rng.uniform(-2, 2, size=shape))
        if name == "leaky_relu":  # keep clear of the kink
            x.data += np.sign(x.data) * 0.1
        w = rng.normal(size=UNARY[name](Tensor(x.data)).shape)
        f = lambda: (UNARY[name](x) * Tensor(w)).sum()
        assert T.grad_check(f, [x], eps=1e-5) <= 1e-4


@pytest.mark.parametrize("name", sorted(BINARY))
def test_binary_op_gradients(name):
    rng = np.random.default_rng(len(name))
    for _ in range(20):
        shape = _random_shape(rng)
        a, b = leaf(rng.normal(size=shape)), leaf(rng.normal(size=shape[-1:]))  # broadcast b
        w = Tensor(rng.normal(size=shape))
        f = lambda: (BINARY[name](a, b) * w).sum()
        assert T.grad_check(f, [a, b], eps=1e-5) <= 1e-4


def test_matmul_transpose_concat_take_rows_gradients():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n, k, m = (int(v) for v in rng.integers(1, 5, size=3))
        a, b = leaf(rng.normal(size=(2, n, k))), leaf(rng.normal(size=(k, m)))
        table = leaf(rng.normal(size=(5, k)))
        ids = rng.integers(0, 5, size=(2, n))
        w = Tensor(rng.normal(size=(2, n, m + k)))

        def f():
            left = a @ b
            right = T.take_rows(table, ids)
            return (T.concat([left, right], axis=2) * w).sum() + (T.transpose(b) * T.transpose(b)).sum()

        assert T.grad_check(f, [a, b, table], eps=1e-5) <= 1e-4


def test_take_rows_accumulates_repeated_ids():
    table = leaf(np.zeros((3, 2)))
    g = T.backward(T.take_rows(table, [1, 1, 2]).sum(), wrt=[table])[table]
    np.testing.assert_array_equal(g, [[0, 0], [2, 2], [1, 1]])
    with pytest.raises(IndexError):
        T.take_rows(table, [3])


def test_backward_deterministic():
    rng = np.random.default_rng(0)
    a, b = leaf(rng.normal(size=(4, 4))), leaf(rng.normal(size=(4,)))
    loss = T.softmax(T.tanh(a @ a) * b, axis=1)[:, 1:3].sum()
    g1 = T.backward(loss, wrt=[a, b])
    g2 = T.backward(loss, wrt=[a, b])
    assert g1[a].tobytes() == g2[a].tobytes()
    assert g1[b].tobytes() == g2[b].tobytes()


def test_unreachable_tensor_gets_zero_grad():
    x, y = leaf([1.0, 2.0]), leaf([[3.0]])
    grads = T.backward(x.sum(), wrt=[x, y])
    np.testing.assert_array_equal(grads[y], [[0.0]])


def test_grad_check_linear_exact():
    x = leaf(np.random.default_rng(2).normal(size=(3, 4)))
    assert T.grad_check(lambda: x.sum(), [x]) <= 1e-8


def test_grad_check_detects_corruption():
    x = leaf(np.random.default_rng(2).normal(size=(3,)))
    f = lambda: (x * x).sum()
    good = T.backward(f(), wrt=[x])[x]
    bad = good.copy()
    bad[1] += 0.1
    assert T.grad_check(f, [x], analytic={x: bad}) > 1e-2


def test_grad_check_nan_raises():
    x = leaf([1.0])
    with pytest.raises(FloatingPointError):
        T.grad_check(lambda: x * Tensor([np.nan]), [x])


def test_log_floor_keeps_finite():
    x = leaf([0.0, 1.0])
    out = T.log(x, floor=1e-12)
    assert np.isfinite(out.data).all()
    assert out.data[0] == pytest.approx(np.log(1e-12))
