import numpy as np
import pytest

from grappa import tensor as T
from grappa.tensor import BatchNormState, NonFiniteError, ShapeError, Tensor

from _oracles import finite_difference_grad, max_rel_error

GRAD_TOL = 1e-4


def check_grad(build, *shapes, seed=0, h=1e-6):
    """Compare backward() against central differences for every input."""
    rng = np.random.default_rng(seed)
    arrays = [rng.normal(size=s) if s else np.asarray(rng.normal()) for s in shapes]
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = build(*tensors)
    out.backward()
    for k, (arr, tens) in enumerate(zip(arrays, tensors)):
        def f(x, k=k):
            args = [Tensor(a.copy()) for a in arrays]
            args[k] = Tensor(x)
            return build(*args).item()

        numeric = finite_difference_grad(f, arr.copy(), h=h)
        assert tens.grad is not None
        err = max_rel_error(tens.grad, numeric)
        assert err < GRAD_TOL, f"input {k}: rel err {err}"


# ------------------------------------------------------------------ semantics

def test_matmul_identity():
    m = np.arange(6, dtype=float).reshape(2, 3)
    out = T.matmul(Tensor(np.eye(2)), Tensor(m))
    np.testing.assert_array_equal(out.data, m)


def test_row_sum_of_ones():
    out = T.row_sum(Tensor(np.ones((3, 2))))
    np.testing.assert_array_equal(out.data, [3.0, 3.0])


def test_concat_vectors_preserves_order():
    out = T.concat([Tensor([1.0, 2.0]), Tensor([3.0, 4.0, 5.0])])
    np.testing.assert_array_equal(out.data, [1, 2, 3, 4, 5])


def test_softmax_rows_uniform_and_normalized():
    out = T.softmax_rows(Tensor([[0.0, 0.0, 0.0]]))
    np.testing.assert_allclose(out.data, [[1 / 3] * 3])
    rng = np.random.default_rng(3)
    x = rng.normal(size=(5, 7))
    out = T.softmax_rows(Tensor(x))
    np.testing.assert_allclose(out.data.sum(axis=1), np.ones(5), atol=1e-12)


def test_softmax_rows_shift_invariance():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(4, 6))
    shifted = x + rng.normal(size=(4, 1))  # constant per row
    a = T.softmax_rows(Tensor(x)).data
    b = T.softmax_rows(Tensor(shifted)).data
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_sigmoid_and_leaky_relu_points():
    assert T.sigmoid(Tensor(np.array(0.0))).item() == 0.5
    assert T.leaky_relu(Tensor(np.array(-1.0)), 0.2).item() == pytest.approx(-0.2)
    assert T.leaky_relu(Tensor(np.array(3.0)), 0.2).item() == 3.0


def test_elu_matches_definition():
    x = np.array([-2.0, -0.5, 0.0, 1.5])
    out = T.elu(Tensor(x)).data
    expected = np.where(x > 0, x, np.exp(x) - 1.0)
    np.testing.assert_allclose(out, expected)


def test_sigmoid_extreme_inputs_stay_finite():
    out = T.sigmoid(Tensor(np.array([-1000.0, 1000.0]))).data
    np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-12)


def test_non_finite_forward_raises():
    with pytest.raises(NonFiniteError):
        T.div(Tensor([1.0]), Tensor([0.0]))
    big = Tensor(np.array([1e308]))
    with np.errstate(over="ignore"), pytest.raises(NonFiniteError):
        T.mul(big, big)


def test_shape_errors():
    with pytest.raises(ShapeError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 2, 2)))
    with pytest.raises(ShapeError):
        T.row_sum(Tensor(np.ones(3)))


def test_backward_requires_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        T.scale(x, 2.0).backward()


def test_gather_and_segment_ops():
    x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]))
    picked = T.gather_rows(x, [2, 0, 2])
    np.testing.assert_array_equal(picked.data, [[5, 6], [1, 2], [5, 6]])
    summed = T.segment_sum(picked, [0, 1, 0], 2)
    np.testing.assert_array_equal(summed.data, [[10, 12], [1, 2]])


def test_segment_softmax_groups_sum_to_one():
    logits = Tensor(np.array([0.3, -1.0, 2.0, 0.0, 0.5]))
    seg = np.array([0, 0, 1, 1, 1])
    out = T.segment_softmax(logits, seg, 2)
    assert out.data[:2].sum() == pytest.approx(1.0, abs=1e-12)
    assert out.data[2:].sum() == pytest.approx(1.0, abs=1e-12)


# ------------------------------------------------------------- gradient checks

def test_grad_add_broadcast():
    check_grad(lambda a, b: T.sum_all(T.mul(T.add(a, b), T.add(a, b))),
               (3, 4), (4,))


def test_grad_sub_mul_div():
    check_grad(lambda a, b: T.sum_all(T.div(T.mul(a, b), T.add(T.mul(b, b), 1.0))),
               (3, 3), (3, 3), seed=1)


def test_grad_matmul_and_transpose():
    check_grad(lambda a, b: T.sum_all(T.matmul(a, T.transpose(b))),
               (2, 3), (4, 3), seed=2)


def test_grad_matvec():
    check_grad(lambda a, v: T.sum_all(T.mul(T.matmul(a, v), T.matmul(a, v))),
               (3, 4), (4,), seed=3)


def test_grad_concat_axis1_and_take_column():
    def build(a, b):
        joined = T.concat([a, b], axis=1)
        return T.sum_all(T.mul(T.take_column(joined, 2), T.take_column(joined, 0)))

    check_grad(build, (3, 2), (3, 2), seed=4)


def test_grad_stack_rows():
    check_grad(lambda a, b: T.sum_all(T.mul(T.stack_rows([a, b, a]), 3.0)),
               (4,), (4,), seed=5)


def test_grad_gather_segment_pipeline():
    idx = np.array([0, 1, 1, 2, 0])
    seg = np.array([0, 0, 1, 2, 2])

    def build(x):
        rows = T.gather_rows(x, idx)
        pooled = T.segment_sum(rows, seg, 3)
        return T.sum_all(T.mul(pooled, pooled))

    check_grad(build, (3, 4), seed=6)


def test_grad_segment_softmax():
    seg = np.array([0, 0, 0, 1, 1])

    def build(logits, values):
        alpha = T.segment_softmax(logits, seg, 2)
        return T.sum_all(T.mul(T.gather_rows(values, np.arange(5)),
                               T.as_column(alpha)))

    check_grad(build, (5,), (5, 3), seed=7)


def test_grad_softmax_rows():
    check_grad(lambda a, b: T.sum_all(T.mul(T.softmax_rows(a), b)),
               (4, 5), (4, 5), seed=8)


def test_grad_activations():
    check_grad(lambda x: T.sum_all(T.leaky_relu(x, 0.2)), (4, 3), seed=9)
    check_grad(lambda x: T.sum_all(T.elu(x)), (4, 3), seed=10)
    check_grad(lambda x: T.sum_all(T.mul(T.sigmoid(x), T.sigmoid(x))),
               (4, 3), seed=11)
    check_grad(lambda x: T.sum_all(T.abs_(x)), (4, 3), seed=12)
    check_grad(lambda x: T.sum_all(T.huber(x, 0.5)), (4, 3), seed=13)


def test_grad_reductions():
    check_grad(lambda x: T.mean_all(T.mul(x, x)), (5, 2), seed=14)
    check_grad(lambda x: T.sum_all(T.mul(T.row_mean(x), T.row_sum(x))),
               (4, 3), seed=15)


def test_grad_simple_products():
    x = Tensor(np.array(2.0), requires_grad=True)
    y = Tensor(np.array(3.0), requires_grad=True)
    T.mul(x, y).backward()
    assert x.grad == pytest.approx(3.0)
    assert y.grad == pytest.approx(2.0)


def test_grad_sigmoid_at_zero():
    x = Tensor(np.array(0.0), requires_grad=True)
    T.sigmoid(x).backward()
    assert x.grad == pytest.approx(0.25)


# ------------------------------------------------------------------ batch norm

def test_batch_norm_infer_identity():
    state = BatchNormState.fresh(3)
    x = np.random.default_rng(0).normal(size=(4, 3))
    out = T.batch_norm(Tensor(x), Tensor(np.ones(3)), Tensor(np.zeros(3)),
                       state, mode="infer")
    np.testing.assert_allclose(out.data, x, atol=1e-5)


def test_batch_norm_train_constant_column():
    state = BatchNormState.fresh(1)
    out = T.batch_norm(Tensor([[5.0], [5.0], [5.0]]), Tensor(np.ones(1)),
                       Tensor(np.zeros(1)), state, mode="train")
    np.testing.assert_allclose(out.data, np.zeros((3, 1)), atol=1e-9)


def test_batch_norm_train_two_point_batch():
    state = BatchNormState.fresh(1)
    out = T.batch_norm(Tensor([[1.0], [3.0]]), Tensor(np.ones(1)),
                       Tensor(np.zeros(1)), state, mode="train")
    np.testing.assert_allclose(out.data, [[-1.0], [1.0]], atol=1e-4)


def test_batch_norm_updates_running_stats():
    state = BatchNormState.fresh(1)
    x = np.array([[1.0], [3.0]])
    T.batch_norm(Tensor(x), Tensor(np.ones(1)), Tensor(np.zeros(1)), state,
                 mode="train")
    assert state.running_mean[0] == pytest.approx(0.9 * 0.0 + 0.1 * 2.0)
    # Unbiased batch variance: 2 * biased (B=2).
    assert state.running_var[0] == pytest.approx(0.9 * 1.0 + 0.1 * 2.0)


def test_batch_norm_train_rejects_singleton_batch():
    state = BatchNormState.fresh(2)
    with pytest.raises(ShapeError):
        T.batch_norm(Tensor(np.ones((1, 2))), Tensor(np.ones(2)),
                     Tensor(np.zeros(2)), state, mode="train")


@pytest.mark.parametrize("mode", ["train", "infer"])
def test_batch_norm_gradients(mode):
    rng = np.random.default_rng(21)
    state = BatchNormState.fresh(3)
    state.running_mean = rng.normal(size=3)
    state.running_var = rng.uniform(0.5, 2.0, size=3)
    snapshot = state.copy()
    weights = rng.normal(size=(4, 3))

    def build(x, gamma, beta):
        state.running_mean = snapshot.running_mean.copy()
        state.running_var = snapshot.running_var.copy()
        out = T.batch_norm(x, gamma, beta, state, mode=mode)
        return T.sum_all(T.mul(out, Tensor(weights)))

    check_grad(build, (4, 3), (3,), (3,), seed=22)


# ---------------------------------------------------------------- determinism

def test_repeated_backward_is_bitwise_identical():
    rng = np.random.default_rng(30)
    x = Tensor(rng.normal(size=(5, 4)), requires_grad=True)
    w = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    out = T.mean_all(T.mul(T.softmax_rows(T.matmul(x, w)), 2.0))
    out.backward()
    first = (x.grad.copy(), w.grad.copy())
    x.zero_grad()
    w.zero_grad()
    out.backward()
    assert (x.grad == first[0]).all()
    assert (w.grad == first[1]).all()


def test_grad_accumulates_across_shared_uses():
    x = Tensor(np.array(3.0), requires_grad=True)
    out = T.mul(x, x)  # both parents are the same tensor
    out.backward()
    assert x.grad == pytest.approx(6.0)
