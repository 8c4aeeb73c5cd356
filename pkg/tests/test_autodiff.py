"""Engine tests: forward semantics, backward correctness, Adam, determinism."""

import math

import numpy as np
import pytest

from rlbricks.autodiff import (
    DomainError,
    GraphConsumedError,
    NonFiniteError,
    ShapeError,
    Tensor,
    backward,
    concat_cols,
    elementwise,
    gather_rows,
    matmul,
    minimum,
    no_grad,
    reduce,
    reshape,
)
from rlbricks.optim import Adam
from rlbricks.rng import Rng


class TestElementwise:
    def test_add_componentwise(self):
        out = elementwise("add", Tensor([1.0, 2.0]), Tensor([3.0, 4.0]))
        assert np.array_equal(out.values, [4.0, 6.0])

    def test_tanh_fixed_point(self):
        assert elementwise("tanh", Tensor([0.0])).values[0] == 0.0

    def test_softplus_at_zero_closed_form(self):
        # independent closed form: ln(1 + e^0) = ln 2
        expected = math.log(1.0 + math.exp(0.0))
        out = elementwise("softplus", Tensor([0.0]))
        assert out.values[0] == pytest.approx(expected, abs=1e-15)

    def test_bias_broadcast(self):
        m = Tensor(np.arange(6, dtype=float).reshape(2, 3))
        b = Tensor([10.0, 20.0, 30.0])
        out = m + b
        assert np.array_equal(out.values, m.values + np.array([10.0, 20.0, 30.0]))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            Tensor([1.0, 2.0]) + Tensor([1.0, 2.0, 3.0])
        with pytest.raises(ShapeError):
            # column-vector broadcast is not the bias pattern
            Tensor(np.ones((3, 2))) + Tensor(np.ones((3,)))

    def test_log_of_nonpositive_is_error(self):
        with pytest.raises(DomainError):
            Tensor([0.0, 1.0]).log()
        with pytest.raises(DomainError):
            Tensor([-1.0]).log()

    def test_nonfinite_result_is_error(self):
        with pytest.raises(NonFiniteError):
            Tensor([800.0]).exp()

    def test_clamp_values(self):
        out = Tensor([-2.0, 0.5, 3.0]).clamp(-1.0, 1.0)
        assert np.array_equal(out.values, [-1.0, 0.5, 1.0])

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            elementwise("cosh", Tensor([1.0]))


class TestMatmul:
    def test_identity(self):
        a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
        out = matmul(Tensor(np.eye(2)), a)
        assert np.array_equal(out.values, a.values)

    def test_against_naive_triple_loop(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([[5.0], [6.0]])
        expected = np.zeros((2, 1))
        for i in range(2):
            for j in range(1):
                for k in range(2):
                    expected[i, j] += a[i, k] * b[k, j]
        assert np.array_equal(expected, [[17.0], [39.0]])
        out = matmul(Tensor(a), Tensor(b))
        assert np.array_equal(out.values, expected)

    def test_zeros_annihilate(self):
        out = matmul(Tensor(np.zeros((3, 2))), Tensor(np.ones((2, 4))))
        assert np.array_equal(out.values, np.zeros((3, 4)))

    def test_inner_dim_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


class TestReduce:
    def test_mean(self):
        assert reduce("mean", Tensor([1.0, 2.0, 3.0])).item() == 2.0

    def test_sum_single_element_identity(self):
        assert reduce("sum", Tensor([7.5])).item() == 7.5

    def test_mean_backward_distributes(self):
        x = Tensor([1.0, 2.0, 3.0, 4.0], requires_grad=True)
        grads = backward(x.mean())
        assert np.array_equal(grads[x], np.full(4, 0.25))

    def test_axis_reduce(self):
        m = Tensor(np.arange(6, dtype=float).reshape(2, 3))
        assert np.array_equal(reduce("sum", m, axis=0).values, [3.0, 5.0, 7.0])
        assert np.array_equal(reduce("mean", m, axis=1).values, [1.0, 4.0])

    def test_invalid_axis(self):
        with pytest.raises(ShapeError):
            reduce("sum", Tensor([1.0]), axis=1)


class TestBackward:
    def test_square_derivative(self):
        x = Tensor([3.0], requires_grad=True)
        grads = backward(x.square().sum())
        assert grads[x][0] == 6.0

    def test_tanh_derivative_at_zero(self):
        x = Tensor([0.0], requires_grad=True)
        grads = backward(x.tanh().sum())
        assert grads[x][0] == 1.0

    def test_non_scalar_loss_rejected(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ShapeError):
            backward(x + x)

    def test_graph_consumed(self):
        x = Tensor([2.0], requires_grad=True)
        loss = x.square().sum()
        backward(loss)
        with pytest.raises(GraphConsumedError):
            backward(loss)

    def test_partial_reuse_of_consumed_graph_rejected(self):
        x = Tensor([2.0], requires_grad=True)
        y = x.square()
        backward(y.sum())
        with pytest.raises(GraphConsumedError):
            backward((y * 2.0).sum())

    def test_unreachable_params_get_zero_entries(self):
        x = Tensor([1.0], requires_grad=True)
        other = Tensor(np.ones((2, 2)), requires_grad=True)
        grads = backward(x.square().sum(), params=[x, other])
        assert np.array_equal(grads[other], np.zeros((2, 2)))

    def test_relu_subgradient_zero_at_zero(self):
        x = Tensor([-1.0, 0.0, 2.0], requires_grad=True)
        grads = backward(x.relu().sum())
        assert np.array_equal(grads[x], [0.0, 0.0, 1.0])

    def test_clamp_subgradient_boundary_passes(self):
        x = Tensor([-2.0, -1.0, 0.0, 1.0, 2.0], requires_grad=True)
        grads = backward(x.clamp(-1.0, 1.0).sum())
        assert np.array_equal(grads[x], [0.0, 1.0, 1.0, 1.0, 0.0])

    def test_backward_is_linear(self):
        # grad(a*f + b*g) == a*grad(f) + b*grad(g) at 5 random points
        rng = np.random.default_rng(7)
        for _ in range(5):
            point = rng.normal(size=3)
            a, b = rng.normal(), rng.normal()

            def f(x):
                return x.tanh().square().sum()

            def g(x):
                return (x * x).mean()

            x1 = Tensor(point.copy(), requires_grad=True)
            gf = backward(f(x1))[x1]
            x2 = Tensor(point.copy(), requires_grad=True)
            gg = backward(g(x2))[x2]
            x3 = Tensor(point.copy(), requires_grad=True)
            combined = backward(f(x3) * a + g(x3) * b)[x3]
            assert np.allclose(combined, a * gf + b * gg, rtol=1e-12, atol=1e-14)

    def test_matmul_chain_gradient(self):
        # independent analytic check: d/dA sum(A @ B) = ones @ B^T
        a = Tensor(np.arange(6, dtype=float).reshape(2, 3), requires_grad=True)
        b_arr = np.arange(12, dtype=float).reshape(3, 4)
        grads = backward(matmul(a, Tensor(b_arr)).sum())
        assert np.allclose(grads[a], np.ones((2, 4)) @ b_arr.T)

    def test_shared_subexpression_accumulates(self):
        x = Tensor([2.0], requires_grad=True)
        y = x.square()           # used twice below
        grads = backward((y + y).sum())
        assert grads[x][0] == 8.0

    def test_no_grad_suppresses_recording(self):
        x = Tensor([1.0], requires_grad=True)
        with no_grad():
            y = x.square()
        assert y.is_leaf and not y.requires_grad


class TestInternalOps:
    def test_gather_rows(self):
        m = Tensor(np.arange(6, dtype=float).reshape(2, 3), requires_grad=True)
        out = gather_rows(m, np.array([2, 0]))
        assert np.array_equal(out.values, [2.0, 3.0])
        grads = backward(out.sum())
        expected = np.zeros((2, 3))
        expected[0, 2] = expected[1, 0] = 1.0
        assert np.array_equal(grads[m], expected)

    def test_concat_cols_roundtrip_gradient(self):
        a = Tensor(np.ones((2, 2)), requires_grad=True)
        b = Tensor(np.ones((2, 1)), requires_grad=True)
        grads = backward((concat_cols(a, b) * 3.0).sum())
        assert np.array_equal(grads[a], np.full((2, 2), 3.0))
        assert np.array_equal(grads[b], np.full((2, 1), 3.0))

    def test_minimum_routes_gradient(self):
        a = Tensor([1.0, 5.0], requires_grad=True)
        b = Tensor([2.0, 4.0], requires_grad=True)
        grads = backward(minimum(a, b).sum())
        assert np.array_equal(grads[a], [1.0, 0.0])
        assert np.array_equal(grads[b], [0.0, 1.0])

    def test_reshape_gradient(self):
        m = Tensor(np.arange(4, dtype=float).reshape(2, 2), requires_grad=True)
        grads = backward(reshape(m, (4,)).mean())
        assert np.array_equal(grads[m], np.full((2, 2), 0.25))

    def test_rank_three_rejected(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((2, 2, 2)))


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        p = Tensor([1.5, -0.5], requires_grad=True)
        opt = Adam([p], lr=1e-3)
        before = p.values.copy()
        opt.step({p: np.zeros(2)})
        assert np.array_equal(p.values, before)
        assert opt.t == 1

    def test_first_step_closed_form(self):
        # with g=1: m_hat = 1, v_hat = 1, so the step is lr / (1 + eps)
        p = Tensor([0.0], requires_grad=True)
        opt = Adam([p], lr=1e-3)
        opt.step({p: np.array([1.0])})
        expected = -1e-3 / (1.0 + 1e-8)
        assert p.values[0] == pytest.approx(expected, rel=1e-12)
        assert abs(p.values[0] + 1e-3) < 1e-9

    def test_determinism_over_100_steps(self):
        def run():
            rng = Rng(123)
            p = Tensor(rng.normal((4,)), requires_grad=True)
            opt = Adam([p], lr=1e-2)
            for _ in range(100):
                grads = backward(p.square().sum(), params=[p])
                opt.step(grads)
            return p.values.copy()

        a, b = run(), run()
        assert np.array_equal(a, b)  # bit-identical

    def test_missing_gradient_rejected(self):
        p = Tensor([1.0], requires_grad=True)
        q = Tensor([1.0], requires_grad=True)
        opt = Adam([p, q], lr=1e-3)
        with pytest.raises(KeyError):
            opt.step({p: np.array([1.0])})

    def test_gradient_shape_mismatch_rejected(self):
        p = Tensor([1.0, 2.0], requires_grad=True)
        opt = Adam([p], lr=1e-3)
        with pytest.raises(ShapeError):
            opt.step({p: np.zeros(3)})


def test_double_precision_everywhere():
    t = Tensor([1, 2, 3])
    assert t.values.dtype == np.float64
    assert matmul(Tensor(np.ones((1, 2))), Tensor(np.ones((2, 1)))).values.dtype == np.float64
