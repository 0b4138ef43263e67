"""Gradient and shape tests for the autodiff core.

Every differentiable operation is checked against central finite
differences. A handful of closed-form values are frozen directly.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gte import tensor as T
from gte.tensor import (
    ComputationTape,
    GradCheckError,
    ShapeError,
    Tensor,
    ZeroNormError,
    grad_check,
)

OP_TOL = 1e-5


def rand(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


class TestTapeBasics:
    def test_untracked_outside_tape(self):
        a = Tensor([1.0, 2.0], requires_grad=True)
        out = T.mul(a, a)
        assert not out.requires_grad

    def test_backward_requires_scalar(self):
        a = Tensor([1.0, 2.0], requires_grad=True)
        with ComputationTape() as tape:
            out = T.mul(a, a)
            with pytest.raises(ShapeError):
                tape.backward(out)

    def test_grad_accumulates_across_paths(self):
        # y = x*x + x*x -> dy/dx = 4x
        x = Tensor([3.0], requires_grad=True)
        with ComputationTape() as tape:
            y = T.tensor_sum(T.add(T.mul(x, x), T.mul(x, x)))
            tape.backward(y)
        np.testing.assert_allclose(x.grad, [12.0])

    def test_second_backward_on_fresh_tape(self):
        x = Tensor([2.0], requires_grad=True)
        for _ in range(2):
            x.zero_grad()
            with ComputationTape() as tape:
                y = T.tensor_sum(T.mul(x, x))
                tape.backward(y)
            np.testing.assert_allclose(x.grad, [4.0])

    def test_nested_tapes_record_independently(self):
        x = Tensor([1.0], requires_grad=True)
        with ComputationTape() as outer:
            T.mul(x, x)
            with ComputationTape() as inner:
                T.mul(x, x)
            assert len(inner) == 1
        assert len(outer) == 1


class TestShapeDiscipline:
    def test_mismatched_add_raises(self):
        with pytest.raises(ShapeError):
            T.add(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))

    def test_scalar_broadcast_allowed(self):
        out = T.add(Tensor([1.0, 2.0]), Tensor(1.0))
        np.testing.assert_allclose(out.data, [2.0, 3.0])

    def test_matrix_vector_add_rejected(self):
        # Must go through add_rowvec, never implicit broadcast.
        with pytest.raises(ShapeError):
            T.add(Tensor(np.ones((2, 3))), Tensor(np.ones(3)))

    def test_matmul_inner_dim_checked(self):
        with pytest.raises(ShapeError):
            T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))

    def test_error_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2,\).*\(3,\)"):
            T.mul(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))


class TestElementwiseGradients:
    @pytest.mark.parametrize(
        "op",
        [T.add, T.sub, T.mul, T.div],
        ids=["add", "sub", "mul", "div"],
    )
    def test_binary_ops(self, op):
        rng = np.random.default_rng(7)
        a = rand(rng, 3, 4)
        b = Tensor(rng.standard_normal((3, 4)) + 3.0, requires_grad=True)
        err = grad_check(lambda: T.tensor_sum(op(a, b)), [a, b])
        assert err < OP_TOL

    @pytest.mark.parametrize(
        "op",
        [T.tanh, T.sigmoid, T.exp, T.neg],
        ids=["tanh", "sigmoid", "exp", "neg"],
    )
    def test_unary_ops(self, op):
        rng = np.random.default_rng(11)
        a = rand(rng, 5)
        err = grad_check(lambda: T.tensor_sum(op(a)), [a])
        assert err < OP_TOL

    def test_relu_away_from_kink(self):
        a = Tensor([-2.0, -0.5, 0.5, 2.0], requires_grad=True)
        err = grad_check(lambda: T.tensor_sum(T.relu(a)), [a])
        assert err < OP_TOL

    def test_log_sqrt_positive_domain(self):
        rng = np.random.default_rng(13)
        a = Tensor(rng.random(6) + 0.5, requires_grad=True)
        err = grad_check(lambda: T.tensor_sum(T.add(T.log(a), T.sqrt(a))), [a])
        assert err < OP_TOL

    def test_clamp_min_gradient_blocked_below(self):
        a = Tensor([0.5, 2.0], requires_grad=True)
        with ComputationTape() as tape:
            out = T.tensor_sum(T.clamp_min(a, 1.0))
            tape.backward(out)
        np.testing.assert_allclose(a.grad, [0.0, 1.0])

    def test_scalar_operand_gradient(self):
        a = Tensor(np.ones((2, 2)), requires_grad=True)
        s = Tensor(3.0, requires_grad=True)
        err = grad_check(lambda: T.tensor_sum(T.mul(a, s)), [a, s])
        assert err < OP_TOL


class TestLinearAlgebraGradients:
    @pytest.mark.parametrize(
        "sa,sb",
        [((3, 4), (4, 2)), ((3, 4), (4,)), ((4,), (4, 2)), ((4,), (4,))],
        ids=["mat-mat", "mat-vec", "vec-mat", "vec-vec"],
    )
    def test_matmul_shapes(self, sa, sb):
        rng = np.random.default_rng(17)
        a, b = rand(rng, *sa), rand(rng, *sb)
        err = grad_check(lambda: T.tensor_sum(T.matmul(a, b)), [a, b])
        assert err < OP_TOL

    def test_transpose(self):
        rng = np.random.default_rng(19)
        a = rand(rng, 2, 5)
        m = Tensor(rng.standard_normal((5, 2)))
        err = grad_check(lambda: T.tensor_sum(T.mul(T.transpose(a), m)), [a])
        assert err < OP_TOL


class TestReductionGradients:
    def test_sum_all_and_axis(self):
        rng = np.random.default_rng(23)
        a = rand(rng, 3, 4)
        for axis in (None, 0, 1):
            a.zero_grad()
            err = grad_check(lambda: T.tensor_sum(T.tensor_sum(a, axis=axis)), [a])
            assert err < OP_TOL

    def test_mean(self):
        rng = np.random.default_rng(29)
        a = rand(rng, 6)
        err = grad_check(lambda: T.mean(a), [a])
        assert err < OP_TOL

    def test_max_axis_gradient(self):
        rng = np.random.default_rng(31)
        a = rand(rng, 4, 3)
        err = grad_check(lambda: T.tensor_sum(T.tensor_max(a, axis=0)), [a])
        assert err < OP_TOL

    def test_max_tie_goes_to_first(self):
        a = Tensor([[2.0, 2.0, 1.0]], requires_grad=True)
        with ComputationTape() as tape:
            out = T.tensor_sum(T.tensor_max(a, axis=1))
            tape.backward(out)
        np.testing.assert_allclose(a.grad, [[1.0, 0.0, 0.0]])


class TestSoftmax:
    def test_softmax_matches_manual(self):
        x = Tensor([1.0, 2.0, 3.0])
        e = np.exp([1.0, 2.0, 3.0])
        np.testing.assert_allclose(T.softmax(x).data, e / e.sum(), rtol=1e-12)

    def test_softmax_shift_invariance(self):
        x = np.array([1.0, 5.0, -2.0])
        a = T.softmax(Tensor(x)).data
        b = T.softmax(Tensor(x + 1000.0)).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_softmax_extreme_logits_finite(self):
        out = T.softmax(Tensor([1000.0, 0.0, -1000.0])).data
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out.sum(), 1.0, atol=1e-12)

    def test_softmax_gradient(self):
        rng = np.random.default_rng(37)
        a = rand(rng, 5)
        w = Tensor(rng.standard_normal(5))
        err = grad_check(lambda: T.tensor_sum(T.mul(T.softmax(a), w)), [a])
        assert err < OP_TOL

    def test_softmax_matrix_axis(self):
        rng = np.random.default_rng(41)
        a = rand(rng, 3, 4)
        w = Tensor(rng.standard_normal((3, 4)))
        err = grad_check(lambda: T.tensor_sum(T.mul(T.softmax(a, axis=1), w)), [a])
        assert err < OP_TOL

    def test_log_softmax_gradient(self):
        rng = np.random.default_rng(43)
        a = rand(rng, 4)
        w = Tensor(rng.standard_normal(4))
        err = grad_check(lambda: T.tensor_sum(T.mul(T.log_softmax(a), w)), [a])
        assert err < OP_TOL

    def test_log_softmax_agrees_with_log_of_softmax(self):
        x = Tensor([0.3, -1.2, 2.2])
        np.testing.assert_allclose(
            T.log_softmax(x).data, np.log(T.softmax(x).data), atol=1e-12
        )

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=8))
    @settings(max_examples=50, deadline=None)
    def test_softmax_sums_to_one(self, xs):
        out = T.softmax(Tensor(xs)).data
        assert abs(out.sum() - 1.0) < 1e-9
        assert np.all(out >= 0.0)


class TestStructureOps:
    def test_concat_gradient(self):
        rng = np.random.default_rng(47)
        a, b = rand(rng, 2, 3), rand(rng, 2, 2)
        err = grad_check(lambda: T.tensor_sum(T.concat([a, b], axis=1)), [a, b])
        assert err < OP_TOL

    def test_stack_gradient(self):
        rng = np.random.default_rng(53)
        a, b, c = rand(rng, 4), rand(rng, 4), rand(rng, 4)
        w = Tensor(rng.standard_normal((3, 4)))
        err = grad_check(
            lambda: T.tensor_sum(T.mul(T.stack([a, b, c]), w)), [a, b, c]
        )
        assert err < OP_TOL

    def test_stack_of_scalars_gradient(self):
        # Backward pieces must come back 0-d, not promoted to shape (1,).
        xs = [Tensor(float(i), requires_grad=True) for i in range(3)]
        with T.ComputationTape() as tape:
            tape.backward(T.mean(T.stack(xs)))
        for x in xs:
            assert x.grad.shape == ()
            assert x.grad == pytest.approx(1.0 / 3.0)

    def test_stack_rejects_mixed_shapes(self):
        with pytest.raises(ShapeError):
            T.stack([Tensor([1.0]), Tensor([1.0, 2.0])])

    def test_reshape_roundtrip_gradient(self):
        rng = np.random.default_rng(59)
        a = rand(rng, 2, 6)
        w = Tensor(rng.standard_normal((3, 4)))
        err = grad_check(lambda: T.tensor_sum(T.mul(T.reshape(a, (3, 4)), w)), [a])
        assert err < OP_TOL

    def test_row_gradient_hits_single_row(self):
        a = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        with ComputationTape() as tape:
            tape.backward(T.tensor_sum(T.row(a, 1)))
        np.testing.assert_allclose(a.grad, [[0, 0, 0], [1, 1, 1]])

    def test_take_rows_scatter_adds_duplicates(self):
        a = Tensor(np.ones((3, 2)), requires_grad=True)
        with ComputationTape() as tape:
            tape.backward(T.tensor_sum(T.take_rows(a, [0, 0, 2])))
        np.testing.assert_allclose(a.grad, [[2, 2], [0, 0], [1, 1]])

    def test_take_rows_gradient(self):
        rng = np.random.default_rng(61)
        a = rand(rng, 5, 3)
        err = grad_check(lambda: T.tensor_sum(T.take_rows(a, [4, 1, 1, 0])), [a])
        assert err < OP_TOL


class TestRowwiseOps:
    def test_mul_rowvec(self):
        rng = np.random.default_rng(67)
        x, v = rand(rng, 4, 3), rand(rng, 3)
        err = grad_check(lambda: T.tensor_sum(T.mul_rowvec(x, v)), [x, v])
        assert err < OP_TOL

    def test_add_rowvec(self):
        rng = np.random.default_rng(71)
        x, v = rand(rng, 4, 3), rand(rng, 3)
        w = Tensor(rng.standard_normal((4, 3)))
        err = grad_check(lambda: T.tensor_sum(T.mul(T.add_rowvec(x, v), w)), [x, v])
        assert err < OP_TOL

    def test_scale_rows(self):
        rng = np.random.default_rng(73)
        x, s = rand(rng, 4, 3), rand(rng, 4)
        err = grad_check(lambda: T.tensor_sum(T.scale_rows(x, s)), [x, s])
        assert err < OP_TOL

    def test_repeat_row(self):
        rng = np.random.default_rng(79)
        v = rand(rng, 3)
        w = Tensor(rng.standard_normal((5, 3)))
        err = grad_check(lambda: T.tensor_sum(T.mul(T.repeat_row(v, 5), w)), [v])
        assert err < OP_TOL


class TestCosineKernels:
    def test_known_value(self):
        c = T.cosine_similarity(Tensor([1.0, 0.0]), Tensor([1.0, 1.0]))
        np.testing.assert_allclose(c.data, 1.0 / np.sqrt(2.0), rtol=1e-12)

    def test_zero_vector_gives_zero_not_nan(self):
        c = T.cosine_similarity(Tensor([0.0, 0.0]), Tensor([1.0, 2.0]))
        assert c.data == 0.0

    def test_zero_vector_zero_gradient(self):
        a = Tensor([0.0, 0.0], requires_grad=True)
        b = Tensor([1.0, 2.0], requires_grad=True)
        with ComputationTape() as tape:
            tape.backward(T.cosine_similarity(a, b))
        np.testing.assert_allclose(a.grad, [0.0, 0.0])
        np.testing.assert_allclose(b.grad, [0.0, 0.0])

    def test_cosine_gradient(self):
        rng = np.random.default_rng(83)
        a, b = rand(rng, 6), rand(rng, 6)
        err = grad_check(lambda: T.cosine_similarity(a, b), [a, b])
        assert err < OP_TOL

    def test_row_cosine_matches_loop(self):
        rng = np.random.default_rng(89)
        a = rng.standard_normal((5, 3))
        b = rng.standard_normal((5, 3))
        got = T.row_cosine(Tensor(a), Tensor(b)).data
        want = [
            float(T.cosine_similarity(Tensor(a[i]), Tensor(b[i])).data)
            for i in range(5)
        ]
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_row_cosine_gradient(self):
        rng = np.random.default_rng(97)
        a, b = rand(rng, 4, 3), rand(rng, 4, 3)
        w = Tensor(rng.standard_normal(4))
        err = grad_check(lambda: T.tensor_sum(T.mul(T.row_cosine(a, b), w)), [a, b])
        assert err < OP_TOL

    def test_row_cosine_zero_row_masked(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0]])
        b = np.array([[1.0, 1.0], [1.0, 0.0]])
        out = T.row_cosine(Tensor(a), Tensor(b)).data
        np.testing.assert_allclose(out, [0.0, 1.0])

    def test_pairwise_cosine_matches_loop(self):
        rng = np.random.default_rng(101)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((5, 4))
        got = T.pairwise_cosine(Tensor(a), Tensor(b)).data
        for i in range(3):
            for j in range(5):
                want = float(T.cosine_similarity(Tensor(a[i]), Tensor(b[j])).data)
                np.testing.assert_allclose(got[i, j], want, rtol=1e-12)

    def test_pairwise_cosine_gradient(self):
        rng = np.random.default_rng(103)
        a, b = rand(rng, 3, 4), rand(rng, 2, 4)
        w = Tensor(rng.standard_normal((3, 2)))
        err = grad_check(lambda: T.tensor_sum(T.mul(T.pairwise_cosine(a, b), w)), [a, b])
        assert err < OP_TOL

    def test_pairwise_cosine_zero_rows(self):
        a = np.array([[0.0, 0.0], [3.0, 4.0]])
        b = np.array([[0.0, 0.0], [4.0, 3.0]])
        out = T.pairwise_cosine(Tensor(a), Tensor(b)).data
        np.testing.assert_allclose(out[0], [0.0, 0.0])
        np.testing.assert_allclose(out[:, 0], [0.0, 0.0])
        np.testing.assert_allclose(out[1, 1], 24.0 / 25.0)

    @given(
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    )
    @settings(max_examples=100, deadline=None)
    def test_cosine_bounded(self, xs, ys):
        c = float(T.cosine_similarity(Tensor(xs), Tensor(ys)).data)
        assert -1.0 - 1e-9 <= c <= 1.0 + 1e-9

    @given(
        st.lists(st.floats(-5, 5), min_size=4, max_size=4),
        st.floats(0.1, 100.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_cosine_scale_invariant(self, xs, scale):
        b = [1.0, -2.0, 0.5, 3.0]
        c1 = float(T.cosine_similarity(Tensor(xs), Tensor(b)).data)
        c2 = float(T.cosine_similarity(Tensor([x * scale for x in xs]), Tensor(b)).data)
        assert abs(c1 - c2) < 1e-9


class TestNormalizeAndDropout:
    def test_l2_normalize_unit_norm(self):
        v = T.l2_normalize(Tensor([3.0, 4.0]))
        np.testing.assert_allclose(v.data, [0.6, 0.8], rtol=1e-12)

    def test_l2_normalize_zero_raises(self):
        with pytest.raises(ZeroNormError):
            T.l2_normalize(Tensor([0.0, 0.0]))

    def test_l2_normalize_gradient(self):
        rng = np.random.default_rng(107)
        v = rand(rng, 5)
        w = Tensor(rng.standard_normal(5))
        err = grad_check(lambda: T.tensor_sum(T.mul(T.l2_normalize(v), w)), [v])
        assert err < OP_TOL

    def test_dropout_identity_at_keep_one(self):
        x = Tensor([1.0, 2.0, 3.0])
        out = T.dropout(x, 1.0, np.random.default_rng(0))
        assert out is x

    def test_dropout_inverted_scaling(self):
        rng = np.random.default_rng(109)
        x = Tensor(np.ones(10000))
        out = T.dropout(x, 0.5, rng).data
        kept = out[out > 0]
        np.testing.assert_allclose(kept, 2.0)
        assert abs(out.mean() - 1.0) < 0.05

    def test_dropout_seeded_reproducible(self):
        x = Tensor(np.ones(100))
        a = T.dropout(x, 0.5, np.random.default_rng(42)).data
        b = T.dropout(x, 0.5, np.random.default_rng(42)).data
        np.testing.assert_array_equal(a, b)

    def test_dropout_rejects_bad_prob(self):
        with pytest.raises(ValueError):
            T.dropout(Tensor([1.0]), 0.0, np.random.default_rng(0))


class TestGradCheckHarness:
    def test_detects_wrong_gradient(self):
        # A deliberately broken function: forward x^2 but we compare against
        # an analytic gradient of a different function (via x^3's forward).
        x = Tensor([2.0], requires_grad=True)

        calls = {"n": 0}

        def crooked():
            # First call (analytic pass) computes x^2; later numeric probes
            # compute x^3, so analytic and numeric gradients must disagree.
            calls["n"] += 1
            if calls["n"] == 1:
                return T.tensor_sum(T.mul(x, x))
            return T.tensor_sum(T.mul(T.mul(x, x), x))

        err = grad_check(crooked, [x])
        assert err > 1e-2

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_probe_raises(self):
        x = Tensor([0.0], requires_grad=True)
        with pytest.raises(GradCheckError, match="coordinate 0"):
            grad_check(lambda: T.tensor_sum(T.log(x)), [x])

    def test_restores_requires_grad_flag(self):
        x = Tensor([1.0])
        grad_check(lambda: T.tensor_sum(T.mul(x, x)), [x])
        assert not x.requires_grad

    def test_sampled_coordinates(self):
        rng = np.random.default_rng(3)
        x = Tensor(rng.standard_normal(50), requires_grad=True)
        err = grad_check(
            lambda: T.tensor_sum(T.tanh(x)),
            [x],
            max_coordinates=5,
            rng=np.random.default_rng(5),
        )
        assert err < OP_TOL


class TestDtypeControl:
    def test_float32_mode(self):
        T.set_default_dtype(np.float32)
        try:
            x = Tensor([1.0, 2.0])
            assert x.data.dtype == np.float32
            assert T.tanh(x).data.dtype == np.float32
        finally:
            T.set_default_dtype(np.float64)

    def test_rejects_int_dtype(self):
        with pytest.raises(ValueError):
            T.set_default_dtype(np.int32)
