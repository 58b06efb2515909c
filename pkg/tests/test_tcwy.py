import numpy as np
import pytest
from numpy.testing import assert_allclose

from cwykit import cwy, tcwy
from cwykit.errors import (
    NotOnManifold,
    RequiresStrictTruncation,
    ShapeMismatch,
)
from cwykit.householder import HouseholderStack
from cwykit.linalg import qf
from tests.test_cwy import fd_gradient


def random_stiefel(rng, n, m):
    return qf(rng.standard_normal((n, m)))[0]


class TestGamma:
    def test_hand_case_n2_m1(self):
        stack = HouseholderStack(np.array([[1.0, 0.0]]))
        assert_allclose(tcwy.gamma(stack), [[-1.0], [0.0]])

    @pytest.mark.parametrize("n,m", [(16, 4), (8, 1), (12, 11), (40, 20)])
    def test_matches_full_column_slice(self, n, m):
        rng = np.random.default_rng(n * 100 + m)
        stack = HouseholderStack(rng.standard_normal((m, n)))
        full = cwy.materialize(cwy.build_factors(stack))
        assert np.max(np.abs(tcwy.gamma(stack) - full[:, :m])) < 1e-12

    def test_output_on_manifold(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(3, 40))
            m = int(rng.integers(1, n))
            omega = tcwy.gamma(HouseholderStack(rng.standard_normal((m, n))))
            assert tcwy.stiefel_residual(omega) < 1e-11 * m

    def test_square_rejected(self):
        with pytest.raises(RequiresStrictTruncation):
            tcwy.gamma(HouseholderStack(np.eye(3)))


class TestDecomposeStiefel:
    def test_single_column(self):
        omega = np.array([[-1.0], [0.0]])
        stack = tcwy.decompose_stiefel(omega)
        assert np.max(np.abs(tcwy.gamma(stack) - omega)) < 1e-12

    def test_canonical_point_plus_one_branch(self):
        omega = np.zeros((4, 2))
        omega[0, 0] = omega[1, 1] = 1.0
        stack = tcwy.decompose_stiefel(omega)
        assert np.max(np.abs(tcwy.gamma(stack) - omega)) < 1e-12

    def test_roundtrip_random(self):
        rng = np.random.default_rng(2)
        omega = random_stiefel(rng, 12, 5)
        stack = tcwy.decompose_stiefel(omega)
        assert np.linalg.norm(tcwy.gamma(stack) - omega) < 1e-9

    def test_roundtrip_both_directions(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            n = int(rng.integers(4, 33))
            m = int(rng.integers(1, n))
            stack = HouseholderStack(rng.standard_normal((m, n)))
            omega = tcwy.gamma(stack)
            again = tcwy.gamma(tcwy.decompose_stiefel(omega))
            assert np.linalg.norm(again - omega) < 1e-9 * m

    def test_off_manifold_rejected(self):
        rng = np.random.default_rng(4)
        with pytest.raises(NotOnManifold):
            tcwy.decompose_stiefel(rng.standard_normal((7, 3)))

    def test_square_rejected(self):
        with pytest.raises(RequiresStrictTruncation):
            tcwy.decompose_stiefel(np.eye(3))


class TestGammaGrad:
    def test_zero_upstream(self):
        rng = np.random.default_rng(5)
        stack = HouseholderStack(rng.standard_normal((3, 8)))
        grads = tcwy.gamma_grad(stack, np.zeros((8, 3)))
        assert all(np.all(g == 0.0) for g in grads)

    def test_frobenius_norm_is_constant_on_the_manifold(self):
        rng = np.random.default_rng(6)
        stack = HouseholderStack(rng.standard_normal((4, 11)))
        omega = tcwy.gamma(stack)
        grads = np.asarray(tcwy.gamma_grad(stack, 2.0 * omega))
        assert np.max(np.abs(grads)) < 1e-8

    def test_entry_functional_small_case(self):
        rng = np.random.default_rng(7)
        vectors = rng.standard_normal((2, 3))
        upstream = np.zeros((3, 2))
        upstream[0, 0] = 1.0
        analytic = np.asarray(tcwy.gamma_grad(HouseholderStack(vectors), upstream))

        def fun(v):
            return tcwy.gamma(HouseholderStack(v))[0, 0]

        fd = fd_gradient(fun, vectors)
        assert np.linalg.norm(fd - analytic) / np.linalg.norm(analytic) < 1e-5

    def test_linear_functional_fd_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(5):
            n = int(rng.integers(4, 13))
            m = int(rng.integers(1, n))
            vectors = rng.standard_normal((m, n))
            c = rng.standard_normal((n, m))
            analytic = np.asarray(tcwy.gamma_grad(HouseholderStack(vectors), c))

            def fun(v):
                return float(np.sum(c * tcwy.gamma(HouseholderStack(v))))

            fd = fd_gradient(fun, vectors)
            rel = np.linalg.norm(fd - analytic) / np.linalg.norm(analytic)
            assert rel < 1e-5


class TestReshapeKernel:
    def test_q1_is_identity_reshape(self):
        rng = np.random.default_rng(9)
        kernel = rng.standard_normal((1, 1, 3, 3))
        assert_allclose(tcwy.reshape_kernel(kernel), kernel[0, 0])

    def test_zeros(self):
        assert np.all(tcwy.reshape_kernel(np.zeros((3, 3, 2, 2))) == 0.0)

    def test_index_formula(self):
        kernel = np.zeros((3, 3, 2, 2))
        kernel[1, 2, 0, 1] = 1.0
        khat = tcwy.reshape_kernel(kernel)
        expected_row = 1 * 3 * 2 + 2 * 2 + 0
        assert khat[expected_row, 1] == 1.0
        assert np.sum(khat != 0.0) == 1

    def test_roundtrip(self):
        rng = np.random.default_rng(10)
        kernel = rng.standard_normal((3, 3, 4, 4))
        khat = tcwy.reshape_kernel(kernel)
        assert np.array_equal(tcwy.unreshape_kernel(khat, 3, 4), kernel)

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ShapeMismatch):
            tcwy.reshape_kernel(np.zeros((3, 3, 2, 4)))


def stiefel_kernel(rng, q, f_out):
    """Transition kernel whose scaled reshape has orthonormal columns."""
    stack = HouseholderStack(rng.standard_normal((f_out, q * q * f_out)))
    khat = tcwy.gamma(stack) / q
    return tcwy.unreshape_kernel(khat, q, f_out)


class TestConvBound:
    def test_zero_kernel(self):
        rng = np.random.default_rng(11)
        lhs, rhs, holds = tcwy.check_conv_bound(np.zeros((3, 3, 2, 2)),
                                                rng.standard_normal((5, 5, 2)))
        assert lhs == 0.0 and rhs == 0.0 and holds

    def test_1x1_orthogonal_kernel_is_isometry(self):
        rng = np.random.default_rng(12)
        q_mat = qf(rng.standard_normal((3, 3)))[0]
        kernel = q_mat[None, None, :, :]
        state = rng.standard_normal((6, 4, 3))
        lhs, rhs, holds = tcwy.check_conv_bound(kernel, state)
        energy = float(np.sum(state * state))
        assert holds
        assert abs(lhs - energy) < 1e-9 * energy
        assert abs(rhs - energy) < 1e-8 * energy

    def test_constrained_kernel_bound_and_tightness(self):
        rng = np.random.default_rng(13)
        kernel = stiefel_kernel(rng, 3, 2)
        state = rng.standard_normal((7, 7, 2))
        lhs, rhs, holds = tcwy.check_conv_bound(kernel, state)
        assert holds
        energy = float(np.sum(state * state))
        # with the constraint the operator norm of q * K_hat is exactly 1
        assert abs(rhs - energy) < 1e-8 * energy

    def test_constrained_kernel_never_expands(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            f_out = int(rng.integers(1, 4))
            kernel = stiefel_kernel(rng, 3, f_out)
            state = rng.standard_normal((6, 6, f_out))
            out = tcwy.conv2d_same(kernel, state)
            assert np.linalg.norm(out) <= np.linalg.norm(state) + 1e-9


class TestConvStep:
    def test_pointwise_case_matches_direct_formula(self):
        rng = np.random.default_rng(15)
        f = 3
        kernel = rng.standard_normal((1, 1, f, f))
        k_in = rng.standard_normal((1, 1, 2, f))
        bias = rng.standard_normal(f)
        state = rng.standard_normal((4, 5, f))
        obs = rng.standard_normal((4, 5, 2))
        out = tcwy.conv_step(kernel, k_in, bias, state, obs, nonlinearity="relu")
        pre = state @ kernel[0, 0] + bias + obs @ k_in[0, 0]
        assert_allclose(out, np.maximum(pre, 0.0), atol=1e-13)
