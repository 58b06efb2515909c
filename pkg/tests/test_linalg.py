import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose

from cwykit import linalg
from cwykit.errors import (
    RankDeficient,
    ShapeMismatch,
    SingularDiagonal,
)


def random_upper_unit_diag(rng, n):
    s = np.triu(rng.standard_normal((n, n)))
    np.fill_diagonal(s, 1.0)
    return s


class TestTriangularSolve:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.0])
        assert_allclose(linalg.triangular_solve(np.eye(3), b), b)

    def test_hand_back_substitution(self):
        s = np.array([[2.0, 1.0], [0.0, 2.0]])
        rhs = np.array([4.0, 2.0])
        assert_allclose(linalg.triangular_solve(s, rhs), [1.5, 1.0])

    def test_matches_dense_inverse(self):
        # oracle: dense LU inverse multiply
        rng = np.random.default_rng(0)
        s = random_upper_unit_diag(rng, 32)
        rhs = np.zeros(32)
        rhs[0] = 1.0
        expected = np.linalg.inv(s) @ rhs
        assert_allclose(linalg.triangular_solve(s, rhs), expected, atol=1e-12)

    def test_multiply_recovers_rhs_when_well_conditioned(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(2, 24))
            s = random_upper_unit_diag(rng, n)
            if np.linalg.cond(s) > 1e6:
                continue
            rhs = rng.standard_normal((n, 3))
            x = linalg.triangular_solve(s, rhs)
            assert np.linalg.norm(s @ x - rhs) < 1e-12 * np.linalg.norm(rhs)

    def test_zero_diagonal_rejected(self):
        s = np.array([[1.0, 2.0], [0.0, 0.0]])
        with pytest.raises(SingularDiagonal):
            linalg.triangular_solve(s, np.ones(2))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            linalg.triangular_solve(np.eye(3), np.ones(4))


class TestQf:
    def test_identity(self):
        q, r = linalg.qf(np.eye(3))
        assert_allclose(q, np.eye(3))
        assert_allclose(r, np.eye(3))

    def test_sign_convention_1x1(self):
        q, r = linalg.qf(np.array([[-3.0]]))
        assert_allclose(q, [[-1.0]])
        assert_allclose(r, [[3.0]])

    def test_reconstructs_random(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((8, 4))
        q, r = linalg.qf(x)
        assert np.linalg.norm(q.T @ q - np.eye(4)) < 1e-12
        assert np.linalg.norm(q @ r - x) < 1e-12

    def test_postconditions_hold_on_1000_instances(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            cols = int(rng.integers(1, 7))
            rows = cols + int(rng.integers(0, 7))
            x = rng.standard_normal((rows, cols))
            q, r = linalg.qf(x)
            assert np.linalg.norm(q.T @ q - np.eye(cols)) < 1e-12
            assert np.linalg.norm(q @ r - x) < 1e-12 * max(1.0, np.linalg.norm(x))
            assert np.all(np.diag(r) > 0)

    def test_rank_deficient_rejected(self):
        x = np.ones((5, 2))
        with pytest.raises(RankDeficient):
            linalg.qf(x)


class TestSkewParam:
    def test_storage_and_exact_skewness(self):
        rng = np.random.default_rng(4)
        a = linalg.SkewParam.random(7, rng)
        assert a.upper.shape == (21,)
        m = a.materialize()
        assert np.array_equal(m, -m.T)

    def test_from_generator_matches_definition(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((5, 5))
        assert_allclose(linalg.SkewParam.from_generator(x).materialize(), x - x.T)


class TestCayley:
    def test_zero_maps_to_identity(self):
        a = linalg.SkewParam(dim=4, upper=np.zeros(6))
        assert_allclose(linalg.cayley(a), np.eye(4))

    def test_2x2_rotation_by_quarter_pi(self):
        # closed form: 2x2 Cayley of [[0, t], [-t, 0]] rotates by 2*atan(t/2)
        theta = 2.0 * np.tan(np.pi / 8.0)
        a = linalg.SkewParam.from_generator(np.array([[0.0, theta], [0.0, 0.0]]))
        c, s = np.cos(np.pi / 4.0), np.sin(np.pi / 4.0)
        assert_allclose(linalg.cayley(a), [[c, -s], [s, c]], atol=1e-12)

    def test_orthogonality_random(self):
        rng = np.random.default_rng(6)
        q = linalg.cayley(linalg.SkewParam.random(16, rng))
        assert np.linalg.norm(q.T @ q - np.eye(16)) < 1e-12

    @pytest.mark.parametrize("n", [2, 8, 64, 256])
    def test_orthogonality_and_rotation_component(self, n):
        rng = np.random.default_rng(n)
        q = linalg.cayley(linalg.SkewParam.random(n, rng))
        assert np.linalg.norm(q.T @ q - np.eye(n)) < 1e-11
        assert abs(np.linalg.det(q) - 1.0) < 1e-9


class TestMatrixExp:
    def test_zero_maps_to_identity(self):
        a = linalg.SkewParam(dim=3, upper=np.zeros(3))
        assert_allclose(linalg.matrix_exp(a), np.eye(3))

    def test_quarter_turn(self):
        a = linalg.SkewParam.from_generator(np.array([[0.0, np.pi / 2], [0.0, 0.0]]))
        assert_allclose(linalg.matrix_exp(a), [[0.0, 1.0], [-1.0, 0.0]], atol=1e-12)

    def test_inverse_identity(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((16, 16))
        fwd = linalg.matrix_exp(linalg.SkewParam.from_generator(x))
        bwd = linalg.matrix_exp(linalg.SkewParam.from_generator(-x))
        assert np.linalg.norm(fwd @ bwd - np.eye(16)) < 1e-11

    def test_matches_scipy_oracle(self):
        rng = np.random.default_rng(8)
        a = linalg.SkewParam.random(16, rng)
        assert_allclose(linalg.matrix_exp(a), scipy.linalg.expm(a.materialize()),
                        atol=1e-11)

    @pytest.mark.parametrize("n", [2, 32, 256])
    def test_orthogonality_dims(self, n):
        rng = np.random.default_rng(100 + n)
        q = linalg.matrix_exp(linalg.SkewParam.random(n, rng))
        assert np.linalg.norm(q.T @ q - np.eye(n)) < 1e-11
        assert abs(np.linalg.det(q) - 1.0) < 1e-9


class TestSpectralNorm:
    def test_diagonal(self):
        assert abs(linalg.spectral_norm(np.diag([3.0, 1.0])) - 3.0) < 1e-12

    def test_orthogonal_is_norm_preserving(self):
        rng = np.random.default_rng(9)
        q, _ = linalg.qf(rng.standard_normal((12, 12)))
        assert abs(linalg.spectral_norm(q) - 1.0) < 1e-9

    def test_matches_svd_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            x = rng.standard_normal((10, 6))
            top = np.linalg.svd(x, compute_uv=False)[0]
            assert abs(linalg.spectral_norm(x) - top) < 1e-8

    def test_zero_matrix(self):
        assert linalg.spectral_norm(np.zeros((4, 3))) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ShapeMismatch):
            linalg.spectral_norm(np.zeros((0, 3)))

    def test_no_convergence_carries_best_estimate(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((8, 8))
        top = np.linalg.svd(x, compute_uv=False)[0]
        with pytest.raises(linalg.NoConvergence) as excinfo:
            linalg.spectral_norm(x, rel_tol=0.0, max_iters=5)
        assert abs(excinfo.value.estimate - top) < 0.5 * top


class TestMatrixIO:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((5, 3))
        path = tmp_path / "m.txt"
        linalg.write_matrix(path, x)
        assert_allclose(linalg.read_matrix(path), x)

    def test_header_line(self, tmp_path):
        path = tmp_path / "m.txt"
        linalg.write_matrix(path, np.eye(2))
        assert path.read_text().splitlines()[0] == "2 2"

    def test_rejects_nonfinite(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 2\n1.0 nan\n")
        with pytest.raises(ShapeMismatch):
            linalg.read_matrix(path)

    def test_rejects_ragged_row(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 2\n1.0 2.0\n3.0\n")
        with pytest.raises(ShapeMismatch):
            linalg.read_matrix(path)

    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2\n1.0\n2.0\n")
        with pytest.raises(ShapeMismatch):
            linalg.read_matrix(path)
