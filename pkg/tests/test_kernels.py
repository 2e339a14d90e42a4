import numpy as np
import pytest

from stackedgp.kernels import (
    KernelError,
    PolynomialKernel,
    RbfKernel,
    SumKernel,
    elementary_parts,
)
from stackedgp.linalg import chol_with_jitter


class TestEval:
    def test_rbf_at_identical_points_is_variance(self):
        k = RbfKernel(1.0, 1.0)
        assert k.eval([0.0], [0.0]) == 1.0
        k = RbfKernel(2.5, [0.3, 0.7])
        x = np.array([1.2, -0.4])
        assert k.eval(x, x) == pytest.approx(2.5, rel=1e-15)

    def test_poly_direct_expansion(self):
        k = PolynomialKernel(2)
        assert k.eval([1.0, 2.0], [3.0, 1.0]) == pytest.approx(25.0)

    def test_ard_rbf_hand_value(self):
        # phi=2, theta=(0.5, 0.5): exponent -0.5*1 - 0.5*1 = -1
        k = RbfKernel(2.0, [0.5, 0.5])
        assert k.eval([0.0, 0.0], [1.0, 1.0]) == pytest.approx(2.0 * np.exp(-1.0), rel=1e-12)

    def test_symmetry(self, rng):
        for k in (RbfKernel(1.3, [0.5, 2.0]), PolynomialKernel(3),
                  SumKernel([RbfKernel(0.7, [1.0, 1.0]), PolynomialKernel(1)])):
            for _ in range(20):
                a, b = rng.normal(size=2), rng.normal(size=2)
                a2, b2 = np.array([a[0], b[0]]), np.array([a[1], b[1]])
                assert k.eval(a2, b2) == pytest.approx(k.eval(b2, a2), rel=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(KernelError):
            RbfKernel(1.0, [1.0, 1.0]).eval([0.0], [0.0, 0.0])
        with pytest.raises(KernelError):
            RbfKernel(1.0, [1.0, 1.0]).eval([0.0, 0.0, 0.0], [0.0, 0.0, 0.0])

    def test_ard_with_equal_rates_matches_isotropic(self, rng):
        iso = RbfKernel(1.7, 0.6)
        ard = RbfKernel(1.7, [0.6, 0.6, 0.6])
        for _ in range(25):
            a, b = rng.normal(size=3), rng.normal(size=3)
            expected = 1.7 * np.exp(-0.6 * np.sum((a - b) ** 2))
            assert ard.eval(a, b) == pytest.approx(expected, rel=1e-14)
            assert iso.eval(a, b) == pytest.approx(expected, rel=1e-14)

    def test_sum_kernel_is_exact_sum_of_parts(self, rng):
        parts = [RbfKernel(0.9, [0.4, 1.1]), PolynomialKernel(2)]
        k = SumKernel(parts)
        for _ in range(25):
            a, b = rng.normal(size=2), rng.normal(size=2)
            assert k.eval(a, b) == parts[0].eval(a, b) + parts[1].eval(a, b)


class TestGram:
    def test_single_row(self):
        k = RbfKernel(2.0, 1.0)
        G = k.gram(np.array([[0.3]]))
        assert G.shape == (1, 1)
        assert G[0, 0] == pytest.approx(2.0)

    def test_duplicated_rows_duplicate_columns(self):
        k = RbfKernel(1.5, [1.0, 1.0])
        X = np.array([[0.0, 0.0], [1.0, 2.0], [1.0, 2.0]])
        G = k.gram(X)
        np.testing.assert_allclose(G[1], G[2], rtol=1e-15)
        np.testing.assert_allclose(np.diag(G), 1.5, rtol=1e-15)

    def test_linear_kernel_identity_inputs(self):
        G = PolynomialKernel(1).gram(np.eye(2))
        np.testing.assert_allclose(G, np.eye(2), atol=1e-15)

    @pytest.mark.parametrize("kernel", [
        RbfKernel(1.0, [0.5, 1.5, 0.9]),
        PolynomialKernel(2),
        SumKernel([RbfKernel(1.2, [1.0, 1.0, 1.0]), PolynomialKernel(1)]),
    ])
    def test_gram_plus_jitter_is_factorizable(self, kernel, rng):
        for trial in range(10):
            n = int(rng.integers(2, 21))
            X = rng.normal(0.0, 1.0, (n, 3))
            G = kernel.gram(X)
            L, _ = chol_with_jitter(G + 1e-8 * np.eye(n))
            assert np.all(np.isfinite(L))


class TestConstruction:
    def test_invalid_hyperparameters(self):
        with pytest.raises(KernelError):
            RbfKernel(0.0, 1.0)
        with pytest.raises(KernelError):
            RbfKernel(1.0, [1.0, -1.0])
        with pytest.raises(KernelError):
            PolynomialKernel(0)
        with pytest.raises(KernelError):
            SumKernel([])

    def test_log_param_roundtrip(self):
        k = RbfKernel(2.0, [0.5, 3.0])
        k2 = k.with_log_params(k.log_params())
        assert k2.variance == pytest.approx(2.0)
        np.testing.assert_allclose(k2.rates, [0.5, 3.0])
        s = SumKernel([RbfKernel(1.0, [1.0]), PolynomialKernel(2)])
        s2 = s.with_log_params(s.log_params())
        assert s2.parts[0].variance == pytest.approx(1.0)
        assert s2.parts[1].degree == 2

    def test_elementary_parts(self):
        k = SumKernel([RbfKernel(1.0, 1.0), PolynomialKernel(1)])
        assert len(elementary_parts(k)) == 2
        assert len(elementary_parts(RbfKernel(1.0, 1.0))) == 1
