import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (
    mc_moment_oracle,
    random_beliefs,
    random_poly_node,
    random_rbf_node,
    random_sum_node,
)
from stackedgp.gp import GaussianBelief, GPNode
from stackedgp.kernels import PolynomialKernel, RbfKernel, SumKernel
from stackedgp.moments import (
    MomentCapError,
    NegativeVarianceWarning,
    _assemble,
    generic_kernel_statistics,
    hadamard_sum,
    multinomial_indices,
    noncentral_moment,
    noncentral_moment_table,
    poly_uncertain_mean,
    poly_uncertain_variance,
    rbf_uncertain_mean,
    rbf_uncertain_variance,
    sum_kernel_uncertain_moments,
    uncertain_moments,
)


class TestNoncentralMoments:
    def test_degenerate_gaussian_is_power(self):
        for mu in (-1.3, 0.0, 2.0):
            for p in range(8):
                assert noncentral_moment(mu, 0.0, p) == pytest.approx(mu**p)

    def test_standard_normal_fourth_moment(self):
        assert noncentral_moment(0.0, 1.0, 4) == 3.0

    def test_against_monte_carlo(self):
        gen = np.random.default_rng(7)
        mu, var, p = 0.7, 0.3, 6
        z = gen.normal(mu, np.sqrt(var), 10_000_000)
        est = float(np.mean(z**p))
        se = float(np.std(z**p, ddof=1) / np.sqrt(z.size))
        assert noncentral_moment(mu, var, p) == pytest.approx(est, abs=3 * se)

    @settings(max_examples=100, deadline=None)
    @given(
        mu=st.floats(-3.0, 3.0),
        var=st.floats(0.0, 4.0),
        p=st.integers(1, 12),
    )
    def test_recurrence(self, mu, var, p):
        # a_{p+1} = mu a_p + p var a_{p-1}
        a_prev = noncentral_moment(mu, var, p - 1)
        a_p = noncentral_moment(mu, var, p)
        a_next = noncentral_moment(mu, var, p + 1)
        expected = mu * a_p + p * var * a_prev
        assert a_next == pytest.approx(expected, rel=1e-10, abs=1e-10)

    def test_table_basics(self):
        t = noncentral_moment_table(0.5, 0.2, 3)
        assert t[0] == 1.0
        assert t[1] == 0.5
        assert t[2] == pytest.approx(0.5**2 + 0.2)

    def test_order_cap(self):
        with pytest.raises(MomentCapError):
            noncentral_moment(0.0, 1.0, 21)
        with pytest.raises(ValueError):
            noncentral_moment(0.0, 1.0, -1)


class TestMultinomialIndices:
    def test_binomial_case(self):
        assert multinomial_indices(2, 2) == [((2, 0), 1), ((1, 1), 2), ((0, 2), 1)]

    def test_degree_zero(self):
        assert multinomial_indices(0, 3) == [((0, 0, 0), 1)]

    def test_counts_and_coefficient_sum(self):
        idx = multinomial_indices(3, 3)
        assert len(idx) == 10 == math.comb(3 + 3 - 1, 3 - 1)
        assert sum(c for _, c in idx) == 3**3

    def test_brute_force_coefficients(self):
        # count sequences of slot choices directly
        for d, m in [(2, 2), (3, 2), (4, 3)]:
            counts = {}
            for seq in itertools.product(range(m), repeat=d):
                key = tuple(seq.count(t) for t in range(m))
                counts[key] = counts.get(key, 0) + 1
            assert dict((t, c) for t, c in multinomial_indices(d, m)) == counts

    def test_lexicographic_descending(self):
        tuples = [t for t, _ in multinomial_indices(3, 3)]
        assert tuples == sorted(tuples, reverse=True)

    def test_term_cap(self):
        with pytest.raises(MomentCapError):
            multinomial_indices(50, 12)


def _certain(beliefs):
    return [GaussianBelief(b.mean, 0.0) for b in beliefs]


class TestCertainInputReduction:
    @pytest.mark.parametrize("family", ["rbf", "poly1", "poly3", "sum"])
    def test_zero_variance_matches_predict(self, family, rng):
        for trial in range(25):
            if family == "rbf":
                node = random_rbf_node(rng)
            elif family == "poly1":
                node = random_poly_node(rng, degree=1)
            elif family == "poly3":
                node = random_poly_node(rng, degree=3)
            else:
                node = random_sum_node(rng, degree=2)
            beliefs = _certain(random_beliefs(rng, node.input_dim))
            mu = np.array([b.mean for b in beliefs])
            res = uncertain_moments(node, beliefs)
            ref = node.predict(mu)
            assert res.mean == pytest.approx(ref.mean, rel=1e-10, abs=1e-12)
            assert res.variance == pytest.approx(ref.variance, rel=1e-9, abs=1e-12)


class TestRbfMoments:
    def test_mean_mc_oracle_1d(self, rng):
        node = random_rbf_node(rng, n=3, m=1, noise=0.05)
        beliefs = [GaussianBelief(0.5, 0.2)]
        mean, se_mean, var, se_var = mc_moment_oracle(node, beliefs, 1_000_000, seed=11)
        assert rbf_uncertain_mean(node, beliefs) == pytest.approx(mean, abs=3 * se_mean)
        res = rbf_uncertain_variance(node, beliefs)
        assert res.variance == pytest.approx(var, abs=3 * se_var)

    def test_mean_vanishes_for_huge_input_variance(self, rng):
        node = random_rbf_node(rng, n=5, m=1)
        big = [GaussianBelief(0.0, 1e12)]
        assert abs(rbf_uncertain_mean(node, big)) < 1e-3

    def test_uncertainty_increases_variance_on_fixtures(self):
        # holds on these smooth interior fixtures (not claimed universally)
        grid = np.linspace(-2.0, 2.0, 12)[:, None]
        node = GPNode(RbfKernel(1.0, 0.8), 0.05, grid, np.sin(1.5 * grid[:, 0]))
        for center in (-1.2, -0.3, 0.4, 1.1):
            v0 = rbf_uncertain_variance(node, [GaussianBelief(center, 0.0)]).variance
            v1 = rbf_uncertain_variance(node, [GaussianBelief(center, 0.2)]).variance
            assert v1 >= v0

    def test_diagnostics_exposed(self, rng):
        node = random_rbf_node(rng, m=2)
        res = rbf_uncertain_variance(node, random_beliefs(rng, 2))
        d = res.diagnostics
        assert d.w is not None and 0 < d.w <= 1.0
        assert d.u is not None and 0 < d.u <= 1.0
        assert d.delta2 == pytest.approx(node.kernel.variance)
        assert np.isfinite(d.zeta) and np.isfinite(d.hadamard)

    def test_sigma_k_dual_path(self, rng):
        # uP - w^2 T against the generic cross-expectation assembly
        from stackedgp.moments import _rbf_variance_terms, _rbf_mean_terms

        for trial in range(30):
            node = random_rbf_node(rng, n=int(rng.integers(3, 9)), m=int(rng.integers(1, 4)))
            beliefs = random_beliefs(rng, node.input_dim)
            mu = np.array([b.mean for b in beliefs])
            var = np.array([b.variance for b in beliefs])
            w, q = _rbf_mean_terms(node.kernel, node.X, mu, var)
            u, P, sigma_direct = _rbf_variance_terms(node.kernel, node.X, mu, var)
            v_gen, H_gen, _ = generic_kernel_statistics(node.kernel, node.X, mu, var)
            sigma_generic = H_gen - np.outer(v_gen, v_gen)
            scale = np.max(np.abs(sigma_direct)) + 1e-300
            assert np.max(np.abs(sigma_direct - sigma_generic)) / scale < 1e-9
            np.testing.assert_allclose(w * q, v_gen, rtol=1e-10)
            np.testing.assert_allclose(u * P, H_gen, rtol=1e-9)

    def test_variance_assembly_consistent_with_generic_terms(self, rng):
        # sigma_eps + D2 - E[k' C^-1 k] + Var(k' C^-1 y) from the generic
        # H and v, against the packaged assembly
        for trial in range(10):
            node = random_rbf_node(rng, n=6, m=2)
            beliefs = random_beliefs(rng, 2)
            mu = np.array([b.mean for b in beliefs])
            var = np.array([b.variance for b in beliefs])
            v, H, delta2 = generic_kernel_statistics(node.kernel, node.X, mu, var)
            alt = (
                node.noise_variance
                + delta2
                - hadamard_sum(node, H)
                + node.alpha @ (H - np.outer(v, v)) @ node.alpha
            )
            res = rbf_uncertain_variance(node, beliefs)
            assert res.variance == pytest.approx(alt, rel=1e-9)


class TestPolynomialMoments:
    def test_single_point_symbolic_expansion(self):
        # one training point (1, 1), degree 2: E[(z1 + z2)^2] decomposes
        # into a2(mu1) + 2 a1(mu1) a1(mu2) + a2(mu2)
        node = GPNode(PolynomialKernel(2), 0.3, np.array([[1.0, 1.0]]), np.array([1.0]))
        mu1, s1, mu2, s2 = 0.4, 0.25, -0.7, 0.1
        beliefs = [GaussianBelief(mu1, s1), GaussianBelief(mu2, s2)]
        a2_1 = mu1**2 + s1
        a2_2 = mu2**2 + s2
        v1 = a2_1 + 2 * mu1 * mu2 + a2_2
        expected = v1 * node.alpha[0]
        assert poly_uncertain_mean(node, beliefs) == pytest.approx(expected, rel=1e-12)

    def test_linear_kernel_closed_form(self, rng):
        # d=1, 1-D: v_i = mu z_i, D2 = mu^2 + s, H_ij = (mu^2+s) z_i z_j,
        # Sigma_k = s z z'
        node = random_poly_node(rng, n=5, m=1, degree=1, noise=0.2)
        mu, s = 0.8, 0.3
        z = node.X[:, 0]
        Cinv = node.precision_matrix()
        a2 = mu**2 + s
        expected_mean = mu * z @ node.alpha
        expected_var = (
            node.noise_variance
            + a2
            + s * (z @ node.alpha) ** 2
            - a2 * (z @ Cinv @ z)
        )
        res = poly_uncertain_variance(node, [GaussianBelief(mu, s)])
        assert res.mean == pytest.approx(expected_mean, rel=1e-10)
        assert res.variance == pytest.approx(expected_var, rel=1e-8)

    def test_mean_against_brute_force_expansion(self, rng):
        # expand (sum_t z_t Z_ti)^d over all slot sequences and integrate
        # term by term with noncentral moments; no multinomial grouping
        for d in (1, 2, 3):
            for m in (1, 2):
                node = random_poly_node(rng, n=4, m=m, degree=d)
                beliefs = random_beliefs(rng, m)
                mu = [b.mean for b in beliefs]
                var = [b.variance for b in beliefs]
                v = np.zeros(node.n)
                for i in range(node.n):
                    total = 0.0
                    for seq in itertools.product(range(m), repeat=d):
                        coef = np.prod([node.X[i, t] for t in seq])
                        powers = [seq.count(t) for t in range(m)]
                        moment = np.prod(
                            [noncentral_moment(mu[t], var[t], p) for t, p in enumerate(powers)]
                        )
                        total += coef * moment
                    v[i] = total
                expected = float(v @ node.alpha)
                assert poly_uncertain_mean(node, beliefs) == pytest.approx(expected, rel=1e-10)

    def test_mc_oracle_degree3(self, rng):
        node = random_poly_node(rng, n=6, m=2, degree=3, noise=0.3)
        beliefs = [GaussianBelief(0.6, 0.15), GaussianBelief(-0.2, 0.1)]
        mean, se_mean, var, se_var = mc_moment_oracle(node, beliefs, 1_000_000, seed=5)
        res = poly_uncertain_variance(node, beliefs)
        assert res.mean == pytest.approx(mean, abs=3 * se_mean)
        assert res.variance == pytest.approx(var, abs=3 * se_var)

    def test_mc_oracle_degree2(self, rng):
        node = random_poly_node(rng, n=5, m=2, degree=2, noise=0.2)
        beliefs = [GaussianBelief(0.3, 0.2), GaussianBelief(0.9, 0.3)]
        mean, se_mean, var, se_var = mc_moment_oracle(node, beliefs, 1_000_000, seed=6)
        res = poly_uncertain_variance(node, beliefs)
        assert res.mean == pytest.approx(mean, abs=3 * se_mean)
        assert res.variance == pytest.approx(var, abs=3 * se_var)


class TestSumKernelMoments:
    def test_two_rbf_parts_zero_variance(self, rng):
        Z = rng.normal(0.0, 1.0, (6, 2))
        y = rng.normal(0.0, 1.0, 6)
        kernel = SumKernel([RbfKernel(0.8, [0.5, 1.0]), RbfKernel(0.4, [2.0, 0.3])])
        node = GPNode(kernel, 0.1, Z, y)
        beliefs = _certain(random_beliefs(rng, 2))
        res = sum_kernel_uncertain_moments(node, beliefs)
        ref = node.predict(np.array([b.mean for b in beliefs]))
        assert res.mean == pytest.approx(ref.mean, rel=1e-10)
        assert res.variance == pytest.approx(ref.variance, rel=1e-9)

    def test_rbf_plus_linear_mc_oracle(self, rng):
        node = random_sum_node(rng, n=6, m=1, degree=1, noise=0.2)
        beliefs = [GaussianBelief(0.4, 0.25)]
        mean, se_mean, var, se_var = mc_moment_oracle(node, beliefs, 1_000_000, seed=13)
        res = sum_kernel_uncertain_moments(node, beliefs)
        assert res.mean == pytest.approx(mean, abs=3 * se_mean)
        assert res.variance == pytest.approx(var, abs=3 * se_var)

    def test_two_rbf_parts_mc_oracle(self, rng):
        Z = rng.normal(0.0, 1.0, (6, 2))
        y = rng.normal(0.0, 1.0, 6)
        kernel = SumKernel([RbfKernel(0.8, [0.5, 1.0]), RbfKernel(0.4, [2.0, 0.3])])
        node = GPNode(kernel, 0.15, Z, y)
        beliefs = [GaussianBelief(0.2, 0.3), GaussianBelief(-0.5, 0.2)]
        mean, se_mean, var, se_var = mc_moment_oracle(node, beliefs, 1_000_000, seed=17)
        res = sum_kernel_uncertain_moments(node, beliefs)
        assert res.mean == pytest.approx(mean, abs=3 * se_mean)
        assert res.variance == pytest.approx(var, abs=3 * se_var)

    def test_vanishing_part_reduces_to_single_kernel(self, rng):
        Z = rng.normal(0.0, 1.0, (5, 1))
        y = rng.normal(0.0, 1.0, 5)
        beliefs = [GaussianBelief(0.3, 0.2)]
        tiny = SumKernel([RbfKernel(0.9, [0.7]), RbfKernel(1e-14, [1.0])])
        node_sum = GPNode(tiny, 0.1, Z, y)
        node_single = GPNode(RbfKernel(0.9, [0.7]), 0.1, Z, y)
        a = sum_kernel_uncertain_moments(node_sum, beliefs)
        b = rbf_uncertain_variance(node_single, beliefs)
        assert a.mean == pytest.approx(b.mean, rel=1e-9)
        assert a.variance == pytest.approx(b.variance, rel=1e-9)


class TestAssemblyGuards:
    def test_negative_variance_warning_and_floor(self, rng):
        node = random_rbf_node(rng, n=4, m=1, noise=0.05)
        with pytest.warns(NegativeVarianceWarning):
            res = _assemble(node, 0.0, delta2=1.0, zeta=0.0, hadamard=5.0)
        # noise-free bracket clamped at zero: the noise variance survives
        assert res.variance == pytest.approx(
            node.noise_variance * node.y_scale**2
        )
        assert res.diagnostics.pre_clamp_variance < 0

    def test_normalized_node_moments_match_predict(self, rng):
        X = rng.normal(0.0, 1.0, (8, 2))
        y = rng.normal(5.0, 2.0, 8)
        shift, scale = float(np.mean(y)), float(np.std(y))
        node = GPNode(
            RbfKernel(1.0, [0.8, 0.6]), 0.1, X, (y - shift) / scale,
            y_shift=shift, y_scale=scale,
        )
        beliefs = _certain(random_beliefs(rng, 2))
        res = uncertain_moments(node, beliefs)
        ref = node.predict(np.array([b.mean for b in beliefs]))
        assert res.mean == pytest.approx(ref.mean, rel=1e-10)
        assert res.variance == pytest.approx(ref.variance, rel=1e-9)

    def test_dimension_mismatch(self, rng):
        from stackedgp.kernels import KernelError

        node = random_rbf_node(rng, m=2)
        with pytest.raises(KernelError):
            uncertain_moments(node, [GaussianBelief(0.0, 0.0)])
