import numpy as np
import pytest

from stackedgp.gp import (
    GaussianBelief,
    GPNode,
    TrainingError,
    TrainingSet,
    TrainOptions,
    lml_and_grad,
    log_marginal_likelihood,
    train,
)
from stackedgp.kernels import RbfKernel


class TestLogMarginalLikelihood:
    def test_scalar_case(self):
        # n=1, K=phi, no noise, z=0: -0.5 ln phi - 0.5 ln 2 pi
        phi = 1.7
        value = log_marginal_likelihood(
            RbfKernel(phi, 1.0), 0.0, np.array([[0.0]]), np.array([0.0])
        )
        assert value == pytest.approx(-0.5 * np.log(phi) - 0.5 * np.log(2 * np.pi), rel=1e-12)

    def test_gradient_matches_finite_differences(self, rng):
        for trial in range(5):
            X = rng.normal(0.0, 1.0, (10, 2))
            y = rng.normal(0.0, 1.0, 10)
            kernel = RbfKernel(rng.uniform(0.5, 2.0), rng.uniform(0.3, 1.5, 2))
            noise = rng.uniform(0.05, 0.5)
            _, grad = lml_and_grad(kernel, noise, X, y)
            packed = np.concatenate([kernel.log_params(), [np.log(noise)]])
            h = 1e-5
            for i in range(packed.size):
                up, dn = packed.copy(), packed.copy()
                up[i] += h
                dn[i] -= h
                f_up = log_marginal_likelihood(
                    kernel.with_log_params(up[:-1]), np.exp(up[-1]), X, y
                )
                f_dn = log_marginal_likelihood(
                    kernel.with_log_params(dn[:-1]), np.exp(dn[-1]), X, y
                )
                fd = (f_up - f_dn) / (2 * h)
                assert grad[i] == pytest.approx(fd, rel=1e-4, abs=1e-7)

    def test_small_jitter_barely_moves_value(self, rng):
        X = rng.normal(0.0, 1.0, (12, 1))
        y = rng.normal(0.0, 1.0, 12)
        kernel = RbfKernel(1.0, 1.0)
        base = log_marginal_likelihood(kernel, 0.3, X, y)
        K = kernel.gram(X) + 0.3 * np.eye(12) + 1e-8 * np.eye(12)
        from stackedgp.linalg import chol_with_jitter, chol_solve

        L, _ = chol_with_jitter(K)
        alpha = chol_solve(L, y)
        jittered = float(
            -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 6 * np.log(2 * np.pi)
        )
        assert abs(jittered - base) / abs(base) < 1e-6


class TestTrain:
    def test_recovers_noise_on_sine_data(self):
        gen = np.random.default_rng(42)
        X = gen.uniform(0.0, 2 * np.pi, 50)[:, None]
        y = np.sin(X[:, 0]) + gen.normal(0.0, 0.1, 50)
        node = train(
            RbfKernel(1.0, 1.0),
            TrainingSet(X, y),
            TrainOptions(restarts=5, seed=1),
        )
        assert 0.003 <= node.noise_variance * node.y_scale**2 <= 0.03

    def test_constant_targets(self):
        gen = np.random.default_rng(0)
        X = gen.normal(0.0, 1.0, (12, 1))
        c = 4.2
        node = train(
            RbfKernel(1.0, 1.0),
            TrainingSet(X, np.full(12, c)),
            TrainOptions(restarts=2, normalize_y=True, seed=0),
        )
        for x in (-1.0, 0.0, 2.5):
            assert node.predict(np.array([x])).mean == pytest.approx(c, abs=1e-6)

    def test_two_identical_inputs_disagreeing_targets(self):
        # analytic optimum of the 2-point likelihood: the noise picks up
        # the full sample variance of the targets (grid oracle check)
        X = np.array([[1.0], [1.0]])
        y = np.array([0.0, 2.0])
        node = train(RbfKernel(1.0, 1.0), TrainingSet(X, y), TrainOptions(restarts=4, seed=0))
        sample_var = float(np.var(y, ddof=1))
        assert node.noise_variance * node.y_scale**2 >= 0.5 * sample_var

        # 1-D grid oracle over the noise variance at the trained kernel
        grid = np.geomspace(1e-4, 10.0, 400)
        vals = [
            log_marginal_likelihood(node.kernel, s2, X, node.y) for s2 in grid
        ]
        assert node.log_marginal_likelihood >= max(vals) - 1e-3

    def test_result_at_least_as_good_as_init(self, rng):
        X = rng.normal(0.0, 1.0, (15, 1))
        y = rng.normal(0.0, 1.0, 15)
        init = RbfKernel(1.0, 1.0)
        node = train(init, TrainingSet(X, y), TrainOptions(restarts=1, seed=0))
        assert node.log_marginal_likelihood >= log_marginal_likelihood(init, 1.0, X, y) - 1e-9

    def test_monotone_restarts(self):
        gen = np.random.default_rng(5)
        X = gen.uniform(-2, 2, (25, 1))
        y = np.tanh(2 * X[:, 0]) + gen.normal(0, 0.05, 25)
        data = TrainingSet(X, y)
        lml_1 = train(RbfKernel(1.0, 1.0), data, TrainOptions(restarts=1, seed=9)).log_marginal_likelihood
        lml_5 = train(RbfKernel(1.0, 1.0), data, TrainOptions(restarts=5, seed=9)).log_marginal_likelihood
        assert lml_5 >= lml_1 - 1e-9

    def test_single_point_rejected(self):
        with pytest.raises(TrainingError):
            train(RbfKernel(1.0, 1.0), TrainingSet(np.array([[0.0]]), np.array([1.0])))

    def test_training_set_validation(self):
        with pytest.raises(ValueError):
            TrainingSet(np.array([[np.nan]]), np.array([1.0]))
        with pytest.raises(ValueError):
            TrainingSet(np.array([[1.0], [2.0]]), np.array([1.0]))


class TestPredict:
    def test_interpolates_training_point_with_tiny_noise(self, rng):
        X = rng.uniform(-2, 2, (10, 1))
        y = np.cos(X[:, 0])
        node = GPNode(RbfKernel(1.0, 1.0), 1e-10, X, y)
        b = node.predict(X[3])
        assert b.mean == pytest.approx(y[3], abs=1e-6)

    def test_far_from_data_variance_reverts_to_prior(self):
        node = GPNode(RbfKernel(2.0, 1.0), 0.1, np.array([[0.0], [1.0]]), np.array([0.5, -0.5]))
        b = node.predict(np.array([50.0]))
        assert b.variance == pytest.approx(2.0 + 0.1, abs=1e-6)

    def test_against_dense_inversion_oracle(self):
        X = np.array([[0.0], [0.7], [1.5]])
        y = np.array([0.2, -0.3, 0.9])
        phi, theta, noise = 1.3, 0.8, 0.05
        node = GPNode(RbfKernel(phi, theta), noise, X, y)
        xs = np.array([0.4])
        K = phi * np.exp(-theta * (X - X.T) ** 2)
        C = K + noise * np.eye(3)
        ks = phi * np.exp(-theta * (X[:, 0] - xs[0]) ** 2)
        Cinv = np.linalg.inv(C)
        mean = ks @ Cinv @ y
        var = phi + noise - ks @ Cinv @ ks
        b = node.predict(xs)
        assert b.mean == pytest.approx(mean, rel=1e-10)
        assert b.variance == pytest.approx(var, rel=1e-10)

    def test_variance_nonnegative_and_preclamp_tight(self, rng):
        X = rng.normal(0.0, 1.0, (20, 2))
        y = rng.normal(0.0, 1.0, 20)
        node = GPNode(RbfKernel(1.5, [0.8, 0.8]), 0.05, X, y)
        Xstar = rng.normal(0.0, 1.5, (200, 2))
        ks = node.kernel.cross(node.X, Xstar)
        from scipy.linalg import solve_triangular

        v = solve_triangular(node.chol, ks, lower=True, check_finite=False)
        pre_clamp = 1.5 + 0.05 - np.sum(v**2, axis=0)
        assert np.all(pre_clamp > -1e-8 * (1.5 + 0.05))
        _, var = node.predict_batch(Xstar)
        assert np.all(var >= 0)

    def test_normalization_roundtrip_fixed_hyperparameters(self, rng):
        # shifting targets = constant prior mean; scaling = kernel/noise
        # rescaling: the normalized node must reproduce the equivalent
        # direct model (fit to y - shift, add the shift back) exactly
        X = rng.normal(0.0, 1.0, (12, 1))
        y = rng.normal(3.0, 2.0, 12)
        shift, scale = float(np.mean(y)), float(np.std(y))
        phi, theta, noise = 1.2, 0.6, 0.1
        direct = GPNode(RbfKernel(phi, theta), noise, X, y - shift)
        normed = GPNode(
            RbfKernel(phi / scale**2, theta),
            noise / scale**2,
            X,
            (y - shift) / scale,
            y_shift=shift,
            y_scale=scale,
        )
        for x in rng.normal(0.0, 1.0, 8):
            a = direct.predict(np.array([x]))
            b = normed.predict(np.array([x]))
            assert b.mean == pytest.approx(a.mean + shift, rel=1e-8)
            assert b.variance == pytest.approx(a.variance, rel=1e-8)

    def test_dimension_mismatch(self):
        node = GPNode(RbfKernel(1.0, [1.0, 1.0]), 0.1, np.zeros((3, 2)), np.zeros(3))
        from stackedgp.kernels import KernelError

        with pytest.raises(KernelError):
            node.predict(np.array([0.0]))

    def test_belief_validation(self):
        with pytest.raises(ValueError):
            GaussianBelief(0.0, -1.0)
        with pytest.raises(ValueError):
            GaussianBelief(np.nan, 0.0)
        assert GaussianBelief(1.0, 4.0).std == 2.0
