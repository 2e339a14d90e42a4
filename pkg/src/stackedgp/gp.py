"""Single Gaussian-process node: training and certain-input prediction.

A node models ``y_i = g(x_i) + eps_i`` with ``g ~ GP(0, k)`` and i.i.d.
Gaussian noise. Hyperparameters (kernel log-params and the log noise
variance) are point-estimated by maximizing the log marginal likelihood
with a quasi-Newton optimizer and multiple restarts. The predictive
variance reported everywhere in this package is for the noisy output,
i.e. it includes the noise variance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .kernels import Kernel, KernelError, _as_2d
from .linalg import NotPositiveDefiniteError, chol_solve, chol_with_jitter

LOG_PARAM_BOUND = 20.0


class TrainingError(RuntimeError):
    """Hyperparameter estimation failed."""


@dataclass(frozen=True)
class GaussianBelief:
    """Independent Gaussian state of one scalar variable: mean and variance.

    ``variance == 0`` denotes a certain (observed) value. Beliefs are the
    currency passed between network layers.
    """

    mean: float
    variance: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.mean) or not np.isfinite(self.variance):
            raise ValueError(f"non-finite belief ({self.mean}, {self.variance})")
        if self.variance < 0:
            raise ValueError(f"belief variance must be >= 0, got {self.variance}")

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))


@dataclass(frozen=True)
class TrainingSet:
    """Inputs ``X`` (n x m) and targets ``y`` (n,), validated on construction."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = _as_2d(self.X)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} input rows but {y.shape[0]} targets")
        if X.shape[0] < 1:
            raise ValueError("training set is empty")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValueError("training data contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def input_dim(self) -> int:
        return self.X.shape[1]


@dataclass
class TrainOptions:
    restarts: int = 5
    max_iter: int = 200
    tol: float = 1e-9
    noise_init: float = 1.0
    normalize_y: bool = False
    seed: int | None = 0


class GPNode:
    """A trained GP: kernel, noise, training data, cached factorization.

    Immutable after construction (the ``diagnostics`` dict collects benign
    counters only); ``predict`` is pure and safe to call concurrently.
    Construct directly for fixed hyperparameters, or via :func:`train`.
    """

    def __init__(
        self,
        kernel: Kernel,
        noise_variance: float,
        X: np.ndarray,
        y: np.ndarray,
        y_shift: float = 0.0,
        y_scale: float = 1.0,
    ):
        if noise_variance < 0:
            raise ValueError(f"noise variance must be >= 0, got {noise_variance}")
        self.kernel = kernel
        self.noise_variance = float(noise_variance)
        self.X = _as_2d(X)
        # y is stored in fitting space; y_shift/y_scale undo the target
        # normalization on the way out.
        self.y = np.asarray(y, dtype=float).reshape(-1)
        self.y_shift = float(y_shift)
        self.y_scale = float(y_scale)
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y row counts differ")
        C = kernel.gram(self.X) + self.noise_variance * np.eye(self.X.shape[0])
        self.chol, self.jitter = chol_with_jitter(C)
        self.alpha = chol_solve(self.chol, self.y)
        self.diagnostics: dict = {"jitter": self.jitter, "variance_clamps": 0}

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def input_dim(self) -> int:
        return self.X.shape[1]

    @property
    def log_marginal_likelihood(self) -> float:
        n = self.n
        return float(
            -0.5 * self.y @ self.alpha
            - np.sum(np.log(np.diag(self.chol)))
            - 0.5 * n * np.log(2.0 * np.pi)
        )

    def precision_matrix(self) -> np.ndarray:
        """Dense (K + noise I)^-1; used by the moment formulas."""
        from .linalg import chol_inverse

        return chol_inverse(self.chol)

    def denormalize_mean(self, mean):
        return mean * self.y_scale + self.y_shift

    def denormalize_variance(self, variance):
        return variance * self.y_scale**2

    def predict_batch(self, Xstar: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Predictive means and variances at each row of ``Xstar``."""
        Xstar = _as_2d(Xstar)
        if Xstar.shape[1] != self.input_dim:
            raise KernelError(
                f"node expects {self.input_dim}-dimensional inputs, "
                f"got {Xstar.shape[1]}"
            )
        ks = self.kernel.cross(self.X, Xstar)  # n x p
        mean = ks.T @ self.alpha
        from scipy.linalg import solve_triangular

        v = solve_triangular(self.chol, ks, lower=True, check_finite=False)
        var = self.kernel.diag(Xstar) + self.noise_variance - np.sum(v**2, axis=0)
        neg = var < 0
        if np.any(neg):
            self.diagnostics["variance_clamps"] += int(np.count_nonzero(neg))
            var = np.maximum(var, 0.0)
        return self.denormalize_mean(mean), self.denormalize_variance(var)

    def predict(self, x_star: np.ndarray) -> GaussianBelief:
        """Predictive distribution of the noisy output at one test input."""
        x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
        mean, var = self.predict_batch(x_star[None, :])
        return GaussianBelief(float(mean[0]), float(var[0]))


def lml_and_grad(
    kernel: Kernel, noise_variance: float, X: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray]:
    """Log marginal likelihood and its gradient w.r.t. log-hyperparameters.

    The gradient is ordered (kernel log params..., log noise variance).
    Raises :class:`NotPositiveDefiniteError` when the covariance cannot be
    factorized even with maximum jitter.
    """
    X = _as_2d(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = X.shape[0]
    C = kernel.gram(X) + noise_variance * np.eye(n)
    L, _ = chol_with_jitter(C)
    alpha = chol_solve(L, y)
    value = float(
        -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * np.log(2.0 * np.pi)
    )
    from .linalg import chol_inverse

    A = np.outer(alpha, alpha) - chol_inverse(L)
    grads = [0.5 * np.sum(A * dK) for dK in kernel.gram_grads(X)]
    grads.append(0.5 * noise_variance * np.trace(A))
    return value, np.asarray(grads)


def log_marginal_likelihood(
    kernel: Kernel, noise_variance: float, X: np.ndarray, y: np.ndarray
) -> float:
    return lml_and_grad(kernel, noise_variance, X, y)[0]


def _median_sqdist(X: np.ndarray) -> np.ndarray:
    """Median squared pairwise distance per input dimension (>= tiny)."""
    X = _as_2d(X)
    msd = np.empty(X.shape[1])
    for j in range(X.shape[1]):
        d2 = (X[:, [j]] - X[:, [j]].T) ** 2
        vals = d2[np.triu_indices_from(d2, k=1)]
        med = np.median(vals) if vals.size else 1.0
        msd[j] = med if med > 0 else 1.0
    return msd


def _restart_draw(rng, kernel: Kernel, msd, y_var):
    """Log-uniform draw of (kernel log params, log noise), scaled to the data."""
    y_var = y_var if y_var > 0 else 1.0

    def draw_kernel(k: Kernel) -> np.ndarray:
        from .kernels import PolynomialKernel, RbfKernel, SumKernel

        if isinstance(k, RbfKernel):
            log_var = np.log(y_var) + rng.uniform(np.log(0.1), np.log(10.0))
            n_rates = k.rates.size
            base = (
                np.log(1.0 / msd)
                if n_rates == msd.size
                else np.array([np.log(1.0 / np.mean(msd))])
            )
            log_rates = base + rng.uniform(np.log(0.03), np.log(30.0), size=n_rates)
            return np.concatenate([[log_var], log_rates])
        if isinstance(k, PolynomialKernel):
            return np.empty(0)
        if isinstance(k, SumKernel):
            return np.concatenate([draw_kernel(p) for p in k.parts])
        raise KernelError(f"unsupported kernel type {type(k).__name__}")

    log_noise = np.log(y_var) + rng.uniform(np.log(1e-4), np.log(1.0))
    return np.concatenate([draw_kernel(kernel), [log_noise]])


def train(kernel_init: Kernel, data: TrainingSet, opts: TrainOptions | None = None) -> GPNode:
    """Fit a GP node by maximum marginal likelihood with restarts.

    Restart 0 starts from ``kernel_init`` and ``opts.noise_init``; further
    restarts draw log-uniform initializations scaled to the data. The
    returned node achieves a log likelihood at least as high as the value
    at the supplied initialization.
    """
    opts = opts or TrainOptions()
    if data.n < 2:
        raise TrainingError("training needs at least 2 points")

    y_shift, y_scale = 0.0, 1.0
    y_fit = data.y
    if opts.normalize_y:
        y_shift = float(np.mean(data.y))
        sd = float(np.std(data.y))
        y_scale = sd if sd > 0 else 1.0
        y_fit = (data.y - y_shift) / y_scale

    n_kernel_params = kernel_init.log_params().size
    msd = _median_sqdist(data.X)
    y_scale_sq = max(float(np.var(y_fit)), float(np.mean(y_fit**2)), 1e-12)
    # noise floor keeps the covariance far enough from singular that the
    # closed-form moment assembly stays meaningful downstream
    bounds = kernel_init.log_param_bounds(msd, y_scale_sq) + [
        (np.log(4e-7 * y_scale_sq), np.log(1e2 * y_scale_sq))
    ]
    bounds = [
        (max(lo, -LOG_PARAM_BOUND), min(hi, LOG_PARAM_BOUND)) for lo, hi in bounds
    ]
    lower = np.array([b[0] for b in bounds])
    upper = np.array([b[1] for b in bounds])

    def objective(log_params):
        log_params = np.clip(log_params, lower, upper)
        k = kernel_init.with_log_params(log_params[:n_kernel_params])
        noise = float(np.exp(log_params[-1]))
        try:
            value, grad = lml_and_grad(k, noise, data.X, y_fit)
        except NotPositiveDefiniteError:
            return 1e25, np.zeros_like(log_params)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            return 1e25, np.zeros_like(log_params)
        return -value, -grad

    init = np.concatenate([kernel_init.log_params(), [np.log(opts.noise_init)]])
    init = np.clip(init, lower, upper)
    rng = np.random.default_rng(opts.seed)
    starts = [init]
    for _ in range(max(opts.restarts - 1, 0)):
        draw = _restart_draw(rng, kernel_init, msd, float(np.var(y_fit)))
        starts.append(np.clip(draw, lower, upper))

    # the initialization itself is always a candidate, so the result can
    # never be worse than the starting hyperparameters
    candidates = []
    f0, _ = objective(init)
    if f0 < 1e25:
        candidates.append((f0, init, 0))
    for start in starts:
        res = minimize(
            objective,
            start,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": opts.max_iter, "ftol": opts.tol, "gtol": 1e-9},
        )
        if np.isfinite(res.fun) and res.fun < 1e24:
            candidates.append((float(res.fun), res.x, int(res.nit)))
    if not candidates:
        raise TrainingError("optimizer produced no finite objective value")

    best_fun, best_x, best_nit = min(candidates, key=lambda c: c[0])
    best_x = np.clip(best_x, lower, upper)
    kernel = kernel_init.with_log_params(best_x[:n_kernel_params])
    noise = float(np.exp(best_x[-1]))
    node = GPNode(kernel, noise, data.X, y_fit, y_shift=y_shift, y_scale=y_scale)
    node.diagnostics.update(
        {
            "log_likelihood": -best_fun,
            "iterations": best_nit,
            "restarts": len(starts),
            "normalized": opts.normalize_y,
        }
    )
    return node
