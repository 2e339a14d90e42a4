"""Covariance functions and Gram-matrix assembly.

Three kernel families are supported: an anisotropic squared-exponential
(one inverse-squared-lengthscale rate per input dimension), a homogeneous
polynomial kernel ``(a . b)^d`` without bias, and sums of the two. These
are the families for which closed-form moments under Gaussian input
uncertainty exist (see :mod:`stackedgp.moments`).

Kernels are immutable after construction; evaluation is pure.
"""

from __future__ import annotations

import numpy as np


class KernelError(ValueError):
    """Invalid kernel construction or evaluation request."""


def _as_2d(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise KernelError(f"expected a 2-D input array, got shape {X.shape}")
    return X


class Kernel:
    """Base class; concrete kernels implement :meth:`cross`."""

    def cross(self, X: np.ndarray, X2: np.ndarray) -> np.ndarray:
        """Pairwise evaluations between rows of ``X`` (n x m) and ``X2`` (p x m)."""
        raise NotImplementedError

    def diag(self, X: np.ndarray) -> np.ndarray:
        """k(x_i, x_i) for each row, without forming the full matrix."""
        raise NotImplementedError

    def eval(self, a: np.ndarray, b: np.ndarray) -> float:
        """Single evaluation k(a, b)."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if a.shape != b.shape:
            raise KernelError(f"dimension mismatch: {a.shape} vs {b.shape}")
        return float(self.cross(a[None, :], b[None, :])[0, 0])

    def gram(self, X: np.ndarray) -> np.ndarray:
        """Symmetric matrix of pairwise evaluations over rows of ``X``."""
        X = _as_2d(X)
        K = self.cross(X, X)
        return 0.5 * (K + K.T)

    # Hyperparameters live in log space for the optimizer; the polynomial
    # kernel has none (its degree is structural, not optimized).

    def log_params(self) -> np.ndarray:
        return np.empty(0)

    def with_log_params(self, values: np.ndarray) -> "Kernel":
        if len(values) != 0:
            raise KernelError("kernel takes no hyperparameters")
        return self

    def param_names(self) -> list[str]:
        return []

    def log_param_bounds(self, msd: np.ndarray, y_scale: float) -> list[tuple[float, float]]:
        """Data-scaled optimizer box per log param.

        ``msd`` is the median squared distance per input dimension and
        ``y_scale`` the target second-moment scale. Bounding the search
        keeps hyperparameters out of degenerate ridges (huge variance
        with vanishing rates) where the predictive and moment formulas
        lose all precision to cancellation.
        """
        return []

    def gram_grads(self, X: np.ndarray) -> list[np.ndarray]:
        """dK/d(log param) on the training Gram matrix, one per log param."""
        return []


class RbfKernel(Kernel):
    """Anisotropic squared-exponential kernel.

    ``k(a, b) = variance * exp(-sum_j rates[j] * (a_j - b_j)^2)``.

    ``rates`` may be a scalar (isotropic) or one positive rate per input
    dimension. ``k(x, x) = variance`` for every x.
    """

    def __init__(self, variance: float = 1.0, rates: float | np.ndarray = 1.0):
        variance = float(variance)
        rates = np.atleast_1d(np.asarray(rates, dtype=float))
        if variance <= 0:
            raise KernelError(f"variance must be positive, got {variance}")
        if np.any(rates <= 0):
            raise KernelError(f"rates must be positive, got {rates}")
        self.variance = variance
        self.rates = rates

    def __repr__(self) -> str:
        return f"RbfKernel(variance={self.variance!r}, rates={self.rates.tolist()!r})"

    def _rates_for(self, m: int) -> np.ndarray:
        if self.rates.size == 1:
            return np.full(m, self.rates[0])
        if self.rates.size != m:
            raise KernelError(
                f"kernel has {self.rates.size} rates but input has {m} dimensions"
            )
        return self.rates

    def cross(self, X: np.ndarray, X2: np.ndarray) -> np.ndarray:
        X, X2 = _as_2d(X), _as_2d(X2)
        if X.shape[1] != X2.shape[1]:
            raise KernelError(f"dimension mismatch: {X.shape[1]} vs {X2.shape[1]}")
        r = self._rates_for(X.shape[1])
        s = np.sqrt(r)
        Xs, X2s = X * s, X2 * s
        d2 = (
            np.sum(Xs**2, axis=1)[:, None]
            + np.sum(X2s**2, axis=1)[None, :]
            - 2.0 * Xs @ X2s.T
        )
        np.maximum(d2, 0.0, out=d2)
        return self.variance * np.exp(-d2)

    def diag(self, X: np.ndarray) -> np.ndarray:
        X = _as_2d(X)
        return np.full(X.shape[0], self.variance)

    def log_params(self) -> np.ndarray:
        return np.log(np.concatenate([[self.variance], self.rates]))

    def with_log_params(self, values: np.ndarray) -> "RbfKernel":
        values = np.asarray(values, dtype=float)
        if values.size != 1 + self.rates.size:
            raise KernelError(f"expected {1 + self.rates.size} log params")
        return RbfKernel(np.exp(values[0]), np.exp(values[1:]))

    def param_names(self) -> list[str]:
        return ["log_variance"] + [f"log_rate[{j}]" for j in range(self.rates.size)]

    def log_param_bounds(self, msd: np.ndarray, y_scale: float) -> list[tuple[float, float]]:
        # variance within [1e-6, 10] of the target scale; rates within
        # a factor 1e4 of the inverse median squared distance
        bounds = [(np.log(y_scale) - np.log(1e6), np.log(y_scale) + np.log(10.0))]
        if self.rates.size == 1:
            base = np.log(1.0 / np.mean(msd))
            bounds.append((base - np.log(1e4), base + np.log(1e4)))
        else:
            for j in range(self.rates.size):
                base = np.log(1.0 / msd[j])
                bounds.append((base - np.log(1e4), base + np.log(1e4)))
        return bounds

    def gram_grads(self, X: np.ndarray) -> list[np.ndarray]:
        X = _as_2d(X)
        r = self._rates_for(X.shape[1])
        K = self.cross(X, X)
        grads = [K.copy()]  # d/d log variance
        for j in range(X.shape[1]):
            dj2 = (X[:, [j]] - X[:, [j]].T) ** 2
            grads.append(-r[j] * dj2 * K)  # d/d log rate_j
        if self.rates.size == 1 and X.shape[1] > 1:
            # isotropic: the per-dimension contributions share one parameter
            grads = [grads[0], sum(grads[1:])]
        return grads


class PolynomialKernel(Kernel):
    """Homogeneous polynomial kernel ``k(a, b) = (a . b)^d``, no bias term."""

    def __init__(self, degree: int):
        degree = int(degree)
        if degree < 1:
            raise KernelError(f"degree must be a positive integer, got {degree}")
        self.degree = degree

    def __repr__(self) -> str:
        return f"PolynomialKernel(degree={self.degree})"

    def cross(self, X: np.ndarray, X2: np.ndarray) -> np.ndarray:
        X, X2 = _as_2d(X), _as_2d(X2)
        if X.shape[1] != X2.shape[1]:
            raise KernelError(f"dimension mismatch: {X.shape[1]} vs {X2.shape[1]}")
        return (X @ X2.T) ** self.degree

    def diag(self, X: np.ndarray) -> np.ndarray:
        X = _as_2d(X)
        return np.sum(X**2, axis=1) ** self.degree


class SumKernel(Kernel):
    """Sum of RBF and/or polynomial parts; evaluation adds part evaluations."""

    def __init__(self, parts: list[Kernel]):
        parts = list(parts)
        if not parts:
            raise KernelError("SumKernel needs at least one part")
        for p in parts:
            if isinstance(p, SumKernel):
                raise KernelError("SumKernel parts must not be nested sums")
            if not isinstance(p, (RbfKernel, PolynomialKernel)):
                raise KernelError(f"unsupported part type {type(p).__name__}")
        self.parts = parts

    def __repr__(self) -> str:
        return f"SumKernel({self.parts!r})"

    def cross(self, X: np.ndarray, X2: np.ndarray) -> np.ndarray:
        out = self.parts[0].cross(X, X2)
        for p in self.parts[1:]:
            out = out + p.cross(X, X2)
        return out

    def diag(self, X: np.ndarray) -> np.ndarray:
        out = self.parts[0].diag(X)
        for p in self.parts[1:]:
            out = out + p.diag(X)
        return out

    def log_params(self) -> np.ndarray:
        chunks = [p.log_params() for p in self.parts]
        return np.concatenate(chunks) if chunks else np.empty(0)

    def with_log_params(self, values: np.ndarray) -> "SumKernel":
        values = np.asarray(values, dtype=float)
        new_parts, at = [], 0
        for p in self.parts:
            k = p.log_params().size
            new_parts.append(p.with_log_params(values[at : at + k]))
            at += k
        if at != values.size:
            raise KernelError(f"expected {at} log params, got {values.size}")
        return SumKernel(new_parts)

    def param_names(self) -> list[str]:
        names = []
        for i, p in enumerate(self.parts):
            names.extend(f"part{i}.{n}" for n in p.param_names())
        return names

    def log_param_bounds(self, msd: np.ndarray, y_scale: float) -> list[tuple[float, float]]:
        bounds = []
        for p in self.parts:
            bounds.extend(p.log_param_bounds(msd, y_scale))
        return bounds

    def gram_grads(self, X: np.ndarray) -> list[np.ndarray]:
        grads = []
        for p in self.parts:
            grads.extend(p.gram_grads(X))
        return grads


def elementary_parts(kernel: Kernel) -> list[Kernel]:
    """Flatten a kernel into its RBF/polynomial parts."""
    if isinstance(kernel, SumKernel):
        return list(kernel.parts)
    return [kernel]
