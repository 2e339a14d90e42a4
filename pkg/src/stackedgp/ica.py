"""Independent component analysis of node training inputs.

Network nodes assume their inputs are independent; when a node is fed by
several upstream nodes, its training input block is unmixed with FastICA
(fixed-point negentropy maximization, log-cosh contrast, symmetric
decorrelation) and the linear transform is stored so that predicted
beliefs can be mapped through the same coordinates at propagation time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.decomposition import FastICA
from sklearn.exceptions import ConvergenceWarning


class IcaError(ValueError):
    """ICA could not produce an invertible transform."""


@dataclass(frozen=True)
class IcaTransform:
    """Affine unmixing ``s = W (x - mean)`` with stored inverse ``A``."""

    unmixing: np.ndarray  # W, k x k
    mixing: np.ndarray  # A = W^-1, k x k
    mean: np.ndarray  # column means, (k,)

    @property
    def n_components(self) -> int:
        return self.unmixing.shape[0]

    def transform_points(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return (X - self.mean) @ self.unmixing.T

    def inverse_points(self, S: np.ndarray) -> np.ndarray:
        S = np.asarray(S, dtype=float)
        return S @ self.mixing.T + self.mean

    def transform_beliefs(
        self, means: np.ndarray, variances: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Map independent beliefs through the unmixing.

        Means transform linearly; variances take the diagonal of
        ``W diag(var) W^T`` (off-diagonal covariance is dropped, consistent
        with the network-wide independence contract).
        """
        means = np.asarray(means, dtype=float)
        variances = np.asarray(variances, dtype=float)
        return self.unmixing @ (means - self.mean), (self.unmixing**2) @ variances


def ica_fit(X: np.ndarray, seed: int = 0, max_iter: int = 2000) -> IcaTransform:
    """Fit a full-rank unmixing of the columns of ``X``.

    Requires more rows than columns and non-degenerate columns; raises
    :class:`IcaError` on rank deficiency or a non-invertible result.
    Deterministic given ``seed``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise IcaError(f"expected a 2-D matrix, got shape {X.shape}")
    n, k = X.shape
    if n <= k:
        raise IcaError(f"need more rows than columns, got {n} x {k}")
    centered = X - X.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[0] == 0 or sv[-1] / sv[0] < 1e-10:
        raise IcaError("input columns are rank deficient")

    ica = FastICA(
        n_components=k,
        algorithm="parallel",
        fun="logcosh",
        whiten="unit-variance",
        max_iter=max_iter,
        tol=1e-6,
        random_state=seed,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        ica.fit(X)
    W = np.asarray(ica.components_, dtype=float)
    A = np.asarray(ica.mixing_, dtype=float)
    mean = np.asarray(ica.mean_, dtype=float)
    if not np.allclose(W @ A, np.eye(k), atol=1e-6):
        raise IcaError("unmixing/mixing pair is not mutually inverse")
    return IcaTransform(unmixing=W, mixing=A, mean=mean)
