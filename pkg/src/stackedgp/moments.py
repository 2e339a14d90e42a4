"""Closed-form GP predictive moments under Gaussian input uncertainty.

Given a trained node and one independent Gaussian belief per input
dimension, these routines integrate the kernel against the input density
and return the exact predictive mean and variance of the node output.
Both follow the law of total expectation/variance:

    mean = v' C^-1 y,                 v_i  = E[k(z, Z_i)]
    var  = noise + D2 + a' S a - sum(C^-1 o H)

with ``a = C^-1 y``, ``D2 = E[k(z, z)]``, ``H_ij = E[k(z, Z_i) k(z, Z_j)]``,
``S = H - v v'`` the covariance of the kernel vector, and ``o`` the
elementwise product. The expectations have closed forms for the squared
exponential kernel (Gaussian convolution identities) and for the
polynomial kernel (multinomial expansion over Gaussian non-central
moments); sums of such kernels expand bilinearly with cross terms
reducible to tilted non-central moments.

With all input variances zero every formula collapses to the standard
GP prediction; this reduction is exercised heavily by the test suite.

All operations are pure functions of immutable nodes and inputs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gp import GaussianBelief, GPNode
from .kernels import (
    Kernel,
    KernelError,
    PolynomialKernel,
    RbfKernel,
    SumKernel,
    elementary_parts,
)

MAX_MOMENT_ORDER = 20
MAX_MULTINOMIAL_TERMS = 10**6
# relative magnitude beyond which a negative pre-clamp variance is reported
NEGATIVE_VARIANCE_TOL = 1e-6


class MomentCapError(ValueError):
    """Requested expansion exceeds the configured term/order caps."""


class NegativeVarianceWarning(RuntimeWarning):
    """Assembled variance went negative beyond round-off before clamping."""


@dataclass(frozen=True)
class MomentDiagnostics:
    """Fit-space breakdown of the assembled variance."""

    pre_clamp_variance: float
    delta2: float
    zeta: float
    hadamard: float
    w: float | None = None
    u: float | None = None


@dataclass(frozen=True)
class MomentResult:
    mean: float
    variance: float
    diagnostics: MomentDiagnostics


def hadamard_sum(node: GPNode, H: np.ndarray) -> float:
    """sum(C^-1 o H), i.e. tr(C^-1 H), for a symmetric PSD matrix H.

    Evaluated through Cholesky factors as a Frobenius norm (plus an exact
    correction for any jitter added to factorize H), which keeps the
    error relative; the elementwise sum oscillates in sign and loses
    absolute precision when the noise variance is small.
    """
    from scipy.linalg import solve_triangular

    from .linalg import chol_with_jitter

    G, jitter = chol_with_jitter(H)
    V = solve_triangular(node.chol, G, lower=True, check_finite=False)
    value = float(np.sum(V**2))
    if jitter > 0.0:
        Linv = solve_triangular(
            node.chol, np.eye(node.n), lower=True, check_finite=False
        )
        value -= jitter * float(np.sum(Linv**2))
    return value


def as_mean_var(beliefs: Sequence[GaussianBelief]) -> tuple[np.ndarray, np.ndarray]:
    """Split a belief sequence into mean and variance vectors."""
    mu = np.array([b.mean for b in beliefs], dtype=float)
    var = np.array([b.variance for b in beliefs], dtype=float)
    if np.any(var < 0):
        raise ValueError("belief variances must be >= 0")
    return mu, var


def _check_dims(node: GPNode, mu: np.ndarray):
    if mu.shape[0] != node.input_dim:
        raise KernelError(
            f"node expects {node.input_dim} input beliefs, got {mu.shape[0]}"
        )


# ---------------------------------------------------------------------------
# Gaussian non-central moments


def double_factorial(k: int) -> int:
    """k!! for odd k, with (-1)!! = 1."""
    if k < -1:
        raise ValueError(f"double factorial undefined for {k}")
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def noncentral_moment(mu, var, p: int):
    """E[Z^p] for Z ~ N(mu, var), elementwise over array arguments.

    Uses the binomial expansion over central moments,
    ``sum_u C(p, 2u) (2u-1)!! var^u mu^(p-2u)``.
    """
    if p < 0:
        raise ValueError(f"moment order must be >= 0, got {p}")
    if p > MAX_MOMENT_ORDER:
        raise MomentCapError(f"moment order {p} exceeds cap {MAX_MOMENT_ORDER}")
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    out = np.zeros(np.broadcast(mu, var).shape)
    for u in range(p // 2 + 1):
        coef = math.comb(p, 2 * u) * double_factorial(2 * u - 1)
        out = out + coef * var**u * mu ** (p - 2 * u)
    return out if out.ndim else float(out)


def noncentral_moment_table(mu, var, p_max: int) -> np.ndarray:
    """Stack of moments 0..p_max along a new leading axis."""
    rows = [noncentral_moment(mu, var, p) for p in range(p_max + 1)]
    return np.stack([np.asarray(r, dtype=float) for r in rows], axis=0)


# ---------------------------------------------------------------------------
# Multinomial bookkeeping


def multinomial_indices(d: int, m: int) -> list[tuple[tuple[int, ...], int]]:
    """All exponent tuples (p_1..p_m) with sum d, with their coefficients.

    Tuples come in descending lexicographic order, e.g. for d=2, m=2:
    ``[((2, 0), 1), ((1, 1), 2), ((0, 2), 1)]``. The count is
    C(d+m-1, m-1) and is capped at MAX_MULTINOMIAL_TERMS.
    """
    if d < 0 or m < 1:
        raise ValueError(f"need d >= 0 and m >= 1, got d={d}, m={m}")
    count = math.comb(d + m - 1, m - 1)
    if count > MAX_MULTINOMIAL_TERMS:
        raise MomentCapError(
            f"multinomial expansion has {count} terms, cap is {MAX_MULTINOMIAL_TERMS}"
        )
    d_fact = math.factorial(d)
    out = []

    def rec(prefix: tuple[int, ...], remaining: int, slots: int):
        if slots == 1:
            tup = prefix + (remaining,)
            denom = 1
            for p in tup:
                denom *= math.factorial(p)
            out.append((tup, d_fact // denom))
            return
        for p in range(remaining, -1, -1):
            rec(prefix + (p,), remaining - p, slots - 1)

    rec((), d, m)
    return out


def _tuple_arrays(d: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """(exponent matrix K x m, coefficient vector K) for the expansion."""
    idx = multinomial_indices(d, m)
    P = np.array([t for t, _ in idx], dtype=int).reshape(len(idx), m)
    c = np.array([c for _, c in idx], dtype=float)
    return P, c


def _power_products(Z: np.ndarray, P: np.ndarray) -> np.ndarray:
    """M[i, k] = prod_t Z[i, t] ** P[k, t]."""
    n, m = Z.shape
    M = np.ones((n, P.shape[0]))
    for t in range(m):
        M *= Z[:, [t]] ** P[:, t][None, :]
    return M


# ---------------------------------------------------------------------------
# Squared-exponential kernel


def _rbf_mean_terms(kernel: RbfKernel, Z: np.ndarray, mu, var):
    """(w, q): uncertainty discount scalar and discounted similarity vector.

    w shrinks with input variance (log-space product of per-dimension
    ratios); q measures similarity between each training point and the
    input mean with variance-widened lengthscales.
    """
    rates = kernel._rates_for(Z.shape[1])
    denom = 1.0 + 2.0 * rates * var
    w = float(np.exp(-0.5 * np.sum(np.log(denom))))
    expo = -np.sum(rates * (Z - mu) ** 2 / denom, axis=1)
    q = kernel.variance * np.exp(expo)
    return w, q


def _rbf_variance_terms(kernel: RbfKernel, Z: np.ndarray, mu, var):
    """(u, P, sigma_k): pairwise kernel-product expectations and their
    covariance matrix u P - w^2 T.

    The difference is evaluated as -u P * expm1(log(w^2 T) - log(u P));
    the log ratio is accumulated from terms that each carry a factor of
    the input variance, so it is exactly zero (and so is sigma_k) for
    certain inputs instead of a catastrophic cancellation of two large
    exponentials.
    """
    rates = kernel._rates_for(Z.shape[1])
    denom1 = 1.0 + 2.0 * rates * var
    denom2 = 1.0 + 4.0 * rates * var
    log_u = -0.5 * np.sum(np.log(denom2))
    u = float(np.exp(log_u))
    n = Z.shape[0]
    p_expo = np.zeros((n, n))
    # log(w^2 / u) plus the T-vs-P exponent difference, term by term
    dlog = np.full((n, n), 0.5 * np.sum(np.log(denom2)) - np.sum(np.log(denom1)))
    for j in range(Z.shape[1]):
        zj = Z[:, j]
        diff2 = (zj[:, None] - zj[None, :]) ** 2
        mid2 = (0.5 * (zj[:, None] + zj[None, :]) - mu[j]) ** 2
        p_expo -= 0.5 * rates[j] * diff2 + 2.0 * rates[j] * mid2 / denom2[j]
        dlog += rates[j] ** 2 * var[j] * (
            diff2 / denom1[j] - 4.0 * mid2 / (denom1[j] * denom2[j])
        )
    P = kernel.variance**2 * np.exp(p_expo)
    uP = u * P
    sigma_k = -uP * np.expm1(dlog)
    return u, P, sigma_k


def rbf_uncertain_mean(node: GPNode, beliefs: Sequence[GaussianBelief]) -> float:
    """Predictive mean of an RBF node under Gaussian input beliefs."""
    kernel = node.kernel
    if not isinstance(kernel, RbfKernel):
        raise KernelError("rbf_uncertain_mean needs an RBF kernel node")
    mu, var = as_mean_var(beliefs)
    _check_dims(node, mu)
    w, q = _rbf_mean_terms(kernel, node.X, mu, var)
    return float(node.denormalize_mean(w * (q @ node.alpha)))


def _assemble(node: GPNode, mean_fit, delta2, zeta, hadamard, w=None, u=None):
    """Combine the variance pieces, denormalize, clamp, and warn.

    Both E[k(z,z) - k' C^-1 k] = delta2 - hadamard + (zeta's H part) and
    the kernel-vector variance are nonnegative, so the noise-free bracket
    is clamped at zero and the result never falls below the noise
    variance; negativity beyond round-off scale is reported.
    """
    bracket = delta2 + zeta - hadamard
    pre_clamp = float(node.denormalize_variance(node.noise_variance + bracket))
    mean = float(node.denormalize_mean(mean_fit))
    scale_ref = node.denormalize_variance(node.noise_variance + delta2)
    if pre_clamp < -NEGATIVE_VARIANCE_TOL * scale_ref:
        warnings.warn(
            f"assembled variance {pre_clamp:.3e} is negative beyond round-off "
            f"(reference scale {scale_ref:.3e}); clamping",
            NegativeVarianceWarning,
            stacklevel=3,
        )
    variance = float(
        node.denormalize_variance(node.noise_variance + max(bracket, 0.0))
    )
    diag = MomentDiagnostics(
        pre_clamp_variance=pre_clamp,
        delta2=float(delta2),
        zeta=float(zeta),
        hadamard=float(hadamard),
        w=w,
        u=u,
    )
    return MomentResult(mean=mean, variance=variance, diagnostics=diag)


def rbf_uncertain_variance(
    node: GPNode, beliefs: Sequence[GaussianBelief]
) -> MomentResult:
    """Predictive mean and variance of an RBF node under Gaussian beliefs.

    The kernel-vector covariance is formed directly as ``u P - w^2 T``
    (T factorizes as the outer product of the discounted similarities);
    the generic cross-expectation assembly is kept as an independent
    cross-check, see :func:`generic_kernel_statistics`.
    """
    kernel = node.kernel
    if not isinstance(kernel, RbfKernel):
        raise KernelError("rbf_uncertain_variance needs an RBF kernel node")
    mu, var = as_mean_var(beliefs)
    _check_dims(node, mu)
    Z, alpha = node.X, node.alpha
    w, q = _rbf_mean_terms(kernel, Z, mu, var)
    u, P, sigma_k = _rbf_variance_terms(kernel, Z, mu, var)
    v = w * q
    H = u * P
    zeta = float(alpha @ sigma_k @ alpha)
    hadamard = hadamard_sum(node, H)
    mean_fit = float(v @ alpha)
    return _assemble(node, mean_fit, kernel.variance, zeta, hadamard, w=w, u=u)


# ---------------------------------------------------------------------------
# Polynomial kernel


def _poly_tables(mu, var, p_max: int) -> np.ndarray:
    """A[t, p] = E[z_t^p] per input dimension, p = 0..p_max."""
    return noncentral_moment_table(mu, var, p_max).T  # (m, p_max+1)


def _poly_mean_vector(degree: int, Z: np.ndarray, A: np.ndarray) -> np.ndarray:
    P, c = _tuple_arrays(degree, Z.shape[1])
    M = _power_products(Z, P)
    Aprod = np.prod(A[np.arange(Z.shape[1])[None, :], P], axis=1)
    return M @ (c * Aprod)


def poly_uncertain_mean(node: GPNode, beliefs: Sequence[GaussianBelief]) -> float:
    """Predictive mean of a polynomial-kernel node under Gaussian beliefs."""
    kernel = node.kernel
    if not isinstance(kernel, PolynomialKernel):
        raise KernelError("poly_uncertain_mean needs a polynomial kernel node")
    mu, var = as_mean_var(beliefs)
    _check_dims(node, mu)
    A = _poly_tables(mu, var, kernel.degree)
    v = _poly_mean_vector(kernel.degree, node.X, A)
    return float(node.denormalize_mean(v @ node.alpha))


def _poly_h_matrix(
    da: int, db: int, Za: np.ndarray, Zb: np.ndarray, A: np.ndarray
) -> np.ndarray:
    """H[i, j] = E[(z . Za_i)^da (z . Zb_j)^db] via the double expansion."""
    m = Za.shape[1]
    Pa, ca = _tuple_arrays(da, m)
    Pb, cb = _tuple_arrays(db, m)
    if Pa.shape[0] * Pb.shape[0] > MAX_MULTINOMIAL_TERMS:
        raise MomentCapError(
            f"H expansion needs {Pa.shape[0] * Pb.shape[0]} tuple pairs, "
            f"cap is {MAX_MULTINOMIAL_TERMS}"
        )
    Ma = _power_products(Za, Pa)
    Mb = _power_products(Zb, Pb)
    # G[k, l] = prod_t E[z_t^(pa_k_t + pb_l_t)]
    G = np.ones((Pa.shape[0], Pb.shape[0]))
    for t in range(m):
        G *= A[t, Pa[:, t][:, None] + Pb[:, t][None, :]]
    return Ma @ (np.outer(ca, cb) * G) @ Mb.T


def _poly_delta2(degree: int, A: np.ndarray, m: int) -> float:
    P, c = _tuple_arrays(degree, m)
    Aprod = np.prod(A[np.arange(m)[None, :], 2 * P], axis=1)
    return float(c @ Aprod)


def poly_uncertain_variance(
    node: GPNode, beliefs: Sequence[GaussianBelief]
) -> MomentResult:
    """Predictive mean and variance of a polynomial-kernel node."""
    kernel = node.kernel
    if not isinstance(kernel, PolynomialKernel):
        raise KernelError("poly_uncertain_variance needs a polynomial kernel node")
    mu, var = as_mean_var(beliefs)
    _check_dims(node, mu)
    d = kernel.degree
    Z, alpha = node.X, node.alpha
    A = _poly_tables(mu, var, 2 * d)
    v = _poly_mean_vector(d, Z, A)
    H = _poly_h_matrix(d, d, Z, Z, A)
    delta2 = _poly_delta2(d, A, Z.shape[1])
    sigma_k = H - np.outer(v, v)
    zeta = float(alpha @ sigma_k @ alpha)
    hadamard = hadamard_sum(node, H)
    return _assemble(node, float(v @ alpha), delta2, zeta, hadamard)


# ---------------------------------------------------------------------------
# Generic per-part machinery (sum kernels; RBF dual-path cross-check)


def _part_mean_vector(part: Kernel, Z, mu, var) -> np.ndarray:
    if isinstance(part, RbfKernel):
        w, q = _rbf_mean_terms(part, Z, mu, var)
        return w * q
    if isinstance(part, PolynomialKernel):
        A = _poly_tables(mu, var, part.degree)
        return _poly_mean_vector(part.degree, Z, A)
    raise KernelError(f"unsupported kernel part {type(part).__name__}")


def _part_self_expectation(part: Kernel, mu, var) -> float:
    if isinstance(part, RbfKernel):
        return part.variance
    if isinstance(part, PolynomialKernel):
        A = _poly_tables(mu, var, 2 * part.degree)
        return _poly_delta2(part.degree, A, mu.shape[0])
    raise KernelError(f"unsupported kernel part {type(part).__name__}")


def _cross_rbf_rbf(pa: RbfKernel, pb: RbfKernel, Z, mu, var) -> np.ndarray:
    """E[k_a(z, Z_i) k_b(z, Z_j)] by completing the square per dimension."""
    m = Z.shape[1]
    ra = pa._rates_for(m)
    rb = pb._rates_for(m)
    lam = ra + rb
    denom = 1.0 + 2.0 * lam * var
    log_scale = -0.5 * np.sum(np.log(denom))
    expo = np.zeros((Z.shape[0], Z.shape[0]))
    for j in range(m):
        zi = Z[:, j][:, None]
        zj = Z[:, j][None, :]
        center = (ra[j] * zi + rb[j] * zj) / lam[j]
        residual = ra[j] * rb[j] / lam[j] * (zi - zj) ** 2
        expo -= residual
        expo -= lam[j] * (center - mu[j]) ** 2 / denom[j]
    return pa.variance * pb.variance * np.exp(log_scale + expo)


def _cross_rbf_poly(pa: RbfKernel, pb: PolynomialKernel, Z, mu, var) -> np.ndarray:
    """E[k_rbf(z, Z_i) k_poly(z, Z_j)]: the Gaussian factor tilts the input
    density, so each polynomial term reduces to non-central moments of the
    tilted per-dimension Gaussians."""
    n, m = Z.shape
    rates = pa._rates_for(m)
    denom = 1.0 + 2.0 * rates * var  # (m,)
    # per-(i, t) tilted mean; per-t tilted variance and overall scale per i
    m_tilde = (2.0 * rates * var * Z + mu) / denom  # (n, m)
    s_tilde = var / denom  # (m,)
    log_s = -0.5 * np.sum(np.log(denom))
    expo = -np.sum(rates * (Z - mu) ** 2 / denom, axis=1)  # (n,)
    scale = pa.variance * np.exp(log_s + expo)  # (n,)

    Pb, cb = _tuple_arrays(pb.degree, m)
    tilde = np.stack(
        [noncentral_moment(m_tilde, s_tilde, p) for p in range(pb.degree + 1)], axis=0
    )  # (d+1, n, m)
    Amat = np.ones((n, Pb.shape[0]))
    for t in range(m):
        Amat *= tilde[Pb[:, t], :, t].T
    Bmat = _power_products(Z, Pb)
    return (scale[:, None] * Amat) @ (cb[:, None] * Bmat.T)


def _part_cross_matrix(pa: Kernel, pb: Kernel, Z, mu, var) -> np.ndarray:
    if isinstance(pa, RbfKernel) and isinstance(pb, RbfKernel):
        return _cross_rbf_rbf(pa, pb, Z, mu, var)
    if isinstance(pa, PolynomialKernel) and isinstance(pb, PolynomialKernel):
        A = _poly_tables(mu, var, pa.degree + pb.degree)
        return _poly_h_matrix(pa.degree, pb.degree, Z, Z, A)
    if isinstance(pa, RbfKernel) and isinstance(pb, PolynomialKernel):
        return _cross_rbf_poly(pa, pb, Z, mu, var)
    if isinstance(pa, PolynomialKernel) and isinstance(pb, RbfKernel):
        return _cross_rbf_poly(pb, pa, Z, mu, var).T
    raise KernelError(
        f"unsupported kernel pair {type(pa).__name__}, {type(pb).__name__}"
    )


def generic_kernel_statistics(
    kernel: Kernel, Z: np.ndarray, mu: np.ndarray, var: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """(v, H, D2) assembled from per-part expectations and cross terms.

    Works for any supported kernel, including single RBF/polynomial ones;
    for those this is the independent path against the dedicated formulas.
    """
    parts = elementary_parts(kernel)
    n = Z.shape[0]
    v = np.zeros(n)
    H = np.zeros((n, n))
    delta2 = 0.0
    for pa in parts:
        v += _part_mean_vector(pa, Z, mu, var)
        delta2 += _part_self_expectation(pa, mu, var)
        for pb in parts:
            H += _part_cross_matrix(pa, pb, Z, mu, var)
    return v, H, delta2


def sum_kernel_uncertain_moments(
    node: GPNode, beliefs: Sequence[GaussianBelief]
) -> MomentResult:
    """Moments for a sum-of-kernels node; expectations distribute over the
    parts and H picks up every pairwise cross term."""
    if not isinstance(node.kernel, SumKernel):
        raise KernelError("sum_kernel_uncertain_moments needs a SumKernel node")
    mu, var = as_mean_var(beliefs)
    _check_dims(node, mu)
    v, H, delta2 = generic_kernel_statistics(node.kernel, node.X, mu, var)
    alpha = node.alpha
    sigma_k = H - np.outer(v, v)
    zeta = float(alpha @ sigma_k @ alpha)
    hadamard = hadamard_sum(node, H)
    return _assemble(node, float(v @ alpha), delta2, zeta, hadamard)


def uncertain_moments(node: GPNode, beliefs: Sequence[GaussianBelief]) -> MomentResult:
    """Dispatch to the moment formulas matching the node's kernel."""
    if isinstance(node.kernel, RbfKernel):
        return rbf_uncertain_variance(node, beliefs)
    if isinstance(node.kernel, PolynomialKernel):
        return poly_uncertain_variance(node, beliefs)
    if isinstance(node.kernel, SumKernel):
        return sum_kernel_uncertain_moments(node, beliefs)
    raise KernelError(f"unsupported kernel type {type(node.kernel).__name__}")
