"""Shared fixture builders and the Monte Carlo moment oracle."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from stackedgp.gp import GaussianBelief, GPNode
from stackedgp.kernels import PolynomialKernel, RbfKernel, SumKernel

DATA_DIR = Path(os.environ.get("STACKEDGP_DATA", Path(__file__).resolve().parent.parent / "data"))


def random_rbf_node(rng, n=8, m=2, noise=None) -> GPNode:
    """Small RBF node with benign random hyperparameters and data."""
    Z = rng.normal(0.0, 1.5, (n, m))
    y = rng.normal(0.0, 1.0, n)
    variance = rng.uniform(0.3, 3.0)
    rates = rng.uniform(0.2, 2.0, m)
    noise = rng.uniform(0.01, 0.3) if noise is None else noise
    return GPNode(RbfKernel(variance, rates), noise, Z, y)


def random_poly_node(rng, n=8, m=2, degree=2, noise=None) -> GPNode:
    Z = rng.normal(0.0, 1.0, (n, m))
    y = rng.normal(0.0, 1.0, n)
    noise = rng.uniform(0.05, 0.5) if noise is None else noise
    return GPNode(PolynomialKernel(degree), noise, Z, y)


def random_sum_node(rng, n=8, m=2, degree=1, noise=None) -> GPNode:
    Z = rng.normal(0.0, 1.0, (n, m))
    y = rng.normal(0.0, 1.0, n)
    kernel = SumKernel(
        [
            RbfKernel(rng.uniform(0.3, 2.0), rng.uniform(0.2, 2.0, m)),
            PolynomialKernel(degree),
        ]
    )
    noise = rng.uniform(0.05, 0.5) if noise is None else noise
    return GPNode(kernel, noise, Z, y)


def random_beliefs(rng, m, max_var=0.5) -> list[GaussianBelief]:
    return [
        GaussianBelief(rng.normal(0.0, 1.0), rng.uniform(0.0, max_var))
        for _ in range(m)
    ]


def mc_moment_oracle(node: GPNode, beliefs, n_samples: int, seed: int):
    """Monte Carlo estimate of the exact uncertain-input moments.

    Draws inputs from the belief product density and applies the law of
    total expectation/variance over the node's predictive distribution.
    Returns (mean, se_mean, variance, se_variance).
    """
    rng = np.random.default_rng(seed)
    mu = np.array([b.mean for b in beliefs])
    sd = np.array([np.sqrt(b.variance) for b in beliefs])
    Z = mu + sd * rng.standard_normal((n_samples, len(beliefs)))
    pred_mean, pred_var = node.predict_batch(Z)
    mean = float(np.mean(pred_mean))
    se_mean = float(np.std(pred_mean, ddof=1) / np.sqrt(n_samples))
    variance = float(np.mean(pred_var) + np.var(pred_mean, ddof=1))
    w = pred_var + (pred_mean - mean) ** 2
    se_variance = float(np.std(w, ddof=1) / np.sqrt(n_samples))
    return mean, se_mean, variance, se_variance


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
