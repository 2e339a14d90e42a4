"""Regression metrics used across the experiment drivers."""

from __future__ import annotations

import numpy as np


def rmse(pred: np.ndarray, truth: np.ndarray) -> float:
    pred, truth = np.asarray(pred, float), np.asarray(truth, float)
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def mae(pred: np.ndarray, truth: np.ndarray) -> float:
    pred, truth = np.asarray(pred, float), np.asarray(truth, float)
    return float(np.mean(np.abs(pred - truth)))


def avg_ratio(pred: np.ndarray, truth: np.ndarray, std: np.ndarray) -> float:
    """Mean of |prediction - truth| / predicted std.

    Values below 2.0 mean the truth typically sits inside the 95%
    credible interval of the prediction.
    """
    pred, truth = np.asarray(pred, float), np.asarray(truth, float)
    std = np.maximum(np.asarray(std, float), 1e-300)
    return float(np.mean(np.abs(pred - truth) / std))
