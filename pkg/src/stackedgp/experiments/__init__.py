"""Truth models, dataset generators, and experiment drivers."""

from .metrics import avg_ratio, mae, rmse
from .runner import run_experiment
from .transforms import lognormal_backtransform

__all__ = ["rmse", "mae", "avg_ratio", "lognormal_backtransform", "run_experiment"]
