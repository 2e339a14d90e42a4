"""Target/input transforms shared by the real-data experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def lognormal_backtransform(mu: float, var: float) -> tuple[float, float]:
    """Mean and variance of exp(Z) for Z ~ N(mu, var).

    Standard log-normal moments: mean = exp(mu + var/2) and
    variance = (exp(var) - 1) * exp(2 mu + var).
    """
    if var < 0:
        raise ValueError(f"variance must be >= 0, got {var}")
    mean = float(np.exp(mu + 0.5 * var))
    variance = float(np.expm1(var) * np.exp(2.0 * mu + var))
    return mean, variance


@dataclass(frozen=True)
class VariableTransform:
    """Per-variable affine (optionally log-first) map fit on training data.

    Forward: t = (f(x) - shift) / scale with f = log or identity. All node
    datasets and observed inputs of one experiment go through the same
    per-variable instance so that upstream predictions and downstream
    input columns live in identical coordinates.
    """

    log: bool
    shift: float
    scale: float
    offset: float = 0.0  # added before the log, e.g. log(x + 1)

    @classmethod
    def fit(cls, values: np.ndarray, log: bool = False, offset: float = 0.0):
        values = np.asarray(values, dtype=float)
        f = np.log(values + offset) if log else values
        shift = float(np.mean(f))
        sd = float(np.std(f))
        return cls(log=log, shift=shift, scale=sd if sd > 0 else 1.0, offset=offset)

    def forward(self, values):
        values = np.asarray(values, dtype=float)
        f = np.log(values + self.offset) if self.log else values
        return (f - self.shift) / self.scale

    def inverse_points(self, t):
        t = np.asarray(t, dtype=float)
        f = t * self.scale + self.shift
        return (np.exp(f) - self.offset) if self.log else f

    def inverse_mean(self, mu: float, var: float) -> float:
        """Posterior mean in original units (log-normal mean for log vars)."""
        mu_f = mu * self.scale + self.shift
        var_f = var * self.scale**2
        if not self.log:
            return float(mu_f)
        mean, _ = lognormal_backtransform(mu_f, var_f)
        return float(mean - self.offset)

    def inverse_variance(self, mu: float, var: float) -> float:
        mu_f = mu * self.scale + self.shift
        var_f = var * self.scale**2
        if not self.log:
            return float(var_f)
        _, variance = lognormal_backtransform(mu_f, var_f)
        return float(variance)
