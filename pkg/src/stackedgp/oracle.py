"""Monte Carlo propagation through a trained network.

This is the ground truth against which the analytical moment propagation
is validated: joint samples are pushed through the network by sampling
every node's full Gaussian predictive distribution at the sampled input
values, with no moment matching and no independence approximation beyond
per-node sampling. Results are deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .gp import GaussianBelief
from .network import PropagationError, StackedNetwork, StateFeed, _as_belief
from .seeding import rng as derived_rng


@dataclass(frozen=True)
class McStat:
    """Summary of one variable's samples."""

    mean: float
    variance: float
    se_mean: float
    se_variance: float
    n: int
    histogram: tuple[np.ndarray, np.ndarray] | None = None  # (bin_edges, counts)

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))


@dataclass(frozen=True)
class McResult:
    """Per-variable sample statistics of one Monte Carlo pass."""

    stats: dict[str, McStat]
    n: int

    def __getitem__(self, name: str) -> McStat:
        return self.stats[name]


def _summarize(samples: np.ndarray, bins: int = 0) -> McStat:
    n = samples.shape[0]
    mean = float(np.mean(samples))
    var = float(np.var(samples, ddof=1)) if n > 1 else 0.0
    se_mean = float(np.sqrt(var / n))
    # normal-theory standard error of the variance estimate
    se_var = float(var * np.sqrt(2.0 / (n - 1))) if n > 1 else 0.0
    hist = None
    if bins > 0:
        counts, edges = np.histogram(samples, bins=bins)
        hist = (edges, counts)
    return McStat(mean, var, se_mean, se_var, n, hist)


def _sample_observed(belief: GaussianBelief, n: int, gen) -> np.ndarray:
    if belief.variance == 0.0:
        return np.full(n, belief.mean)
    return gen.normal(belief.mean, np.sqrt(belief.variance), size=n)


def _run_layers(
    net: StackedNetwork,
    samples: dict[str, np.ndarray],
    gen,
    n: int,
    overrides: Mapping[str, GaussianBelief] | None = None,
):
    """Sample every node output given sampled inputs, layer by layer."""
    overrides = overrides or {}
    for layer in net.spec.layers:
        for node_spec in layer:
            trained = net.nodes[node_spec.name]
            if node_spec.name in overrides:
                samples[node_spec.name] = _sample_observed(
                    overrides[node_spec.name], n, gen
                )
                continue
            cols = []
            for src in node_spec.inputs:
                if src not in samples:
                    raise PropagationError(
                        f"node '{node_spec.name}': input '{src}' is not available"
                    )
                cols.append(samples[src])
            X = np.column_stack(cols)
            if trained.ica is not None:
                s = list(trained.stochastic_positions)
                X[:, s] = trained.ica.transform_points(X[:, s])
            mean, var = trained.gp.predict_batch(X)
            samples[node_spec.name] = mean + np.sqrt(var) * gen.standard_normal(n)
    return samples


def mc_propagate(
    net: StackedNetwork,
    observed: Mapping[str, GaussianBelief | float],
    n: int,
    seed: int = 0,
    histogram_bins: int = 0,
    overrides: Mapping[str, GaussianBelief | float] | None = None,
) -> McResult:
    """Joint Monte Carlo pass with ``n`` samples; statistics for every node."""
    if n < 2:
        raise ValueError(f"need n >= 2 samples, got {n}")
    gen = derived_rng(seed, "mc")
    samples: dict[str, np.ndarray] = {}
    for slot in net.spec.observed:
        if slot not in observed:
            raise PropagationError(f"missing observed input slot '{slot}'")
        samples[slot] = _sample_observed(_as_belief(observed[slot]), n, gen)
    over = {k: _as_belief(v) for k, v in (overrides or {}).items()}
    _run_layers(net, samples, gen, n, overrides=over)
    final = set(net.output_names)
    stats = {
        name: _summarize(vals, histogram_bins if name in final else 0)
        for name, vals in samples.items()
        if name in net.nodes
    }
    return McResult(stats=stats, n=n)


def mc_propagate_recurrent(
    net: StackedNetwork,
    initial_state: Mapping[str, GaussianBelief | float],
    steps: int,
    state_wiring: Sequence[StateFeed],
    n: int,
    seed: int = 0,
    observed_static: Mapping[str, GaussianBelief | float] | None = None,
    histogram_bins: int = 0,
) -> list[McResult]:
    """Per-step Monte Carlo statistics of a recurrent run.

    Element k of the result summarizes the state samples entering step k
    (element 0 is the initial state); node outputs of step k are reported
    in element k+1 alongside the fed-back state. Unlike the analytical
    pass, sample paths feed every node the sampled values directly, so
    mean-only feeds carry their per-sample values.
    """
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    gen = derived_rng(seed, "mc-recurrent")
    static = {k: _as_belief(v) for k, v in (observed_static or {}).items()}
    state = {
        k: _sample_observed(_as_belief(v), n, gen) for k, v in initial_state.items()
    }
    results = [
        McResult(
            stats={k: _summarize(v, histogram_bins) for k, v in state.items()}, n=n
        )
    ]
    for _ in range(steps):
        samples = {k: _sample_observed(v, n, gen) for k, v in static.items()}
        samples.update({k: v.copy() for k, v in state.items()})
        _run_layers(net, samples, gen, n)
        state = {feed.slot: samples[feed.source] for feed in state_wiring}
        # report the post-step state under its slot names plus all node outputs
        step_stats = {
            name: _summarize(vals, histogram_bins)
            for name, vals in samples.items()
            if name in net.nodes
        }
        step_stats.update(
            {slot: _summarize(vals, histogram_bins) for slot, vals in state.items()}
        )
        results.append(McResult(stats=step_stats, n=n))
    return results
