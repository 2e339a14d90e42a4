"""Composite-function scenarios on synthetic data.

Each scenario defines two intermediate maps z_i(x_i) and a target
composition y(z1, z2); the three-node network (two first-layer nodes,
one output node) is trained on independently generated datasets and
evaluated on a held-out grid over (x1, x2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..gp import TrainingSet, TrainOptions
from ..kernels import RbfKernel
from ..network import NetworkSpec, NodeSpec, StackedNetwork, build_and_train, propagate
from ..seeding import rng as derived_rng
from .metrics import avg_ratio, rmse


@dataclass(frozen=True)
class Scenario:
    id: int
    z1: Callable[[np.ndarray], np.ndarray]
    z2: Callable[[np.ndarray], np.ndarray]
    y: Callable[[np.ndarray, np.ndarray], np.ndarray]
    x_range: tuple[float, float]

    def truth(self, x1, x2):
        return self.y(self.z1(np.asarray(x1, float)), self.z2(np.asarray(x2, float)))


def _s4_y(z1, z2):
    s = np.sqrt(z1 + z2)
    return s + 3.0 * np.cos(s) + 5.0


SCENARIOS: dict[int, Scenario] = {
    1: Scenario(1, lambda x: x**2, lambda x: x**2, lambda z1, z2: z1 + 2.0 * z2, (-2.0, 2.0)),
    2: Scenario(
        2,
        lambda x: np.log(x),
        lambda x: np.log(x**3),
        lambda z1, z2: np.sin(np.sqrt(z1 + z2)),
        (1.0, 4.0),
    ),
    3: Scenario(3, np.sin, np.sin, lambda z1, z2: z1 * z2, (-np.pi, np.pi)),
    4: Scenario(4, lambda x: x**2, lambda x: x**2, _s4_y, (-2.0, 2.0)),
}


def synth_generate(
    scenario: int, n_train: int = 200, n_test: int = 200, seed: int = 0
) -> tuple[dict[str, TrainingSet], np.ndarray, np.ndarray]:
    """Training sets for the three nodes plus a held-out test grid.

    Targets are noiseless by default, matching the desk-scale setup.
    Returns (datasets, test inputs (n_test, 2), test truth).
    """
    sc = SCENARIOS[scenario]
    gen = derived_rng(seed, "synthetic", scenario)
    lo, hi = sc.x_range
    x1 = gen.uniform(lo, hi, n_train)
    x2 = gen.uniform(lo, hi, n_train)
    d_z1 = TrainingSet(x1[:, None], sc.z1(x1))
    d_z2 = TrainingSet(x2[:, None], sc.z2(x2))
    # the output node sees (z1, z2) pairs reachable from the input square
    xa = gen.uniform(lo, hi, n_train)
    xb = gen.uniform(lo, hi, n_train)
    z1, z2 = sc.z1(xa), sc.z2(xb)
    d_y = TrainingSet(np.column_stack([z1, z2]), sc.y(z1, z2))

    side = int(np.ceil(np.sqrt(n_test)))
    g1, g2 = np.meshgrid(np.linspace(lo, hi, side), np.linspace(lo, hi, side))
    X_test = np.column_stack([g1.ravel(), g2.ravel()])[:n_test]
    return {"z1": d_z1, "z2": d_z2, "y": d_y}, X_test, sc.truth(X_test[:, 0], X_test[:, 1])


def build_network_spec(scenario: int) -> NetworkSpec:
    return NetworkSpec(
        observed=["x1", "x2"],
        layers=[
            [
                NodeSpec("z1", RbfKernel(1.0, [1.0]), ("x1",), "z1", normalize_y=True),
                NodeSpec("z2", RbfKernel(1.0, [1.0]), ("x2",), "z2", normalize_y=True),
            ],
            [
                NodeSpec(
                    "y", RbfKernel(1.0, [1.0, 1.0]), ("z1", "z2"), "y", normalize_y=True
                )
            ],
        ],
    )


def run_synthetic(
    scenario: int = 1,
    n_train: int = 200,
    n_test: int = 200,
    seed: int = 0,
    restarts: int = 4,
    jobs: int = 1,
) -> tuple[dict, list[dict]]:
    """Train the scenario network and score it on the test grid.

    Returns (metrics, per-point records).
    """
    datasets, X_test, truth = synth_generate(scenario, n_train, n_test, seed)
    spec = build_network_spec(scenario)
    net = build_and_train(
        spec, datasets, TrainOptions(restarts=restarts), seed=seed, jobs=jobs
    )
    records = []
    preds = np.empty(len(X_test))
    stds = np.empty(len(X_test))
    for i, (a, b) in enumerate(X_test):
        out = propagate(net, {"x1": a, "x2": b}).belief("y")
        preds[i] = out.mean
        stds[i] = max(out.std, 1e-300)
        records.append(
            {
                "x1": a,
                "x2": b,
                "true": truth[i],
                "pred_mean": out.mean,
                "pred_var": out.variance,
            }
        )
    metrics = {
        "scenario": scenario,
        "n_train": n_train,
        "n_test": int(len(X_test)),
        "rmse": rmse(preds, truth),
        "avg_ratio": avg_ratio(preds, truth, stds),
    }
    return metrics, records


def stacked_network(scenario: int, seed: int = 0, **kwargs) -> StackedNetwork:
    datasets, _, _ = synth_generate(scenario, seed=seed, **kwargs)
    return build_and_train(build_network_spec(scenario), datasets, seed=seed)
