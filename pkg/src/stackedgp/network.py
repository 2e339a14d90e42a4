"""Layered networks of GP nodes and forward uncertainty propagation.

A network is a strictly layer-forward DAG: each node consumes observed
input slots and/or outputs of nodes in earlier layers, and every node is
trained independently on its own dataset. A forward pass converts the
observed values into per-node Gaussian beliefs layer by layer: each
node's output distribution is summarized by its exact predictive mean
and variance under the incoming beliefs (:mod:`stackedgp.moments`) and
re-approximated as a Gaussian before feeding the next layer. For a
two-layer network the moments themselves are exact; deeper networks add
only the Gaussian re-approximation between layers.

A recurrent wrapper re-feeds selected outputs as next-step inputs for
emulated dynamical systems.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .gp import GaussianBelief, GPNode, TrainingSet, TrainOptions, train
from .ica import IcaError, IcaTransform, ica_fit
from .kernels import Kernel
from .moments import MomentResult, uncertain_moments
from .seeding import child_seed


class NetworkSpecError(ValueError):
    """Invalid network declaration."""


class NodeTrainingError(RuntimeError):
    """Training failed for a named node."""


class PropagationError(RuntimeError):
    """Forward pass could not be completed."""


@dataclass(frozen=True)
class NodeSpec:
    """One GP node: kernel initialization, input wiring, dataset key.

    ``inputs`` are names of observed slots or of nodes in earlier layers,
    in the column order of the node's training inputs. ``ica=None`` applies
    the default rule: unmix the stochastic (node-fed) input columns of any
    node beyond the first layer; observed slots never enter the ICA.
    """

    name: str
    kernel: Kernel
    inputs: tuple[str, ...]
    dataset: str
    ica: bool | None = None
    normalize_y: bool = False

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))


class NetworkSpec:
    """Declarative layered network: observed slot names plus node layers."""

    def __init__(self, observed: Sequence[str], layers: Sequence[Sequence[NodeSpec]]):
        self.observed = tuple(observed)
        self.layers = tuple(tuple(layer) for layer in layers)
        self._validate()

    def _validate(self):
        if len(set(self.observed)) != len(self.observed):
            raise NetworkSpecError("duplicate observed slot names")
        seen: dict[str, int] = {}
        for li, layer in enumerate(self.layers):
            for spec in layer:
                if spec.name in seen or spec.name in self.observed:
                    raise NetworkSpecError(f"duplicate name '{spec.name}'")
                for src in spec.inputs:
                    if src in self.observed:
                        continue
                    if src not in seen:
                        raise NetworkSpecError(
                            f"node '{spec.name}' input '{src}' is not an observed "
                            f"slot or a node in an earlier layer"
                        )
                seen[spec.name] = li
        if not seen:
            raise NetworkSpecError("network has no nodes")

    @property
    def n_nodes(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def node_specs(self) -> list[tuple[int, NodeSpec]]:
        return [(li, s) for li, layer in enumerate(self.layers) for s in layer]

    def layer_of(self, name: str) -> int:
        for li, layer in enumerate(self.layers):
            for spec in layer:
                if spec.name == name:
                    return li
        raise KeyError(name)


@dataclass
class TrainedNode:
    spec: NodeSpec
    layer: int
    gp: GPNode
    ica: IcaTransform | None
    stochastic_positions: tuple[int, ...]


class StackedNetwork:
    """Trained instantiation of a :class:`NetworkSpec`."""

    def __init__(self, spec: NetworkSpec, nodes: Mapping[str, TrainedNode]):
        self.spec = spec
        self.nodes = dict(nodes)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.spec.layers[-1])

    def node(self, name: str) -> TrainedNode:
        return self.nodes[name]


def _stochastic_positions(spec: NodeSpec, observed: tuple[str, ...]) -> tuple[int, ...]:
    return tuple(i for i, src in enumerate(spec.inputs) if src not in observed)


def _prepare_node_inputs(
    spec: NodeSpec,
    layer: int,
    data: TrainingSet,
    observed: tuple[str, ...],
    seed: int,
    node_index: int,
) -> tuple[np.ndarray, IcaTransform | None, tuple[int, ...]]:
    if data.input_dim != len(spec.inputs):
        raise NetworkSpecError(
            f"node '{spec.name}' wires {len(spec.inputs)} inputs but its "
            f"dataset has {data.input_dim} columns"
        )
    stoch = _stochastic_positions(spec, observed)
    use_ica = spec.ica if spec.ica is not None else (layer > 0 and len(stoch) >= 1)
    if not use_ica or not stoch:
        return data.X, None, stoch
    try:
        transform = ica_fit(data.X[:, stoch], seed=child_seed(seed, "ica", node_index))
    except IcaError as exc:
        raise NodeTrainingError(f"node '{spec.name}': ICA failed: {exc}") from exc
    X = data.X.copy()
    X[:, stoch] = transform.transform_points(data.X[:, stoch])
    return X, transform, stoch


def build_and_train(
    spec: NetworkSpec,
    datasets: Mapping[str, TrainingSet],
    opts: TrainOptions | None = None,
    seed: int = 0,
    jobs: int = 1,
) -> StackedNetwork:
    """Train every node independently on its own dataset.

    Non-first-layer nodes get their stochastic input columns unmixed by
    ICA before training (unless overridden per node); the transform is
    stored for propagation. Nodes may be trained concurrently (``jobs``).
    """
    base_opts = opts or TrainOptions()
    work = []
    for q, (layer, node_spec) in enumerate(spec.node_specs()):
        if node_spec.dataset not in datasets:
            raise NetworkSpecError(
                f"node '{node_spec.name}' references missing dataset "
                f"'{node_spec.dataset}'"
            )
        work.append((q, layer, node_spec, datasets[node_spec.dataset]))

    def build_one(item) -> TrainedNode:
        q, layer, node_spec, data = item
        X, transform, stoch = _prepare_node_inputs(
            node_spec, layer, data, spec.observed, seed, q
        )
        node_opts = TrainOptions(
            restarts=base_opts.restarts,
            max_iter=base_opts.max_iter,
            tol=base_opts.tol,
            noise_init=base_opts.noise_init,
            normalize_y=node_spec.normalize_y or base_opts.normalize_y,
            seed=child_seed(seed, "train", q),
        )
        try:
            gp = train(node_spec.kernel, TrainingSet(X, data.y), node_opts)
        except Exception as exc:
            raise NodeTrainingError(f"node '{node_spec.name}': {exc}") from exc
        return TrainedNode(
            spec=node_spec,
            layer=layer,
            gp=gp,
            ica=transform,
            stochastic_positions=stoch,
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trained = list(pool.map(build_one, work))
    else:
        trained = [build_one(item) for item in work]
    return StackedNetwork(spec, {t.spec.name: t for t in trained})


@dataclass(frozen=True)
class TraceEntry:
    node: str
    inputs: tuple[GaussianBelief, ...]
    output: GaussianBelief
    moments: MomentResult | None  # None when the output was overridden
    step: int | None = None


@dataclass
class PropagationTrace:
    """Per-node beliefs recorded during one forward pass."""

    entries: list[TraceEntry] = field(default_factory=list)

    def belief(self, node: str) -> GaussianBelief:
        for e in self.entries:
            if e.node == node:
                return e.output
        raise KeyError(node)

    def outputs(self, net: StackedNetwork) -> dict[str, GaussianBelief]:
        return {name: self.belief(name) for name in net.output_names}

    def to_records(self) -> list[dict]:
        return [
            {
                "node": e.node,
                "step": e.step,
                "mean": e.output.mean,
                "variance": e.output.variance,
            }
            for e in self.entries
        ]


def _as_belief(value) -> GaussianBelief:
    if isinstance(value, GaussianBelief):
        return value
    return GaussianBelief(float(value), 0.0)


def node_input_beliefs(
    net: StackedNetwork, trained: TrainedNode, available: Mapping[str, GaussianBelief]
) -> list[GaussianBelief]:
    beliefs = []
    for src in trained.spec.inputs:
        if src not in available:
            raise PropagationError(
                f"node '{trained.spec.name}': input '{src}' is not available"
            )
        beliefs.append(available[src])
    return beliefs


def _evaluate_node(
    trained: TrainedNode, beliefs: Sequence[GaussianBelief]
) -> MomentResult:
    if trained.ica is not None:
        means = np.array([b.mean for b in beliefs])
        variances = np.array([b.variance for b in beliefs])
        s = list(trained.stochastic_positions)
        tm, tv = trained.ica.transform_beliefs(means[s], variances[s])
        means = means.copy()
        variances = variances.copy()
        means[s] = tm
        variances[s] = np.maximum(tv, 0.0)
        beliefs = [GaussianBelief(m, v) for m, v in zip(means, variances)]
    try:
        return uncertain_moments(trained.gp, beliefs)
    except Exception as exc:
        raise PropagationError(f"node '{trained.spec.name}': {exc}") from exc


def propagate(
    net: StackedNetwork,
    observed: Mapping[str, GaussianBelief | float],
    step: int | None = None,
    overrides: Mapping[str, GaussianBelief | float] | None = None,
) -> PropagationTrace:
    """Layer-by-layer forward pass from observed inputs to final beliefs.

    Observed values may be plain floats (certain inputs) or beliefs with
    a measurement variance. Every observed slot must be supplied.
    ``overrides`` replaces named node outputs with supplied beliefs (e.g.
    direct measurements with zero uncertainty instead of predictions).
    """
    available: dict[str, GaussianBelief] = {}
    for slot in net.spec.observed:
        if slot not in observed:
            raise PropagationError(f"missing observed input slot '{slot}'")
        available[slot] = _as_belief(observed[slot])
    overrides = {k: _as_belief(v) for k, v in (overrides or {}).items()}
    for name in overrides:
        if name not in net.nodes:
            raise PropagationError(f"override targets unknown node '{name}'")
    trace = PropagationTrace()
    for layer in net.spec.layers:
        for node_spec in layer:
            trained = net.nodes[node_spec.name]
            if node_spec.name in overrides:
                out = overrides[node_spec.name]
                available[node_spec.name] = out
                trace.entries.append(
                    TraceEntry(
                        node=node_spec.name,
                        inputs=(),
                        output=out,
                        moments=None,
                        step=step,
                    )
                )
                continue
            beliefs = node_input_beliefs(net, trained, available)
            res = _evaluate_node(trained, beliefs)
            out = GaussianBelief(res.mean, res.variance)
            available[node_spec.name] = out
            trace.entries.append(
                TraceEntry(
                    node=node_spec.name,
                    inputs=tuple(beliefs),
                    output=out,
                    moments=res,
                    step=step,
                )
            )
    return trace


@dataclass(frozen=True)
class StateFeed:
    """Route a node output at step k to an observed slot at step k+1.

    ``mean_only=True`` feeds the mean as a certain value (used when a node
    plays an interpolation role and should be queried at the current mean
    location rather than under positional uncertainty).
    """

    source: str
    slot: str
    mean_only: bool = False


@dataclass
class RecurrentTrace:
    """States and per-step traces of a recurrent run; states[0] is initial."""

    states: list[dict[str, GaussianBelief]]
    steps: list[PropagationTrace]

    def to_records(self) -> list[dict]:
        records = []
        for k, state in enumerate(self.states):
            for slot, belief in state.items():
                records.append(
                    {
                        "step": k,
                        "node": slot,
                        "mean": belief.mean,
                        "variance": belief.variance,
                    }
                )
        return records


def propagate_recurrent(
    net: StackedNetwork,
    initial_state: Mapping[str, GaussianBelief | float],
    steps: int,
    state_wiring: Sequence[StateFeed],
    observed_static: Mapping[str, GaussianBelief | float] | None = None,
) -> RecurrentTrace:
    """Iterate the network, re-feeding outputs as next-step observed slots.

    ``initial_state`` supplies the recurrent observed slots at step 0;
    ``observed_static`` covers non-recurrent slots, repeated every step.
    The trace is indexed by step; ``steps=0`` returns only the initial
    state. Deterministic: identical inputs produce identical traces.
    """
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    static = {k: _as_belief(v) for k, v in (observed_static or {}).items()}
    for feed in state_wiring:
        if feed.slot not in net.spec.observed:
            raise PropagationError(f"state feed targets unknown slot '{feed.slot}'")
        if feed.source not in net.nodes:
            raise PropagationError(f"state feed source '{feed.source}' is not a node")
    state = {k: _as_belief(v) for k, v in initial_state.items()}
    trace = RecurrentTrace(states=[dict(state)], steps=[])
    for k in range(steps):
        observed = {**static, **state}
        step_trace = propagate(net, observed, step=k)
        next_state: dict[str, GaussianBelief] = {}
        for feed in state_wiring:
            out = step_trace.belief(feed.source)
            next_state[feed.slot] = (
                GaussianBelief(out.mean, 0.0) if feed.mean_only else out
            )
        state = next_state
        trace.steps.append(step_trace)
        trace.states.append(dict(state))
    return trace
