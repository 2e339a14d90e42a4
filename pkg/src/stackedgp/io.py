"""Dataset ingestion, model persistence, and config/trace formats.

Two file formats are owned here: a human-editable YAML network
declaration (layers, kernels, wiring, dataset paths) and a JSON model
archive that stores every trained node with full binary precision
(Python's float repr round-trips exactly) plus a checksum. CSV is the
only ingestion format; columns are matched by header with an optional
explicit mapping.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from .gp import GPNode, TrainingSet, TrainOptions
from .ica import IcaTransform
from .kernels import Kernel, PolynomialKernel, RbfKernel, SumKernel
from .network import NetworkSpec, NetworkSpecError, NodeSpec, StackedNetwork, TrainedNode

logger = logging.getLogger(__name__)

MODEL_FORMAT = "stackedgp-model"
MODEL_VERSION = 1


class DataError(RuntimeError):
    """Dataset file missing or malformed."""


class ConfigError(RuntimeError):
    """Network configuration file is invalid."""


class ModelFormatError(RuntimeError):
    """Model archive has the wrong version or a corrupted payload."""


# ---------------------------------------------------------------------------
# CSV ingestion


def load_table(path: str | Path, columns: Sequence[str] | None = None) -> dict[str, np.ndarray]:
    """Parse a headed CSV into named float columns.

    Every requested cell must parse as a finite float; errors name the
    offending row (1-based, header included) and column.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        wanted = list(columns) if columns is not None else header
        missing = [c for c in wanted if c not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing}; header is {header}")
        idx = {c: header.index(c) for c in wanted}
        data: dict[str, list[float]] = {c: [] for c in wanted}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            for c in wanted:
                cell = row[idx[c]].strip() if idx[c] < len(row) else ""
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}:{line_no}: column '{c}' is not numeric: {cell!r}"
                    ) from None
                if not np.isfinite(value):
                    raise DataError(
                        f"{path}:{line_no}: column '{c}' has non-finite value {cell!r}"
                    )
                data[c].append(value)
    if not data[wanted[0]]:
        raise DataError(f"{path}: no data rows")
    return {c: np.asarray(v, dtype=float) for c, v in data.items()}


def load_csv(
    path: str | Path,
    inputs: Sequence[str],
    target: str,
    column_map: Mapping[str, str] | None = None,
) -> TrainingSet:
    """Load a training set; ``column_map`` renames schema names to file headers."""
    column_map = dict(column_map or {})
    file_cols = [column_map.get(c, c) for c in [*inputs, target]]
    table = load_table(path, file_cols)
    X = np.column_stack([table[column_map.get(c, c)] for c in inputs])
    y = table[column_map.get(target, target)]
    logger.info("loaded %d rows from %s", len(y), path)
    return TrainingSet(X, y)


def write_records_csv(path: str | Path, records: Sequence[Mapping], fieldnames=None):
    records = list(records)
    if fieldnames is None:
        fieldnames = list(records[0].keys()) if records else []
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for rec in records:
            writer.writerow({k: rec.get(k, "") for k in fieldnames})


def write_histogram_csv(path: str | Path, edges: np.ndarray, counts: np.ndarray):
    rows = [
        {"bin_left": float(edges[i]), "bin_right": float(edges[i + 1]), "count": int(c)}
        for i, c in enumerate(counts)
    ]
    write_records_csv(path, rows, ["bin_left", "bin_right", "count"])


def write_metrics_json(path: str | Path, metrics: Mapping) -> None:
    """Canonical metrics dump: key-sorted, so identical runs are byte-identical."""
    with open(path, "w") as fh:
        json.dump(metrics, fh, sort_keys=True, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Kernel (de)serialization, shared by config and archive


def kernel_to_config(kernel: Kernel) -> dict:
    if isinstance(kernel, RbfKernel):
        return {
            "type": "rbf",
            "variance": float(kernel.variance),
            "rates": [float(r) for r in kernel.rates],
        }
    if isinstance(kernel, PolynomialKernel):
        return {"type": "poly", "degree": int(kernel.degree)}
    if isinstance(kernel, SumKernel):
        return {"type": "sum", "parts": [kernel_to_config(p) for p in kernel.parts]}
    raise ConfigError(f"cannot serialize kernel type {type(kernel).__name__}")


def kernel_from_config(cfg: Mapping) -> Kernel:
    try:
        kind = cfg["type"]
    except (KeyError, TypeError):
        raise ConfigError(f"kernel config needs a 'type' field: {cfg!r}") from None
    if kind == "rbf":
        return RbfKernel(cfg.get("variance", 1.0), np.asarray(cfg.get("rates", [1.0])))
    if kind == "poly":
        return PolynomialKernel(cfg["degree"])
    if kind == "sum":
        return SumKernel([kernel_from_config(p) for p in cfg["parts"]])
    raise ConfigError(f"unknown kernel type {kind!r}")


# ---------------------------------------------------------------------------
# Model archive


def _node_payload(t: TrainedNode) -> dict:
    gp = t.gp
    payload = {
        "name": t.spec.name,
        "layer": t.layer,
        "inputs": list(t.spec.inputs),
        "dataset": t.spec.dataset,
        "ica_flag": t.spec.ica,
        "normalize_y": t.spec.normalize_y,
        "kernel": kernel_to_config(gp.kernel),
        "noise_variance": gp.noise_variance,
        "X": gp.X.tolist(),
        "y": gp.y.tolist(),
        "y_shift": gp.y_shift,
        "y_scale": gp.y_scale,
        "stochastic_positions": list(t.stochastic_positions),
        "ica": None,
    }
    if t.ica is not None:
        payload["ica"] = {
            "unmixing": t.ica.unmixing.tolist(),
            "mixing": t.ica.mixing.tolist(),
            "mean": t.ica.mean.tolist(),
        }
    return payload


def _network_payload(net: StackedNetwork) -> dict:
    return {
        "observed": list(net.spec.observed),
        "layers": [[s.name for s in layer] for layer in net.spec.layers],
        "nodes": {name: _node_payload(t) for name, t in net.nodes.items()},
    }


def _checksum(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_model(net: StackedNetwork, path: str | Path) -> None:
    payload = _network_payload(net)
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "checksum": _checksum(payload),
        "payload": payload,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path: str | Path) -> StackedNetwork:
    path = Path(path)
    if not path.exists():
        raise ModelFormatError(f"model file not found: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: corrupted model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: not a stackedgp model file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"{path}: model version {doc.get('version')} is not supported "
            f"(expected {MODEL_VERSION})"
        )
    payload = doc.get("payload")
    if payload is None or _checksum(payload) != doc.get("checksum"):
        raise ModelFormatError(f"{path}: checksum mismatch, payload corrupted")

    node_payloads = payload["nodes"]
    layers = []
    nodes: dict[str, TrainedNode] = {}
    for layer_names in payload["layers"]:
        layer_specs = []
        for name in layer_names:
            np_ = node_payloads[name]
            spec = NodeSpec(
                name=np_["name"],
                kernel=kernel_from_config(np_["kernel"]),
                inputs=tuple(np_["inputs"]),
                dataset=np_["dataset"],
                ica=np_["ica_flag"],
                normalize_y=np_["normalize_y"],
            )
            layer_specs.append(spec)
            gp = GPNode(
                kernel=spec.kernel,
                noise_variance=np_["noise_variance"],
                X=np.asarray(np_["X"], dtype=float),
                y=np.asarray(np_["y"], dtype=float),
                y_shift=np_["y_shift"],
                y_scale=np_["y_scale"],
            )
            ica = None
            if np_["ica"] is not None:
                ica = IcaTransform(
                    unmixing=np.asarray(np_["ica"]["unmixing"], dtype=float),
                    mixing=np.asarray(np_["ica"]["mixing"], dtype=float),
                    mean=np.asarray(np_["ica"]["mean"], dtype=float),
                )
            nodes[name] = TrainedNode(
                spec=spec,
                layer=np_["layer"],
                gp=gp,
                ica=ica,
                stochastic_positions=tuple(np_["stochastic_positions"]),
            )
        layers.append(layer_specs)
    spec = NetworkSpec(payload["observed"], layers)
    return StackedNetwork(spec, nodes)


# ---------------------------------------------------------------------------
# Network configuration (human-editable YAML)


def load_network_config(
    path: str | Path,
) -> tuple[NetworkSpec, dict[str, TrainingSet], TrainOptions]:
    """Read a network declaration and its datasets.

    Layout::

        observed: [x1, x2]
        datasets:
          d1: {path: data/d1.csv, inputs: [x1], target: z1}
        layers:
          - - {name: z1, kernel: {type: rbf}, inputs: [x1], dataset: d1}
        train: {restarts: 5, max_iter: 200, normalize_y: false}

    Dataset paths are resolved relative to the config file. Node fields
    ``ica`` (bool) and ``normalize_y`` (bool) are optional.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    for key in ("observed", "datasets", "layers"):
        if key not in cfg:
            raise ConfigError(f"{path}: missing required section '{key}'")

    datasets = {}
    for name, dcfg in cfg["datasets"].items():
        try:
            csv_path = Path(dcfg["path"])
            if not csv_path.is_absolute():
                csv_path = path.parent / csv_path
            datasets[name] = load_csv(
                csv_path, dcfg["inputs"], dcfg["target"], dcfg.get("column_map")
            )
        except KeyError as exc:
            raise ConfigError(f"{path}: dataset '{name}' is missing field {exc}") from None

    layers = []
    for layer_cfg in cfg["layers"]:
        layer = []
        for ncfg in layer_cfg:
            try:
                layer.append(
                    NodeSpec(
                        name=ncfg["name"],
                        kernel=kernel_from_config(ncfg.get("kernel", {"type": "rbf"})),
                        inputs=tuple(ncfg["inputs"]),
                        dataset=ncfg["dataset"],
                        ica=ncfg.get("ica"),
                        normalize_y=bool(ncfg.get("normalize_y", False)),
                    )
                )
            except KeyError as exc:
                raise ConfigError(f"{path}: node config missing field {exc}") from None
        layers.append(layer)
    try:
        spec = NetworkSpec(cfg["observed"], layers)
    except NetworkSpecError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    tcfg = cfg.get("train", {}) or {}
    opts = TrainOptions(
        restarts=int(tcfg.get("restarts", 5)),
        max_iter=int(tcfg.get("max_iter", 200)),
        tol=float(tcfg.get("tol", 1e-9)),
        noise_init=float(tcfg.get("noise_init", 1.0)),
        normalize_y=bool(tcfg.get("normalize_y", False)),
    )
    return spec, datasets, opts
