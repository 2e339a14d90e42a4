"""Command-line entry points.

Subcommands: ``train`` (config -> model archive + report), ``predict``
(mean-path composition), ``propagate`` (analytical uncertain forward
passes, optionally checked against Monte Carlo), ``mc`` (Monte Carlo
only), and ``experiment`` (named study drivers). One global seed drives
every random element through derived streams, so repeated runs with the
same arguments produce byte-identical metric files.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure, 1 unexpected error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import io as model_io
from .gp import GaussianBelief, TrainingError
from .kernels import KernelError
from .linalg import NotPositiveDefiniteError
from .network import (
    NetworkSpecError,
    NodeTrainingError,
    PropagationError,
    StackedNetwork,
    build_and_train,
    propagate,
)
from .oracle import mc_propagate

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args) -> int:
    spec, datasets, opts = model_io.load_network_config(args.config)
    net = build_and_train(spec, datasets, opts, seed=args.seed, jobs=args.jobs)
    out = _out_dir(args)
    model_path = out / "model.json"
    model_io.save_model(net, model_path)
    report = {
        "seed": args.seed,
        "nodes": {
            name: {
                "layer": t.layer,
                "log_likelihood": t.gp.diagnostics.get("log_likelihood"),
                "iterations": t.gp.diagnostics.get("iterations"),
                "noise_variance": t.gp.noise_variance,
                "kernel": model_io.kernel_to_config(t.gp.kernel),
                "ica": t.ica is not None,
            }
            for name, t in net.nodes.items()
        },
    }
    model_io.write_metrics_json(out / "training_report.json", report)
    print(f"trained {len(net.nodes)} nodes -> {model_path}")
    return EXIT_OK


def _load_observed_rows(net: StackedNetwork, path: str) -> list[dict[str, GaussianBelief]]:
    """Rows of observed beliefs; '<slot>_var' columns supply measurement noise."""
    slots = list(net.spec.observed)
    table = model_io.load_table(path)
    missing = [s for s in slots if s not in table]
    if missing:
        raise model_io.DataError(f"{path}: missing observed columns {missing}")
    n = len(next(iter(table.values())))
    rows = []
    for i in range(n):
        row = {}
        for s in slots:
            var_col = f"{s}_var"
            var = float(table[var_col][i]) if var_col in table else 0.0
            row[s] = GaussianBelief(float(table[s][i]), var)
        rows.append(row)
    return rows


def mean_path_predict(net: StackedNetwork, observed: dict[str, GaussianBelief]) -> dict[str, float]:
    """Compose the standard GP mean predictions node by node."""
    values = {slot: b.mean for slot, b in observed.items()}
    for layer in net.spec.layers:
        for node_spec in layer:
            t = net.nodes[node_spec.name]
            point = np.array([values[src] for src in node_spec.inputs])
            if t.ica is not None:
                s = list(t.stochastic_positions)
                point[s] = t.ica.transform_points(point[s][None, :])[0]
            values[node_spec.name] = t.gp.predict(point).mean
    return {name: values[name] for name in net.output_names}


def cmd_predict(args) -> int:
    net = model_io.load_model(args.model)
    rows = _load_observed_rows(net, args.inputs)
    records = []
    for row in rows:
        rec = {slot: b.mean for slot, b in row.items()}
        for name, mean in mean_path_predict(net, row).items():
            rec[f"{name}_mean"] = mean
        records.append(rec)
    out = _out_dir(args)
    model_io.write_records_csv(out / "predictions.csv", records)
    print(f"wrote {len(records)} predictions")
    return EXIT_OK


def cmd_propagate(args) -> int:
    net = model_io.load_model(args.model)
    rows = _load_observed_rows(net, args.inputs)
    records = []
    max_abs_z = 0.0
    for i, row in enumerate(rows):
        trace = propagate(net, row)
        rec = {slot: b.mean for slot, b in row.items()}
        for name in net.output_names:
            belief = trace.belief(name)
            rec[f"{name}_mean"] = belief.mean
            rec[f"{name}_variance"] = belief.variance
        if args.mc:
            result = mc_propagate(net, row, n=args.mc, seed=args.seed + i)
            for name in net.output_names:
                stat = result[name]
                rec[f"{name}_mc_mean"] = stat.mean
                rec[f"{name}_mc_variance"] = stat.variance
                se = max(stat.se_mean, 1e-300)
                z = abs(rec[f"{name}_mean"] - stat.mean) / se
                max_abs_z = max(max_abs_z, z)
        records.append(rec)
    out = _out_dir(args)
    model_io.write_records_csv(out / "propagation.csv", records)
    if args.mc:
        model_io.write_metrics_json(
            out / "mc_check.json",
            {"n_mc": args.mc, "rows": len(records), "max_abs_z": max_abs_z},
        )
        print(f"max |z| of analytic vs MC means: {max_abs_z:.3f}")
    print(f"wrote {len(records)} propagated rows")
    return EXIT_OK


def cmd_mc(args) -> int:
    net = model_io.load_model(args.model)
    rows = _load_observed_rows(net, args.inputs)
    records = []
    for i, row in enumerate(rows):
        result = mc_propagate(net, row, n=args.n, seed=args.seed + i)
        rec = {slot: b.mean for slot, b in row.items()}
        for name in net.output_names:
            stat = result[name]
            rec[f"{name}_mc_mean"] = stat.mean
            rec[f"{name}_mc_variance"] = stat.variance
            rec[f"{name}_mc_se_mean"] = stat.se_mean
        records.append(rec)
    out = _out_dir(args)
    model_io.write_records_csv(out / "mc.csv", records)
    print(f"wrote MC statistics for {len(records)} rows")
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .experiments import run_experiment

    config = {}
    if args.config:
        import yaml

        with open(args.config) as fh:
            config = yaml.safe_load(fh) or {}
        if not isinstance(config, dict):
            raise model_io.ConfigError(f"{args.config}: experiment config must be a mapping")
    for key in ("scenario", "data", "train", "test", "structure", "steps", "n_mc"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            config[key] = value
    out = _out_dir(args)
    metrics = run_experiment(args.name, config, out_dir=out, seed=args.seed, jobs=args.jobs)
    compact = {
        k: v for k, v in metrics.items() if isinstance(v, (int, float, str, bool))
    }
    print(json.dumps(compact, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stackedgp",
        description="Networks of GP nodes with analytical uncertainty propagation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
        p.add_argument("--out", default="out", help="output directory (default ./out)")
        p.add_argument("--jobs", type=int, default=1, help="max concurrent workers")

    p = sub.add_parser("train", help="train a network from a YAML config")
    p.add_argument("--config", required=True)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="compose standard GP mean predictions")
    p.add_argument("--model", required=True)
    p.add_argument("--inputs", required=True, help="CSV of observed slot values")
    common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("propagate", help="analytical uncertain forward passes")
    p.add_argument("--model", required=True)
    p.add_argument("--inputs", required=True, help="CSV of observed slot values")
    p.add_argument("--mc", type=int, default=0, help="also run N-sample MC per row")
    common(p)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("mc", help="Monte Carlo propagation only")
    p.add_argument("--model", required=True)
    p.add_argument("--inputs", required=True)
    p.add_argument("--n", type=int, default=1000)
    common(p)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("experiment", help="run a named experiment")
    p.add_argument("name", choices=("synthetic", "forestfire", "jura", "puff"))
    p.add_argument("--config", help="YAML with experiment options")
    p.add_argument("--scenario", type=int, help="synthetic: scenario 1-4")
    p.add_argument("--data", help="forestfire: burned-area CSV")
    p.add_argument("--train", help="jura: training CSV")
    p.add_argument("--test", help="jura: test CSV")
    p.add_argument("--structure", help="jura: two_layer|co|cr|co_cr")
    p.add_argument("--steps", type=int, help="puff: number of steps")
    p.add_argument("--n-mc", type=int, dest="n_mc", help="puff: MC sample count")
    common(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (model_io.ConfigError, NetworkSpecError, KernelError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (model_io.DataError, model_io.ModelFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (
        TrainingError,
        NodeTrainingError,
        PropagationError,
        NotPositiveDefiniteError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except Exception:
        traceback.print_exc()
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
