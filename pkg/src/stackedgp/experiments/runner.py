"""Dispatch experiment runs and write their artifacts."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

from ..io import DataError, write_histogram_csv, write_metrics_json, write_records_csv

EXPERIMENTS = ("synthetic", "forestfire", "jura", "puff")


def run_experiment(
    name: str,
    config: Mapping | None = None,
    out_dir: str | Path | None = None,
    seed: int = 0,
    jobs: int = 1,
) -> dict:
    """Run one named experiment; write metrics JSON and artifacts to out_dir.

    ``config`` carries experiment-specific options (dataset paths for the
    real-data experiments, scenario number, sample counts, ...). Returns
    the metrics dict.
    """
    config = dict(config or {})
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    if name == "synthetic":
        from .synthetic import run_synthetic

        metrics, records = run_synthetic(
            scenario=int(config.get("scenario", 1)),
            n_train=int(config.get("n_train", 200)),
            n_test=int(config.get("n_test", 200)),
            seed=seed,
            restarts=int(config.get("restarts", 4)),
            jobs=jobs,
        )
        artifacts = {"predictions.csv": records}
    elif name == "forestfire":
        from .forestfire import run_forestfire

        data_path = config.get("data")
        if not data_path:
            raise DataError(
                "forestfire experiment needs config key 'data' pointing to the "
                "burned-area CSV"
            )
        metrics, records = run_forestfire(
            data_path,
            seed=seed,
            folds=int(config.get("folds", 10)),
            n_index_train=int(config.get("n_index_train", 400)),
            restarts=int(config.get("restarts", 3)),
            jobs=jobs,
        )
        artifacts = {"predictions.csv": records}
    elif name == "jura":
        from .jura import run_jura

        train_path = config.get("train")
        test_path = config.get("test")
        if not train_path or not test_path:
            raise DataError(
                "jura experiment needs config keys 'train' and 'test' pointing "
                "to the split CSVs"
            )
        metrics, records = run_jura(
            train_path,
            test_path,
            structure=config.get("structure", "co_cr"),
            seed=seed,
            restarts=int(config.get("restarts", 4)),
            jobs=jobs,
        )
        artifacts = {"predictions.csv": records}
    elif name == "puff":
        from .puff import run_puff

        metrics, records, histograms = run_puff(
            seed=seed,
            steps=int(config.get("steps", 20)),
            n_mc=int(config.get("n_mc", 1000)),
            n_traj=int(config.get("n_traj", 15)),
            restarts=int(config.get("restarts", 4)),
            jobs=jobs,
        )
        artifacts = {"states.csv": records}
        if out is not None:
            for key, (edges, counts) in histograms.items():
                write_histogram_csv(out / f"hist_{key}.csv", edges, counts)
    else:
        raise ValueError(f"unknown experiment {name!r}; pick from {EXPERIMENTS}")

    if out is not None:
        write_metrics_json(out / "metrics.json", metrics)
        for fname, records in artifacts.items():
            write_records_csv(out / fname, records)
    return metrics
