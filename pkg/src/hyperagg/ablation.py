"""Ablation runners: component on/off grid and loss-weight grid.

Each cell of a grid is trained over R seeds; tables report mean and std of
final test accuracy. Runs are independent (one tape each), so seeds and
configs execute in parallel across available CPUs.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigurationError
from .train import train

COMPONENT_ROWS = ("none", "hhcl", "saam", "both")


def component_variant(config: ExperimentConfig, row) -> ExperimentConfig:
    """Config for one row of the component table."""
    if row not in COMPONENT_ROWS:
        raise ConfigurationError(f"unknown ablation row {row!r}")
    use_agg = row in ("saam", "both")
    aux = row in ("hhcl", "both")
    alpha = config["loss"]["alpha"] if aux else 0.0
    return config.with_overrides([
        f"model.use_aggregator={'true' if use_agg else 'false'}",
        f"loss.alpha={alpha!r}",
    ])


def _run_cell(args):
    config, seed = args
    metrics = train(config.with_overrides([f"train.seed={seed}"]))
    return metrics.final_test_accuracy


def _run_grid(cells, parallel=True):
    """cells: list of (config, seed); returns accuracies in order."""
    if parallel and len(cells) > 1 and (os.cpu_count() or 1) > 1:
        with ProcessPoolExecutor() as pool:
            return list(pool.map(_run_cell, cells))
    return [_run_cell(c) for c in cells]


def _summarize(rows, accs_per_row, seeds):
    table = []
    for row, accs in zip(rows, accs_per_row):
        accs = np.asarray(accs)
        table.append({"row": row, "seeds": list(seeds),
                      "accuracies": [float(a) for a in accs],
                      "mean": float(accs.mean()),
                      "std": float(accs.std(ddof=0))})
    return table


def run_component_ablation(config: ExperimentConfig, parallel=True):
    """Four-row table: neither module, each alone, both together."""
    num_seeds = config["ablation"]["seeds"]
    if num_seeds < 1:
        raise ConfigurationError("ablation needs at least one seed")
    base = config["train"]["seed"]
    seeds = list(range(base, base + num_seeds))
    cells = [(component_variant(config, row), s)
             for row in COMPONENT_ROWS for s in seeds]
    accs = _run_grid(cells, parallel)
    per_row = [accs[i * num_seeds:(i + 1) * num_seeds]
               for i in range(len(COMPONENT_ROWS))]
    return _summarize(COMPONENT_ROWS, per_row, seeds)


def run_weight_ablation(config: ExperimentConfig, parallel=True):
    """One row per (w_hcon, w_econ, w_hpop) triple in the configured grid."""
    grid = config["ablation"]["weight_grid"]
    if not grid:
        raise ConfigurationError("ablation weight grid is empty")
    num_seeds = config["ablation"]["seeds"]
    base = config["train"]["seed"]
    seeds = list(range(base, base + num_seeds))
    cells, names = [], []
    for hcon, econ, hpop in grid:
        variant = config.with_overrides([
            "loss.mode=split",
            f"loss.w_hcon={hcon!r}", f"loss.w_econ={econ!r}",
            f"loss.w_hpop={hpop!r}"])
        names.append(f"{hcon:g},{econ:g},{hpop:g}")
        cells.extend((variant, s) for s in seeds)
    accs = _run_grid(cells, parallel)
    per_row = [accs[i * num_seeds:(i + 1) * num_seeds]
               for i in range(len(names))]
    return _summarize(names, per_row, seeds)


def write_table(path, table, force=False):
    path = Path(path)
    if path.exists() and not force:
        raise ConfigurationError(
            f"{path} exists; pass force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("row,mean_accuracy,std_accuracy," + ",".join(
            f"seed_{s}" for s in table[0]["seeds"]) + "\n")
        for entry in table:
            cells = [entry["row"], f"{entry['mean']:.17g}",
                     f"{entry['std']:.17g}"]
            cells += [f"{a:.17g}" for a in entry["accuracies"]]
            fh.write(",".join(cells) + "\n")
