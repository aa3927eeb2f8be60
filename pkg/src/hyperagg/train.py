"""Deterministic mini-batch training loop.

Optimizer is SGD with momentum and a cosine-decayed learning rate. All
randomness flows from the config seed through fixed per-component streams,
so identical (config, seed) reproduces every parameter, batch order, and
metric bit for bit. Wall-clock time is written to a separate timing.json so
metrics.json itself stays bit-identical across reruns.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, model as mdl
from .autodiff import GradientTape, lift
from .config import ExperimentConfig
from .data import Dataset, generate_dataset
from .errors import EvaluationError


@dataclass
class RunMetrics:
    """Everything a finished run reports, JSON-serializable."""

    num_classes: int
    epochs: list = field(default_factory=list)  # one dict per epoch
    trace: list = field(default_factory=list)  # one dict per optimizer step
    final_train_accuracy: float = 0.0
    final_test_accuracy: float = 0.0
    snapshot_ids: list = field(default_factory=list)
    wall_time: float = 0.0  # excluded from metrics.json

    def to_dict(self):
        return {
            "num_classes": self.num_classes,
            "epochs": self.epochs,
            "final_train_accuracy": self.final_train_accuracy,
            "final_test_accuracy": self.final_test_accuracy,
            "snapshot_ids": self.snapshot_ids,
        }


def split_dataset(dataset: Dataset, train_per_class, test_per_class):
    """Per-class split: first block of samples trains, next block tests.

    Returns (train_idx, test_idx) into the pooled dataset.
    """
    train_idx, test_idx = [], []
    for label in range(dataset.spec.num_classes):
        members = np.flatnonzero(dataset.labels == label)
        train_idx.append(members[:train_per_class])
        test_idx.append(members[train_per_class:train_per_class + test_per_class])
    return np.concatenate(train_idx), np.concatenate(test_idx)


def predict(tokens, params, cfg, batch_size=64):
    """Class predictions without tape recording (plain numpy params)."""
    preds = []
    for lo in range(0, len(tokens), batch_size):
        out = mdl.model_forward(tokens[lo:lo + batch_size], params, cfg)
        preds.append(np.argmax(out["logits"].data, axis=-1))
    return np.concatenate(preds) if preds else np.empty(0, dtype=np.intp)


def accuracy(tokens, labels, params, cfg, batch_size=64):
    if len(labels) == 0:
        return 0.0
    return float(np.mean(predict(tokens, params, cfg, batch_size) == labels))


def cosine_lr(base, step, total_steps):
    if total_steps <= 1:
        return base
    return base * 0.5 * (1.0 + np.cos(np.pi * step / (total_steps - 1)))


def _dump_bad_batch(output_dir, step, tokens, labels, breakdown):
    diag = Path(output_dir) / "diagnostics"
    diag.mkdir(parents=True, exist_ok=True)
    io.save_tensor(diag / "batch_tokens.bin", tokens)
    io.save_tensor(diag / "batch_labels.bin", labels.astype(np.float64))
    io.write_json(diag / "failure.json", {"step": step, "breakdown": breakdown})
    return diag


def save_incidence_snapshots(output_dir, params, cfg, dataset, sample_ids):
    """Final incidence matrices for chosen samples: binary + CSV + sidecar."""
    out = Path(output_dir) / "incidence"
    out.mkdir(parents=True, exist_ok=True)
    side = cfg.backbone.grid // 2 ** (cfg.backbone.num_stages - 1)
    for sid in sample_ids:
        fwd = mdl.model_forward(dataset.tokens[sid], params, cfg)
        a = fwd["incidence"].data
        io.save_tensor(out / f"incidence_{sid}.bin", a)
        io.save_csv(out / f"incidence_{sid}.csv", a)
        io.write_json(out / f"incidence_{sid}.json", {
            "sample_id": int(sid),
            "tokens_per_side": side,
            "num_hyperedges": cfg.num_hyperedges,
        })


def train(config: ExperimentConfig, output_dir=None) -> RunMetrics:
    """Run one experiment; optionally persist artifacts under output_dir."""
    started = time.perf_counter()
    tcfg = config["train"]
    mcfg = config.model_config()
    weights = config.loss_weights()
    mode = config["loss"]["mode"]
    seed = tcfg["seed"]

    dataset = generate_dataset(config.data_spec())
    train_idx, test_idx = split_dataset(
        dataset, config["data"]["samples_per_class"],
        config["data"]["test_samples_per_class"])
    x_train, y_train = dataset.tokens[train_idx], dataset.labels[train_idx]
    x_test, y_test = dataset.tokens[test_idx], dataset.labels[test_idx]

    params = mdl.init_model(mcfg, seed)
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    order_rng = np.random.default_rng([seed, mdl.STREAM_BATCHES])

    batch = tcfg["batch_size"]
    agg_scale = tcfg["aggregator_lr_scale"]
    # contrastive terms need at least two samples; a trailing remainder
    # smaller than that is dropped rather than special-cased
    steps_per_epoch = max(len(y_train) // batch, 0)
    total_steps = tcfg["epochs"] * steps_per_epoch

    metrics = RunMetrics(num_classes=mcfg.num_classes)
    step = 0
    for epoch in range(tcfg["epochs"]):
        perm = order_rng.permutation(len(y_train))
        losses_seen, correct, counted = [], 0, 0
        epoch_parts = {"ce": 0.0, "hcon": 0.0, "econ": 0.0, "hpop": 0.0}
        for b in range(steps_per_epoch):
            idx = perm[b * batch:(b + 1) * batch]
            xb, yb = x_train[idx], y_train[idx]
            tape = GradientTape()
            lifted = lift(params, tape)
            loss, breakdown, out = mdl.batch_objective(
                xb, yb, lifted, mcfg, weights, mode=mode)
            if not np.isfinite(loss.item()):
                where = ""
                if output_dir is not None:
                    diag = _dump_bad_batch(output_dir, step, xb, yb, breakdown)
                    where = f"; offending batch dumped to {diag}"
                raise EvaluationError(
                    f"non-finite loss {loss.item()} at step {step}{where}")
            tape.backward(loss)
            lr = cosine_lr(tcfg["learning_rate"], step, total_steps)
            grads = {k: tape.grad(lifted[k]) for k in params}
            clip = tcfg["grad_clip"]
            if clip > 0.0:
                gnorm = np.sqrt(sum(float(np.sum(g * g))
                                    for g in grads.values()))
                if gnorm > clip:
                    scale = clip / gnorm
                    grads = {k: g * scale for k, g in grads.items()}
            for k in params:
                # the aggregator gets a damped learning rate: it starts
                # behind a nearly-closed gate, and full-rate updates driven
                # by the (still uninformative) refinement path destabilize
                # mid-training
                klr = lr * (agg_scale if k.startswith("agg.") else 1.0)
                velocity[k] = tcfg["momentum"] * velocity[k] - klr * grads[k]
                params[k] = params[k] + velocity[k]
            preds = np.argmax(out["logits"].data, axis=-1)
            correct += int(np.sum(preds == yb))
            counted += len(yb)
            losses_seen.append(breakdown["total"])
            for key in epoch_parts:
                epoch_parts[key] += breakdown[key]
            metrics.trace.append({"step": step, **breakdown})
            step += 1
        denom = max(steps_per_epoch, 1)
        metrics.epochs.append({
            "epoch": epoch,
            "train_loss": float(np.mean(losses_seen)) if losses_seen else 0.0,
            "train_accuracy": correct / counted if counted else 0.0,
            "test_accuracy": accuracy(x_test, y_test, params, mcfg),
            **{k: v / denom for k, v in epoch_parts.items()},
        })

    metrics.final_train_accuracy = accuracy(x_train, y_train, params, mcfg)
    metrics.final_test_accuracy = accuracy(x_test, y_test, params, mcfg)

    if mcfg.use_aggregator:
        # snapshot the first test sample of each class
        seen = {}
        for sid, label in zip(test_idx, y_test):
            seen.setdefault(int(label), int(sid))
        metrics.snapshot_ids = sorted(seen.values())

    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        config.save(out / "config.ini")
        io.write_json(out / "metrics.json", metrics.to_dict())
        with open(out / "trace.jsonl", "w") as fh:
            for row in metrics.trace:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        if metrics.snapshot_ids:
            save_incidence_snapshots(out, params, mcfg, dataset,
                                     metrics.snapshot_ids)
        metrics.wall_time = time.perf_counter() - started
        io.write_json(out / "timing.json", {"wall_time": metrics.wall_time})
    else:
        metrics.wall_time = time.perf_counter() - started
    return metrics
