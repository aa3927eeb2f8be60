"""Procedurally generated hierarchical token dataset.

Each sample is a grid x grid field of token vectors: background Gaussian
noise plus a coarse-class motif (a smooth low-frequency pattern covering the
whole field) plus a fine-class motif (a small patch stamped at a random
location). Fine classes nest under coarse classes, so labels carry the
two-level structure the hierarchical losses are meant to exploit. Everything
is a pure function of (spec, seed).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import io
from .errors import ConfigurationError

# fixed stream ids so each random ingredient has its own generator
_STREAM_COARSE = 11
_STREAM_FINE = 12
_STREAM_SAMPLES = 13


@dataclass
class SyntheticSpec:
    """Everything that determines the dataset, bit for bit."""

    num_coarse: int = 4
    fine_per_coarse: int = 2
    grid: int = 16
    signal_patch_size: int = 5
    noise_std: float = 1.0
    samples_per_class: int = 100
    seed: int = 0
    token_channels: int = 8
    coarse_strength: float = 1.0
    fine_strength: float = 1.0

    def __post_init__(self):
        if self.signal_patch_size > self.grid:
            raise ConfigurationError(
                f"signal_patch_size={self.signal_patch_size} exceeds grid={self.grid}")
        for name in ("num_coarse", "fine_per_coarse", "grid", "samples_per_class"):
            if getattr(self, name) < 0 or (name != "samples_per_class"
                                           and getattr(self, name) < 1):
                raise ConfigurationError(f"{name} must be positive")

    @property
    def num_classes(self):
        return self.num_coarse * self.fine_per_coarse

    @property
    def num_tokens(self):
        return self.grid * self.grid


@dataclass
class Dataset:
    tokens: np.ndarray  # (n, grid*grid, token_channels)
    coarse: np.ndarray  # (n,)
    fine: np.ndarray  # (n,) fine index within the coarse class
    labels: np.ndarray  # (n,) flat class index
    spec: SyntheticSpec


def _coarse_motifs(spec):
    """One smooth global pattern per coarse class: low-frequency spatial map
    times a per-channel signature."""
    rng = np.random.default_rng([spec.seed, _STREAM_COARSE])
    g, c = spec.grid, spec.token_channels
    xs = np.arange(g) / g
    motifs = np.empty((spec.num_coarse, g, g, c))
    for k in range(spec.num_coarse):
        fx, fy = rng.integers(1, 3, size=2)
        px, py = rng.uniform(0.0, 2.0 * np.pi, size=2)
        spatial = np.sin(2.0 * np.pi * fx * xs[:, None] + px) \
            + np.cos(2.0 * np.pi * fy * xs[None, :] + py)
        signature = rng.normal(size=c)
        motifs[k] = spec.coarse_strength * spatial[..., None] * signature
    return motifs


def _fine_motifs(spec):
    """One patch pattern per flat class (coarse x fine)."""
    rng = np.random.default_rng([spec.seed, _STREAM_FINE])
    p, c = spec.signal_patch_size, spec.token_channels
    return spec.fine_strength * rng.normal(
        size=(spec.num_classes, p, p, c))


def generate_dataset(spec: SyntheticSpec) -> Dataset:
    g, c, p = spec.grid, spec.token_channels, spec.signal_patch_size
    coarse_motifs = _coarse_motifs(spec)
    fine_motifs = _fine_motifs(spec)
    rng = np.random.default_rng([spec.seed, _STREAM_SAMPLES])

    n = spec.num_classes * spec.samples_per_class
    tokens = np.empty((n, g * g, c))
    coarse = np.empty(n, dtype=np.intp)
    fine = np.empty(n, dtype=np.intp)
    i = 0
    for label in range(spec.num_classes):
        co, fi = divmod(label, spec.fine_per_coarse)
        for _ in range(spec.samples_per_class):
            field = rng.normal(0.0, 1.0, size=(g, g, c)) * spec.noise_std
            field += coarse_motifs[co]
            r0, c0 = rng.integers(0, g - p + 1, size=2)
            field[r0:r0 + p, c0:c0 + p] += fine_motifs[label]
            tokens[i] = field.reshape(g * g, c)
            coarse[i], fine[i] = co, fi
            i += 1
    labels = coarse * spec.fine_per_coarse + fine
    return Dataset(tokens=tokens, coarse=coarse, fine=fine, labels=labels,
                   spec=spec)


def save_dataset(dataset: Dataset, directory):
    """Cache as flat binary tensors plus a manifest {spec, seed, checksum}."""
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    io.save_tensor(directory / "tokens.bin", dataset.tokens)
    io.save_tensor(directory / "coarse.bin", dataset.coarse.astype(np.float64))
    io.save_tensor(directory / "fine.bin", dataset.fine.astype(np.float64))
    manifest = {
        "spec": asdict(dataset.spec),
        "seed": dataset.spec.seed,
        "checksum": io.sha256_file(directory / "tokens.bin"),
    }
    io.write_json(directory / "manifest.json", manifest)


def load_dataset(directory) -> Dataset:
    from pathlib import Path

    directory = Path(directory)
    manifest = io.read_json(directory / "manifest.json")
    if io.sha256_file(directory / "tokens.bin") != manifest["checksum"]:
        raise ConfigurationError(f"dataset cache at {directory} is corrupt")
    spec = SyntheticSpec(**manifest["spec"])
    tokens = io.load_tensor(directory / "tokens.bin")
    coarse = io.load_tensor(directory / "coarse.bin").astype(np.intp)
    fine = io.load_tensor(directory / "fine.bin").astype(np.intp)
    labels = coarse * spec.fine_per_coarse + fine
    return Dataset(tokens=tokens, coarse=coarse, fine=fine, labels=labels,
                   spec=spec)
