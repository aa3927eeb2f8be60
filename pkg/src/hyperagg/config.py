"""Experiment configuration: a sectioned INI-style text file.

Every knob lives in one of six sections (model / loss / data / train /
output / ablation). Unknown sections or keys are hard errors — a silently
ignored typo in a hyperparameter name would invalidate an ablation table.
Parsing and serialization use the same per-key codecs, so
parse -> serialize -> parse is the identity.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

from .backbone import BackboneConfig
from .data import SyntheticSpec
from .errors import ConfigurationError
from .losses import LossWeights
from .model import ModelConfig


def _parse_bool(s):
    low = s.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_ints(s):
    return tuple(int(v) for v in s.split(","))


def _parse_triples(s):
    out = []
    for part in s.split(";"):
        part = part.strip()
        if part:
            vals = tuple(float(v) for v in part.split(","))
            if len(vals) != 3:
                raise ValueError(f"expected three weights, got {part!r}")
            out.append(vals)
    return tuple(out)


def _fmt_bool(v):
    return "true" if v else "false"


def _fmt_ints(v):
    return ",".join(str(x) for x in v)


def _fmt_triples(v):
    return "; ".join(",".join(repr(float(x)) for x in t) for t in v)


# key -> (parse, format, default); defaults follow the reference settings
# (16 hyperedges, fusion ratios 16/8/4/1, curvature 0.1, tau 0.1, beta 0.1)
_I = (int, str)
_F = (float, repr)
_B = (_parse_bool, _fmt_bool)
_S = (str.strip, str)
_T = (_parse_ints, _fmt_ints)

SCHEMA = {
    "model": {
        "stage_widths": (*_T, (16, 32, 64)),
        "heads": (*_T, (2, 2, 4)),
        "num_hyperedges": (*_I, 16),
        "key_dim": (*_I, 16),
        "fusion_ratios": (*_T, (16, 8, 4, 1)),
        "normalize_hyperedges": (*_B, False),
        "contrast_levels": (*_S, "root"),
        "use_aggregator": (*_B, True),
        "gate_closed": (*_B, False),
    },
    "loss": {
        "mode": (*_S, "split"),
        "alpha": (*_F, 1.0),
        "lam": (*_F, 1.0),
        "tau": (*_F, 0.1),
        "beta": (*_F, 0.1),
        "w_hcon": (*_F, 0.1),
        "w_econ": (*_F, 0.1),
        "w_hpop": (*_F, 0.1),
        "curvature": (*_F, 0.1),
    },
    "data": {
        "num_coarse": (*_I, 4),
        "fine_per_coarse": (*_I, 2),
        "grid": (*_I, 16),
        "signal_patch_size": (*_I, 5),
        "noise_std": (*_F, 1.0),
        "samples_per_class": (*_I, 100),
        "test_samples_per_class": (*_I, 40),
        "token_channels": (*_I, 8),
        "coarse_strength": (*_F, 1.0),
        "fine_strength": (*_F, 1.0),
    },
    "train": {
        "epochs": (*_I, 30),
        "batch_size": (*_I, 16),
        "learning_rate": (*_F, 0.05),
        "momentum": (*_F, 0.9),
        "grad_clip": (*_F, 1.0),
        "aggregator_lr_scale": (*_F, 1.0),
        "seed": (*_I, 0),
    },
    "output": {
        "directory": (*_S, "runs/default"),
    },
    "ablation": {
        "seeds": (*_I, 5),
        "weight_grid": (_parse_triples, _fmt_triples,
                        ((0.1, 0.1, 0.1), (1.0, 0.1, 0.1),
                         (0.1, 1.0, 0.1), (0.1, 0.1, 1.0))),
    },
}


@dataclass
class ExperimentConfig:
    """All settings, flattened into one dict per section."""

    sections: dict = field(default_factory=dict)

    def __post_init__(self):
        full = {}
        for section, keys in SCHEMA.items():
            given = dict(self.sections.get(section, {}))
            full[section] = {k: given.pop(k, spec[2]) for k, spec in keys.items()}
            if given:
                raise ConfigurationError(
                    f"unknown key(s) in [{section}]: {sorted(given)}")
        for section in self.sections:
            if section not in SCHEMA:
                raise ConfigurationError(f"unknown section [{section}]")
        self.sections = full

    def __getitem__(self, section):
        return self.sections[section]

    # -- construction -----------------------------------------------------

    @classmethod
    def from_string(cls, text) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigurationError(f"malformed config: {exc}") from exc
        sections = {}
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigurationError(f"unknown section [{section}]")
            sections[section] = {}
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigurationError(
                        f"unknown key '{key}' in section [{section}]")
                parse = SCHEMA[section][key][0]
                try:
                    sections[section][key] = parse(raw)
                except ValueError as exc:
                    raise ConfigurationError(
                        f"bad value for {section}.{key}: {exc}") from exc
        return cls(sections)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_string(text)

    def to_string(self) -> str:
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for key, spec in keys.items():
                lines.append(f"{key} = {spec[1](self.sections[section][key])}")
            lines.append("")
        return "\n".join(lines)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_string())

    def with_overrides(self, overrides) -> "ExperimentConfig":
        """Apply 'section.key=value' strings on top of this config."""
        sections = {s: dict(v) for s, v in self.sections.items()}
        for item in overrides:
            head, sep, raw = item.partition("=")
            if not sep or "." not in head:
                raise ConfigurationError(
                    f"override must look like section.key=value, got {item!r}")
            section, _, key = head.partition(".")
            if section not in SCHEMA or key not in SCHEMA[section]:
                raise ConfigurationError(f"unknown override target {head!r}")
            try:
                sections[section][key] = SCHEMA[section][key][0](raw)
            except ValueError as exc:
                raise ConfigurationError(
                    f"bad value for {head}: {exc}") from exc
        return ExperimentConfig(sections)

    # -- typed views ------------------------------------------------------

    def model_config(self) -> ModelConfig:
        m, d = self["model"], self["data"]
        backbone = BackboneConfig(
            grid=d["grid"], input_channels=d["token_channels"],
            stage_widths=m["stage_widths"], heads=m["heads"])
        return ModelConfig(
            backbone=backbone,
            num_classes=d["num_coarse"] * d["fine_per_coarse"],
            num_hyperedges=m["num_hyperedges"],
            key_dim=m["key_dim"],
            fusion_ratios=m["fusion_ratios"],
            use_aggregator=m["use_aggregator"],
            gate_closed=m["gate_closed"],
            normalize_hyperedges=m["normalize_hyperedges"],
            contrast_levels=m["contrast_levels"],
        )

    def loss_weights(self) -> LossWeights:
        l = self["loss"]
        return LossWeights(alpha=l["alpha"], lam=l["lam"], tau=l["tau"],
                           beta=l["beta"], w_hcon=l["w_hcon"],
                           w_econ=l["w_econ"], w_hpop=l["w_hpop"],
                           curvature=l["curvature"])

    def data_spec(self) -> SyntheticSpec:
        """Spec for the pooled dataset (train + test slices per class)."""
        d = self["data"]
        return SyntheticSpec(
            num_coarse=d["num_coarse"], fine_per_coarse=d["fine_per_coarse"],
            grid=d["grid"], signal_patch_size=d["signal_patch_size"],
            noise_std=d["noise_std"],
            samples_per_class=d["samples_per_class"] + d["test_samples_per_class"],
            seed=self["train"]["seed"], token_channels=d["token_channels"],
            coarse_strength=d["coarse_strength"],
            fine_strength=d["fine_strength"])


def toy_config(*overrides) -> ExperimentConfig:
    """Minutes-scale CPU settings: 8 hyperedges, fusion ratios 8/4/1."""
    cfg = ExperimentConfig({
        "model": {"num_hyperedges": 8, "fusion_ratios": (8, 4, 1)},
    })
    return cfg.with_overrides(overrides) if overrides else cfg
