"""Full classification model: backbone -> token aggregation -> pooled head,
with hierarchical contrastive supervision on the region features."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import backbone as bb
from . import hypergraph as hg
from . import losses
from .autodiff import Tensor, as_tensor
from .errors import ConfigurationError
from .hierarchy import build_hierarchy

# component ids appended to the root seed so each parameter group draws from
# its own stream; adding or removing one component never shifts the others
STREAM_BACKBONE = 2
STREAM_AGGREGATOR = 3
STREAM_CLASSIFIER = 4
STREAM_BATCHES = 5


@dataclass
class ModelConfig:
    backbone: bb.BackboneConfig
    num_classes: int
    num_hyperedges: int = 8
    key_dim: int = 16
    fusion_ratios: tuple = (8, 4, 1)
    use_aggregator: bool = True
    gate_closed: bool = False
    normalize_hyperedges: bool = False
    contrast_levels: str = "root"

    def __post_init__(self):
        self.fusion_ratios = tuple(int(r) for r in self.fusion_ratios)
        if self.fusion_ratios[0] != self.num_hyperedges:
            raise ConfigurationError(
                f"fusion ratios {self.fusion_ratios} must start at "
                f"num_hyperedges={self.num_hyperedges}")
        final_tokens = self.backbone.tokens_at(self.backbone.num_stages - 1)
        if not self.use_aggregator and final_tokens % self.num_hyperedges != 0:
            raise ConfigurationError(
                f"without the aggregator, num_hyperedges={self.num_hyperedges} "
                f"must divide the final token count {final_tokens}")

    @property
    def aggregator(self) -> hg.AggregatorConfig:
        cfg = self.backbone
        return hg.AggregatorConfig(
            stage_widths=cfg.stage_widths,
            context_dim=cfg.stage_widths[-1],
            num_hyperedges=self.num_hyperedges,
            key_dim=self.key_dim,
            num_tokens=cfg.tokens_at(cfg.num_stages - 1),
            normalize_hyperedges=self.normalize_hyperedges,
        )


def init_model(cfg: ModelConfig, seed) -> dict:
    """All parameter arrays, each component on its own seed stream."""
    params = {}
    rng = np.random.default_rng([seed, STREAM_BACKBONE])
    for k, v in bb.init_backbone(cfg.backbone, rng).items():
        params[f"bb.{k}"] = v
    if cfg.use_aggregator:
        rng = np.random.default_rng([seed, STREAM_AGGREGATOR])
        for k, v in hg.init_params(cfg.aggregator, rng).items():
            params[f"agg.{k}"] = v
    rng = np.random.default_rng([seed, STREAM_CLASSIFIER])
    c = cfg.backbone.stage_widths[-1]
    params["cls.w"] = hg.uniform_init(rng, c, cfg.num_classes)
    params["cls.b"] = np.zeros(cfg.num_classes)
    params["cls.ln_g"] = np.ones(c)
    params["cls.ln_b"] = np.zeros(c)
    return params


def _sub(params, prefix):
    n = len(prefix)
    return {k[n:]: v for k, v in params.items() if k.startswith(prefix)}


def _uniform_region_leaves(tokens: Tensor, num_regions):
    """Fallback leaves when the aggregator is off: contiguous token groups."""
    n = tokens.shape[-2]
    group = n // num_regions
    avg = np.zeros((num_regions, n))
    for r in range(num_regions):
        avg[r, r * group:(r + 1) * group] = 1.0 / group
    return ad.matmul(Tensor(avg), tokens)


def model_forward(tokens, params, cfg: ModelConfig):
    """Forward pass for one batch (B, N, C0) or sample (N, C0).

    Returns a dict with logits, refined tokens, incidence, and the region
    features that seed the hierarchy.
    """
    stages = bb.backbone_forward(tokens, _sub(params, "bb."), cfg.backbone)
    incidence, regions = None, None
    if cfg.use_aggregator:
        x_hat, incidence, regions = hg.saam_forward(
            stages, _sub(params, "agg."), cfg.aggregator,
            gate_closed=cfg.gate_closed)
    else:
        x_hat = stages.tokens[-1]
        regions = _uniform_region_leaves(x_hat, cfg.num_hyperedges)
    pooled = x_hat.mean(axis=-2)
    if pooled.ndim == 1:
        pooled = pooled.reshape(1, pooled.shape[0])
    pooled = bb.layer_norm(pooled, params["cls.ln_g"], params["cls.ln_b"])
    logits = ad.matmul(pooled, params["cls.w"]) + params["cls.b"]
    return {"logits": logits, "tokens": x_hat, "incidence": incidence,
            "regions": regions, "stages": stages}


def batch_objective(tokens, labels, params, cfg: ModelConfig,
                    weights: losses.LossWeights, mode="split"):
    """Total training loss for one batch; returns (loss, breakdown, outputs)."""
    out = model_forward(tokens, params, cfg)
    ce = losses.cross_entropy(out["logits"], labels)
    breakdown = {"ce": ce.item(), "hcon": 0.0, "econ": 0.0, "hpop": 0.0}
    if weights.alpha > 0.0:
        regions = out["regions"]
        if regions.ndim == 2:
            regions = regions.reshape((1,) + regions.shape)
        tree = build_hierarchy(regions, cfg.fusion_ratios)
        aux, parts = losses.hhcl_total(tree, labels, weights, mode=mode,
                                       contrast_levels=cfg.contrast_levels)
        breakdown.update(parts)
        loss = ce + weights.alpha * aux
    else:
        loss = ce
    breakdown["total"] = loss.item()
    return loss, breakdown, out
