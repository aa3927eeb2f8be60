"""Tiny multi-stage self-attention backbone.

Each stage is one residual multi-head self-attention block; between stages
the token grid is downsampled 2x per side by concatenating 2x2 neighborhoods
and projecting to the next stage width. Stage s therefore carries
grid^2 / 4^(s-1) tokens. Attention maps are returned per stage so the
context generator can form attention-weighted pooling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor
from .errors import ConfigurationError
from .hypergraph import StageFeatures, uniform_init


@dataclass
class BackboneConfig:
    grid: int = 16
    input_channels: int = 8
    stage_widths: tuple = (16, 32, 64)
    heads: tuple = (2, 2, 4)

    def __post_init__(self):
        self.stage_widths = tuple(int(c) for c in self.stage_widths)
        self.heads = tuple(int(h) for h in self.heads)
        if len(self.heads) != len(self.stage_widths):
            raise ConfigurationError("one head count per stage required")
        if self.grid % (2 ** (len(self.stage_widths) - 1)) != 0:
            raise ConfigurationError(
                f"grid={self.grid} not divisible by 2^(stages-1)")
        for c, h in zip(self.stage_widths, self.heads):
            if c % h != 0:
                raise ConfigurationError(
                    f"stage width {c} not divisible by head count {h}")

    @property
    def num_stages(self):
        return len(self.stage_widths)

    def tokens_at(self, stage):
        return self.grid * self.grid // 4 ** stage


def init_backbone(cfg: BackboneConfig, rng) -> dict:
    params = {
        "embed": uniform_init(rng, cfg.input_channels, cfg.stage_widths[0]),
        "pos": rng.normal(0.0, 0.02, size=(cfg.tokens_at(0), cfg.stage_widths[0])),
    }
    for s, c in enumerate(cfg.stage_widths):
        for name in ("wq", "wk", "wv", "wo"):
            params[f"{name}_{s}"] = uniform_init(rng, c, c)
        params[f"ln_g_{s}"] = np.ones(c)
        params[f"ln_b_{s}"] = np.zeros(c)
        if s + 1 < cfg.num_stages:
            params[f"down_{s}"] = uniform_init(rng, 4 * c, cfg.stage_widths[s + 1])
    return params


def layer_norm(x: Tensor, gain, bias, eps=1e-6) -> Tensor:
    """Normalize over the channel axis, then scale and shift."""
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / ad.sqrt(var + eps) * gain + bias


def _merge_indices(side):
    """Row-major ids of the four children of each 2x2 cell, per corner."""
    half = side // 2
    i, j = np.meshgrid(np.arange(half), np.arange(half), indexing="ij")
    base = 2 * i * side + 2 * j
    return [base.ravel(), (base + 1).ravel(),
            (base + side).ravel(), (base + side + 1).ravel()]


def attention_block(x: Tensor, params, stage, heads) -> tuple:
    """Residual multi-head self-attention; returns (tokens, attn maps)."""
    n, c = x.shape[-2], x.shape[-1]
    dh = c // heads
    lead = x.shape[:-2]

    def split_heads(t):  # (..., N, C) -> (..., H, N, dh), head-major channels
        return ad.swapaxes(t.reshape(lead + (n, heads, dh)), -3, -2)

    normed = layer_norm(x, params[f"ln_g_{stage}"], params[f"ln_b_{stage}"])
    q = split_heads(ad.matmul(normed, params[f"wq_{stage}"]))
    k = split_heads(ad.matmul(normed, params[f"wk_{stage}"]))
    v = split_heads(ad.matmul(normed, params[f"wv_{stage}"]))
    attn = ad.softmax_rows(
        ad.matmul(q, ad.transpose(k)) * (1.0 / np.sqrt(dh)))
    heads_out = ad.swapaxes(ad.matmul(attn, v), -3, -2).reshape(lead + (n, c))
    out = ad.matmul(heads_out, params[f"wo_{stage}"])
    return x + out, attn


def backbone_forward(tokens, params, cfg: BackboneConfig) -> StageFeatures:
    """Run all stages; ``tokens`` is (N, C0) or (B, N, C0)."""
    x = ad.matmul(as_tensor(tokens), params["embed"]) + params["pos"]
    side = cfg.grid
    stage_tokens, stage_attn = [], []
    for s in range(cfg.num_stages):
        x, attn = attention_block(x, params, s, cfg.heads[s])
        stage_tokens.append(x)
        stage_attn.append(attn)
        if s + 1 < cfg.num_stages:
            corners = _merge_indices(side)
            axis = x.ndim - 2
            merged = ad.concat([ad.take(x, idx, axis=axis) for idx in corners],
                               axis=-1)
            x = ad.matmul(merged, params[f"down_{s}"])
            side //= 2
    return StageFeatures(tokens=stage_tokens, attention=stage_attn)
