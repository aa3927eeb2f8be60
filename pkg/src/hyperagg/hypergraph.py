"""Token-to-region aggregation over a soft hypergraph.

Multi-scale context vectors seed a bank of learnable region prototypes; token
queries are matched against the prototypes to build a row-stochastic
participation (incidence) matrix A, and a two-step V->E->V message pass with a
gated residual produces refined tokens. All functions accept either a single
sample (N x C) or a leading batch axis (B x N x C).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor
from .errors import ConfigurationError, ValidationError

log = logging.getLogger(__name__)


@dataclass
class StageFeatures:
    """Per-stage token matrices and optional per-stage attention maps."""

    tokens: list  # stage s: Tensor (..., N_s, C_s)
    attention: list = None  # stage s: Tensor (..., heads, N_s, N_s) or None

    def __post_init__(self):
        if not self.tokens:
            raise ValidationError("StageFeatures needs at least one stage")
        if self.attention is None:
            self.attention = [None] * len(self.tokens)
        if len(self.attention) != len(self.tokens):
            raise ValidationError("one attention entry (or None) per stage required")

    @property
    def num_stages(self):
        return len(self.tokens)


@dataclass
class AggregatorConfig:
    """Static shape information for the aggregation module."""

    stage_widths: tuple  # channel width per backbone stage
    context_dim: int  # unified context width C (== final stage width)
    num_hyperedges: int  # M
    key_dim: int  # d_k
    num_tokens: int  # final-stage token count N (sizes the gate)
    normalize_hyperedges: bool = False

    def __post_init__(self):
        self.stage_widths = tuple(int(c) for c in self.stage_widths)
        total = 3 * len(self.stage_widths) * self.context_dim
        if total % self.num_hyperedges != 0:
            raise ConfigurationError(
                f"num_hyperedges={self.num_hyperedges} must divide "
                f"3*S*C = {total} for channel-wise regrouping")

    @property
    def num_stages(self):
        return len(self.stage_widths)

    @property
    def group_size(self):
        return 3 * self.num_stages * self.context_dim // self.num_hyperedges


def uniform_init(rng, fan_in, fan_out, shape=None):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape if shape is not None else (fan_in, fan_out))


def init_params(cfg: AggregatorConfig, rng) -> dict:
    """Fresh parameter arrays; scale-preserving uniform init, prototypes N(0, 0.02)."""
    C, M, dk, G = cfg.context_dim, cfg.num_hyperedges, cfg.key_dim, cfg.group_size
    params = {}
    for s, cs in enumerate(cfg.stage_widths):
        for kind in ("avg", "max", "attn"):
            params[f"ctx_{kind}_{s}"] = uniform_init(rng, cs, C)
    params["phi_w1"] = uniform_init(rng, G, dk)
    params["phi_b1"] = np.zeros(dk)
    params["phi_w2"] = uniform_init(rng, dk, dk)
    params["phi_b2"] = np.zeros(dk)
    params["prototypes"] = rng.normal(0.0, 0.02, size=(M, dk))
    params["w_query"] = uniform_init(rng, C, dk)
    params["w_edge"] = uniform_init(rng, C, C)
    params["w_node"] = uniform_init(rng, C, C)
    # start nearly closed so early training is close to a passthrough and
    # the refinement path ramps in as its weights become useful
    params["gate"] = np.full(cfg.num_tokens, -2.0)
    return params


def importance_vector(attn) -> Tensor:
    """Per-token received attention: head-mean, column-mean, renormalized to sum 1."""
    attn = as_tensor(attn)
    row_sums = attn.data.sum(axis=-1)
    if np.max(np.abs(row_sums - 1.0)) > 1e-4:
        raise ValidationError("attention rows must be stochastic within 1e-4")
    head_mean = attn.mean(axis=-3)
    col_mean = head_mean.mean(axis=-2)
    total = ad.tsum(col_mean, axis=-1, keepdims=True)
    return col_mean / total


def context_generate(stages: StageFeatures, params, cfg: AggregatorConfig) -> Tensor:
    """Per-stage avg/max/attention-weighted pooled contexts, projected to width C.

    Output stacks 3 rows per stage in stage order: (..., 3S, C). A stage with
    no attention map falls back to the average context for its attn slot.
    """
    rows = []
    for s in range(stages.num_stages):
        X = as_tensor(stages.tokens[s])
        avg = ad.matmul(X.mean(axis=-2, keepdims=True), params[f"ctx_avg_{s}"])
        mx = ad.matmul(X.max(axis=-2, keepdims=True), params[f"ctx_max_{s}"])
        attn_map = stages.attention[s]
        if attn_map is None:
            log.info("stage %d has no attention map; attn context falls back to avg", s)
            pooled = X.mean(axis=-2, keepdims=True)
        else:
            v = importance_vector(attn_map)
            v2 = v.reshape(v.shape[:-1] + (1, v.shape[-1]))
            pooled = ad.matmul(v2, X)
        att = ad.matmul(pooled, params[f"ctx_attn_{s}"])
        rows.extend([avg, mx, att])
    return ad.concat(rows, axis=-2)


def prototype_generate(ctx: Tensor, params, cfg: AggregatorConfig) -> Tensor:
    """Regroup the context stack into M channel groups and emit prototypes
    K_m = phi(group_m) + P_m with phi shared across groups."""
    M, G = cfg.num_hyperedges, cfg.group_size
    groups = ctx.reshape(ctx.shape[:-2] + (M, G))
    hidden = ad.relu(ad.matmul(groups, params["phi_w1"]) + params["phi_b1"])
    phi = ad.matmul(hidden, params["phi_w2"]) + params["phi_b2"]
    return phi + params["prototypes"]


def build_incidence(tokens, prototypes, w_query, key_dim) -> Tensor:
    """Row-stochastic participation matrix from scaled query-prototype affinity."""
    X, K = as_tensor(tokens), as_tensor(prototypes)
    Q = ad.matmul(X, w_query)
    logits = ad.matmul(Q, ad.transpose(K)) * (1.0 / np.sqrt(float(key_dim)))
    return ad.softmax_rows(logits)


def hyperedge_aggregate(incidence, tokens, w_edge, normalize=False) -> Tensor:
    """V->E step: H_e = (A^T X) W_e; optional column-stochastic normalization."""
    A, X = as_tensor(incidence), as_tensor(tokens)
    if normalize:
        A = A / ad.tsum(A, axis=-2, keepdims=True)
    return ad.matmul(ad.matmul(ad.transpose(A), X), w_edge)


def node_update(incidence, edge_features, w_node) -> Tensor:
    """E->V step: X' = (A H_e) W_v."""
    A, He = as_tensor(incidence), as_tensor(edge_features)
    return ad.matmul(ad.matmul(A, He), w_node)


def gated_residual(tokens, update, gate_logits, closed=False) -> Tensor:
    """X_hat = X + sigmoid(g) * X', gate broadcast along channels.

    ``closed`` multiplies the update by an exact 0.0 so the output is
    bit-identical to the input tokens.
    """
    X, Xp = as_tensor(tokens), as_tensor(update)
    if closed:
        return X + Xp * 0.0
    g = ad.sigmoid(as_tensor(gate_logits))
    g = g.reshape(g.shape + (1,))
    return X + g * Xp


def saam_forward(stages: StageFeatures, params, cfg: AggregatorConfig,
                 gate_closed=False):
    """Full aggregation pass; returns (refined tokens, incidence, edge features)."""
    ctx = context_generate(stages, params, cfg)
    K = prototype_generate(ctx, params, cfg)
    X = as_tensor(stages.tokens[-1])
    A = build_incidence(X, K, params["w_query"], cfg.key_dim)
    He = hyperedge_aggregate(A, X, params["w_edge"],
                             normalize=cfg.normalize_hyperedges)
    Xp = node_update(A, He, params["w_node"])
    X_hat = gated_residual(X, Xp, params["gate"], closed=gate_closed)
    return X_hat, A, He
