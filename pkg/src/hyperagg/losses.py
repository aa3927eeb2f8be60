"""Contrastive and hierarchy-preservation losses plus the total objective.

Distances mix Euclidean and Lorentzian geometry: features are lifted onto the
curvature-K hyperboloid through the exponential map at the origin, never
optimized on the manifold directly. The supervised contrastive term follows
the standard positives/negatives-within-batch form with a temperature; the
partial-order term penalizes hyperbolic child-parent separation per level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import lorentz
from .autodiff import Tensor, as_tensor
from .errors import BatchError, ConfigurationError, ParameterError, ValidationError
from .hierarchy import HierarchyTree

NEG_MASK = -1e30  # additive logit mask excluding the anchor itself
EU_SMOOTH = 1e-12  # floor under squared Euclidean distances; bounds the sqrt
# gradient at coincident points while shifting distances by at most 1e-6


@dataclass
class LossWeights:
    """Every coefficient of the training objective."""

    alpha: float = 1.0  # weight of the auxiliary loss inside the total objective
    lam: float = 1.0  # hyperbolic share of the hybrid distance
    tau: float = 0.1  # contrastive temperature
    beta: float = 0.1  # hierarchy weight in hybrid mode
    w_hcon: float = 0.1  # split mode: hyperbolic contrastive weight
    w_econ: float = 0.1  # split mode: Euclidean contrastive weight
    w_hpop: float = 0.1  # split mode: partial-order weight
    curvature: float = 0.1

    def __post_init__(self):
        if not (self.tau > 0.0):
            raise ParameterError(f"temperature must be positive, got {self.tau}")
        if not (self.curvature > 0.0):
            raise ParameterError(f"curvature must be positive, got {self.curvature}")
        for name in ("alpha", "lam", "beta", "w_hcon", "w_econ", "w_hpop"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"loss weight {name} must be nonnegative")


def hybrid_distance(z_i, z_j, lam, curvature) -> Tensor:
    """||z_i - z_j|| + lam * d_L(exp0(z_i), exp0(z_j)) for two feature vectors."""
    z_i, z_j = as_tensor(z_i), as_tensor(z_j)
    diff = z_i - z_j
    # tiny floor keeps the sqrt gradient bounded for near-coincident inputs
    eu = ad.sqrt(ad.tsum(diff * diff) + EU_SMOOTH)
    hyp = lorentz.lorentz_distance_t(lorentz.exp_map_t(z_i, curvature),
                                     lorentz.exp_map_t(z_j, curvature),
                                     curvature)
    return eu + lam * hyp


def pairwise_distances(Z: Tensor, lam, curvature, metric="hybrid") -> Tensor:
    """All-pairs distance matrix (B x B); the diagonal is exactly zero.

    metric: "hybrid", "euclidean", or "hyperbolic".
    """
    B = Z.shape[0]
    eye = np.eye(B)
    off = 1.0 - eye
    r = ad.tsum(Z * Z, axis=1)
    G = ad.matmul(Z, ad.transpose(Z))
    need_eu = metric in ("hybrid", "euclidean")
    need_hyp = metric in ("hybrid", "hyperbolic")
    if not (need_eu or need_hyp):
        raise ConfigurationError(f"unknown distance metric '{metric}'")
    parts = []
    if need_eu:
        sq = ad.clamp_min(r.reshape(B, 1) + r.reshape(1, B) - 2.0 * G, 0.0)
        # +eye keeps sqrt smooth on the (masked-out) diagonal; the floor
        # bounds the gradient for near-coincident off-diagonal pairs
        parts.append(ad.sqrt(sq + eye + EU_SMOOTH) * off)
    if need_hyp:
        x0 = ad.sqrt(r + 1.0 / curvature).reshape(B, 1)
        inner = G - ad.matmul(x0, ad.transpose(x0))
        arg = ad.clamp_min(inner * (-curvature), lorentz.DIST_CLAMP)
        hyp = ad.arcosh(arg) * (1.0 / np.sqrt(curvature)) * off
        parts.append(hyp if metric == "hyperbolic" else hyp * lam)
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out


def supervised_contrastive(Z, labels, tau, lam, curvature, metric="hybrid") -> Tensor:
    """Supervised contrastive loss over a feature batch.

    Positives share the anchor's label; anchors without positives are
    skipped, and the anchor-average of per-anchor terms is returned (zero
    when every anchor is skipped).
    """
    Z = as_tensor(Z)
    labels = np.asarray(labels)
    if Z.ndim != 2 or Z.shape[0] != labels.shape[0]:
        raise BatchError(
            f"features {Z.shape} and labels {labels.shape} do not align")
    B = Z.shape[0]
    if B < 2:
        raise BatchError(f"contrastive loss needs a batch of >= 2, got {B}")
    pos = (labels[:, None] == labels[None, :]).astype(float) * (1.0 - np.eye(B))
    counts = pos.sum(axis=1)
    anchors = counts > 0.0
    if not anchors.any():
        return Tensor(0.0, Z.tape) if Z.tape is None else Z.sum() * 0.0

    D = pairwise_distances(Z, lam, curvature, metric=metric)
    logits = D * (-1.0 / tau) + NEG_MASK * np.eye(B)
    m = logits.max(axis=1)
    lse = ad.log(ad.tsum(ad.exp(logits - m.reshape(B, 1)), axis=1)) + m
    log_prob = logits - lse.reshape(B, 1)
    per_anchor = ad.tsum(log_prob * pos, axis=1) / np.maximum(counts, 1.0)
    return -ad.tsum(per_anchor * anchors) * (1.0 / anchors.sum())


def popl(tree: HierarchyTree, curvature) -> Tensor:
    """Partial-order preservation: per level transition, the mean hyperbolic
    child-parent distance (through ReLU), averaged over transitions."""
    if tree.num_levels < 2:
        raise ConfigurationError("partial-order loss needs at least two levels")
    terms = []
    for t in range(tree.num_levels - 1):
        children = tree.levels[t]
        parents = tree.levels[t + 1]
        pm = tree.parent_maps[t]
        if tree.batched:
            n_child, n_parent = children.shape[1], parents.shape[1]
            gather = np.zeros((pm.shape[0], n_child, n_parent))
            rows = np.arange(n_child)
            for b in range(pm.shape[0]):
                gather[b, rows, pm[b]] = 1.0
            aligned = ad.matmul(Tensor(gather), parents)
        else:
            gather = np.zeros((children.shape[0], parents.shape[0]))
            gather[np.arange(children.shape[0]), pm] = 1.0
            aligned = ad.matmul(Tensor(gather), parents)
        d = lorentz.lorentz_distance_t(lorentz.exp_map_t(aligned, curvature),
                                       lorentz.exp_map_t(children, curvature),
                                       curvature)
        terms.append(ad.relu(d).mean())
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total * (1.0 / len(terms))


def hhcl_total(tree: HierarchyTree, labels, weights: LossWeights, mode="split",
               contrast_levels="root"):
    """Combined hierarchical contrastive objective.

    mode="hybrid": contrastive with the hybrid distance plus beta * popl.
    mode="split":  w_hcon * hyperbolic contrastive + w_econ * Euclidean
                   contrastive + w_hpop * popl.

    Returns (total, breakdown) where breakdown holds plain floats for the
    hcon/econ/hpop components.
    """
    if mode not in ("hybrid", "split"):
        raise ConfigurationError(f"unknown loss mode '{mode}'")
    if contrast_levels not in ("root", "all"):
        raise ConfigurationError(f"unknown contrast_levels '{contrast_levels}'")
    labels = np.asarray(labels)

    def feature_batches():
        if contrast_levels == "root":
            root = tree.root
            Z = root if root.ndim == 2 else root.reshape(1, root.shape[-1])
            yield Z, labels
        else:
            for level in tree.levels:
                if level.ndim == 2:  # single sample: regions share its label
                    yield level, np.repeat(labels, level.shape[0])
                else:
                    B, n, C = level.shape
                    yield level.reshape(B * n, C), np.repeat(labels, n)

    def mean_contrastive(metric):
        parts = [supervised_contrastive(Z, lab, weights.tau, weights.lam,
                                        weights.curvature, metric=metric)
                 for Z, lab in feature_batches()]
        total = parts[0]
        for p in parts[1:]:
            total = total + p
        return total * (1.0 / len(parts))

    hpop = popl(tree, weights.curvature)
    if mode == "hybrid":
        con = mean_contrastive("hybrid")
        total = con + weights.beta * hpop
        breakdown = {"hcon": con.item(), "econ": 0.0, "hpop": hpop.item()}
    else:
        hcon = mean_contrastive("hyperbolic")
        econ = mean_contrastive("euclidean")
        total = (weights.w_hcon * hcon + weights.w_econ * econ
                 + weights.w_hpop * hpop)
        breakdown = {"hcon": hcon.item(), "econ": econ.item(), "hpop": hpop.item()}
    return total, breakdown


def cross_entropy(logits, labels) -> Tensor:
    """Log-sum-exp stabilized cross-entropy, mean over the batch."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.intp)
    B, num_classes = logits.shape
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValidationError(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{labels.min()}, {labels.max()}]")
    m = logits.max(axis=1)
    lse = ad.log(ad.tsum(ad.exp(logits - m.reshape(B, 1)), axis=1)) + m
    onehot = np.zeros((B, num_classes))
    onehot[np.arange(B), labels] = 1.0
    picked = ad.tsum(logits * onehot, axis=1)
    return (lse - picked).mean()


def total_loss(logits, labels, hhcl_value, alpha) -> Tensor:
    """Cross-entropy plus alpha times the auxiliary hierarchical loss."""
    return cross_entropy(logits, labels) + alpha * as_tensor(hhcl_value)
