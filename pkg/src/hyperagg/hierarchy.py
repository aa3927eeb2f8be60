"""Similarity-driven hierarchy over region features.

Leaves (one row per hyperedge) are merged bottom-up into progressively
smaller levels whose sizes follow the configured fusion ratios, ending at a
single root. Merging is greedy: the pair of not-yet-merged nodes with the
highest cosine similarity is replaced by its mean; once no unmerged pair
remains, merged clusters may merge again. Ties break toward the lowest index
pair, so the construction is deterministic.

The discrete structure is computed from raw values; level features are then
produced with constant averaging matrices, so gradients flow from every
level back to the leaves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor
from .errors import ConfigurationError


@dataclass
class HierarchyTree:
    """Leveled region features with child->parent maps.

    ``levels[l]`` has shape (n_l, C), or (B, n_l, C) for a batched tree.
    ``parent_maps[l][child] = parent`` links level l to level l+1 (leading
    batch axis when batched).
    """

    levels: list
    parent_maps: list
    fusion_ratios: tuple

    @property
    def num_levels(self):
        return len(self.levels)

    @property
    def batched(self):
        return self.levels[0].ndim == 3

    @property
    def root(self) -> Tensor:
        """Root features: (C,) or (B, C)."""
        r = self.levels[-1]
        return r.reshape(r.shape[:-2] + (r.shape[-1],))


def _validate_ratios(fusion_ratios, num_leaves):
    ratios = tuple(int(r) for r in fusion_ratios)
    if len(ratios) < 2 or ratios[0] != num_leaves or ratios[-1] != 1:
        raise ConfigurationError(
            f"fusion ratios {ratios} must start at the leaf count "
            f"{num_leaves} and end at 1")
    if any(b >= a for a, b in zip(ratios, ratios[1:])):
        raise ConfigurationError(f"fusion ratios {ratios} must be strictly decreasing")
    return ratios


def _cosine(a, b):
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    return float(a @ b) / max(na * nb, 1e-12)


def _reduce_structure(feats, target):
    """Greedy merge of len(feats) clusters down to ``target``.

    Returns (parent_map, averaging matrix) for this transition.
    """
    n = feats.shape[0]
    clusters = [[i] for i in range(n)]
    means = [feats[i].copy() for i in range(n)]
    fresh = [True] * n  # not yet produced by a merge this transition
    while len(clusters) > target:
        both_fresh = any(fresh[i] and fresh[j]
                         for i in range(len(clusters))
                         for j in range(i + 1, len(clusters)))
        best, best_sim = None, -np.inf
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                if both_fresh and not (fresh[i] and fresh[j]):
                    continue
                sim = _cosine(means[i], means[j])
                if sim > best_sim:
                    best, best_sim = (i, j), sim
        if best is None:  # all similarities non-finite: merge lowest indices
            best = (0, 1) if not both_fresh else next(
                (i, j) for i in range(len(clusters))
                for j in range(i + 1, len(clusters)) if fresh[i] and fresh[j])
        i, j = best
        clusters[i] = clusters[i] + clusters[j]
        members = feats[clusters[i]]
        means[i] = members.mean(axis=0)
        fresh[i] = False
        del clusters[j], means[j], fresh[j]
    parent_map = np.empty(n, dtype=np.intp)
    avg = np.zeros((target, n))
    for p, members in enumerate(clusters):
        for child in members:
            parent_map[child] = p
            avg[p, child] = 1.0 / len(members)
    return parent_map, avg


def build_hierarchy(leaves, fusion_ratios) -> HierarchyTree:
    """Build the leveled tree above ``leaves`` ((M, C) or (B, M, C))."""
    leaves = as_tensor(leaves)
    if leaves.ndim not in (2, 3):
        raise ConfigurationError(
            f"leaves must be (M, C) or (B, M, C), got shape {leaves.shape}")
    ratios = _validate_ratios(fusion_ratios, leaves.shape[-2])

    levels = [leaves]
    parent_maps = []
    for target in ratios[1:]:
        current = levels[-1]
        if leaves.ndim == 2:
            pm, avg = _reduce_structure(current.data, target)
            nxt = ad.matmul(Tensor(avg), current)
        else:
            pms, avgs = [], []
            for b in range(current.shape[0]):
                pm_b, avg_b = _reduce_structure(current.data[b], target)
                pms.append(pm_b)
                avgs.append(avg_b)
            pm = np.stack(pms)
            nxt = ad.matmul(Tensor(np.stack(avgs)), current)
        parent_maps.append(pm)
        levels.append(nxt)
    return HierarchyTree(levels=levels, parent_maps=parent_maps,
                         fusion_ratios=ratios)
