import math

import numpy as np
import pytest

from hyperagg import losses
from hyperagg.autodiff import Tensor, gradient_check, gradient_check_multi
from hyperagg.errors import (BatchError, ConfigurationError, ParameterError,
                             ValidationError)
from hyperagg.hierarchy import HierarchyTree, build_hierarchy
from hyperagg.losses import (LossWeights, cross_entropy, hhcl_total,
                             hybrid_distance, popl, supervised_contrastive,
                             total_loss)

CLAMP_RESIDUE = math.acosh(1.0 + 1e-7)  # distance left at coincidence by the clamp


def ref_distance(zi, zj, lam, K, metric):
    """Scalar reference distance, independent of the tensor path."""
    eu = float(np.linalg.norm(np.asarray(zi) - np.asarray(zj)))
    x0i = math.sqrt(1.0 / K + np.dot(zi, zi))
    x0j = math.sqrt(1.0 / K + np.dot(zj, zj))
    inner = -x0i * x0j + float(np.dot(zi, zj))
    hyp = math.acosh(max(-K * inner, 1.0 + 1e-7)) / math.sqrt(K)
    if metric == "euclidean":
        return eu
    if metric == "hyperbolic":
        return hyp
    return eu + lam * hyp


def ref_contrastive(Z, labels, tau, lam, K, metric="hybrid"):
    """Brute-force triple enumeration of the supervised contrastive loss."""
    Z = np.asarray(Z)
    B = len(labels)
    total, anchors = 0.0, 0
    for i in range(B):
        positives = [p for p in range(B) if p != i and labels[p] == labels[i]]
        if not positives:
            continue
        anchors += 1
        acc = 0.0
        for p in positives:
            num = math.exp(-ref_distance(Z[i], Z[p], lam, K, metric) / tau)
            den = sum(math.exp(-ref_distance(Z[i], Z[a], lam, K, metric) / tau)
                      for a in range(B) if a != i)
            acc += math.log(num / den)
        total += -acc / len(positives)
    return total / anchors if anchors else 0.0


# --- hybrid distance ---------------------------------------------------------

def test_hybrid_distance_coincident_points():
    z = np.array([0.4, -0.2])
    d = hybrid_distance(z, z, lam=1.0, curvature=1.0).item()
    # the Euclidean term carries only the smoothing floor (sqrt(1e-12) = 1e-6,
    # well inside the 1e-6 coincidence budget); the hyperbolic term keeps the
    # clamp residue
    assert d <= CLAMP_RESIDUE + 1e-6 + 1e-12


def test_hybrid_distance_pure_euclidean():
    zi, zj = np.array([1.0, 2.0]), np.array([-1.0, 0.5])
    d = hybrid_distance(zi, zj, lam=0.0, curvature=1.0).item()
    assert abs(d - np.linalg.norm(zi - zj)) < 1e-12


def test_hybrid_distance_lorentz_oracle():
    zi = np.array([math.sqrt(3.0), 0.0])
    zj = np.zeros(2)
    d = hybrid_distance(zi, zj, lam=1.0, curvature=1.0).item()
    assert abs(d - (math.sqrt(3.0) + math.acosh(2.0))) < 1e-7
    assert abs(d - 3.0490087) < 1e-6


def test_hybrid_distance_gradient():
    rng = np.random.default_rng(0)
    zi = rng.normal(size=3)
    zj = zi + 0.01  # near coincidence, separation 1e-2 scale
    err = gradient_check_multi(
        lambda xs: hybrid_distance(xs[0], xs[1], lam=1.0, curvature=0.1),
        [zi, zj], h=1e-5)
    assert err < 1e-4


# --- supervised contrastive --------------------------------------------------

def test_contrastive_two_same_label():
    Z = np.array([[1.0, 0.0], [0.0, 2.0]])
    val = supervised_contrastive(Z, [3, 3], tau=0.1, lam=1.0, curvature=0.1).item()
    assert abs(val) < 1e-12  # single positive equals the whole denominator


def test_contrastive_two_different_labels():
    Z = np.array([[1.0, 0.0], [0.0, 2.0]])
    val = supervised_contrastive(Z, [0, 1], tau=0.1, lam=1.0, curvature=0.1).item()
    assert val == 0.0


def test_contrastive_three_sample_enumeration():
    rng = np.random.default_rng(1)
    Z = rng.normal(size=(3, 4)) * 0.5
    labels = [0, 0, 1]
    got = supervised_contrastive(Z, labels, tau=0.1, lam=1.0, curvature=0.1).item()
    want = ref_contrastive(Z, labels, tau=0.1, lam=1.0, K=0.1)
    assert abs(got - want) < 1e-10


@pytest.mark.parametrize("metric", ["hybrid", "euclidean", "hyperbolic"])
def test_contrastive_brute_force_oracle(metric):
    rng = np.random.default_rng(2)
    for _ in range(50):
        B = int(rng.integers(2, 5))
        Z = rng.normal(size=(B, 3))
        labels = rng.integers(0, 3, size=B)
        got = supervised_contrastive(Z, labels, tau=0.1, lam=1.0,
                                     curvature=0.1, metric=metric).item()
        want = ref_contrastive(Z, labels, tau=0.1, lam=1.0, K=0.1, metric=metric)
        assert abs(got - want) < 1e-8


def test_contrastive_coincident_batch_value():
    for B in (2, 3, 4, 6):
        Z = np.tile([[0.2, -0.1]], (B, 1))
        labels = np.zeros(B, dtype=int)
        val = supervised_contrastive(Z, labels, tau=0.1, lam=1.0,
                                     curvature=0.1).item()
        assert abs(val - math.log(B - 1)) < 1e-10


def test_contrastive_permutation_invariance():
    rng = np.random.default_rng(3)
    Z = rng.normal(size=(6, 4))
    labels = np.array([0, 1, 0, 2, 1, 0])
    base = supervised_contrastive(Z, labels, tau=0.1, lam=1.0, curvature=0.1).item()
    perm = rng.permutation(6)
    permuted = supervised_contrastive(Z[perm], labels[perm], tau=0.1, lam=1.0,
                                      curvature=0.1).item()
    assert abs(base - permuted) < 1e-10


def test_contrastive_batch_errors():
    with pytest.raises(BatchError):
        supervised_contrastive(np.zeros((1, 2)), [0], tau=0.1, lam=1.0,
                               curvature=0.1)


def test_contrastive_gradient():
    rng = np.random.default_rng(4)
    Z = rng.normal(size=(4, 3)) * 0.5
    Z[1] = Z[0] + 0.01  # include a nearly coincident positive pair
    labels = [0, 0, 1, 1]

    def f(xs):
        return supervised_contrastive(xs[0], labels, tau=0.1, lam=1.0,
                                      curvature=0.1)

    assert gradient_check_multi(f, [Z], h=1e-5) < 1e-4


# --- partial order preservation ----------------------------------------------

def manual_tree(levels, parent_maps, ratios):
    return HierarchyTree(levels=[Tensor(l) for l in levels],
                         parent_maps=[np.asarray(p) for p in parent_maps],
                         fusion_ratios=ratios)


def test_popl_coincident_levels_leaves_only_clamp_residue():
    feats = np.array([[0.5, -0.5]])
    tree = manual_tree([feats, feats, feats],
                       [np.array([0]), np.array([0])], (1, 1, 1))
    for K in (0.1, 1.0):
        val = popl(tree, K).item()
        assert val <= CLAMP_RESIDUE / math.sqrt(K) + 1e-12


def test_popl_single_pair_lorentz_oracle():
    child = np.array([[math.sqrt(3.0), 0.0]])
    parent = np.zeros((1, 2))
    tree = manual_tree([child, parent], [np.array([0])], (1, 1))
    assert abs(popl(tree, 1.0).item() - math.acosh(2.0)) < 1e-7


def test_popl_zero_features():
    tree = build_hierarchy(np.zeros((4, 3)), (4, 2, 1))
    val = popl(tree, 0.1).item()
    assert val <= CLAMP_RESIDUE / math.sqrt(0.1) + 1e-12


def test_popl_single_level_error():
    tree = HierarchyTree(levels=[Tensor(np.zeros((2, 2)))], parent_maps=[],
                         fusion_ratios=(2,))
    with pytest.raises(ConfigurationError):
        popl(tree, 1.0)


def test_popl_nonnegative_and_gradient():
    rng = np.random.default_rng(5)
    leaves = rng.normal(size=(4, 3))

    def f(x):
        tree = build_hierarchy(x, (4, 2, 1))
        return popl(tree, 0.1)

    assert popl(build_hierarchy(leaves, (4, 2, 1)), 0.1).item() >= 0.0
    assert gradient_check(f, leaves, h=1e-5) < 1e-4


def test_popl_batched_matches_per_sample_mean():
    rng = np.random.default_rng(6)
    leaves = rng.normal(size=(3, 4, 2))
    batched = popl(build_hierarchy(leaves, (4, 2, 1)), 0.1).item()
    singles = [popl(build_hierarchy(leaves[b], (4, 2, 1)), 0.1).item()
               for b in range(3)]
    assert abs(batched - np.mean(singles)) < 1e-12


# --- combined objectives -----------------------------------------------------

def test_hhcl_trivial_zero():
    # beta=0, trivial tree, two same-label samples at separated points
    leaves = np.stack([np.full((2, 2), 0.1), np.full((2, 2), 0.1)])
    tree = build_hierarchy(leaves, (2, 1))
    w = LossWeights(beta=0.0, curvature=0.1)
    total, _ = hhcl_total(tree, [0, 0], w, mode="hybrid")
    assert abs(total.item()) < 1e-12


def test_hhcl_split_weight_masking():
    rng = np.random.default_rng(7)
    leaves = rng.normal(size=(4, 2, 3))
    tree = build_hierarchy(leaves, (2, 1))
    w = LossWeights(w_hcon=0.0, w_econ=0.0, w_hpop=0.7, curvature=0.1)
    total, parts = hhcl_total(tree, [0, 0, 1, 1], w, mode="split")
    assert abs(total.item() - 0.7 * parts["hpop"]) < 1e-12


def test_hhcl_matches_component_composition():
    rng = np.random.default_rng(8)
    leaves = rng.normal(size=(4, 4, 3))
    labels = [0, 0, 1, 1]
    tree = build_hierarchy(leaves, (4, 2, 1))
    w = LossWeights()  # paper defaults
    total, parts = hhcl_total(tree, labels, w, mode="split")
    root = tree.root
    hcon = supervised_contrastive(root, labels, w.tau, w.lam, w.curvature,
                                  metric="hyperbolic").item()
    econ = supervised_contrastive(root, labels, w.tau, w.lam, w.curvature,
                                  metric="euclidean").item()
    hpop = popl(tree, w.curvature).item()
    assert abs(total.item() - (0.1 * hcon + 0.1 * econ + 0.1 * hpop)) < 1e-12

    total_h, _ = hhcl_total(tree, labels, w, mode="hybrid")
    con = supervised_contrastive(root, labels, w.tau, w.lam, w.curvature,
                                 metric="hybrid").item()
    assert abs(total_h.item() - (con + w.beta * hpop)) < 1e-12


def test_hhcl_unknown_mode():
    tree = build_hierarchy(np.zeros((2, 2, 2)), (2, 1))
    with pytest.raises(ConfigurationError):
        hhcl_total(tree, [0, 1], LossWeights(), mode="nope")


def test_hhcl_multi_level_contrast_runs():
    rng = np.random.default_rng(9)
    leaves = rng.normal(size=(4, 4, 3))
    tree = build_hierarchy(leaves, (4, 2, 1))
    total, _ = hhcl_total(tree, [0, 0, 1, 1], LossWeights(), mode="split",
                          contrast_levels="all")
    assert np.isfinite(total.item())


def test_loss_weight_validation():
    with pytest.raises(ParameterError):
        LossWeights(tau=0.0)
    with pytest.raises(ParameterError):
        LossWeights(curvature=-0.1)
    with pytest.raises(ParameterError):
        LossWeights(w_econ=-1.0)


# --- total objective ---------------------------------------------------------

def test_cross_entropy_uniform_logits():
    logits = np.zeros((5, 4))
    val = cross_entropy(logits, [0, 1, 2, 3, 0]).item()
    assert abs(val - math.log(4.0)) < 1e-12
    assert abs(val - 1.3862944) < 1e-7


def test_total_loss_composition():
    logits = np.zeros((2, 4))
    labels = [0, 1]
    assert abs(total_loss(logits, labels, 0.5, alpha=0.0).item()
               - math.log(4.0)) < 1e-12
    assert abs(total_loss(logits, labels, Tensor(0.5), alpha=1.0).item()
               - (math.log(4.0) + 0.5)) < 1e-12


def test_cross_entropy_label_validation():
    with pytest.raises(ValidationError):
        cross_entropy(np.zeros((2, 3)), [0, 3])


def test_total_loss_gradient():
    rng = np.random.default_rng(10)
    logits = rng.normal(size=(4, 5))
    labels = [0, 2, 4, 1]

    def f(xs):
        return total_loss(xs[0], labels, (xs[0] * xs[0]).sum() * 0.01, alpha=1.0)

    assert gradient_check_multi(f, [logits], h=1e-5) < 1e-4


def test_full_objective_gradient_through_hierarchy():
    rng = np.random.default_rng(11)
    leaves = rng.normal(size=(4, 4, 3))
    logits = rng.normal(size=(4, 5))
    labels = [0, 0, 1, 1]
    w = LossWeights()

    def f(xs):
        tree = build_hierarchy(xs[0], (4, 2, 1))
        aux, _ = hhcl_total(tree, labels, w, mode="split")
        return total_loss(xs[1], labels, aux, alpha=1.0)

    assert gradient_check_multi(f, [leaves, logits], h=1e-5) < 1e-4
