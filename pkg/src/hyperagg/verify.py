"""Self-contained verification suites runnable from the CLI.

Each check re-derives its expected value independently (closed forms or
brute-force enumeration) and reports the measured deviation next to the
tolerance it must beat. Suites: lorentz, saam, hhcl, gradients, all.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import hypergraph as hg
from . import lorentz as lz
from . import losses
from .autodiff import GradientTape, Tensor, gradient_check_multi
from .hierarchy import build_hierarchy

SUITES = ("lorentz", "saam", "hhcl", "gradients", "all")


class Check:
    def __init__(self, name, measured, tolerance):
        self.name = name
        self.measured = float(measured)
        self.tolerance = float(tolerance)
        self.passed = self.measured <= self.tolerance

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: measured {self.measured:.3e} "
                f"(tolerance {self.tolerance:.0e})")


# -- lorentz ---------------------------------------------------------------

def suite_lorentz():
    rng = np.random.default_rng(2024)
    checks = []
    worst_constraint = 0.0
    worst_symmetry = 0.0
    worst_triangle = -np.inf
    for curvature in (0.05, 0.1, 0.5, 1.0):
        z = rng.uniform(-1, 1, size=(1000, 3))
        z *= (rng.uniform(0, 10, size=(1000, 1)) /
              np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1e-12))
        pts = [lz.exp_map_origin(v, curvature) for v in z]
        for p in pts:
            inner = lz.lorentz_inner(p.coords, p.coords)
            worst_constraint = max(worst_constraint,
                                   abs(inner + 1.0 / curvature))
        for _ in range(250):
            a, b, c = (pts[i] for i in rng.integers(0, 1000, size=3))
            dab = lz.lorentz_distance(a, b)
            dba = lz.lorentz_distance(b, a)
            worst_symmetry = max(worst_symmetry, abs(dab - dba))
            dac = lz.lorentz_distance(a, c)
            dcb = lz.lorentz_distance(c, b)
            worst_triangle = max(worst_triangle, dab - (dac + dcb))
    checks.append(Check("manifold constraint <x,x> = -1/K", worst_constraint, 1e-9))
    checks.append(Check("distance symmetry", worst_symmetry, 0.0))
    checks.append(Check("triangle inequality slack", max(worst_triangle, 0.0), 1e-8))

    # self-distance stays below the arcosh clamp residue
    residue = np.arccosh(lz.DIST_CLAMP) / np.sqrt(0.1)
    p = lz.exp_map_origin(rng.normal(size=4), 0.1)
    self_dist = lz.lorentz_distance(p, p)
    checks.append(Check("self-distance below clamp residue", self_dist,
                        residue + 1e-12))
    if not np.isfinite(self_dist):
        checks[-1].passed = False
    return checks


# -- saam ------------------------------------------------------------------

def _toy_stages(rng, widths=(4, 6), n0=8):
    tokens, attns = [], []
    n = n0
    for c in widths:
        tokens.append(Tensor(rng.normal(size=(n, c))))
        logits = rng.normal(size=(2, n, n))
        attns.append(Tensor(np.exp(logits) /
                            np.exp(logits).sum(-1, keepdims=True)))
        n //= 4
    return hg.StageFeatures(tokens=tokens, attention=attns)


def suite_saam():
    rng = np.random.default_rng(7)
    cfg = hg.AggregatorConfig(stage_widths=(4, 6), context_dim=6,
                              num_hyperedges=4, key_dim=5, num_tokens=2)
    params = hg.init_params(cfg, rng)
    stages = _toy_stages(rng)
    x_hat, inc, edges = hg.saam_forward(stages, params, cfg)
    checks = []

    row_dev = np.abs(inc.data.sum(axis=-1) - 1.0).max()
    checks.append(Check("incidence rows sum to 1", row_dev, 1e-6))

    # manual five-step composition
    x = stages.tokens[-1]
    ctx = hg.context_generate(stages, params, cfg)
    protos = hg.prototype_generate(ctx, params, cfg)
    a = hg.build_incidence(x, protos, params["w_query"], cfg.key_dim)
    he = hg.hyperedge_aggregate(a, x, params["w_edge"],
                                normalize=cfg.normalize_hyperedges)
    xp = hg.node_update(a, he, params["w_node"])
    xh = hg.gated_residual(x, xp, params["gate"])
    comp_dev = np.abs(xh.data - x_hat.data).max()
    checks.append(Check("five-step composition", comp_dev, 1e-12))

    # reordering the prototype rows must not change the refined tokens
    def downstream(k_rows):
        a2 = hg.build_incidence(x, k_rows, params["w_query"], cfg.key_dim)
        he2 = hg.hyperedge_aggregate(a2, x, params["w_edge"])
        return hg.gated_residual(
            x, hg.node_update(a2, he2, params["w_node"]), params["gate"]).data

    dev = np.abs(downstream(protos.data[::-1].copy())
                 - downstream(protos.data)).max()
    checks.append(Check("hyperedge permutation invariance", dev, 1e-10))

    # closed gate passes tokens through bitwise
    xh_c, _, _ = hg.saam_forward(stages, params, cfg, gate_closed=True)
    gate_dev = np.abs(xh_c.data - stages.tokens[-1].data).max()
    checks.append(Check("closed-gate passthrough", gate_dev, 0.0))
    return checks


# -- hhcl ------------------------------------------------------------------

def _brute_contrastive(z, labels, weights, metric):
    dist = losses.pairwise_distances(Tensor(z), weights.lam,
                                     weights.curvature, metric).data
    b = len(labels)
    per_anchor = []
    for i in range(b):
        pos = [j for j in range(b) if j != i and labels[j] == labels[i]]
        if not pos:
            continue
        denom = sum(np.exp(-dist[i, k] / weights.tau)
                    for k in range(b) if k != i)
        val = sum(-np.log(np.exp(-dist[i, j] / weights.tau) / denom)
                  for j in pos) / len(pos)
        per_anchor.append(val)
    return float(np.mean(per_anchor))


def suite_hhcl():
    rng = np.random.default_rng(11)
    weights = losses.LossWeights()
    checks = []

    worst = 0.0
    for _ in range(100):
        b = int(rng.integers(2, 5))
        z = rng.normal(size=(b, 3))
        labels = rng.integers(0, 2, size=b)
        if len(np.unique(labels)) == b:  # no positives anywhere
            labels[1] = labels[0]
        for metric in ("hybrid", "euclidean", "hyperbolic"):
            got = losses.supervised_contrastive(
                Tensor(z), labels, weights.tau, weights.lam,
                weights.curvature, metric=metric).item()
            want = _brute_contrastive(z, labels, weights, metric)
            worst = max(worst, abs(got - want))
    checks.append(Check("contrastive brute-force oracle", worst, 1e-8))

    # coincident same-label batch collapses to log(B-1)
    b = 5
    z = np.tile(rng.normal(size=3), (b, 1))
    got = losses.supervised_contrastive(
        Tensor(z), np.zeros(b, dtype=int), weights.tau, weights.lam,
        weights.curvature).item()
    checks.append(Check("coincident batch = log(B-1)",
                        abs(got - np.log(b - 1)), 1e-6))

    # hierarchy penalty vanishes when children already sit on their parent
    feats = np.tile(rng.normal(size=4), (1, 2, 1))
    tree = build_hierarchy(Tensor(feats), (2, 1))
    pop = losses.popl(tree, weights.curvature).item()
    residue = np.arccosh(1.0 + 1e-7) / np.sqrt(weights.curvature)
    checks.append(Check("coincident hierarchy penalty", pop, residue + 1e-12))

    # hybrid distance = euclidean + lambda * hyperbolic
    za, zb = rng.normal(size=3), rng.normal(size=3)
    hyb = losses.hybrid_distance(Tensor(za), Tensor(zb), weights.lam,
                                 weights.curvature).item()
    eu = np.linalg.norm(za - zb)
    hy = lz.lorentz_distance(lz.exp_map_origin(za, weights.curvature),
                             lz.exp_map_origin(zb, weights.curvature))
    checks.append(Check("hybrid = euclidean + lambda*hyperbolic",
                        abs(hyb - (eu + weights.lam * hy)), 1e-10))
    return checks


# -- gradients -------------------------------------------------------------

def suite_gradients():
    rng = np.random.default_rng(13)
    checks = []

    op_cases = {
        "add/mul/sub": lambda xs: (xs[0] + xs[1]) * xs[0] - xs[1],
        "matmul": lambda xs: ad.matmul(xs[0], xs[1].T),
        "exp/log": lambda xs: ad.log(ad.exp(xs[0]) + 1.0),
        "sqrt": lambda xs: ad.sqrt(xs[0] * xs[0] + 1.0),
        "sigmoid": lambda xs: ad.sigmoid(xs[0]),
        "relu": lambda xs: ad.relu(xs[0] + 0.3),
        "softmax": lambda xs: ad.softmax_rows(xs[0]) * xs[1],
        "reductions": lambda xs: xs[0].sum() + xs[0].mean() * xs[1].max(),
        "arcosh": lambda xs: ad.arcosh(xs[0] * xs[0] + 1.5),
        "division": lambda xs: xs[0] / (xs[1] * xs[1] + 2.0),
    }
    worst = 0.0
    for fn in op_cases.values():
        xs = [rng.normal(size=(3, 4)), rng.normal(size=(3, 4))]
        worst = max(worst, gradient_check_multi(
            lambda lifted, fn=fn: fn(lifted).sum(), xs))
    checks.append(Check("tensor op gradients", worst, 1e-4))

    cfg = hg.AggregatorConfig(stage_widths=(4,), context_dim=4,
                              num_hyperedges=3, key_dim=4, num_tokens=4)
    params = hg.init_params(cfg, rng)
    names = sorted(params)

    def saam_loss(lifted):
        p = dict(zip(names, lifted))
        stages = hg.StageFeatures(tokens=[p.pop("__x__")], attention=None)
        out, _, _ = hg.saam_forward(stages, p, cfg)
        return (out * out).sum()

    names = ["__x__"] + names
    xs = [rng.normal(size=(4, 4))] + [params[n] for n in names[1:]]
    checks.append(Check("aggregator gradient", gradient_check_multi(saam_loss, xs),
                        1e-4))

    weights = losses.LossWeights()
    labels = np.array([0, 0, 1, 1])

    def contrastive_loss(lifted):
        return losses.supervised_contrastive(
            lifted[0], labels, weights.tau, weights.lam, weights.curvature)

    checks.append(Check("contrastive gradient", gradient_check_multi(
        contrastive_loss, [rng.normal(size=(4, 3))]), 1e-4))

    def hierarchy_loss(lifted):
        tree = build_hierarchy(lifted[0].reshape((4, 2, 3)), (2, 1))
        total, _ = losses.hhcl_total(tree, labels, weights, mode="hybrid")
        return total

    checks.append(Check("hierarchy objective gradient", gradient_check_multi(
        hierarchy_loss, [rng.normal(size=(4, 2, 3))]), 1e-4))
    return checks


def run_suite(name):
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    picks = SUITES[:-1] if name == "all" else (name,)
    table = {"lorentz": suite_lorentz, "saam": suite_saam,
             "hhcl": suite_hhcl, "gradients": suite_gradients}
    checks = []
    for pick in picks:
        checks.extend(table[pick]())
    return checks
