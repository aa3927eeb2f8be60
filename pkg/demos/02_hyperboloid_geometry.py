"""Tour of the curvature-K hyperboloid: lifting Euclidean vectors onto the
manifold, measuring geodesic distances, and checking the geometry."""

import numpy as np

from hyperagg import lorentz

K = 0.1
rng = np.random.default_rng(42)

print(f"=== exponential map at the origin (curvature K={K}) ===")
z = rng.normal(size=3)
p = lorentz.exp_map_origin(z, K)
print("euclidean pre-image:", np.round(z, 3))
print("lifted point:       ", np.round(p.coords, 3))
print("constraint <x,x>_L =", lorentz.lorentz_inner(p.coords, p.coords),
      "(should be", -1.0 / K, ")")

print()
print("=== distances grow along a ray ===")
direction = rng.normal(size=3)
direction /= np.linalg.norm(direction)
o = lorentz.origin(3, K)
for scale in (0.5, 1.0, 2.0, 4.0):
    q = lorentz.exp_map_origin(scale * direction, K)
    print(f"  |z|={scale:>3}: distance from origin ="
          f" {lorentz.lorentz_distance(o, q):.4f}")

print()
print("=== triangle inequality on random triples ===")
pts = [lorentz.exp_map_origin(rng.normal(size=3), K) for _ in range(200)]
worst = -np.inf
for _ in range(500):
    a, b, c = (pts[i] for i in rng.integers(0, len(pts), 3))
    slack = (lorentz.lorentz_distance(a, c) + lorentz.lorentz_distance(c, b)
             - lorentz.lorentz_distance(a, b))
    worst = max(worst, -slack)
print(f"largest violation over 500 triples: {max(worst, 0.0):.2e}")

print()
print("=== re-projecting a drifted point ===")
drifted = p.coords + rng.normal(scale=0.05, size=p.coords.shape)
fixed = lorentz.project_to_hyperboloid(drifted, K)
print("off-manifold inner product:",
      round(lorentz.lorentz_inner(drifted, drifted), 4))
print("after projection:          ",
      round(lorentz.lorentz_inner(fixed.coords, fixed.coords), 12))
