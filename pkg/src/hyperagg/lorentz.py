"""Curvature-parameterized Lorentz (hyperboloid) model.

Points live on the upper sheet {x : <x,x>_L = -1/K, x0 > 0} with the
Lorentzian inner product <x,y>_L = -x0*y0 + <x_s, y_s>. Euclidean vectors
reach the manifold only through the exponential map at the origin; distances
scale as (1/sqrt(K)) * arcosh(-K * <x,y>_L), which reduces to the unit
hyperboloid formulas at K = 1.

All functions have a plain-numpy form and a differentiable Tensor form
(`*_t`); both share the same arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DimensionError, ParameterError

# Arguments of arcosh are clamped to this floor: identical points produce
# -K*<x,y>_L = 1 exactly and dip below 1 by rounding, where the distance
# gradient would blow up.
DIST_CLAMP = 1.0 + 1e-7

# Tolerance on the on-manifold invariant <x,x>_L = -1/K.
MANIFOLD_TOL = 1e-9


def _check_curvature(curvature):
    if not (curvature > 0.0):
        raise ParameterError(f"curvature must be positive, got {curvature}")
    return float(curvature)


@dataclass(frozen=True)
class LorentzPoint:
    """A (d+1)-vector on the curvature-K hyperboloid, time-like coordinate first."""

    coords: np.ndarray
    curvature: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "coords",
                           np.asarray(self.coords, dtype=np.float64))
        _check_curvature(self.curvature)
        if self.coords.ndim != 1 or self.coords.size < 2:
            raise DimensionError(
                f"LorentzPoint needs a 1-D (d+1)-vector, got shape {self.coords.shape}")
        if self.coords[0] <= 0.0:
            raise ParameterError("LorentzPoint must lie on the upper sheet (x0 > 0)")
        inner = lorentz_inner(self.coords, self.coords)
        if abs(inner + 1.0 / self.curvature) > 1e-6:
            raise ParameterError(
                f"point is off the hyperboloid: <x,x>_L = {inner}, "
                f"expected {-1.0 / self.curvature}")

    @property
    def dim(self):
        """Dimension d of the underlying hyperbolic space."""
        return self.coords.size - 1

    @property
    def spatial(self):
        return self.coords[1:]


def lorentz_inner(x, y):
    """Lorentzian inner product -x0*y0 + <x_s, y_s> of two (d+1)-vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise DimensionError(
            f"lorentz_inner needs equal-length (d+1)-vectors, got {x.shape} and {y.shape}")
    return float(-x[0] * y[0] + x[1:] @ y[1:])


def exp_map_origin(z, curvature=1.0):
    """Lift a Euclidean d-vector onto the hyperboloid: (sqrt(1/K + |z|^2), z)."""
    curvature = _check_curvature(curvature)
    z = np.asarray(z, dtype=np.float64)
    x0 = np.sqrt(1.0 / curvature + z @ z)
    return LorentzPoint(np.concatenate(([x0], z)), curvature)


def lorentz_distance(x: LorentzPoint, y: LorentzPoint):
    """Geodesic distance (1/sqrt(K)) * arcosh(clamp(-K * <x,y>_L))."""
    if x.curvature != y.curvature:
        raise ParameterError(
            f"curvature mismatch: {x.curvature} vs {y.curvature}")
    arg = max(-x.curvature * lorentz_inner(x.coords, y.coords), DIST_CLAMP)
    return float(np.arccosh(arg) / np.sqrt(x.curvature))


def project_to_hyperboloid(v, curvature=1.0):
    """Keep the spatial part, recompute x0; re-stabilizes drifted points."""
    curvature = _check_curvature(curvature)
    v = np.asarray(v, dtype=np.float64)
    return exp_map_origin(v[1:], curvature)


def origin(dim, curvature=1.0):
    """The hyperboloid origin (1/sqrt(K), 0, ..., 0)."""
    return exp_map_origin(np.zeros(dim), curvature)


# --- differentiable Tensor forms -------------------------------------------

def exp_map_t(z: Tensor, curvature=1.0) -> Tensor:
    """Tensor exp_map_origin: (..., d) -> (..., d+1), batched over leading axes."""
    curvature = _check_curvature(curvature)
    sq = ad.tsum(z * z, axis=-1, keepdims=True)
    x0 = ad.sqrt(sq + 1.0 / curvature)
    return ad.concat([x0, z], axis=-1)


def lorentz_inner_t(x: Tensor, y: Tensor) -> Tensor:
    """Tensor Lorentzian inner product along the last axis."""
    return _inner_last(x, y)


def lorentz_distance_t(x: Tensor, y: Tensor, curvature=1.0) -> Tensor:
    """Tensor geodesic distance along the last axis, batched over leading axes."""
    curvature = _check_curvature(curvature)
    inner = _inner_last(x, y)
    arg = ad.clamp_min(inner * (-curvature), DIST_CLAMP)
    return ad.arcosh(arg) * (1.0 / np.sqrt(curvature))


def _inner_last(x: Tensor, y: Tensor) -> Tensor:
    prod = x * y
    time = prod[..., 0]
    return ad.tsum(prod, axis=-1) - time * 2.0
