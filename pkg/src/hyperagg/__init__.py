"""hyperagg: hypergraph token-to-region aggregation with hyperbolic
hierarchical contrastive supervision, built on a minimal float64
reverse-mode autodiff core."""

from .autodiff import GradientTape, Tensor, gradient_check

__all__ = ["GradientTape", "Tensor", "gradient_check"]
__version__ = "0.1.0"
