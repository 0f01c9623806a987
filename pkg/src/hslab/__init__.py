"""Numerical lab for sharp Hardy-Sobolev inequalities on model manifolds."""

__version__ = "0.1.0"

from .constants import Params, critical_exponent, k_opt, k_opt_inv  # noqa: E402

__all__ = ["Params", "critical_exponent", "k_opt", "k_opt_inv", "__version__"]
