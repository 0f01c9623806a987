"""The penalised quotient I_alpha, its Euler-Lagrange residual and the inequality verdict."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import Params
from .geometry import ManifoldModel
from .radial import (
    RadialFunction,
    critical_norm_gradient,
    dirichlet_energy,
    l2_norm,
    mass_bands,
    stencil_derivatives,
    stiffness_bands,
    weighted_norm,
)

__all__ = [
    "QuotientValue",
    "quotient",
    "el_residual",
    "el_residual_vector",
    "inequality_holds",
    "apply_operator",
    "log_density_slope",
]


@dataclass(frozen=True)
class QuotientValue:
    energy: float
    mass2: float
    constraint_norm: float
    lam: float
    alpha: float

    @property
    def numerator(self) -> float:
        return self.energy + self.alpha * self.mass2


def quotient(u: RadialFunction, p: Params) -> QuotientValue:
    """(int |grad u|^2 + alpha int u^2) / ||u||_{2*(s),s}^2, denominator taken from u itself."""
    norm = weighted_norm(u, p.q, p)
    if norm == 0.0:
        raise ValueError("quotient is undefined for the zero function")
    energy = dirichlet_energy(u)
    mass2 = l2_norm(u) ** 2
    return QuotientValue(energy, mass2, norm, (energy + p.alpha * mass2) / norm**2, p.alpha)


def apply_operator(u: RadialFunction, alpha: float) -> np.ndarray:
    """(A + alpha M) u with the stiffness and mass matrices of the grid."""
    g = u.grid
    ad, ao = stiffness_bands(g)
    md, mo = mass_bands(g)
    d = ad + alpha * md
    o = ao + alpha * mo
    v = u.values
    out = d * v
    out[:-1] += o * v[1:]
    out[1:] += o * v[:-1]
    return out


def log_density_slope(m: ManifoldModel, r: np.ndarray) -> np.ndarray:
    """theta'/theta by a central difference of log theta (exactly 0 on the flat model)."""
    h = 1e-5 * (1.0 + r)
    return (np.log(m.theta(r + h)) - np.log(m.theta(r - h))) / (2.0 * h)


def el_residual_vector(u: RadialFunction, p: Params, lam: float, window=None):
    """Strong residual of -theta^{-1} r^{1-n} (theta r^{n-1} u')' + alpha u - lam u^{2*(s)-1} r^{-s}.

    Five-point stencils on the nodal values; returns (node indices, residual).
    ``window = (r_lo, r_hi)`` selects nodes, default the core (mu / 10, 10 mu)
    with mu = (max u)^{-2/(n-2)}, capped at 0.9 r_max where the polar
    density may degenerate (sphere antipode).  Outside a core the stencils see either
    round-off (tiny spacings at r -> 0) or nothing of interest.
    """
    g = u.grid
    r = g.nodes
    idx = np.arange(2, r.size - 2)
    if window is None:
        mu = float(np.max(u.values)) ** (-2.0 / (p.n - 2.0))
        window = (0.1 * mu, min(10.0 * mu, 0.9 * g.r_max))
    lo, hi = window
    idx = idx[(r[idx] >= lo) & (r[idx] <= hi)]
    if idx.size == 0:
        raise ValueError("no interior nodes inside the residual window")
    d1, d2 = stencil_derivatives(r, u.values, idx)
    ri, ui = r[idx], u.values[idx]
    lap = -d2 - ((p.n - 1.0) / ri + log_density_slope(g.model, ri)) * d1
    res = lap + p.alpha * ui - lam * np.abs(ui) ** (p.q - 2.0) * ui * ri ** (-p.s)
    return idx, res


def el_residual(u: RadialFunction, p: Params, lam: float, m: ManifoldModel | None = None,
                weighted: bool = True, window=None) -> float:
    """Max Euler-Lagrange residual over the window, by default weighted by 1 / (1 + u)."""
    if m is not None and m is not u.grid.model:
        raise ValueError("model does not match the function's grid")
    if np.any(u.values[:-1] <= 0):
        raise ValueError("el_residual needs u > 0 on every node except the Dirichlet one")
    idx, res = el_residual_vector(u, p, lam, window)
    res = np.abs(res)
    if weighted:
        res = res / (1.0 + u.values[idx])
    return float(np.max(res))


def inequality_holds(u: RadialFunction, p: Params, A: float, B: float):
    """Margin A ||grad u||^2 + B ||u||^2 - ||u||_{2*(s),s}^2 and whether it is >= 0."""
    margin = A * dirichlet_energy(u) + B * l2_norm(u) ** 2 - weighted_norm(u, p.q, p) ** 2
    return margin >= 0.0, margin
