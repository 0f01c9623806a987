"""Euclidean extremal profiles (bubbles) and their weighted integrals.

    u(r) = ( a^{(2-s)/2} k^{(2-s)/2} / (a^{2-s} + r^{2-s}) )^{(n-2)/(2-s)}

with k^{2-s} = (n-2)(n-s) K(n,s).  The a = k member peaks at 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaincc, betaln

from .constants import Params, bubble_scale_constant, k_opt_inv
from .geometry import flat_disk
from .radial import MIN_COUNT, RadialGrid, build_grid, fd_weights

__all__ = [
    "BubbleProfile",
    "QuadratureError",
    "GridTooCoarse",
    "unit_bubble",
    "bubble_eval",
    "bubble_derivative",
    "bubble_weighted_mass",
    "bubble_dirichlet_energy",
    "bubble_pde_residual",
    "bubble_mass_inside",
    "fd_weights",
    "wide_flat_grid",
    "residual_grid",
]


class QuadratureError(RuntimeError):
    """Estimated quadrature error exceeds the requested tolerance."""


class GridTooCoarse(RuntimeError):
    """Stencil error estimate is as large as the terms of the equation."""


@dataclass(frozen=True)
class BubbleProfile:
    p: Params
    a: float
    center_offset: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"bubble scale a must be positive, got {self.a}")
        if self.center_offset < 0:
            raise ValueError("center_offset is a radial distance and must be >= 0")

    @property
    def k(self) -> float:
        return bubble_scale_constant(self.p)

    @property
    def peak(self) -> float:
        return (self.k / self.a) ** ((self.p.n - 2) / 2.0)

    def __call__(self, r):
        return bubble_eval(self, r)


def unit_bubble(p: Params) -> BubbleProfile:
    return BubbleProfile(p, bubble_scale_constant(p))


def bubble_eval(b: BubbleProfile, r):
    n, s = b.p.n, b.p.s
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("bubble_eval takes a radial distance r >= 0")
    e = 2.0 - s
    return ((b.a * b.k) ** (e / 2.0) / (b.a**e + r**e)) ** ((n - 2.0) / e)


def bubble_derivative(b: BubbleProfile, r):
    """Analytic radial derivative u'(r)."""
    n, s = b.p.n, b.p.s
    r = np.asarray(r, dtype=float)
    e = 2.0 - s
    return -(n - 2.0) * r ** (1.0 - s) / (b.a**e + r**e) * bubble_eval(b, r)


def _beta_tail(b: BubbleProfile, r_cut: float, kind: str) -> float:
    # Closed-form int_{r_cut}^inf via t = r^{2-s}, x = t / (a^{2-s} + t): incomplete Beta.
    n, s = b.p.n, b.p.s
    e = 2.0 - s
    big_a = b.a**e
    beta = (n - s) / e
    x = r_cut**e / (big_a + r_cut**e)
    if kind == "mass":
        pre = (b.a * b.k) ** (n - s) * big_a ** (-beta) / e
        return pre * np.exp(betaln(beta, beta)) * betaincc(beta, beta, x)
    pre = (n - 2.0) ** 2 * (b.a * b.k) ** (n - 2.0) * big_a ** (1.0 - beta) / e
    return pre * np.exp(betaln(beta + 1.0, beta - 1.0)) * betaincc(beta + 1.0, beta - 1.0, x)


def _flat_integral(b: BubbleProfile, quad: RadialGrid, integrand, measure, kind, tol):
    if quad.model.scalar_curvature_at_base != 0.0 or quad.model.label != "flat":
        raise ValueError("bubble integrals over R^n need a flat-model grid")
    if (quad.params.n, quad.params.s) != (b.p.n, b.p.s):
        raise ValueError("grid (n, s) does not match the bubble")
    tail = quad.omega * _beta_tail(b, quad.r_max, kind)
    value = quad.integrate(integrand, measure) + tail
    if quad.count // 2 >= MIN_COUNT:
        coarse = build_grid(quad.model, quad.params, quad.count // 2, quad.grading)
    else:
        # cannot halve: compare against a lower-order rule on the same panels
        coarse = build_grid(quad.model, quad.params, quad.count, quad.grading, gauss_points=3)
    estimate = abs(coarse.integrate(integrand, measure) + tail - value)
    if estimate > tol * max(abs(value), 1.0):
        raise QuadratureError(
            f"estimated quadrature error {estimate:.3e} exceeds tolerance {tol:.1e}")
    return value


def bubble_weighted_mass(b: BubbleProfile, quad: RadialGrid, tol: float = 1e-6) -> float:
    """omega * int_0^inf u^{2*(s)} r^{n-1-s} dr (grid part plus exact tail)."""
    q = b.p.q
    return _flat_integral(b, quad, lambda r: bubble_eval(b, r) ** q, "singular", "mass", tol)


def bubble_dirichlet_energy(b: BubbleProfile, quad: RadialGrid, tol: float = 1e-6) -> float:
    """omega * int_0^inf u'(r)^2 r^{n-1} dr with the analytic derivative."""
    return _flat_integral(b, quad, lambda r: bubble_derivative(b, r) ** 2, "volume",
                          "energy", tol)


def bubble_mass_inside(b: BubbleProfile, radius: float) -> float:
    """Weighted critical mass of the bubble inside the ball of given radius (closed form)."""
    from .constants import unit_sphere_volume

    omega = unit_sphere_volume(b.p.n)
    total = omega * _beta_tail(b, 0.0, "mass")
    return total - omega * _beta_tail(b, radius, "mass")


def bubble_pde_residual(b: BubbleProfile, grid: RadialGrid, window=None,
                        constant_factor: float = 1.0) -> float:
    """Max |-u'' - (n-1) u'/r - c K^{-1} u^{2*(s)-1} r^{-s}| on interior nodes.

    Derivatives come from five-point stencils on the (graded) grid; the r = 0
    node only serves as a stencil point.  ``window = (r_lo, r_hi)`` restricts
    the nodes where the residual is measured; the default ``(a/10, 10a)`` is
    the bubble core, away from the round-off-dominated spacings at r -> 0 and
    the far field.  ``constant_factor`` scales the constant K^{-1}.
    """
    if b.center_offset != 0.0:
        raise ValueError("only centred bubbles are discretised")
    r = grid.nodes
    if r.size < 5:
        raise ValueError("grid too coarse for a five-point stencil")
    idx = np.arange(2, r.size - 2)
    lo, hi = (0.1 * b.a, 10.0 * b.a) if window is None else window
    idx = idx[(r[idx] >= lo) & (r[idx] <= hi)]
    if idx.size == 0:
        raise ValueError("no interior nodes inside the residual window")
    stencil = r[idx[:, None] + np.arange(-2, 3)[None, :]]
    u = bubble_eval(b, r)
    u_st = u[idx[:, None] + np.arange(-2, 3)[None, :]]
    d1 = np.sum(fd_weights(stencil, r[idx], 1) * u_st, axis=1)
    d2 = np.sum(fd_weights(stencil, r[idx], 2) * u_st, axis=1)
    n, s = b.p.n, b.p.s
    ri = r[idx]
    lhs = -d2 - (n - 1.0) * d1 / ri
    rhs = constant_factor * k_opt_inv(b.p) * u[idx] ** (b.p.q - 1.0) * ri ** (-s)
    # three-point stencils as a crude error estimate for the five-point ones
    inner = stencil[:, 1:4]
    u_in = u_st[:, 1:4]
    d1_3 = np.sum(fd_weights(inner, ri, 1) * u_in, axis=1)
    d2_3 = np.sum(fd_weights(inner, ri, 2) * u_in, axis=1)
    err = np.abs(d2_3 - d2) + (n - 1.0) * np.abs(d1_3 - d1) / ri
    if np.any(err > np.abs(rhs) + np.abs(d2)):
        raise GridTooCoarse("stencil error estimate dominates the equation terms")
    return float(np.max(np.abs(lhs - rhs)))


def wide_flat_grid(p: Params, count: int, radius_in_k: float = 1000.0,
                   grading: float = 3.0) -> RadialGrid:
    """Flat chart of radius ``radius_in_k`` bubble scales, for Euclidean integrals."""
    k = bubble_scale_constant(p)
    return build_grid(flat_disk(p.n, radius_in_k * k), p, count, grading)


def residual_grid(p: Params, count: int) -> RadialGrid:
    """Grid for residual studies: 100 bubble scales, grading 2 (resolves the core window)."""
    return wide_flat_grid(p, count, 100.0, 2.0)
