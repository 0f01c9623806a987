"""Blow-up diagnostics for concentrating minimisers.

Profiles are rescaled by their own blow-up scale, u_hat(X) = mu^{n/2-1} u(mu X),
and compared with the unit bubble.  In the radial picture the maximum point and
the base point share a ray, so the centre offset reduces to peak_radius / mu.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize_scalar
from scipy.special import roots_legendre

from .bubble import _beta_tail, bubble_eval, unit_bubble
from .constants import Params, k_opt_inv
from .geometry import flat_disk
from .radial import RadialFunction, build_grid, weighted_norm

__all__ = [
    "BlowupReport",
    "WindowError",
    "rescale",
    "bubble_deviation",
    "concentration_tail",
    "pointwise_bound",
    "bubble_pointwise_sup",
    "bubble_pointwise_sup_closed",
    "vanishing_A_check",
    "alpha_mu2_slope",
    "local_sup_diagnostic",
    "window_integral",
    "rescaled_window_mass",
    "rescaled_window_energy",
    "bubble_window_energy",
    "blowup_report",
]

POINTS_PER_UNIT = 200
VANISHING_SLOPE = -1e-9


class WindowError(ValueError):
    """Requested window leaves the polar chart."""


def rescale(u: RadialFunction, mu: float, R: float,
            points_per_unit: int = POINTS_PER_UNIT) -> RadialFunction:
    """u_hat(X) = mu^{n/2-1} u(mu X) on the uniform grid X_j = j / points_per_unit.

    Monotone cubic interpolation through the (graded) nodal samples.  The grid
    is the flat chart of radius ceil(R * points_per_unit) / points_per_unit, so
    windows of different size share their inner points exactly.
    """
    g = u.grid
    n = g.params.n
    if not (mu > 0 and R > 0):
        raise ValueError("mu and R must be positive")
    count = max(16, int(np.ceil(R * points_per_unit - 1e-9)))
    x_max = count / points_per_unit
    if x_max * mu > g.r_max:
        raise WindowError(f"window R mu = {x_max * mu:.3g} exceeds the chart radius {g.r_max:.3g}")
    xgrid = build_grid(flat_disk(n, x_max), g.params, count, grading=1.0)
    vals = mu ** (n / 2.0 - 1.0) * PchipInterpolator(g.nodes, u.values)(mu * xgrid.nodes)
    return RadialFunction(xgrid, vals, dirichlet=False)


def bubble_deviation(uhat: RadialFunction, p: Params, R: float) -> float:
    """sup over nodes X <= R of |u_hat - unit bubble|."""
    x = uhat.grid.nodes
    if x[-1] < R * (1 - 1e-12):
        raise WindowError("rescaled profile does not cover the window")
    mask = x <= R * (1 + 1e-12)
    return float(np.max(np.abs(uhat.values[mask] - bubble_eval(unit_bubble(p), x[mask]))))


_GX, _GW = roots_legendre(8)


def window_integral(u: RadialFunction, r1: float, r2: float, kind: str) -> float:
    """omega * int_{r1}^{r2} F theta r^{n-1} dr for the piecewise-linear profile.

    kind: "critical" (|u|^{2*(s)} r^{-s}), "l2" (u^2) or "energy" (u'^2).
    Gauss rules on the pieces between r1, r2 and the nodes inside.
    """
    g = u.grid
    if not 0 <= r1 < r2 <= g.r_max:
        raise ValueError(f"bad window ({r1}, {r2})")
    r = g.nodes
    inner = r[(r > r1) & (r < r2)]
    brk = np.concatenate([[r1], inner, [r2]])
    a, b = brk[:-1, None], brk[1:, None]
    pts = 0.5 * (b - a) * _GX[None, :] + 0.5 * (a + b)
    wts = 0.5 * (b - a) * _GW[None, :]
    n, s = g.params.n, g.params.s
    wts = wts * g.model.theta(pts) * pts ** (n - 1.0)
    if kind == "energy":
        cell = np.clip(np.searchsorted(r, pts, side="right") - 1, 0, r.size - 2)
        f = (np.diff(u.values) / g.h)[cell] ** 2
    else:
        vals = np.interp(pts, r, u.values)
        if kind == "critical":
            f = np.abs(vals) ** g.params.q * pts ** (-s)
        elif kind == "l2":
            f = vals**2
        else:
            raise ValueError(f"unknown integrand {kind!r}")
    return g.omega * float(np.sum(wts * f))


def concentration_tail(u: RadialFunction, p: Params, mu: float, R: float) -> float:
    """Share of the weighted critical mass outside the ball of radius R mu."""
    g = u.grid
    total = weighted_norm(u, p.q, p) ** p.q
    if total == 0:
        raise ValueError("zero profile has no mass")
    cut = R * mu
    if cut <= 0:
        return 1.0
    if cut >= g.r_max:
        return 0.0
    return window_integral(u, cut, g.r_max, "critical") / total


def pointwise_bound(u: RadialFunction, p: Params) -> float:
    """max over nodes of r^{n/2-1} u(r)."""
    return float(np.max(u.grid.nodes ** (p.n / 2.0 - 1.0) * np.abs(u.values)))


def bubble_pointwise_sup(p: Params) -> float:
    """sup_r r^{n/2-1} u(r) for the unit bubble, by bounded 1-D maximisation."""
    b = unit_bubble(p)
    k = b.k
    res = minimize_scalar(lambda r: -(r ** (p.n / 2.0 - 1.0)) * bubble_eval(b, r),
                          bounds=(1e-6 * k, 100.0 * k), method="bounded",
                          options={"xatol": 1e-12 * k})
    return float(-res.fun)


def bubble_pointwise_sup_closed(p: Params) -> float:
    # maximiser is r = k: d/dr log(r^{(n-2)/2} u) = (n-2)/2 (1/r - 2 r^{1-s}/(k^{2-s}+r^{2-s}))
    return unit_bubble(p).k ** ((p.n - 2.0) / 2.0) * 2.0 ** (-(p.n - 2.0) / (2.0 - p.s))


def alpha_mu2_slope(alphas, mus):
    """(last alpha mu^2, log-log slope of alpha mu^2 against alpha)."""
    a = np.asarray(alphas, dtype=float)
    mu = np.asarray(mus, dtype=float)
    if a.size < 4:
        raise ValueError("need at least 4 sweep points")
    if np.any(a <= 0) or np.any(~np.isfinite(mu)) or np.any(mu <= 0):
        raise ValueError("alphas and mus must be positive and finite")
    y = a * mu**2
    slope = np.polyfit(np.log(a), np.log(y), 1)[0]
    return float(y[-1]), float(slope)


def vanishing_A_check(sweep):
    """(last alpha mu^2, slope, vanishing) over results carrying ``alpha`` and ``mu``.

    ``vanishing`` needs a slope below -1e-9, so a constant alpha mu^2 is flagged.
    """
    last, slope = alpha_mu2_slope([r.alpha for r in sweep], [r.mu for r in sweep])
    return last, slope, slope < VANISHING_SLOPE


def local_sup_diagnostic(u: RadialFunction, annulus) -> float:
    """sup of u on [r1 + d, r2 - d] over its L2 norm on [r1, r2], d = (r2 - r1) / 4."""
    r1, r2 = map(float, annulus)
    if not r2 > r1:
        raise ValueError("empty annulus")
    g = u.grid
    if r1 < 0 or r2 > g.r_max:
        raise ValueError("annulus leaves the chart")
    d = 0.25 * (r2 - r1)
    lo, hi = r1 + d, r2 - d
    r = g.nodes
    inside = u.values[(r >= lo) & (r <= hi)]
    ends = np.interp([lo, hi], r, u.values)
    sup = float(np.max(np.abs(np.concatenate([inside, ends]))))
    l2 = window_integral(u, r1, r2, "l2") ** 0.5
    if l2 == 0:
        raise ValueError("profile vanishes on the annulus")
    return sup / l2


def rescaled_window_mass(u: RadialFunction, mu: float, R: float) -> float:
    """Weighted critical mass of u inside r < R mu, i.e. of u_hat on |X| < R (scale invariant)."""
    return window_integral(u, 0.0, min(R * mu, u.grid.r_max), "critical")


def rescaled_window_energy(u: RadialFunction, mu: float, R: float) -> float:
    return window_integral(u, 0.0, min(R * mu, u.grid.r_max), "energy")


def bubble_window_energy(p: Params, R: float) -> float:
    """Dirichlet energy of the unit bubble on |X| < R (closed form)."""
    from .constants import unit_sphere_volume

    b = unit_bubble(p)
    return k_opt_inv(p) - unit_sphere_volume(p.n) * _beta_tail(b, R, "energy")


@dataclass(frozen=True)
class BlowupReport:
    alpha: float
    mu: float
    alpha_mu2: float
    sup_deviation: float
    concentration_tail: float
    pointwise_bound: float
    peak_offset_ratio: float
    window: float
    tail_window: float

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"report field {name} = {v} is not finite and nonnegative")


def blowup_report(res, p: Params, R: float = 5.0, R_tail: float = 10.0) -> BlowupReport:
    u, mu = res.u, res.mu
    uhat = rescale(u, mu, R)
    return BlowupReport(
        alpha=res.alpha,
        mu=mu,
        alpha_mu2=res.alpha * mu**2,
        sup_deviation=bubble_deviation(uhat, p, R),
        concentration_tail=concentration_tail(u, p, mu, R_tail),
        pointwise_bound=pointwise_bound(u, p),
        peak_offset_ratio=res.peak_radius / mu,
        window=R,
        tail_window=R_tail,
    )
