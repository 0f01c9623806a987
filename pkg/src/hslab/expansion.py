"""Truncated-bubble test functions, the curvature expansion of the quotient and a B0 search.

For u_eps the quotient with alpha = K^{-1} B behaves like K^{-1} + c theta_eps,
theta_eps = eps^2 (n >= 5) or eps^2 ln(1/eps) (n = 4), and c changes sign at
B = K (n-2)(6-s) / (12 (2n-2-s)) Scal(x0).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constants import Params, k_opt_inv
from .functional import quotient
from .geometry import ManifoldModel
from .radial import RadialFunction, RadialGrid, build_grid
from .solver import GridPolicy, SolverOptions, minimize

log = logging.getLogger(__name__)

__all__ = [
    "ExpansionFit",
    "B0Estimate",
    "BracketNotFound",
    "FitDegenerate",
    "cutoff",
    "test_function",
    "theta_rule",
    "expansion_values",
    "expansion_fit",
    "fit_coefficient",
    "b0_search",
    "default_epsilons",
    "EXPANSION_COUNT",
    "EXPANSION_GRADING",
]

# fractions of r_max; every entry satisfies eps < r_max / 10
DEFAULT_LADDER = (0.05, 0.025, 0.0125, 0.00625, 0.003125)
EXPANSION_COUNT = 16000
EXPANSION_GRADING = 3.0
MIN_PEAK_NODES = 20


class FitDegenerate(ValueError):
    pass


class BracketNotFound(RuntimeError):
    pass


def default_epsilons(m: ManifoldModel) -> list[float]:
    return [f * m.r_max for f in DEFAULT_LADDER]


def cutoff(r, r_max: float):
    """1 on r <= r_max/2, 0 on r >= 3 r_max/4, quintic smoothstep (C^2) between."""
    t = np.clip((np.asarray(r, dtype=float) - 0.5 * r_max) / (0.25 * r_max), 0.0, 1.0)
    return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def test_function(m: ManifoldModel, p: Params, eps: float, grid: RadialGrid) -> RadialFunction:
    """(eps^{1-s/2} / (eps^{2-s} + r^{2-s}))^{(n-2)/(2-s)} times the radial cutoff."""
    if p.n < 4:
        raise ValueError("test functions are only set up for n >= 4")
    if not 0 < eps < m.r_max / 10:
        raise ValueError(f"eps = {eps} must lie in (0, r_max/10 = {m.r_max / 10})")
    if grid.model.r_max != m.r_max:
        raise ValueError("grid does not cover this model's chart")
    e = 2.0 - p.s

    def f(r):
        return (eps ** (e / 2.0) / (eps**e + r**e)) ** ((p.n - 2.0) / e) * cutoff(r, m.r_max)

    return grid.sample(f)


def theta_rule(n: int, log_rule: bool | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """theta_eps for dimension n; ``log_rule`` overrides the choice (for model comparison)."""
    use_log = (n == 4) if log_rule is None else log_rule
    if use_log:
        return lambda eps: np.asarray(eps) ** 2 * np.log(1.0 / np.asarray(eps))
    return lambda eps: np.asarray(eps) ** 2


@dataclass(frozen=True)
class ExpansionFit:
    epsilons: tuple
    values: tuple
    theta: Callable = field(repr=False)
    fitted_coeff: float
    fit_residual: float
    B: float
    k_inv: float
    nuisance: float | None = None
    trend_ok: bool = True

    def rows(self):
        """(eps, theta, I_value, I_value - K^{-1}) per ladder entry."""
        th = self.theta(np.array(self.epsilons))
        return [(e, float(t), v, v - self.k_inv) for e, t, v in zip(self.epsilons, th, self.values)]


def _expansion_grid(m: ManifoldModel, p: Params, epsilons, count: int, grading: float):
    g = build_grid(m, Params(p.n, p.s), count, grading)
    inside = int(np.searchsorted(g.nodes, min(epsilons), side="right"))
    if inside < MIN_PEAK_NODES:
        raise ValueError(f"smallest eps spans only {inside} nodes; refine the expansion grid")
    return g


def expansion_values(m: ManifoldModel, p: Params, B: float, epsilons,
                     grid: RadialGrid | None = None) -> np.ndarray:
    """I_{K^{-1} B}(u_eps) for each eps."""
    if grid is None:
        grid = _expansion_grid(m, p, epsilons, EXPANSION_COUNT, EXPANSION_GRADING)
    pa = p.with_alpha(k_opt_inv(p) * B)
    return np.array([quotient(test_function(m, p, e, grid), pa).lam for e in epsilons])


def fit_coefficient(epsilons, y, theta, nuisance: bool = False):
    """Least squares y ~ c theta (+ d eps^3); returns (c, d or None, relative residual)."""
    eps = np.asarray(epsilons, dtype=float)
    cols = [theta(eps)]
    if nuisance:
        cols.append(eps**3)
    X = np.stack(cols, axis=1)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise FitDegenerate("design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    ny = np.linalg.norm(y)
    resid = float(np.linalg.norm(y - X @ coef) / ny) if ny > 0 else 0.0
    return float(coef[0]), (float(coef[1]) if nuisance else None), resid


def expansion_fit(m: ManifoldModel, p: Params, B: float, epsilons=None, nuisance: bool = False,
                  grid: RadialGrid | None = None, log_rule: bool | None = None) -> ExpansionFit:
    """Fit I_{K^{-1} B}(u_eps) - K^{-1} ~ c theta_eps over a decreasing eps ladder.

    One grid serves the whole ladder so that the data differ only through eps.
    ``trend_ok`` is False (and a warning logged) when |I - K^{-1}| fails to
    shrink along the ladder.
    """
    eps = list(default_epsilons(m) if epsilons is None else epsilons)
    if len(eps) < 4:
        raise ValueError("need at least 4 eps values")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    if grid is None:
        grid = _expansion_grid(m, p, eps, EXPANSION_COUNT, EXPANSION_GRADING)
    vals = expansion_values(m, p, B, eps, grid)
    kinv = k_opt_inv(p)
    y = vals - kinv
    th = theta_rule(p.n, log_rule)
    c, d, resid = fit_coefficient(eps, y, th, nuisance)
    trend = bool(np.all(np.diff(np.abs(y)) < 0))
    if not trend:
        log.warning("|I - K^-1| does not shrink monotonically along the eps ladder (B=%g)", B)
    return ExpansionFit(tuple(eps), tuple(float(v) for v in vals), th, c, resid, float(B), kinv,
                        d, trend)


@dataclass(frozen=True)
class B0Estimate:
    B_low: float
    B_high: float
    lambda_at_B: float
    iterations: int
    tol: float
    history: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.B_low > self.B_high:
            raise ValueError("B_low must not exceed B_high")


def b0_search(m: ManifoldModel, p: Params, policy: GridPolicy | None = None, tol: float = 1e-4,
              rel_width: float = 1e-2, B_start: float = 1.0, max_doublings: int = 40,
              opts: SolverOptions | None = None) -> B0Estimate:
    """Bisection for the smallest B whose radial minimum reaches K^{-1} (1 - tol).

    Every candidate is minimised from the constant seed with alpha = K^{-1} B.
    On the flat chart B = 0 is tried first and returned when it already passes.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    policy = policy or GridPolicy()
    opts = opts or SolverOptions(initial_profile="constant_seed")
    kinv = k_opt_inv(p)
    grid = policy.build(m, p)
    history = []

    def passes(B):
        res = minimize(m, p.with_alpha(kinv * B), grid, opts)
        ok = res.lam >= kinv * (1.0 - tol)
        history.append((B, res.lam, ok, res.converged))
        log.info("B=%.6g lambda/K^-1=%.8f %s", B, res.lam / kinv, "pass" if ok else "fail")
        return ok, res.lam

    if m.scalar_curvature_at_base == 0.0:
        ok, lam = passes(0.0)
        if ok:
            return B0Estimate(0.0, 0.0, lam, len(history), tol, tuple(history))

    lo, hi = 0.0, float(B_start)
    ok, lam_hi = passes(hi)
    doublings = 0
    while not ok:
        lo = hi
        hi *= 2.0
        doublings += 1
        if doublings > max_doublings:
            raise BracketNotFound(f"no passing B up to {hi:g}; last lambda/K^-1 = "
                                  f"{history[-1][1] / kinv:.8f}")
        ok, lam_hi = passes(hi)
    while hi - lo > rel_width * hi:
        mid = 0.5 * (lo + hi)
        ok, lam = passes(mid)
        if ok:
            hi, lam_hi = mid, lam
        else:
            lo = mid
    return B0Estimate(lo, hi, lam_hi, len(history), tol, tuple(history))
