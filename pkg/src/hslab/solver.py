"""Minimisation of I_alpha under ||u||_{2*(s),s} = 1 by damped nonlinear inverse iteration.

Each step solves the coercive tridiagonal problem (A + alpha M) w = G(u),
G the gradient of ||u||^q / q, and relaxes u towards the normalised w.  A
fixed point solves the discrete Euler-Lagrange equation with the multiplier
equal to the quotient.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import LinAlgError, solveh_banded

from .bubble import bubble_eval, unit_bubble
from .constants import Params
from .functional import el_residual
from .geometry import ManifoldModel
from .radial import (
    RadialFunction,
    RadialGrid,
    build_grid,
    critical_norm_gradient,
    dirichlet_energy,
    l2_norm,
    mass_bands,
    stiffness_bands,
    weighted_norm,
)

log = logging.getLogger(__name__)

__all__ = [
    "SolverOptions",
    "MinimizationResult",
    "GridPolicy",
    "SolverError",
    "minimize",
    "sweep_alpha",
    "seed_profile",
    "transfer",
    "blowup_scale",
    "peak_radius",
]

SEEDS = ("bubble_seed", "constant_seed", "custom")


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 40000
    tolerance: float = 1e-8
    damping: float = 0.7
    initial_profile: str = "constant_seed"
    divergence_window: int = 10

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.initial_profile not in SEEDS:
            raise ValueError(f"initial_profile must be one of {SEEDS}")


@dataclass(eq=False)
class MinimizationResult:
    u: RadialFunction
    lam: float
    mu: float
    peak_radius: float
    iterations: int
    el_residual: float
    converged: bool
    alpha: float
    l2_norm: float = 0.0
    status: str = "ok"
    history: list = field(default_factory=list, repr=False)

    @property
    def grid(self) -> RadialGrid:
        return self.u.grid


@dataclass(frozen=True)
class GridPolicy:
    """Grid for a sweep: start at ``count`` and double while mu spans < ``min_cells`` cells."""

    count: int = 4000
    grading: float = 3.0
    min_cells: int = 10
    max_count: int = 64000

    def build(self, m: ManifoldModel, p: Params, count: int | None = None) -> RadialGrid:
        return build_grid(m, p, self.count if count is None else count, self.grading)


def blowup_scale(u: RadialFunction, n: int) -> float:
    return float(np.max(u.values)) ** (-2.0 / (n - 2.0))


def peak_radius(u: RadialFunction, rel: float = 1e-12) -> float:
    """Smallest node radius where u is within ``rel`` of its maximum."""
    vals = u.values
    top = np.max(vals)
    return float(u.grid.nodes[np.argmax(vals >= top * (1.0 - rel))])


def seed_profile(grid: RadialGrid, p: Params, kind: str) -> RadialFunction:
    """Starting profile; bubble seeds are shifted by their boundary value to vanish at r_max."""
    if kind == "constant_seed":
        return grid.sample(lambda r: np.ones_like(r))
    if kind == "bubble_seed":
        b = unit_bubble(p)
        edge = float(bubble_eval(b, grid.r_max))
        return grid.sample(lambda r: bubble_eval(b, r) - edge)
    raise ValueError(f"seed kind {kind!r} needs an explicit profile")


def transfer(u: RadialFunction, grid: RadialGrid) -> RadialFunction:
    """Monotone cubic transfer of a profile onto another grid of the same chart."""
    if u.grid is grid:
        return u
    vals = PchipInterpolator(u.grid.nodes, u.values)(np.clip(grid.nodes, 0, u.grid.r_max))
    vals[-1] = 0.0
    return RadialFunction(grid, vals)


def _normalize(v: np.ndarray, grid: RadialGrid, q: float) -> np.ndarray:
    norm = weighted_norm(RadialFunction(grid, v, dirichlet=False), q)
    if not norm > 0:
        raise SolverError("iterate collapsed to zero")
    return v / norm


def minimize(m: ManifoldModel, p: Params, grid: RadialGrid, opts: SolverOptions | None = None,
             seed: RadialFunction | None = None) -> MinimizationResult:
    opts = opts or SolverOptions()
    if grid.model is not m and (grid.model.label, grid.model.r_max) != (m.label, m.r_max):
        raise ValueError("grid was not built for this model")
    if (grid.params.n, grid.params.s) != (p.n, p.s):
        raise ValueError("grid was not built for these (n, s)")
    if p.alpha == 0.0 and m.scalar_curvature_at_base != 0.0:
        raise ValueError("alpha = 0 is only allowed on the flat model")

    if seed is None:
        seed = seed_profile(grid, p, opts.initial_profile)
    elif seed.grid is not grid:
        seed = transfer(seed, grid)
    q = p.q

    ad, ao = stiffness_bands(grid)
    md, mo = mass_bands(grid)
    # Dirichlet node dropped; upper-banded storage for solveh_banded
    band = np.zeros((2, grid.nodes.size - 1))
    band[1] = (ad + p.alpha * md)[:-1]
    band[0, 1:] = (ao + p.alpha * mo)[:-1]

    u = _normalize(np.abs(seed.values), grid, q)
    u[-1] = 0.0
    uf = RadialFunction(grid, u)
    lam_prev = dirichlet_energy(uf) + p.alpha * l2_norm(uf) ** 2
    rises = 0
    status = "max_iterations"
    converged = False
    history = []
    it = 0
    for it in range(1, opts.max_iterations + 1):
        rhs = critical_norm_gradient(RadialFunction(grid, u), q)[:-1]
        w = np.zeros_like(u)
        try:
            w[:-1] = solveh_banded(band, rhs, check_finite=False)
        except (LinAlgError, ValueError) as exc:
            raise SolverError(f"linear solve failed at iteration {it}: {exc}") from exc
        w = _normalize(w, grid, q)
        u = _normalize((1.0 - opts.damping) * u + opts.damping * w, grid, q)
        uf = RadialFunction(grid, u)
        lam = dirichlet_energy(uf) + p.alpha * l2_norm(uf) ** 2
        history.append(lam)
        if abs(lam - lam_prev) / lam < opts.tolerance:
            converged, status = True, "converged"
            break
        rises = rises + 1 if lam > lam_prev else 0
        if rises >= opts.divergence_window:
            status = "diverging"
            log.warning("lambda rose for %d consecutive steps (alpha=%g)", rises, p.alpha)
            break
        lam_prev = lam

    uf = RadialFunction(grid, u)
    if np.any(u[:-1] <= 0):
        raise SolverError("minimiser lost positivity on interior nodes")
    l2 = l2_norm(uf)
    lam = dirichlet_energy(uf) + p.alpha * l2**2
    try:
        resid = el_residual(uf, p, lam)
    except ValueError:
        resid = float("nan")  # core window holds no interior node
    return MinimizationResult(
        u=uf,
        lam=lam,
        mu=blowup_scale(uf, p.n),
        peak_radius=peak_radius(uf),
        iterations=it,
        el_residual=resid,
        converged=converged,
        alpha=p.alpha,
        l2_norm=l2,
        status=status,
        history=history,
    )


def _cells_inside(grid: RadialGrid, radius: float) -> int:
    return int(np.searchsorted(grid.nodes, radius, side="right")) - 1


def _failed(alpha: float, grid: RadialGrid, exc: Exception) -> MinimizationResult:
    zero = RadialFunction(grid, np.zeros(grid.nodes.size))
    return MinimizationResult(u=zero, lam=float("nan"), mu=float("nan"),
                              peak_radius=float("nan"), iterations=0,
                              el_residual=float("nan"), converged=False, alpha=alpha,
                              l2_norm=float("nan"), status=f"failed: {exc}")


def _run_point(args):
    m, p, policy, opts = args
    grid = policy.build(m, p)
    try:
        return minimize(m, p, grid, opts)
    except (SolverError, ValueError) as exc:
        return _failed(p.alpha, grid, exc)


def sweep_alpha(m: ManifoldModel, p_base: Params, alphas, policy: GridPolicy | None = None,
                opts: SolverOptions | None = None, warm_start: bool = True,
                jobs: int = 1) -> list[MinimizationResult]:
    """Minimise along an increasing list of penalties.

    With ``warm_start`` each point starts from the previous profile and the
    sweep is sequential; otherwise points are independent and may run on
    ``jobs`` worker processes.  Output order always follows ``alphas``.
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValueError("need at least one alpha")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly increasing")
    policy = policy or GridPolicy()
    opts = opts or SolverOptions()

    if not warm_start:
        tasks = [(m, p_base.with_alpha(a), policy, opts) for a in alphas]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                return list(pool.map(_run_point, tasks))
        return [_run_point(t) for t in tasks]

    results = []
    count = policy.count
    seed = None
    for a in alphas:
        p = p_base.with_alpha(a)
        grid = policy.build(m, p, count)
        try:
            res = minimize(m, p, grid, opts, seed=seed)
            while (_cells_inside(grid, res.mu) < policy.min_cells
                   and count * 2 <= policy.max_count):
                count *= 2
                log.info("refining sweep grid to %d cells at alpha=%g", count, a)
                grid = policy.build(m, p, count)
                res = minimize(m, p, grid, opts, seed=res.u)
        except (SolverError, ValueError) as exc:
            log.warning("alpha=%g failed: %s", a, exc)
            results.append(_failed(a, grid, exc))
            continue
        results.append(res)
        seed = res.u
    return results
