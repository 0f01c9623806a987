"""Rotationally symmetric model manifolds in geodesic polar coordinates about x0.

Only the polar volume density is modelled: dv_g = theta(r) r^{n-1} dr dsigma.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "ManifoldModel",
    "round_sphere",
    "flat_disk",
    "model_from_label",
    "volume_density",
    "cartan_check",
    "fitted_quadratic_coefficient",
    "SPHERE_MARGIN",
]

SPHERE_MARGIN = 1e-3


@dataclass(frozen=True)
class ManifoldModel:
    n: int
    r_max: float
    density: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    scalar_curvature_at_base: float
    label: str

    def __post_init__(self):
        if self.r_max <= 0:
            raise ValueError(f"r_max must be positive, got {self.r_max}")
        if self.n < 2:
            raise ValueError(f"dimension must be >= 2, got {self.n}")

    def theta(self, r):
        return self.density(np.asarray(r, dtype=float))


@dataclass(frozen=True)
class _SinePower:
    # (sin r / r)^{n-1}; np.sinc(x) = sin(pi x) / (pi x) is exactly 1 at 0
    n: int

    def __call__(self, r):
        return np.sinc(r / np.pi) ** (self.n - 1)


def _flat_density(r):
    return np.ones_like(r, dtype=float)


def round_sphere(n: int, margin: float = SPHERE_MARGIN) -> ManifoldModel:
    """Unit round sphere S^n seen from a pole; the chart stops ``margin`` short of the antipode."""
    return ManifoldModel(
        n=n,
        r_max=np.pi - margin,
        density=_SinePower(n),
        scalar_curvature_at_base=float(n * (n - 1)),
        label="sphere",
    )


def flat_disk(n: int, r_max: float = 1.0) -> ManifoldModel:
    return ManifoldModel(n=n, r_max=float(r_max), density=_flat_density,
                         scalar_curvature_at_base=0.0, label="flat")


def model_from_label(label: str, n: int, r_max: float | None = None) -> ManifoldModel:
    if label == "sphere":
        if r_max is not None:
            return round_sphere(n, margin=np.pi - r_max)
        return round_sphere(n)
    if label == "flat":
        return flat_disk(n, 1.0 if r_max is None else r_max)
    raise ValueError(f"unknown model label {label!r} (expected 'sphere' or 'flat')")


def volume_density(m: ManifoldModel, r):
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(r_arr >= m.r_max):
        raise ValueError(f"radius outside the polar chart [0, {m.r_max})")
    out = m.theta(r_arr)
    return float(out) if out.ndim == 0 else out


def fitted_quadratic_coefficient(m: ManifoldModel, radii) -> float:
    """Coefficient c of r^2 in a least-squares fit theta - 1 ~ c r^2 + d r^4 + e r^6."""
    radii = np.asarray(radii, dtype=float)
    if radii.size < 3:
        raise ValueError("cartan_check needs at least 3 radii for a non-degenerate fit")
    if np.any(radii <= 0) or np.any(radii >= m.r_max / 4):
        raise ValueError("radii must lie in (0, r_max / 4)")
    design = np.stack([radii**2, radii**4, radii**6], axis=1)
    coeffs, *_ = np.linalg.lstsq(design, m.theta(radii) - 1.0, rcond=None)
    return float(coeffs[0])


def cartan_check(m: ManifoldModel, radii) -> float:
    """Distance between the fitted r^2 density coefficient and -Scal(x0) / (6n)."""
    expected = -m.scalar_curvature_at_base / (6.0 * m.n)
    return abs(fitted_quadratic_coefficient(m, radii) - expected)
