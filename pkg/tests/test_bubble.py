import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from hslab.bubble import (
    BubbleProfile,
    GridTooCoarse,
    QuadratureError,
    bubble_derivative,
    bubble_dirichlet_energy,
    bubble_eval,
    bubble_mass_inside,
    bubble_pde_residual,
    bubble_weighted_mass,
    residual_grid,
    unit_bubble,
    wide_flat_grid,
)
from hslab.constants import Params, k_opt_inv, unit_sphere_volume
from hslab.geometry import round_sphere
from hslab.radial import build_grid

CASES = [(3, 1.0), (4, 1.0), (5, 0.5)]


@pytest.mark.parametrize("n,s", CASES)
def test_mass_and_energy(n, s):
    p = Params(n, s)
    b = unit_bubble(p)
    g = wide_flat_grid(p, 4000)
    assert bubble_weighted_mass(b, g) == pytest.approx(1.0, abs=1e-6)
    assert bubble_dirichlet_energy(b, g) == pytest.approx(k_opt_inv(p), rel=1e-6)


@pytest.mark.parametrize("n,s", CASES)
def test_mass_against_adaptive_quadrature(n, s):
    # independent oracle: scipy's adaptive quadrature on [0, inf)
    p = Params(n, s)
    b = unit_bubble(p)
    f = lambda r: bubble_eval(b, r) ** p.q * r ** (n - 1 - s)
    ref = unit_sphere_volume(n) * (quad(f, 0, b.k)[0] + quad(f, b.k, np.inf)[0])
    assert ref == pytest.approx(1.0, abs=1e-8)


def test_energy_is_scale_invariant():
    p = Params(4, 1.0)
    g = wide_flat_grid(p, 4000, radius_in_k=5000)
    for a in (0.5, 2.0):
        b = BubbleProfile(p, a * unit_bubble(p).k)
        assert bubble_dirichlet_energy(b, g) == pytest.approx(k_opt_inv(p), rel=1e-6)


@pytest.mark.parametrize("n,s", CASES)
def test_pde_residual_fourth_order(n, s):
    p = Params(n, s)
    b = unit_bubble(p)
    res = [bubble_pde_residual(b, residual_grid(p, c)) for c in (512, 1024, 2048)]
    assert res[0] / res[1] >= 8 and res[1] / res[2] >= 8


def test_pde_residual_small_at_2048():
    p = Params(4, 1.0)
    assert bubble_pde_residual(unit_bubble(p), residual_grid(p, 2048)) <= 1e-6


def test_wrong_constant_residual_stays_large():
    p = Params(4, 1.0)
    b = unit_bubble(p)
    res = [bubble_pde_residual(b, residual_grid(p, c), constant_factor=1.1)
           for c in (512, 1024, 2048)]
    assert min(res) > 1e-2
    assert res[-1] > 0.9 * res[0]


def test_pde_residual_coarse_grid_reported():
    p = Params(4, 1.0)
    b = unit_bubble(p)
    with pytest.raises(GridTooCoarse):
        bubble_pde_residual(b, wide_flat_grid(p, 16, 1000.0, 3.0), window=(0.01 * b.k, 1e3 * b.k))


def test_coarse_quadrature_reported():
    p = Params(4, 1.0)
    with pytest.raises(QuadratureError):
        bubble_weighted_mass(unit_bubble(p), wide_flat_grid(p, 16), tol=1e-10)


def test_integrals_need_flat_chart():
    p = Params(4, 1.0)
    with pytest.raises(ValueError):
        bubble_weighted_mass(unit_bubble(p), build_grid(round_sphere(4), p, 64))


def test_shape_properties():
    p = Params(5, 0.5)
    b = unit_bubble(p)
    r = np.linspace(0, 50 * b.k, 2001)
    u = bubble_eval(b, r)
    assert u[0] == pytest.approx(1.0, rel=1e-15)
    assert np.all(np.diff(u) < 0)
    assert np.all(u[1:] < u[0])


def test_derivative_analytic():
    p = Params(4, 1.0)
    b = unit_bubble(p)
    r = np.array([0.3, 1.0, 4.0])
    h = 1e-6
    fd = (bubble_eval(b, r + h) - bubble_eval(b, r - h)) / (2 * h)
    assert np.allclose(bubble_derivative(b, r), fd, rtol=1e-7)


def test_scaling_family_exact():
    p = Params(4, 1.0)
    k = unit_bubble(p).k
    r = np.linspace(0.0, 10.0, 50)
    for lam in (0.25, 3.0):
        lhs = bubble_eval(BubbleProfile(p, lam * k), lam * r)
        rhs = lam ** (-(p.n - 2) / 2) * bubble_eval(BubbleProfile(p, k), r)
        assert np.allclose(lhs, rhs, rtol=1e-14, atol=0)


def test_mass_inside_closed_form():
    p = Params(4, 1.0)
    b = unit_bubble(p)
    f = lambda r: bubble_eval(b, r) ** p.q * r ** (p.n - 1 - p.s)
    R = 10 * b.k
    ref = unit_sphere_volume(4) * quad(f, 0, R, limit=200)[0]
    assert bubble_mass_inside(b, R) == pytest.approx(ref, rel=1e-10)
    # median radius: half of the mass inside, found by root finding
    rm = brentq(lambda x: bubble_mass_inside(b, x) - 0.5, 1e-3, 1e3)
    assert 0.1 * b.k < rm < 10 * b.k


def test_invalid_profile():
    with pytest.raises(ValueError):
        BubbleProfile(Params(4, 1.0), 0.0)
    with pytest.raises(ValueError):
        bubble_eval(unit_bubble(Params(4, 1.0)), -1.0)
