import math

import numpy as np
import pytest

from hslab.constants import Params, unit_sphere_volume
from hslab.geometry import flat_disk, round_sphere
from hslab.radial import (
    RadialFunction,
    build_grid,
    critical_norm_gradient,
    dirichlet_energy,
    l2_norm,
    mass_bands,
    nodal_integral,
    read_grid_csv,
    stiffness_bands,
    weighted_norm,
    write_grid_csv,
)


def _quad(diag, off, v):
    return float(v @ (diag * v) + 2 * v[:-1] @ (off * v[1:]))


@pytest.mark.parametrize("n,s", [(3, 1.0), (4, 0.5), (5, 1.5), (4, 0.0)])
def test_singular_moment_exact_on_flat(n, s):
    g = build_grid(flat_disk(n, 2.0), Params(n, s), 64, 3.0)
    for k in (0, 1, 2):
        val = g.integrate(lambda r: r**k, "singular")
        assert val == pytest.approx(unit_sphere_volume(n) * 2.0 ** (n - s + k) / (n - s + k),
                                    rel=1e-13)


def test_sphere_volume_integral():
    g = build_grid(round_sphere(3), Params(3, 0.0), 400, 2.0)
    r_max = g.r_max
    exact = 4 * math.pi * (0.5 * r_max - 0.25 * math.sin(2 * r_max))
    assert g.integrate(lambda r: np.ones_like(r)) == pytest.approx(exact, rel=1e-12)
    assert exact == pytest.approx(2 * math.pi**2, rel=1e-8)


def test_nodes_graded_and_include_origin():
    g = build_grid(flat_disk(4, 1.0), Params(4, 1.0), 100, 2.0)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert np.all(np.diff(g.nodes) > 0)
    assert g.nodes[1] == pytest.approx(1e-4)


def test_energy_of_linear_profile_is_exact():
    n = 4
    g = build_grid(flat_disk(n, 1.0), Params(n, 1.0), 50, 2.5)
    u = g.sample(lambda r: 1.0 - r)
    assert dirichlet_energy(u) == pytest.approx(unit_sphere_volume(n) / n, rel=1e-13)


def test_norms_of_piecewise_linear_profile():
    # u = 1 - r is reproduced exactly by the interpolant, so norms are exact integrals
    n, s = 3, 1.0
    g = build_grid(flat_disk(n, 1.0), Params(n, s), 40, 2.0)
    u = g.sample(lambda r: 1.0 - r)
    om = unit_sphere_volume(n)
    # lumped mass: the interpolant of u^2 lies above u^2, error O(h^2)
    exact = om * (1 / 3 - 2 / 4 + 1 / 5)
    assert exact < l2_norm(u) ** 2 < exact * (1 + 1e-2)
    q = 4.0  # (1-r)^4 r^{1}: Beta(2, 5) = 1/30
    assert weighted_norm(u, q) ** q == pytest.approx(om / 30.0, rel=1e-12)


def test_bands_reproduce_functionals():
    p = Params(5, 0.5)
    g = build_grid(round_sphere(5), p, 80, 2.0)
    rng = np.random.default_rng(7)
    v = rng.random(g.nodes.size)
    v[-1] = 0.0
    u = RadialFunction(g, v)
    assert _quad(*stiffness_bands(g), v) == pytest.approx(dirichlet_energy(u), rel=1e-12)
    assert _quad(*mass_bands(g), v) == pytest.approx(l2_norm(u) ** 2, rel=1e-12)


def test_critical_gradient_matches_finite_difference():
    p = Params(4, 1.0)
    g = build_grid(flat_disk(4, 1.0), p, 30, 2.0)
    rng = np.random.default_rng(3)
    v = 0.5 + rng.random(g.nodes.size)
    v[-1] = 0.0
    grad = critical_norm_gradient(RadialFunction(g, v), p.q)
    f = lambda w: weighted_norm(RadialFunction(g, w, dirichlet=False), p.q) ** p.q / p.q
    for i in (8, 17, 25):
        h = 1e-5 * v[i]
        e = np.zeros_like(v)
        e[i] = h
        fd = (f(v + e) - f(v - e)) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-6)


def test_weighted_norm_homogeneous():
    p = Params(4, 1.0)
    g = build_grid(round_sphere(4), p, 60, 2.0)
    u = g.sample(lambda r: np.cos(r / 2))
    assert weighted_norm(u.scaled(-3.0), p.q) == pytest.approx(3 * weighted_norm(u, p.q),
                                                                rel=1e-14)


def test_l2_norm_of_constant():
    n = 4
    g = build_grid(flat_disk(n, 1.5), Params(n, 1.0), 100, 2.0)
    one = RadialFunction(g, np.ones(g.nodes.size), dirichlet=False)
    assert l2_norm(one) == pytest.approx((unit_sphere_volume(n) * 1.5**n / n) ** 0.5, rel=1e-10)
    assert l2_norm(one.scaled(-2.5)) == pytest.approx(2.5 * l2_norm(one), rel=1e-15)


def test_nodal_weights_sum_to_volume():
    g = build_grid(round_sphere(4), Params(4, 0.5), 120, 2.0)
    one = RadialFunction(g, np.ones(g.nodes.size), dirichlet=False)
    assert nodal_integral(one) == pytest.approx(g.integrate(lambda r: np.ones_like(r)),
                                                rel=1e-13)


def test_function_validation():
    g = build_grid(flat_disk(3, 1.0), Params(3, 1.0), 20)
    with pytest.raises(ValueError):
        RadialFunction(g, np.ones(5))
    with pytest.raises(ValueError):
        RadialFunction(g, np.ones(21))  # Dirichlet tag but nonzero at r_max
    bad = np.zeros(21)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        RadialFunction(g, bad)
    with pytest.raises(ValueError):
        build_grid(flat_disk(3, 1.0), Params(3, 1.0), 8)
    with pytest.raises(ValueError):
        build_grid(flat_disk(4, 1.0), Params(3, 1.0), 32)


def test_csv_roundtrip(tmp_path):
    p = Params(4, 0.5)
    g = build_grid(round_sphere(4), p, 64, 2.0)
    u = g.sample(lambda r: np.cos(r / 2.0))
    path = tmp_path / "grid.csv"
    write_grid_csv(path, g, u)
    g2, u2 = read_grid_csv(path)
    assert np.array_equal(g2.nodes, g.nodes)
    assert np.array_equal(u2.values, u.values)
    assert np.array_equal(g2.w_sing, g.w_sing)
    header = path.read_text().splitlines()[:3]
    assert header[0] == "n,s,model,count,grading"
    assert header[2] == "r,w_vol,w_sing,u"
