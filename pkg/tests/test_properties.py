from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hslab.bubble import BubbleProfile, bubble_eval
from hslab.constants import Params, bubble_scale_constant, critical_exponent, k_opt
from hslab.expansion import cutoff
from hslab.functional import quotient
from hslab.geometry import round_sphere
from hslab.radial import RadialFunction, build_grid, dirichlet_energy, fd_weights, weighted_norm

dims = st.integers(3, 9)
sing = st.floats(0.0, 1.95)


@lru_cache(maxsize=None)
def _grid(n, s):
    return build_grid(round_sphere(n), Params(n, s), 300, 2.0)


def _profile(n, s, a, b):
    g = _grid(n, s)
    r = g.nodes
    return g.sample(lambda r: (1.0 + a * np.cos(b * r)) * (np.pi - r))


@given(n=dims, s=sing)
def test_exponent_range(n, s):
    q = critical_exponent(Params(n, s))
    assert 2.0 < q <= 2.0 * n / (n - 2) + 1e-12


@given(n=dims, s=sing)
def test_scale_identity(n, s):
    p = Params(n, s)
    k = bubble_scale_constant(p)
    assert k ** (2 - s) == pytest.approx((n - 2) * (n - s) * k_opt(p), rel=1e-12)


@given(n=st.one_of(st.integers(-3, 2), st.floats(3.1, 3.9)), s=sing)
def test_params_rejects_bad_dimension(n, s):
    with pytest.raises(ValueError):
        Params(n, s)


@given(s=st.one_of(st.floats(-5, -1e-9), st.floats(2.0, 10.0)))
def test_params_rejects_bad_s(s):
    with pytest.raises(ValueError):
        Params(4, s)


@settings(max_examples=40, deadline=None)
@given(n=st.sampled_from([3, 4, 5]), s=st.sampled_from([0.0, 0.5, 1.0]),
       a=st.floats(-0.9, 0.9), b=st.floats(0.0, 3.0), c=st.floats(1e-3, 1e3))
def test_homogeneity(n, s, a, b, c):
    p = Params(n, s, 2.0)
    u = _profile(n, s, a, b)
    v = RadialFunction(u.grid, c * u.values)
    assert weighted_norm(v, p.q) == pytest.approx(c * weighted_norm(u, p.q), rel=1e-12)
    assert dirichlet_energy(v) == pytest.approx(c * c * dirichlet_energy(u), rel=1e-12)
    assert quotient(v, p).lam == pytest.approx(quotient(u, p).lam, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(n=st.sampled_from([3, 4, 5]), s=st.sampled_from([0.0, 1.0]),
       a=st.floats(-0.9, 0.9), b=st.floats(0.0, 3.0), alpha=st.floats(0.0, 50.0))
def test_quotient_monotone_in_alpha(n, s, a, b, alpha):
    u = _profile(n, s, a, b)
    lo = quotient(u, Params(n, s, alpha)).lam
    hi = quotient(u, Params(n, s, alpha + 1.0)).lam
    assert hi > lo


@given(n=dims, s=sing, a=st.floats(1e-3, 1e3), x=st.floats(0.0, 50.0))
def test_bubble_scaling(n, s, a, x):
    # u_a(a X) = a^{-(n-2)/2} u_1(X) with u_a the bubble of scale a k
    p = Params(n, s)
    k = bubble_scale_constant(p)
    ua = BubbleProfile(p, a * k)
    u1 = BubbleProfile(p, k)
    lhs = float(bubble_eval(ua, a * x * k))
    rhs = a ** (-(n - 2) / 2) * float(bubble_eval(u1, x * k))
    assert lhs == pytest.approx(rhs, rel=1e-11)


@given(h=st.lists(st.floats(0.1, 1.0), min_size=4, max_size=4), c=st.floats(-2, 2))
def test_fd_weights_exact_on_quartics(h, c):
    x = np.concatenate([[0.0], np.cumsum(h)])
    x0 = x[2] + 0.1 * c * h[1]
    w1 = fd_weights(x[None, :], np.array([x0]), 1)[0]
    w2 = fd_weights(x[None, :], np.array([x0]), 2)[0]
    f = x**4 - 2 * x**3 + x
    assert w1 @ f == pytest.approx(4 * x0**3 - 6 * x0**2 + 1, abs=1e-8)
    assert w2 @ f == pytest.approx(12 * x0**2 - 12 * x0, abs=1e-7)


@given(r=st.floats(-1.0, 10.0), R=st.floats(0.1, 5.0))
def test_cutoff_bounds(r, R):
    assert 0.0 <= float(cutoff(r, R)) <= 1.0
