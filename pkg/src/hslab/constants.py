"""Hardy-Sobolev exponent, sphere volumes and the sharp Euclidean constant K(n, s)."""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Params",
    "critical_exponent",
    "log_gamma",
    "unit_sphere_volume",
    "k_opt",
    "k_opt_inv",
    "bubble_scale_constant",
    "talenti_constant",
    "curvature_bound_factor",
    "critical_b",
]


@dataclass(frozen=True)
class Params:
    """Problem parameters: dimension ``n``, singularity exponent ``s``, penalty ``alpha``."""

    n: int
    s: float
    alpha: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"dimension n must be an integer >= 3, got {self.n!r}")
        if not (0.0 <= self.s < 2.0):
            raise ValueError(f"singularity exponent s must lie in [0, 2), got {self.s!r}")
        if not (self.alpha >= 0.0) or math.isinf(self.alpha):
            raise ValueError(f"penalty alpha must be finite and >= 0, got {self.alpha!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def q(self) -> float:
        return critical_exponent(self)

    def with_alpha(self, alpha: float) -> "Params":
        return Params(self.n, self.s, alpha)


def critical_exponent(p: Params) -> float:
    return 2.0 * (p.n - p.s) / (p.n - 2.0)


# Lanczos approximation, g = 7, nine terms (Godfrey's coefficient set, as
# tabulated in Numerical Recipes 3rd ed. and Boost.Math docs).
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _lanczos_log_gamma(x: float) -> float:
    # valid for x >= 0.5
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        acc += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * math.log(t) - t + math.log(acc)


def log_gamma(x: float) -> float:
    """Natural log of Gamma for real ``x > 0``.

    Lanczos for ``x >= 0.5``, reflection below. Within 0.2 of the zeros at
    1 and 2 the zeta-function Taylor series about 1 is used instead, so the
    result keeps its relative accuracy where lnG changes sign.
    """
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise ValueError(f"log_gamma requires a finite x > 0, got {x!r}")
    if abs(x - 1.0) < 0.2 or abs(x - 2.0) < 0.2:
        return _log_gamma_near_zeros(x)
    if x < 0.5:
        # Gamma(x) Gamma(1-x) = pi / sin(pi x), with 1-x in (0.5, 1)
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    return _lanczos_log_gamma(x)


# Taylor coefficients of lnG(1 + t) = -gamma t + sum_{k>=2} (-1)^k zeta(k) t^k / k
_EULER_GAMMA = 0.57721566490153286061
_ZETA = (
    1.6449340668482264365,
    1.2020569031595942854,
    1.0823232337111381915,
    1.0369277551433699263,
    1.0173430619844491397,
    1.0083492773819228268,
    1.0040773561979443394,
    1.0020083928260822144,
    1.0009945751278180853,
    1.0004941886041194646,
    1.0002460865533080483,
    1.0001227133475784891,
    1.0000612481350587048,
    1.0000305882363070205,
    1.0000152822594086519,
    1.0000076371976378998,
    1.0000038172932649998,
    1.0000019082127165539,
    1.0000009539620338728,
    1.0000004769329867878,
    1.0000002384505027277,
    1.0000001192199259653,
    1.0000000596081890513,
)


def _log_gamma_near_zeros(x: float) -> float:
    if abs(x - 2.0) < 0.2:
        # lnG(2 + t) = lnG(1 + t) + ln(1 + t)
        return _log_gamma_near_zeros(x - 1.0) + math.log1p(x - 2.0)
    t = x - 1.0
    acc = 0.0
    power = -t
    for k, zeta in enumerate(_ZETA, start=2):
        power *= -t
        acc += zeta * power / k
    return -_EULER_GAMMA * t + acc


def unit_sphere_volume(n: int) -> float:
    """Measure of the unit sphere S^{n-1} in R^n: 2 pi^{n/2} / Gamma(n/2)."""
    if int(n) != n or n < 2:
        raise ValueError(f"unit_sphere_volume requires integer n >= 2, got {n!r}")
    return 2.0 * math.pi ** (n / 2.0) / math.exp(log_gamma(n / 2.0))


def k_opt(p: Params) -> float:
    """Best constant K(n, s) of the Euclidean Hardy-Sobolev inequality."""
    n, s = p.n, p.s
    b = (n - s) / (2.0 - s)
    log_inner = (
        -math.log(2.0 - s)
        + math.log(unit_sphere_volume(n))
        + 2.0 * log_gamma(b)
        - log_gamma(2.0 * b)
    )
    return math.exp(-(2.0 - s) / (n - s) * log_inner) / ((n - 2.0) * (n - s))


def k_opt_inv(p: Params) -> float:
    return 1.0 / k_opt(p)


def bubble_scale_constant(p: Params) -> float:
    """The scale ``k`` with k^{2-s} = (n-2)(n-s) K(n,s); the unit bubble peaks at 1."""
    return ((p.n - 2.0) * (p.n - p.s) * k_opt(p)) ** (1.0 / (2.0 - p.s))


def talenti_constant(n: int) -> float:
    """Sharp Sobolev constant K(n, 0) = 4 / (n (n-2) vol(S^n)^{2/n}).

    Written through the volume of the n-sphere (not S^{n-1}), which makes it
    independent of the Beta-function form used by ``k_opt``. Uses ``math.gamma``.
    """
    vol_sn = 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)
    return 4.0 / (n * (n - 2.0) * vol_sn ** (2.0 / n))


def curvature_bound_factor(p: Params) -> float:
    """(n-2)(6-s) / (12 (2n-2-s)), the curvature coefficient in the B0 lower bound."""
    n, s = p.n, p.s
    return (n - 2.0) * (6.0 - s) / (12.0 * (2.0 * n - 2.0 - s))


def critical_b(p: Params, scalar_curvature: float) -> float:
    """Lower bound on the second constant for n >= 4: K(n,s) * factor * Scal(x0)."""
    if p.n < 4:
        raise ValueError("the scalar-curvature bound only applies for n >= 4")
    return k_opt(p) * curvature_bound_factor(p) * scalar_curvature
