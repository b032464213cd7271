"""Generalised trigonometric functions and the comparison-geometry bounds built on them.

Notation: a profile ``(delta, Delta, Lambda, inj)`` holds a lower and an upper
bound on sectional curvature, a bound on the covariant derivative of the
curvature tensor and the injectivity radius. Radii ``r`` are tangent-vector
norms in the manifold's own metric.
"""
import math
from dataclasses import dataclass

from .errors import ContractError, DomainError

__all__ = [
    "CurvatureProfile",
    "BoundDomain",
    "sn",
    "ct",
    "pi_kappa",
    "rauch_bounds",
    "hess_exp_radial_bounds",
    "hess_exp_normal_bound",
    "hess_exp_full_bound",
    "alpha_hat",
    "law_of_cosines_zetas",
    "step_size",
]

_SERIES_SWITCH = 1e-8


@dataclass(frozen=True)
class CurvatureProfile:
    delta: float
    Delta: float
    Lambda: float = 0.0
    inj: float = math.inf

    def __post_init__(self):
        if not self.delta <= self.Delta:
            raise ContractError(f"need delta <= Delta, got {self.delta} > {self.Delta}")
        if not self.Lambda >= 0.0:
            raise ContractError(f"Lambda must be >= 0, got {self.Lambda}")
        if not self.inj > 0.0:
            raise ContractError(f"inj must be > 0, got {self.inj}")


@dataclass(frozen=True)
class BoundDomain:
    radius_limit: float

    def __post_init__(self):
        if not self.radius_limit > 0.0:
            raise ContractError(f"radius_limit must be > 0, got {self.radius_limit}")

    def contains(self, r) -> bool:
        return 0.0 < r < self.radius_limit


def sn(kappa, t):
    """Generalised sine: the solution of x'' + kappa x = 0, x(0) = 0, x'(0) = 1."""
    x = kappa * t * t
    if abs(x) < _SERIES_SWITCH:
        return t * (1.0 - x / 6.0 + x * x / 120.0)
    if kappa > 0.0:
        s = math.sqrt(kappa)
        return math.sin(s * t) / s
    s = math.sqrt(-kappa)
    return math.sinh(s * t) / s


def _cs(kappa, t):
    """sn'(kappa, t)."""
    x = kappa * t * t
    if abs(x) < _SERIES_SWITCH:
        return 1.0 - x / 2.0 + x * x / 24.0
    if kappa > 0.0:
        return math.cos(math.sqrt(kappa) * t)
    return math.cosh(math.sqrt(-kappa) * t)


def pi_kappa(kappa):
    """First positive zero of ``sn(kappa, .)``: pi / sqrt(kappa), or inf for kappa <= 0."""
    return math.pi / math.sqrt(kappa) if kappa > 0.0 else math.inf


def _require(r, limit, what):
    if not (0.0 < r < limit):
        raise DomainError(f"{what}: radius {r!r} outside (0, {limit!r})")


def ct(kappa, t):
    """Generalised cotangent sn'/sn on 0 < t < pi_kappa."""
    _require(t, pi_kappa(kappa), "ct")
    x = kappa * t * t
    if abs(x) < _SERIES_SWITCH:
        return (1.0 - x / 3.0 - x * x / 45.0) / t
    return _cs(kappa, t) / sn(kappa, t)


def rauch_bounds(profile: CurvatureProfile, r):
    """Bounds on ``|(d exp_p)_{r u}(w)|`` for unit ``u`` and unit ``w``.

    Returns ``(lower, upper, domain)``; the lower bound is only meaningful for
    ``r`` inside ``domain``. Nothing is raised outside it.
    """
    if not r > 0.0:
        raise DomainError(f"rauch_bounds: radius must be > 0, got {r!r}")
    lower = min(1.0, sn(profile.Delta, r) / r)
    upper = max(1.0, sn(profile.delta, r) / r)
    return lower, upper, BoundDomain(pi_kappa(profile.Delta))


def _one_minus_sn_over_t(k, r):
    """``1/r - sn(k, r)/r^2`` without cancellation for small ``k r^2``."""
    x = k * r * r
    if abs(x) > 1e-2:
        return 1.0 / r - sn(k, r) / (r * r)
    # 1 - sn/r = sum_{j>=1} -(-x)^j / (2j+1)!
    total = 0.0
    term = 1.0
    for j in range(1, 12):
        term *= -x
        total -= term / math.factorial(2 * j + 1)
    return total / r


def hess_exp_radial_bounds(profile: CurvatureProfile, r):
    """Bounds on the radial component of the Hessian of exp, per unit ``|w|^2``."""
    _require(r, pi_kappa(profile.Delta), "hess_exp_radial_bounds")
    return _one_minus_sn_over_t(4.0 * profile.delta, r), _one_minus_sn_over_t(4.0 * profile.Delta, r)


def _second_order_limit(profile):
    return pi_kappa(0.5 * (profile.Delta + profile.delta))


def hess_exp_normal_bound(profile: CurvatureProfile, r):
    """Bound on the component of the Hessian of exp normal to the geodesic."""
    _require(r, _second_order_limit(profile), "hess_exp_normal_bound")
    d, D, L = profile.delta, profile.Delta, profile.Lambda
    h = sn(d, r / 2.0) ** 2
    return 8.0 / (9.0 * r * r) * h * (3.0 * L * h + 2.0 * (D - d) * sn(d, r))


def hess_exp_full_bound(profile: CurvatureProfile, r):
    """Bound on the full Hessian of exp, per unit ``|w|^2``."""
    _require(r, _second_order_limit(profile), "hess_exp_full_bound")
    d, D, L = profile.delta, profile.Delta, profile.Lambda
    h = sn(d, r / 2.0) ** 2
    return 8.0 / (3.0 * r * r) * h * (L * h + 2.0 * max(abs(D), abs(d)) * sn(d, r))


def alpha_hat(profile: CurvatureProfile, alpha, r):
    """Hessian bound of ``f o exp_p`` on a ball of radius ``r`` given ``|Hess f| <= alpha``."""
    if alpha < 0.0:
        raise DomainError(f"alpha must be >= 0, got {alpha!r}")
    c2 = r * r * hess_exp_full_bound(profile, r)
    c1 = max(1.0, (sn(profile.delta, r) / r) ** 2)
    return alpha * (c1 + c2)


def law_of_cosines_zetas(kappa, r):
    """(zeta1, zeta2) = (max(1, r ct(r)), min(1, r ct(r)))."""
    rc = r * ct(kappa, r)
    return max(1.0, rc), min(1.0, rc)


def step_size(profile: CurvatureProfile, alpha, R):
    """Guaranteed step ``1 / alpha_hat(R / 2)``."""
    a = alpha_hat(profile, alpha, R / 2.0)
    if not a > 0.0:
        raise DomainError(f"step_size: alpha_hat is {a!r}, need alpha > 0")
    return 1.0 / a
