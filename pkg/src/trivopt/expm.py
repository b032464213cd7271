"""Matrix exponential by scaling and squaring of a Taylor polynomial.

The polynomial of degree ``m`` is evaluated with the Paterson-Stockmeyer
scheme, so degree 18 costs 7 products, degree 12 costs 5 and so on. The
scaling exponent and degree are picked jointly to minimise the total number of
products, squarings included.

Also here: the Frechet derivative via the 2n x 2n block trick, its adjoint,
and spectral functions of SPD matrices (log, square root).
"""
from dataclasses import dataclass
from functools import lru_cache
from math import ceil, factorial, log2

import numpy as np

from . import dense
from .errors import ContractError, DomainError, ShapeError

__all__ = [
    "DEGREES",
    "ExpmReport",
    "theta",
    "ps_cost",
    "expm",
    "dexpm",
    "adjoint_dexpm",
    "logm_spd",
    "sqrtm_spd",
    "spd_apply",
]

DEGREES = (1, 2, 4, 8, 12, 18)
_UNIT_ROUNDOFF = 2.0 ** -53


@dataclass(frozen=True)
class ExpmReport:
    scaling_exponent: int
    taylor_degree: int
    input_norm: float


@lru_cache(maxsize=None)
def theta(m: int) -> float:
    """Largest Frobenius norm for which the degree-``m`` Taylor tail is below 2^-53.

    The tail ``sum_{j > m} t^j / j!`` bounds the truncation error of the
    polynomial for any matrix of norm ``t``; it is increasing in ``t`` so a
    bisection finds the crossover.
    """

    def tail(t):
        term = t ** (m + 1) / factorial(m + 1)
        total = 0.0
        j = m + 1
        while term > 1e-40 * max(total, 1e-300):
            total += term
            j += 1
            term *= t / j
        return total

    lo, hi = 0.0, 8.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tail(mid) <= _UNIT_ROUNDOFF:
            lo = mid
        else:
            hi = mid
    return lo


@lru_cache(maxsize=None)
def _ps_plan(m: int):
    """(q, products) minimising the Paterson-Stockmeyer product count for degree ``m``."""
    best = (m, max(m - 1, 0))
    for q in range(1, m + 1):
        cost = (q - 1) + (ceil(m / q) - 1)
        if cost < best[1]:
            best = (q, cost)
    return best


def ps_cost(m: int) -> int:
    """Matrix products needed for the degree-``m`` Taylor polynomial."""
    return _ps_plan(m)[1]


def _choose(norm: float):
    best = None
    for m in DEGREES:
        th = theta(m)
        s = 0 if norm <= th else int(ceil(log2(norm / th)))
        while norm / 2.0 ** s > th:  # guard against log2 rounding
            s += 1
        key = (ps_cost(m) + s, -m)
        if best is None or key < best[0]:
            best = (key, m, s)
    return best[1], best[2]


def _taylor(A, m):
    n = A.shape[0]
    coeffs = [1.0 / factorial(j) for j in range(m + 1)]
    q, _ = _ps_plan(m)
    powers = [np.eye(n), A]
    for _ in range(2, q + 1):
        powers.append(powers[-1] @ A)

    def block(lo, hi):
        out = np.zeros((n, n))
        for j in range(lo, hi + 1):
            out += coeffs[j] * powers[j - lo]
        return out

    r = ceil(m / q)
    result = block((r - 1) * q, m)
    for k in range(r - 2, -1, -1):
        result = result @ powers[q] + block(k * q, k * q + q - 1)
    return result


def expm(A, *, return_report=False):
    """exp(A) for a square matrix.

    Parameters
    ----------
    A : (n, n) array_like
    return_report : bool
        Also return the :class:`ExpmReport` describing the scaling and degree.
    """
    A = dense.as_matrix(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ShapeError(f"expm needs a square matrix, got {A.shape}")
    norm = dense.fro(A)
    m, s = _choose(norm)
    E = _taylor(A / 2.0 ** s, m)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            E = E @ E
            if not np.all(np.isfinite(E)):
                break
    if return_report:
        return E, ExpmReport(s, m, norm)
    return E


def dexpm(X, E):
    """Frechet derivative of expm at ``X`` in direction ``E``."""
    X = dense.as_matrix(X, "X")
    E = dense.as_matrix(E, "E")
    n = X.shape[0]
    if X.shape != (n, n) or E.shape != (n, n):
        raise ShapeError(f"dexpm needs two square matrices of equal size, got {X.shape} and {E.shape}")
    if not np.any(X):
        return E
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = X
    big[n:, n:] = X
    big[:n, n:] = E
    return expm(big)[:n, n:]


def adjoint_dexpm(X, G):
    """Adjoint of ``E -> dexpm(X, E)`` for the Frobenius inner product."""
    X = dense.as_matrix(X, "X")
    return dexpm(X.T, G)


def spd_apply(P, func, name="P"):
    """``V func(w) V^T`` for a symmetric positive definite ``P``.

    Raises
    ------
    DomainError
        If ``P`` is not symmetric or an eigenvalue is not above ``1e-12 * max``.
    """
    try:
        w, V = dense.sym_eig(P)
    except ContractError as exc:
        raise DomainError(f"{name} is not symmetric positive definite: {exc}") from None
    top = w[-1]
    if not top > 0.0 or w[0] <= 1e-12 * top:
        bad = w[0] if top > 0.0 else top
        raise DomainError(f"{name} is not positive definite: eigenvalue {bad:.6g}")
    return (V * func(w)) @ V.T


def logm_spd(P):
    """Symmetric logarithm of an SPD matrix."""
    return dense.sym(spd_apply(P, np.log))


def sqrtm_spd(P, inverse=False):
    """SPD square root (or inverse square root)."""
    f = (lambda w: 1.0 / np.sqrt(w)) if inverse else np.sqrt
    return dense.sym(spd_apply(P, f))
