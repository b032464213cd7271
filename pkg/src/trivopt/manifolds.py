"""Matrix manifolds with closed-form exponential maps.

Each manifold works with three kinds of arrays:

``base``
    The point a trivialisation is anchored at. For SO(n), SPD(n), spheres and
    Euclidean factors this is the point itself. Stiefel and Grassmann bases
    are *lifted* to a full n x n rotation whose first k columns are the point.
``raw``
    Unconstrained coordinates, mapped to a tangent vector at ``base`` by a
    fixed linear frame.
``point``
    The ambient representation an objective sees.

``triv(base, raw)`` is the Riemannian exponential of the tangent vector that
``raw`` names, and ``pullback_grad`` returns the gradient of ``f o triv`` with
respect to ``raw`` given the ambient (Euclidean) gradient of ``f``.

Metrics: SO(n) carries the Frobenius metric. Stiefel and Grassmann carry
``1/2 tr`` on the lifted Lie algebra, which makes their raw frames isometric.
The sphere carries the round metric and SPD the affine-invariant one.
"""
import math

import numpy as np

from . import dense
from .curvature import CurvatureProfile
from .errors import ConstraintError, ContractError, ShapeError
from .expm import adjoint_dexpm, expm, sqrtm_spd

__all__ = [
    "Manifold",
    "SpecialOrthogonal",
    "Stiefel",
    "Grassmannian",
    "SPD",
    "Sphere",
    "Euclidean",
    "Product",
    "frame_skew",
    "triv_so",
    "triv_stiefel",
    "triv_grassmann",
    "triv_spd",
    "tangent_project_so",
    "pullback_grad",
    "random_point",
    "henaff_init",
    "product_compose",
    "orthogonality_residual",
]

POINT_TOL = 1e-9


def frame_skew(X):
    """tril(X, -1) - tril(X, -1)^T."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ShapeError(f"frame_skew needs a square matrix, got {X.shape}")
    L = np.tril(X, -1)
    return L - L.T


def _lower_of_skew_grad(M):
    """Adjoint of ``frame_skew``: tril(M - M^T, -1)."""
    return np.tril(M - M.T, -1)


def orthogonality_residual(Q) -> float:
    """||Q^T Q - I||_F."""
    Q = np.asarray(Q)
    return dense.fro(Q.T @ Q - np.eye(Q.shape[1]))


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _haar_so(n, rng):
    Q, _ = dense.qr(rng.standard_normal((n, n)))
    if dense.det(Q) < 0.0:
        Q[:, 0] = -Q[:, 0]
    return Q


def _check_rotation(B, n, name="base"):
    B = np.asarray(B, dtype=np.float64)
    if B.shape != (n, n):
        raise ShapeError(f"{name} must be {n}x{n}, got {B.shape}")
    if not np.all(np.isfinite(B)):
        raise ConstraintError(f"{name} has non-finite entries")
    res = orthogonality_residual(B)
    if res > POINT_TOL:
        raise ConstraintError(f"{name} is not orthogonal: ||B^T B - I||_F = {res:.3e}")
    return B


class Manifold:
    """Common interface. Subclasses override the geometric operations."""

    name = "manifold"
    raw_shape: tuple = ()
    point_shape: tuple = ()
    curvature = None
    # ||tangent||^2 = frame_gain * ||raw||^2 for raws in the frame's image.
    frame_gain = 1.0

    def zero_raw(self):
        return np.zeros(self.raw_shape)

    def point(self, base):
        return base

    def lift(self, base, raw):
        """New base after moving to ``triv(base, raw)``."""
        return self.triv(base, raw)

    def check_point(self, value):
        raise NotImplementedError

    def check_base(self, base):
        return self.check_point(base)

    def random_base(self, rng):
        raise NotImplementedError

    def random_raw(self, rng, scale=1.0):
        raw = rng.standard_normal(self.raw_shape)
        return scale * self.project_raw(raw)

    def project_raw(self, raw):
        """Zero the entries of ``raw`` the frame ignores."""
        return raw

    def raw_norm(self, raw) -> float:
        return dense.fro(self.project_raw(raw))

    def metric_norm(self, base, raw) -> float:
        """Norm of the tangent vector named by ``raw`` in the manifold metric."""
        return math.sqrt(self.frame_gain) * self.raw_norm(raw)

    def triv(self, base, raw):
        raise NotImplementedError

    def pullback_grad(self, base, raw, G):
        raise NotImplementedError

    def _check_raw(self, raw):
        raw = np.asarray(raw, dtype=np.float64)
        if raw.shape != tuple(self.raw_shape):
            raise ShapeError(f"{self.name}: raw must have shape {self.raw_shape}, got {raw.shape}")
        return raw

    def _check_grad(self, G):
        G = np.asarray(G, dtype=np.float64)
        if G.shape != tuple(self.point_shape):
            raise ShapeError(f"{self.name}: ambient gradient must have shape {self.point_shape}, got {G.shape}")
        return G

    def __repr__(self):
        return self.name


class SpecialOrthogonal(Manifold):
    """SO(n) with ``triv(B, X) = B expm(frame_skew(X))``."""

    frame_gain = 2.0

    def __init__(self, n):
        if n < 2:
            raise ContractError(f"SO(n) needs n >= 2, got {n}")
        self.n = n
        self.name = f"SO({n})"
        self.raw_shape = (n, n)
        self.point_shape = (n, n)
        # Frobenius metric: flat for n = 2, curvature in [0, 1/4] otherwise.
        self.curvature = CurvatureProfile(0.0, 0.0 if n == 2 else 0.25, 0.0)

    def check_point(self, value):
        B = _check_rotation(value, self.n, "point")
        if dense.det(B) < 0.0:
            raise ConstraintError("point has determinant -1, not in SO(n)")
        return B

    def random_base(self, rng):
        return _haar_so(self.n, rng)

    def project_raw(self, raw):
        return np.tril(raw, -1)

    def triv(self, base, raw):
        raw = self._check_raw(raw)
        if not np.any(np.tril(raw, -1)):
            return np.array(base, dtype=np.float64, copy=True)
        return base @ expm(frame_skew(raw))

    def pullback_grad(self, base, raw, G):
        raw = self._check_raw(raw)
        G = self._check_grad(G)
        M = adjoint_dexpm(frame_skew(raw), base.T @ G)
        return _lower_of_skew_grad(M)

    def tangent_to_raw(self, base, D):
        return np.tril(base.T @ D, -1)

    def raw_to_tangent(self, base, raw):
        return base @ frame_skew(raw)

    def tangent_project(self, base, M):
        return tangent_project_so(base, M)


class Stiefel(Manifold):
    """St(n, k) as SO(n) / SO(n - k), base lifted to a full rotation."""

    def __init__(self, n, k):
        if not 1 <= k < n:
            raise ContractError(f"Stiefel(n, k) needs 1 <= k < n, got n={n}, k={k}; use SO(n) for k = n")
        self.n, self.k = n, k
        self.name = f"Stiefel({n},{k})"
        self.raw_shape = (n, k)
        self.point_shape = (n, k)
        self.curvature = None

    def point(self, base):
        return base[:, : self.k].copy()

    def check_point(self, value):
        U = np.asarray(value, dtype=np.float64)
        if U.shape != (self.n, self.k):
            raise ShapeError(f"point must be {self.n}x{self.k}, got {U.shape}")
        res = orthogonality_residual(U)
        if res > POINT_TOL:
            raise ConstraintError(f"columns are not orthonormal: residual {res:.3e}")
        return U

    def check_base(self, base):
        return _check_rotation(base, self.n)

    def random_base(self, rng):
        return _haar_so(self.n, rng)

    def base_from_point(self, U):
        """Complete orthonormal columns ``U`` to a rotation whose first k columns are ``U``."""
        U = self.check_point(U)
        rng = np.random.default_rng(0)
        Q, _ = dense.qr(np.hstack([U, rng.standard_normal((self.n, self.n - self.k))]))
        Q[:, : self.k] = U
        # Q's first columns equal U up to sign; fix them and keep det = +1.
        if dense.det(Q) < 0.0:
            Q[:, -1] = -Q[:, -1]
        return Q

    def project_raw(self, raw):
        out = np.array(raw, dtype=np.float64, copy=True)
        out[: self.k] = np.tril(out[: self.k], -1)
        return out

    def _omega(self, raw):
        pad = np.zeros((self.n, self.n))
        pad[:, : self.k] = raw
        return frame_skew(pad)

    def lift(self, base, raw):
        raw = self._check_raw(raw)
        if not np.any(self.project_raw(raw)):
            return np.array(base, dtype=np.float64, copy=True)
        return base @ expm(self._omega(raw))

    def triv(self, base, raw):
        return self.lift(base, raw)[:, : self.k]

    def pullback_grad(self, base, raw, G):
        raw = self._check_raw(raw)
        G = self._check_grad(G)
        Gpad = np.zeros((self.n, self.n))
        Gpad[:, : self.k] = G
        M = adjoint_dexpm(self._omega(raw), base.T @ Gpad)
        return _lower_of_skew_grad(M)[:, : self.k]

    def tangent_to_raw(self, base, D):
        """Raw coordinates of the horizontal tangent ``D`` at ``base[:, :k]``."""
        return self.project_raw(base.T @ D)

    def raw_to_tangent(self, base, raw):
        return (base @ self._omega(raw))[:, : self.k]


class Grassmannian(Stiefel):
    """Gr(n, k) as St(n, k) / SO(k); raws have their top k rows zeroed."""

    def __init__(self, n, k):
        super().__init__(n, k)
        self.name = f"Grassmannian({n},{k})"
        # 1/2 tr metric (||Delta||_F = ||A||_F): curvature in [0, 2].
        flat = min(k, n - k) == 1
        self.curvature = CurvatureProfile(1.0 if flat else 0.0, 1.0 if flat else 2.0, 0.0)

    def project_raw(self, raw):
        out = np.array(raw, dtype=np.float64, copy=True)
        out[: self.k] = 0.0
        return out

    def lift(self, base, raw):
        return super().lift(base, self.project_raw(self._check_raw(raw)))

    def pullback_grad(self, base, raw, G):
        grad = super().pullback_grad(base, self.project_raw(self._check_raw(raw)), G)
        grad[: self.k] = 0.0
        return grad


class SPD(Manifold):
    """Symmetric positive definite matrices with the affine-invariant metric."""

    def __init__(self, n):
        if n < 1:
            raise ContractError(f"SPD(n) needs n >= 1, got {n}")
        self.n = n
        self.name = f"SPD({n})"
        self.raw_shape = (n, n)
        self.point_shape = (n, n)
        self.curvature = None

    def check_point(self, value):
        P = np.asarray(value, dtype=np.float64)
        if P.shape != (self.n, self.n):
            raise ShapeError(f"point must be {self.n}x{self.n}, got {P.shape}")
        if not np.all(np.isfinite(P)):
            raise ConstraintError("point has non-finite entries")
        asym = dense.fro(P - P.T)
        if asym > POINT_TOL * max(1.0, dense.fro(P)):
            raise ConstraintError(f"point is not symmetric: residual {asym:.3e}")
        w, _ = dense.sym_eig(dense.sym(P))
        if w[0] <= 0.0:
            raise ConstraintError(f"point is not positive definite: eigenvalue {w[0]:.6g}")
        return P

    def random_base(self, rng):
        V = _haar_so(self.n, rng)
        w = np.exp(rng.uniform(np.log(0.5), np.log(2.0), self.n))
        return dense.sym((V * w) @ V.T)

    def project_raw(self, raw):
        return dense.sym(raw)

    def metric_norm(self, base, raw):
        Si = sqrtm_spd(base, inverse=True)
        return dense.fro(Si @ dense.sym(raw) @ Si)

    def triv(self, base, raw):
        raw = self._check_raw(raw)
        D = dense.sym(raw)
        if not np.any(D):
            return np.array(base, dtype=np.float64, copy=True)
        S = sqrtm_spd(base)
        Si = sqrtm_spd(base, inverse=True)
        with np.errstate(over="ignore", invalid="ignore"):
            return dense.sym(S @ expm(Si @ D @ Si) @ S)

    def pullback_grad(self, base, raw, G):
        raw = self._check_raw(raw)
        G = self._check_grad(G)
        S = sqrtm_spd(base)
        Si = sqrtm_spd(base, inverse=True)
        M = dense.sym(Si @ dense.sym(raw) @ Si)
        K = adjoint_dexpm(M, S @ G @ S)
        return dense.sym(Si @ K @ Si)

    def tangent_to_raw(self, base, D):
        return dense.sym(D)

    def raw_to_tangent(self, base, raw):
        return dense.sym(raw)


def _sinc(t):
    if abs(t) < 1e-4:
        t2 = t * t
        return 1.0 - t2 / 6.0 + t2 * t2 / 120.0
    return math.sin(t) / t


def _dsinc_over_t(t):
    """sinc'(t) / t."""
    if abs(t) < 1e-2:
        t2 = t * t
        return -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0 + t2 * t2 * t2 / 45360.0
    return (t * math.cos(t) - math.sin(t)) / t ** 3


class Sphere(Manifold):
    """Unit sphere in R^n. Raw coordinates are ambient vectors projected onto x-perp."""

    def __init__(self, n):
        if n < 2:
            raise ContractError(f"Sphere(n) needs n >= 2, got {n}")
        self.n = n
        self.name = f"Sphere({n})"
        self.raw_shape = (n,)
        self.point_shape = (n,)
        self.curvature = CurvatureProfile(1.0, 1.0, 0.0, math.pi)

    def check_point(self, value):
        x = np.asarray(value, dtype=np.float64)
        if x.shape != (self.n,):
            raise ShapeError(f"point must have shape ({self.n},), got {x.shape}")
        res = abs(math.sqrt(x @ x) - 1.0) if np.all(np.isfinite(x)) else math.inf
        if res > POINT_TOL:
            raise ConstraintError(f"point is not a unit vector: | |x| - 1 | = {res:.3e}")
        return x

    def random_base(self, rng):
        x = rng.standard_normal(self.n)
        return x / math.sqrt(x @ x)

    def raw_norm(self, raw):
        return dense.fro(raw)

    def metric_norm(self, base, raw):
        return dense.fro(raw - (base @ raw) * base)

    def triv(self, base, raw):
        raw = self._check_raw(raw)
        u = raw - (base @ raw) * base
        th = math.sqrt(u @ u)
        if th == 0.0:
            return np.array(base, dtype=np.float64, copy=True)
        y = math.cos(th) * base + _sinc(th) * u
        return y / math.sqrt(y @ y)

    def pullback_grad(self, base, raw, G):
        raw = self._check_raw(raw)
        g = self._check_grad(G)
        u = raw - (base @ raw) * base
        th = math.sqrt(u @ u)
        jt = _sinc(th) * (g - (base @ g) * u) + _dsinc_over_t(th) * (u @ g) * u
        return jt - (base @ jt) * base

    def tangent_to_raw(self, base, D):
        return D - (base @ D) * base

    def raw_to_tangent(self, base, raw):
        return raw - (base @ raw) * base

    def tangent_project(self, base, M):
        return M - (base @ M) * base


class Euclidean(Manifold):
    """Unconstrained parameters: ``triv(base, raw) = base + raw``."""

    def __init__(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        self.raw_shape = tuple(int(s) for s in shape)
        self.point_shape = self.raw_shape
        self.name = f"Euclidean{self.raw_shape}"
        self.curvature = CurvatureProfile(0.0, 0.0, 0.0)

    def check_point(self, value):
        x = np.asarray(value, dtype=np.float64)
        if x.shape != self.raw_shape:
            raise ShapeError(f"point must have shape {self.raw_shape}, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ConstraintError("point has non-finite entries")
        return x

    def random_base(self, rng):
        return rng.standard_normal(self.raw_shape)

    def triv(self, base, raw):
        raw = self._check_raw(raw)
        return base + raw

    def pullback_grad(self, base, raw, G):
        self._check_raw(raw)
        return np.array(self._check_grad(G), copy=True)

    def tangent_to_raw(self, base, D):
        return np.array(D, dtype=np.float64, copy=True)

    def raw_to_tangent(self, base, raw):
        return np.array(raw, dtype=np.float64, copy=True)


class Product(Manifold):
    """Cartesian product; bases, raws, points and gradients are tuples."""

    def __init__(self, factors):
        factors = tuple(factors)
        if not factors:
            raise ContractError("Product needs at least one factor")
        self.factors = factors
        self.name = "Product(" + ", ".join(f.name for f in factors) + ")"
        self.raw_shape = tuple(f.raw_shape for f in factors)
        self.point_shape = tuple(f.point_shape for f in factors)
        self.curvature = None

    def _split(self, items, what):
        items = tuple(items)
        if len(items) != len(self.factors):
            raise ShapeError(f"{self.name}: expected {len(self.factors)} {what}, got {len(items)}")
        return items

    def zero_raw(self):
        return tuple(f.zero_raw() for f in self.factors)

    def point(self, base):
        return tuple(f.point(b) for f, b in zip(self.factors, self._split(base, "bases")))

    def lift(self, base, raw):
        return tuple(
            f.lift(b, r)
            for f, b, r in zip(self.factors, self._split(base, "bases"), self._split(raw, "raws"))
        )

    def check_point(self, value):
        return tuple(f.check_point(v) for f, v in zip(self.factors, self._split(value, "points")))

    def check_base(self, base):
        return tuple(f.check_base(b) for f, b in zip(self.factors, self._split(base, "bases")))

    def random_base(self, rng):
        return tuple(f.random_base(rng) for f in self.factors)

    def random_raw(self, rng, scale=1.0):
        return tuple(f.random_raw(rng, scale) for f in self.factors)

    def project_raw(self, raw):
        return tuple(f.project_raw(r) for f, r in zip(self.factors, self._split(raw, "raws")))

    def raw_norm(self, raw):
        return math.sqrt(sum(f.raw_norm(r) ** 2 for f, r in zip(self.factors, self._split(raw, "raws"))))

    def metric_norm(self, base, raw):
        return math.sqrt(
            sum(
                f.metric_norm(b, r) ** 2
                for f, b, r in zip(self.factors, self._split(base, "bases"), self._split(raw, "raws"))
            )
        )

    def triv(self, base, raw):
        return tuple(
            f.triv(b, r)
            for f, b, r in zip(self.factors, self._split(base, "bases"), self._split(raw, "raws"))
        )

    def pullback_grad(self, base, raw, G):
        return tuple(
            f.pullback_grad(b, r, g)
            for f, b, r, g in zip(
                self.factors,
                self._split(base, "bases"),
                self._split(raw, "raws"),
                self._split(G, "gradients"),
            )
        )


def product_compose(specs):
    return Product(specs)


# Functional interface -------------------------------------------------------


def triv_so(B, X):
    """B expm(frame_skew(X)) for B in SO(n)."""
    B = np.asarray(B, dtype=np.float64)
    M = SpecialOrthogonal(B.shape[0])
    return M.triv(M.check_point(B), X)


def triv_stiefel(U_total, X):
    """First k columns of U_total expm(frame_skew([X, 0])), X of shape (n, k)."""
    X = np.asarray(X, dtype=np.float64)
    n, k = X.shape
    M = Stiefel(n, k)
    return M.triv(M.check_base(U_total), X)


def triv_grassmann(U_total, X):
    """Stiefel trivialisation with the top k x k block of X zeroed."""
    X = np.asarray(X, dtype=np.float64)
    n, k = X.shape
    M = Grassmannian(n, k)
    return M.triv(M.check_base(U_total), X)


def triv_spd(A, X):
    """A expm(A^-1 sym(X)), evaluated symmetrically."""
    A = np.asarray(A, dtype=np.float64)
    M = SPD(A.shape[0])
    return M.triv(M.check_point(A), X)


def tangent_project_so(B, M):
    """(M - B M^T B) / 2."""
    return 0.5 * (M - B @ M.T @ B)


def pullback_grad(spec: Manifold, base, X, G_ambient):
    return spec.pullback_grad(base, X, G_ambient)


def random_point(spec: Manifold, seed):
    """Random base for ``spec``: Haar rotations, unit Gaussians, SPD with eigenvalues in [0.5, 2]."""
    return spec.random_base(_rng(seed))


def henaff_init(n, seed):
    """Skew block-diagonal matrix with 2x2 blocks [[0, -s], [s, 0]], s ~ U[-pi, pi]."""
    if n < 2:
        raise ContractError(f"henaff_init needs n >= 2, got {n}")
    rng = _rng(seed)
    A = np.zeros((n, n))
    s = rng.uniform(-math.pi, math.pi, n // 2)
    for i, si in enumerate(s):
        A[2 * i + 1, 2 * i] = si
        A[2 * i, 2 * i + 1] = -si
    return A
