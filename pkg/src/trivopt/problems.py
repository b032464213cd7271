"""Benchmark objectives with analytic gradients and reference optima.

Every :class:`Problem` checks its ambient gradient against central finite
differences at three random points when it is built.
"""
import math
import struct
from dataclasses import dataclass

import numpy as np

from . import dense
from .errors import ConstraintError, ContractError
from .expm import expm, logm_spd, sqrtm_spd
from .manifolds import (SPD, Euclidean, Grassmannian, Manifold, Product, SpecialOrthogonal, Sphere, Stiefel, frame_skew,
                        henaff_init)

__all__ = [
    "Problem",
    "validate_gradient",
    "procrustes",
    "procrustes_optimum",
    "rayleigh",
    "karcher_spd",
    "spd_midpoint",
    "spd_distance",
    "trace_pca",
    "CopyTaskConfig",
    "CopyTask",
    "copy_task",
    "copy_baseline",
    "GRAD_CHECK_RTOL",
]

GRAD_CHECK_RTOL = 1e-6


def _ambient_direction(spec, rng):
    if isinstance(spec, Product):
        return tuple(_ambient_direction(f, rng) for f in spec.factors)
    E = rng.standard_normal(spec.point_shape)
    return dense.sym(E) if isinstance(spec, SPD) else E


def _inner(a, b):
    if isinstance(a, tuple):
        return sum(_inner(x, y) for x, y in zip(a, b))
    return float(np.sum(a * b))


def _axpy(x, e, h):
    if isinstance(x, tuple):
        return tuple(_axpy(a, b, h) for a, b in zip(x, e))
    return x + h * e


def validate_gradient(spec, f, grad, points, rng, h=1e-5, rtol=GRAD_CHECK_RTOL):
    """Compare <grad f(x), E> with a central difference along a random unit ambient ``E``.

    Returns the worst relative discrepancy; raises ContractError above ``rtol``.
    """
    worst = 0.0
    for x in points:
        E = _ambient_direction(spec, rng)
        E = _axpy(E, E, 1.0 / math.sqrt(_inner(E, E)) - 1.0)
        analytic = _inner(grad(x), E)
        fd = (f(_axpy(x, E, h)) - f(_axpy(x, E, -h))) / (2.0 * h)
        err = abs(fd - analytic) / max(abs(analytic), abs(fd), 1e-8)
        worst = max(worst, err)
        if err > rtol:
            raise ContractError(f"ambient gradient disagrees with finite differences: relative error {err:.3e}")
    return worst


class Problem:
    """Objective on ``spec`` given by its value and ambient gradient.

    Attributes
    ----------
    oracle_optimum : tuple (value, point) or None
    alpha : float or None
        Bound on the Riemannian Hessian of ``f`` (Frobenius metric), when known.
    """

    def __init__(self, name, spec: Manifold, f, ambient_grad, oracle_optimum=None, alpha=None,
                 check_seed=0, value_and_grad=None):
        self.name = name
        self.spec = spec
        self._f = f
        self._grad = ambient_grad
        self._vg = value_and_grad
        self.oracle_optimum = oracle_optimum
        self.alpha = alpha
        rng = np.random.default_rng(check_seed)
        pts = [spec.point(self.initial_base(rng)) for _ in range(3)]
        self.grad_check_error = validate_gradient(spec, self.f, self.ambient_grad, pts, rng)

    def f(self, x):
        return float(self._f(x))

    def ambient_grad(self, x):
        return self._grad(x)

    def value_and_grad(self, x):
        if self._vg is not None:
            return self._vg(x)
        return self.f(x), self.ambient_grad(x)

    def initial_base(self, seed):
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return self.spec.random_base(rng)

    def gap(self, x):
        if self.oracle_optimum is None:
            raise ContractError(f"{self.name} has no oracle optimum")
        return self.f(x) - self.oracle_optimum[0]

    def __repr__(self):
        return f"Problem({self.name}, {self.spec.name})"


def procrustes_optimum(A, B):
    """argmin over SO(n) of ||Q A - B||_F from the SVD of B A^T."""
    U, _, V = dense.svd(B @ A.T)
    d = np.ones(U.shape[0])
    d[-1] = math.copysign(1.0, dense.det(U @ V.T))
    return (U * d) @ V.T


def procrustes(A, B) -> Problem:
    """f(Q) = ||QA - B||_F^2 on SO(n)."""
    A = dense.as_matrix(A, "A")
    B = dense.as_matrix(B, "B")
    n = A.shape[0]
    if A.shape != (n, n) or B.shape != (n, n):
        raise ContractError(f"procrustes needs two n x n matrices, got {A.shape} and {B.shape}")

    def f(Q):
        R = Q @ A - B
        return float(np.sum(R * R))

    def grad(Q):
        return 2.0 * (Q @ A - B) @ A.T

    Qs = procrustes_optimum(A, B)
    # f is affine in Q up to a constant, so its Hessian along a geodesic is -2<Q W^2, B A^T>.
    alpha = 2.0 * float(dense.svd(B @ A.T)[1][0])
    return Problem(f"procrustes(n={n})", SpecialOrthogonal(n), f, grad, (f(Qs), Qs), alpha)


def rayleigh(Asym) -> Problem:
    """f(x) = x^T A x on the unit sphere."""
    A = dense.as_matrix(Asym, "A")
    w, V = dense.sym_eig(A)
    A = dense.sym(A)
    x = V[:, 0]

    def f(x):
        return float(x @ A @ x)

    def grad(x):
        return 2.0 * (A @ x)

    return Problem(f"rayleigh(n={A.shape[0]})", Sphere(A.shape[0]), f, grad, (float(w[0]), x),
                   2.0 * float(w[-1] - w[0]))


def trace_pca(Asym, k, grassmann=False) -> Problem:
    """f(U) = -tr(U^T A U) on Stiefel(n, k), or on the Grassmannian when ``grassmann``.

    The minimum is minus the sum of the ``k`` largest eigenvalues, attained by
    the matching eigenvectors.
    """
    A = dense.as_matrix(Asym, "A")
    w, V = dense.sym_eig(A)
    A = dense.sym(A)
    n = A.shape[0]
    spec = Grassmannian(n, k) if grassmann else Stiefel(n, k)

    def f(U):
        return -float(np.sum(U * (A @ U)))

    def grad(U):
        return -2.0 * (A @ U)

    top = V[:, ::-1][:, :k]
    kind = "grassmann" if grassmann else "stiefel"
    return Problem(f"trace_pca_{kind}(n={n}, k={k})", spec, f, grad, (-float(np.sum(w[-k:])), top),
                   2.0 * float(w[-1] - w[0]))


def spd_distance(P, A):
    """Affine-invariant distance ||logm(P^-1/2 A P^-1/2)||_F."""
    Si = sqrtm_spd(P, inverse=True)
    return dense.fro(logm_spd(dense.sym(Si @ A @ Si)))


def spd_midpoint(A, B):
    """Geometric mean A^1/2 (A^-1/2 B A^-1/2)^1/2 A^1/2."""
    S = sqrtm_spd(A)
    Si = sqrtm_spd(A, inverse=True)
    return dense.sym(S @ sqrtm_spd(dense.sym(Si @ B @ Si)) @ S)


def karcher_spd(points) -> Problem:
    """f(P) = sum_i d(P, A_i)^2 with the affine-invariant distance."""
    pts = [dense.as_matrix(p, "point") for p in points]
    if not pts:
        raise ContractError("karcher_spd needs at least one point")
    n = pts[0].shape[0]
    spec = SPD(n)
    for i, p in enumerate(pts):
        try:
            spec.check_point(p)
        except (ConstraintError, ValueError) as exc:
            raise ConstraintError(f"point {i}: {exc}") from None
        w, _ = dense.sym_eig(dense.sym(p))
        if w[-1] / w[0] > 1e4:
            raise ConstraintError(f"point {i}: condition number {w[-1] / w[0]:.3e} exceeds 1e4")
    pts = [dense.sym(p) for p in pts]

    def value_and_grad(P):
        Si = sqrtm_spd(P, inverse=True)
        val = 0.0
        acc = np.zeros((n, n))
        for A in pts:
            L = logm_spd(dense.sym(Si @ A @ Si))
            val += float(np.sum(L * L))
            acc += L
        return val, dense.sym(-2.0 * Si @ acc @ Si)

    def f(P):
        return value_and_grad(P)[0]

    def grad(P):
        return value_and_grad(P)[1]

    oracle = None
    if len(pts) == 1:
        oracle = (0.0, pts[0].copy())
    elif len(pts) == 2:
        M = spd_midpoint(pts[0], pts[1])
        oracle = (f(M), M)
    return Problem(f"karcher_spd(n={n}, m={len(pts)})", spec, f, grad, oracle, value_and_grad=value_and_grad)


# Copying memory task --------------------------------------------------------


@dataclass(frozen=True)
class CopyTaskConfig:
    """Alphabet symbols are 0..A-1, ``A`` is the blank and ``A + 1`` the start marker."""

    A: int = 9
    S: int = 10
    L: int = 100
    n: int = 64
    batch: int = 64
    seed: int = 0

    def __post_init__(self):
        for name in ("A", "S", "L", "n", "batch"):
            if int(getattr(self, name)) < 1:
                raise ContractError(f"copy task: {name} must be positive")
        if self.A < 2:
            raise ContractError("copy task: alphabet needs at least 2 symbols")

    @property
    def T(self):
        return self.L + 2 * self.S

    @property
    def vocab(self):
        return self.A + 2


def copy_baseline(A, S, L):
    """Cross-entropy of predicting blanks then uniform symbols: S ln A / (L + 2S)."""
    return S * math.log(A) / (L + 2 * S)


def _header():
    return struct.Struct("<4i")


class CopyTask(Problem):
    """Linear RNN ``h_t = Q h_{t-1} + C x_t`` with softmax readout ``W [h_t; 1]``.

    Lives on ``Product([SO(n), Euclidean(n, A+2), Euclidean(A+2, n+1)])``; the last
    column of the readout is its bias. The loss is the mean cross-entropy over
    every position of every sequence.
    """

    def __init__(self, cfg: CopyTaskConfig):
        self.cfg = cfg
        self._rng = np.random.default_rng(cfg.seed)
        self.batch_inputs, self.batch_targets = self.sample_batch(np.random.default_rng([cfg.seed, 1]))
        spec = Product([SpecialOrthogonal(cfg.n), Euclidean(cfg.n, cfg.vocab), Euclidean(cfg.vocab, cfg.n + 1)])
        self.baseline = copy_baseline(cfg.A, cfg.S, cfg.L)
        super().__init__(
            f"copy(A={cfg.A}, S={cfg.S}, L={cfg.L}, n={cfg.n})",
            spec,
            lambda x: self.loss_and_grad(x, self.batch_inputs, self.batch_targets, grad=False)[0],
            lambda x: self.loss_and_grad(x, self.batch_inputs, self.batch_targets)[1],
            value_and_grad=lambda x: self.loss_and_grad(x, self.batch_inputs, self.batch_targets),
        )

    def sample_batch(self, rng=None):
        """(inputs, targets), each an int array of shape (batch, T)."""
        c = self.cfg
        rng = self._rng if rng is None else rng
        payload = rng.integers(0, c.A, size=(c.batch, c.S))
        blank, start = c.A, c.A + 1
        inputs = np.full((c.batch, c.T), blank, dtype=np.int64)
        targets = np.full((c.batch, c.T), blank, dtype=np.int64)
        inputs[:, : c.S] = payload
        inputs[:, c.S + c.L] = start
        targets[:, c.S + c.L:] = payload
        return inputs, targets

    def initial_base(self, seed):
        c = self.cfg
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        Q = expm(frame_skew(henaff_init(c.n, rng)))
        C = rng.standard_normal((c.n, c.vocab)) / math.sqrt(c.vocab)
        W = rng.standard_normal((c.vocab, c.n + 1)) / math.sqrt(c.n)
        W[:, c.n] = 0.0
        return Q, C, W

    def loss_and_grad(self, params, inputs, targets, grad=True):
        Q, C, W = params
        B, T = inputs.shape
        n = Q.shape[0]
        Wh, b = W[:, :n], W[:, n]
        H = np.zeros((T + 1, n, B))
        for t in range(T):
            H[t + 1] = Q @ H[t] + C[:, inputs[:, t]]
        logits = np.einsum("vn,tnb->tbv", Wh, H[1:]) + b
        logits -= logits.max(axis=2, keepdims=True)
        logp = logits - np.log(np.exp(logits).sum(axis=2, keepdims=True))
        tgt = targets.T
        picked = np.take_along_axis(logp, tgt[:, :, None], axis=2)[:, :, 0]
        scale = 1.0 / (T * B)
        loss = -float(picked.sum()) * scale
        if not grad:
            return loss, None
        dlogits = np.exp(logp)
        np.put_along_axis(dlogits, tgt[:, :, None], np.take_along_axis(dlogits, tgt[:, :, None], axis=2) - 1.0, axis=2)
        dlogits *= scale
        dW = np.zeros_like(W)
        dW[:, :n] = np.einsum("tbv,tnb->vn", dlogits, H[1:])
        dW[:, n] = dlogits.sum(axis=(0, 1))
        dQ = np.zeros_like(Q)
        dC = np.zeros_like(C)
        dH = np.zeros((n, B))
        for t in range(T - 1, -1, -1):
            dH = Wh.T @ dlogits[t].T + Q.T @ dH
            dQ += dH @ H[t].T
            np.add.at(dC.T, inputs[:, t], dH.T)
        return loss, (dQ, dC, dW)

    def hidden_states(self, params, inputs):
        Q, C, _ = params
        B, T = inputs.shape
        H = np.zeros((T + 1, Q.shape[0], B))
        for t in range(T):
            H[t + 1] = Q @ H[t] + C[:, inputs[:, t]]
        return H

    def training_objective(self, seed=None):
        """Objective drawing a fresh batch on every evaluation."""
        task = self
        rng = np.random.default_rng(self.cfg.seed if seed is None else seed)

        class _Stream:
            def value_and_grad(self, x):
                inputs, targets = task.sample_batch(rng)
                return task.loss_and_grad(x, inputs, targets)

        return _Stream()

    def to_bytes(self, inputs, targets):
        c = self.cfg
        B = inputs.shape[0]
        return (_header().pack(c.A, c.S, c.L, B)
                + np.ascontiguousarray(inputs, dtype="<i4").tobytes()
                + np.ascontiguousarray(targets, dtype="<i4").tobytes())

    @staticmethod
    def from_bytes(blob):
        """Inverse of :meth:`to_bytes`: ((A, S, L, batch), inputs, targets)."""
        hdr = _header()
        A, S, L, B = hdr.unpack_from(blob, 0)
        T = L + 2 * S
        size = B * T * 4
        body = blob[hdr.size:]
        if len(body) != 2 * size:
            raise ContractError(f"copy batch blob has {len(body)} payload bytes, expected {2 * size}")
        inputs = np.frombuffer(body[:size], dtype="<i4").reshape(B, T).astype(np.int64)
        targets = np.frombuffer(body[size:], dtype="<i4").reshape(B, T).astype(np.int64)
        return (A, S, L, B), inputs, targets


def copy_task(cfg: CopyTaskConfig) -> CopyTask:
    return CopyTask(cfg)
