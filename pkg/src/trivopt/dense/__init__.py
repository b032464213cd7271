"""Small dense linear algebra: QR, symmetric eigendecomposition, SVD and solve.

Everything works on plain 2-D float64 numpy arrays. Matrix products use ``@``;
the factorisations are implemented here (Householder, cyclic Jacobi, one-sided
Jacobi, partial-pivot LU). The inner loops come in two flavours, a scalar loop
compiled with numba and a vectorised numpy version; ``TRIVOPT_DISABLE_NUMBA=1``
picks the latter.
"""
from types import SimpleNamespace

import numpy as np

from .. import _jit
from ..errors import ContractError, ShapeError, SingularMatrixError
from . import _loops, _vectorized

__all__ = [
    "as_matrix",
    "matmul",
    "qr",
    "sym_eig",
    "svd",
    "solve",
    "det",
    "fro",
    "sym",
    "skew",
    "backend",
    "KERNELS",
]

EIG_TOL = 1e-14
SVD_TOL = 1e-15
SYM_TOL = 1e-10
PIVOT_TOL = 1e-13
MAX_SWEEPS = 100

KERNELS = {
    "loops": SimpleNamespace(
        householder_qr=_loops.householder_qr,
        jacobi_eig=_loops.jacobi_eig,
        one_sided_jacobi=_loops.one_sided_jacobi,
        lu_solve=_loops.lu_solve,
    ),
    "numpy": SimpleNamespace(
        householder_qr=_vectorized.householder_qr,
        jacobi_eig=_vectorized.jacobi_eig,
        one_sided_jacobi=_vectorized.one_sided_jacobi,
        lu_solve=_vectorized.lu_solve,
    ),
}


def backend() -> str:
    """Name of the active kernel set: ``"numba"`` or ``"numpy"``."""
    return _jit.backend()


def _kernels(which=None):
    if which is None:
        which = "loops" if _jit.HAVE_NUMBA else "numpy"
    return KERNELS[which]


def as_matrix(A, name="A") -> np.ndarray:
    """Validate and copy ``A`` into a finite 2-D float64 array."""
    M = np.array(A, dtype=np.float64, copy=True)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2 or M.shape[0] == 0 or M.shape[1] == 0:
        raise ShapeError(f"{name} must be a non-empty 2-D matrix, got shape {np.shape(A)}")
    if not np.all(np.isfinite(M)):
        raise ContractError(f"{name} has non-finite entries")
    return M


def fro(A) -> float:
    return float(np.sqrt(np.sum(np.square(A))))


def sym(A):
    return 0.5 * (A + A.T)


def skew(A):
    return 0.5 * (A - A.T)


def matmul(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ShapeError(f"cannot multiply {A.shape} by {B.shape}")
    return A @ B


def qr(A, kernels=None):
    """Thin Householder QR with non-negative diagonal in ``R``.

    Parameters
    ----------
    A : (m, n) array with m >= n.

    Returns
    -------
    Q : (m, n) array with orthonormal columns.
    R : (n, n) upper-triangular array, ``R[i, i] >= 0``.
    """
    A = as_matrix(A)
    m, n = A.shape
    if m < n:
        raise ShapeError(f"qr needs rows >= cols, got {A.shape}")
    Q, R = _kernels(kernels).householder_qr(A)
    signs = np.where(np.diag(R) < 0.0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


def sym_eig(S, kernels=None):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ascending eigenvalues ``w`` and orthogonal ``V`` with
    ``S = V diag(w) V^T``.
    """
    S = as_matrix(S, "S")
    n, m = S.shape
    if n != m:
        raise ShapeError(f"sym_eig needs a square matrix, got {S.shape}")
    scale = fro(S)
    asym = fro(S - S.T)
    if asym > SYM_TOL * max(scale, np.finfo(float).tiny):
        raise ContractError(f"matrix is not symmetric: ||S - S^T||_F = {asym:.3e}")
    w, V, _ = _kernels(kernels).jacobi_eig(sym(S), EIG_TOL, MAX_SWEEPS)
    order = np.argsort(w, kind="stable")
    return w[order], np.ascontiguousarray(V[:, order])


def _complete_basis(U, m):
    """Extend orthonormal columns ``U`` (m, r) to ``m`` columns using coordinate vectors."""
    basis = [U[:, j] for j in range(U.shape[1])]
    for i in range(m):
        if len(basis) == m:
            break
        e = np.zeros(m)
        e[i] = 1.0
        for _ in range(2):
            for b in basis:
                e -= (b @ e) * b
        nrm = np.sqrt(e @ e)
        if nrm > 1e-8:
            basis.append(e / nrm)
    return np.column_stack(basis) if basis else np.zeros((m, 0))


def svd(A, kernels=None):
    """Thin SVD by one-sided Jacobi.

    Returns ``U`` (m, p), singular values ``s`` (p,) in descending order and
    ``V`` (n, p) with p = min(m, n) and ``A = U diag(s) V^T``.
    """
    A = as_matrix(A)
    m, n = A.shape
    if m < n:
        V, s, U = svd(A.T, kernels)
        return U, s, V
    W, V, _ = _kernels(kernels).one_sided_jacobi(A, SVD_TOL, MAX_SWEEPS)
    s = np.sqrt(np.einsum("ij,ij->j", W, W))
    order = np.argsort(-s, kind="stable")
    s, W, V = s[order], W[:, order], V[:, order]
    cutoff = np.finfo(float).eps * max(m, n) * (s[0] if s.size else 0.0)
    good = s > cutoff
    U = np.zeros((m, n))
    U[:, good] = W[:, good] / s[good]
    if not np.all(good):
        r = int(np.count_nonzero(good))
        U[:, r:] = _complete_basis(U[:, :r], m)[:, r:n]
    return U, s, np.ascontiguousarray(V)


def solve(A, B, kernels=None):
    """Solve ``A X = B`` by LU with partial pivoting.

    Raises
    ------
    SingularMatrixError
        If a pivot is at most ``1e-13 * ||A||_F`` in magnitude.
    """
    A = as_matrix(A)
    vector_rhs = np.ndim(B) == 1
    B = as_matrix(B, "B")
    n = A.shape[0]
    if A.shape[1] != n:
        raise ShapeError(f"solve needs a square matrix, got {A.shape}")
    if B.shape[0] != n:
        raise ShapeError(f"right-hand side has {B.shape[0]} rows, expected {n}")
    tol = PIVOT_TOL * fro(A)
    X, bad, pivot = _kernels(kernels).lu_solve(A, B, tol)
    if bad >= 0:
        raise SingularMatrixError(int(bad), float(pivot))
    return X[:, 0] if vector_rhs else X


def det(A) -> float:
    """Determinant from a partial-pivot LU factorisation."""
    LU = as_matrix(A)
    n = LU.shape[0]
    if LU.shape[1] != n:
        raise ShapeError(f"det needs a square matrix, got {LU.shape}")
    sign = 1.0
    for j in range(n):
        p = j + int(np.argmax(np.abs(LU[j:, j])))
        if LU[p, j] == 0.0:
            return 0.0
        if p != j:
            LU[[j, p]] = LU[[p, j]]
            sign = -sign
        f = LU[j + 1:, j] / LU[j, j]
        LU[j + 1:, j + 1:] -= np.outer(f, LU[j, j + 1:])
    return float(sign * np.prod(np.diag(LU)))
