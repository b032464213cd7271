"""Scalar-loop kernels, compiled with numba when it is available.

Every kernel here has a vectorised twin in ``_vectorized.py`` with the same
signature and return convention. Inputs are always fresh float64 copies owned
by the kernel.
"""
import numpy as np

from .._jit import njit


@njit
def householder_qr(A):
    m, n = A.shape
    R = A.copy()
    V = np.zeros((m, n))
    for j in range(n):
        normx = 0.0
        for i in range(j, m):
            normx += R[i, j] * R[i, j]
        normx = np.sqrt(normx)
        if normx == 0.0:
            continue
        alpha = normx if R[j, j] >= 0.0 else -normx
        vnorm2 = 0.0
        for i in range(j, m):
            V[i, j] = R[i, j]
        V[j, j] += alpha
        for i in range(j, m):
            vnorm2 += V[i, j] * V[i, j]
        if vnorm2 == 0.0:
            continue
        for c in range(j, n):
            dot = 0.0
            for i in range(j, m):
                dot += V[i, j] * R[i, c]
            f = 2.0 * dot / vnorm2
            for i in range(j, m):
                R[i, c] -= f * V[i, j]
        for i in range(j, m):
            V[i, j] /= np.sqrt(vnorm2)
    Q = np.zeros((m, n))
    for i in range(n):
        Q[i, i] = 1.0
    for j in range(n - 1, -1, -1):
        for c in range(n):
            dot = 0.0
            for i in range(j, m):
                dot += V[i, j] * Q[i, c]
            for i in range(j, m):
                Q[i, c] -= 2.0 * dot * V[i, j]
    for i in range(n):
        for j in range(i):
            R[i, j] = 0.0
    return Q, R[:n, :]


@njit
def jacobi_eig(S, rel_tol, max_sweeps):
    n = S.shape[0]
    A = S.copy()
    V = np.eye(n)
    fro2 = 0.0
    for i in range(n):
        for j in range(n):
            fro2 += A[i, j] * A[i, j]
    target = rel_tol * np.sqrt(fro2)
    sweeps = 0
    for sweep in range(max_sweeps):
        off2 = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off2 += A[i, j] * A[i, j]
        if np.sqrt(off2) <= target:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                app = A[p, p]
                aqq = A[q, q]
                g = 100.0 * abs(apq)
                if sweep > 3 and abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    continue
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = A[i, i]
    return w, V, sweeps


@njit
def one_sided_jacobi(A, rel_tol, max_sweeps):
    """Hestenes rotations on the columns of ``A`` (m >= n) until they are mutually orthogonal."""
    m, n = A.shape
    U = A.copy()
    V = np.eye(n)
    sweeps = 0
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for i in range(m):
                    alpha += U[i, p] * U[i, p]
                    beta += U[i, q] * U[i, q]
                    gamma += U[i, p] * U[i, q]
                if gamma == 0.0 or abs(gamma) <= rel_tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = 1.0 / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                if zeta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                for i in range(m):
                    up = U[i, p]
                    uq = U[i, q]
                    U[i, p] = c * up - s * uq
                    U[i, q] = s * up + c * uq
                for i in range(n):
                    vp = V[i, p]
                    vq = V[i, q]
                    V[i, p] = c * vp - s * vq
                    V[i, q] = s * vp + c * vq
        sweeps += 1
        if not rotated:
            break
    return U, V, sweeps


@njit
def lu_solve(A, B, pivot_tol):
    """Partial-pivot LU. Returns (X, bad, pivot); bad is -1 on success, else the failing pivot index."""
    n = A.shape[0]
    LU = A.copy()
    X = B.copy()
    k_rhs = X.shape[1]
    for j in range(n):
        p = j
        best = abs(LU[j, j])
        for i in range(j + 1, n):
            if abs(LU[i, j]) > best:
                best = abs(LU[i, j])
                p = i
        if best <= pivot_tol:
            return X, j, best
        if p != j:
            for c in range(n):
                tmp = LU[j, c]
                LU[j, c] = LU[p, c]
                LU[p, c] = tmp
            for c in range(k_rhs):
                tmp = X[j, c]
                X[j, c] = X[p, c]
                X[p, c] = tmp
        for i in range(j + 1, n):
            f = LU[i, j] / LU[j, j]
            LU[i, j] = f
            for c in range(j + 1, n):
                LU[i, c] -= f * LU[j, c]
            for c in range(k_rhs):
                X[i, c] -= f * X[j, c]
    for i in range(n - 1, -1, -1):
        for c in range(k_rhs):
            acc = X[i, c]
            for j in range(i + 1, n):
                acc -= LU[i, j] * X[j, c]
            X[i, c] = acc / LU[i, i]
    return X, -1, 0.0
