"""Pure-numpy kernels.

Same contracts as ``_loops``. The Jacobi solvers use the round-robin
(tournament) ordering so that each round is a set of disjoint rotations that
can be applied with fancy indexing in one go.
"""
import numpy as np


def householder_qr(A):
    m, n = A.shape
    R = A.copy()
    V = np.zeros((m, n))
    for j in range(n):
        x = R[j:, j]
        normx = np.sqrt(x @ x)
        if normx == 0.0:
            continue
        v = x.copy()
        v[0] += normx if x[0] >= 0.0 else -normx
        v /= np.sqrt(v @ v)
        R[j:, j:] -= 2.0 * np.outer(v, v @ R[j:, j:])
        V[j:, j] = v
    Q = np.eye(m, n)
    for j in range(n - 1, -1, -1):
        v = V[j:, j]
        Q[j:, :] -= 2.0 * np.outer(v, v @ Q[j:, :])
    return Q, np.triu(R[:n, :])


def _round_robin(n):
    """Yield (p, q) index arrays; each round pairs every index at most once."""
    m = n + (n % 2)
    players = list(range(m))
    for _ in range(m - 1):
        p = []
        q = []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        yield np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)
        players = [players[0]] + [players[-1]] + players[1:-1]


def jacobi_eig(S, rel_tol, max_sweeps):
    n = S.shape[0]
    A = S.copy()
    V = np.eye(n)
    target = rel_tol * np.linalg.norm(A)
    rounds = list(_round_robin(n))
    sweeps = 0
    for sweep in range(max_sweeps):
        off = A - np.diag(np.diag(A))
        if np.sqrt(np.sum(off * off)) <= target:
            break
        sweeps += 1
        for p, q in rounds:
            apq = A[p, q]
            app = A[p, p]
            aqq = A[q, q]
            active = apq != 0.0
            if sweep > 3:
                g = 100.0 * np.abs(apq)
                tiny = (np.abs(app) + g == np.abs(app)) & (np.abs(aqq) + g == np.abs(aqq))
                A[p[tiny], q[tiny]] = 0.0
                A[q[tiny], p[tiny]] = 0.0
                active &= ~tiny
            if not active.any():
                continue
            p, q = p[active], q[active]
            apq, app, aqq = apq[active], app[active], aqq[active]
            theta = (aqq - app) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            cp, cq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * cp - s * cq
            A[:, q] = s * cp + c * cq
            rp, rq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * rp - s[:, None] * rq
            A[q, :] = s[:, None] * rp + c[:, None] * rq
            vp, vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = c * vp - s * vq
            V[:, q] = s * vp + c * vq
    return np.diag(A).copy(), V, sweeps


def one_sided_jacobi(A, rel_tol, max_sweeps):
    m, n = A.shape
    U = A.copy()
    V = np.eye(n)
    rounds = list(_round_robin(n))
    sweeps = 0
    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            up, uq = U[:, p], U[:, q]
            alpha = np.einsum("ij,ij->j", up, up)
            beta = np.einsum("ij,ij->j", uq, uq)
            gamma = np.einsum("ij,ij->j", up, uq)
            active = (gamma != 0.0) & (np.abs(gamma) > rel_tol * np.sqrt(alpha * beta))
            if not active.any():
                continue
            rotated = True
            p, q = p[active], q[active]
            alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.sign(zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            t[zeta == 0.0] = 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            up, uq = U[:, p].copy(), U[:, q].copy()
            U[:, p] = c * up - s * uq
            U[:, q] = s * up + c * uq
            vp, vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = c * vp - s * vq
            V[:, q] = s * vp + c * vq
        sweeps += 1
        if not rotated:
            break
    return U, V, sweeps


def lu_solve(A, B, pivot_tol):
    n = A.shape[0]
    LU = A.copy()
    X = B.copy()
    for j in range(n):
        p = j + int(np.argmax(np.abs(LU[j:, j])))
        if abs(LU[p, j]) <= pivot_tol:
            return X, j, abs(LU[p, j])
        if p != j:
            LU[[j, p]] = LU[[p, j]]
            X[[j, p]] = X[[p, j]]
        f = LU[j + 1:, j] / LU[j, j]
        LU[j + 1:, j] = f
        LU[j + 1:, j + 1:] -= np.outer(f, LU[j, j + 1:])
        X[j + 1:] -= np.outer(f, X[j])
    for i in range(n - 1, -1, -1):
        X[i] = (X[i] - LU[i, i + 1:] @ X[i + 1:]) / LU[i, i]
    return X, -1, 0.0
