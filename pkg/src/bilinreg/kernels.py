"""Hot inner loops over a stack of images.

Every kernel exists twice: an explicit-loop version compiled by numba and a
vectorised numpy version. ``_accel.USE_NUMBA`` picks which one the public
name points to. The loop versions accumulate sequentially over samples, so
their results are bit-reproducible for a fixed input order.

Shapes: ``X`` is ``(T, M, N)``, ``A`` is ``(M, L)``, ``B`` is ``(N, L)``.
"""

import math

import numpy as np

from ._accel import jit, select


# --- scores -----------------------------------------------------------------


@jit
def _bilinear_scores_loops(X, A, B):
    T, M, N = X.shape
    L = A.shape[1]
    z = np.zeros(T)
    for t in range(T):
        acc = 0.0
        for l in range(L):
            for i in range(M):
                row = 0.0
                for j in range(N):
                    row += X[t, i, j] * B[j, l]
                acc += A[i, l] * row
        z[t] = acc
    return z


def _bilinear_scores_numpy(X, A, B):
    return np.einsum("tml,ml->t", X @ B, A)


@jit
def _frobenius_scores_loops(X, W):
    T, M, N = X.shape
    z = np.zeros(T)
    for t in range(T):
        acc = 0.0
        for i in range(M):
            for j in range(N):
                acc += W[i, j] * X[t, i, j]
        z[t] = acc
    return z


def _frobenius_scores_numpy(X, W):
    T = X.shape[0]
    return X.reshape(T, -1) @ W.reshape(-1)


# --- projections --------------------------------------------------------------


@jit
def _right_project_loops(X, B):
    # out[t, :, k] = X_t @ B[:, k]
    T, M, N = X.shape
    K = B.shape[1]
    out = np.zeros((T, M, K))
    for t in range(T):
        for i in range(M):
            for k in range(K):
                acc = 0.0
                for j in range(N):
                    acc += X[t, i, j] * B[j, k]
                out[t, i, k] = acc
    return out


def _right_project_numpy(X, B):
    return X @ B


@jit
def _left_project_loops(X, A):
    # out[t, :, k] = X_t^T @ A[:, k]; accumulated as (T, K, N) so the inner
    # loop runs along contiguous rows of X
    T, M, N = X.shape
    K = A.shape[1]
    tmp = np.zeros((T, K, N))
    for t in range(T):
        for i in range(M):
            for k in range(K):
                a = A[i, k]
                if a == 0.0:
                    continue
                for j in range(N):
                    tmp[t, k, j] += a * X[t, i, j]
    return np.ascontiguousarray(tmp.transpose(0, 2, 1))


def _left_project_numpy(X, A):
    return np.swapaxes(X, 1, 2) @ A


@jit
def _weighted_sum_loops(r, X):
    T, M, N = X.shape
    out = np.zeros((M, N))
    for t in range(T):
        w = r[t]
        for i in range(M):
            for j in range(N):
                out[i, j] += w * X[t, i, j]
    return out


def _weighted_sum_numpy(r, X):
    return np.tensordot(r, X, axes=1)


# --- one-sided Jacobi SVD -------------------------------------------------------


@jit
def _jacobi_sweeps_loops(G, V, tol, max_sweeps):
    m, n = G.shape
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for i in range(m):
                    alpha += G[i, p] * G[i, p]
                    beta += G[i, q] * G[i, q]
                    gamma += G[i, p] * G[i, q]
                if gamma == 0.0 or abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                sign = 1.0 if zeta >= 0.0 else -1.0
                tan = sign / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + tan * tan)
                s = c * tan
                for i in range(m):
                    gp = G[i, p]
                    gq = G[i, q]
                    G[i, p] = c * gp - s * gq
                    G[i, q] = s * gp + c * gq
                for i in range(n):
                    vp = V[i, p]
                    vq = V[i, q]
                    V[i, p] = c * vp - s * vq
                    V[i, q] = s * vp + c * vq
        if not rotated:
            return sweep + 1
    return -1


def _jacobi_sweeps_numpy(G, V, tol, max_sweeps):
    n = G.shape[1]
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                gp = G[:, p].copy()
                gq = G[:, q].copy()
                alpha = gp @ gp
                beta = gq @ gq
                gamma = gp @ gq
                if gamma == 0.0 or abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                sign = 1.0 if zeta >= 0.0 else -1.0
                tan = sign / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + tan * tan)
                s = c * tan
                G[:, p] = c * gp - s * gq
                G[:, q] = s * gp + c * gq
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        if not rotated:
            return sweep + 1
    return -1


bilinear_scores = select(_bilinear_scores_loops, _bilinear_scores_numpy)
frobenius_scores = select(_frobenius_scores_loops, _frobenius_scores_numpy)
right_project = select(_right_project_loops, _right_project_numpy)
left_project = select(_left_project_loops, _left_project_numpy)
weighted_sum = select(_weighted_sum_loops, _weighted_sum_numpy)
jacobi_sweeps = select(_jacobi_sweeps_loops, _jacobi_sweeps_numpy)

# name -> (loop implementation, numpy implementation); used by the benchmark
# and by the tests that hold both paths against each other.
IMPLEMENTATIONS = {
    "bilinear_scores": (_bilinear_scores_loops, _bilinear_scores_numpy),
    "frobenius_scores": (_frobenius_scores_loops, _frobenius_scores_numpy),
    "right_project": (_right_project_loops, _right_project_numpy),
    "left_project": (_left_project_loops, _left_project_numpy),
    "weighted_sum": (_weighted_sum_loops, _weighted_sum_numpy),
    "jacobi_sweeps": (_jacobi_sweeps_loops, _jacobi_sweeps_numpy),
}
