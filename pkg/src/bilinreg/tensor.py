"""Dense float64 linear algebra used by the models and trainers.

Vectors and matrices are plain numpy arrays. The functions here validate
shapes and finiteness and otherwise stay thin; the SVD is a one-sided
Jacobi iteration running on :mod:`bilinreg.kernels`.
"""

import numpy as np

from . import kernels
from .exceptions import ShapeError, SvdNotConverged


def as_vector(v, name="vector"):
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ShapeError(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} has non-finite entries")
    return arr


def as_matrix(m, name="matrix"):
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ShapeError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} has non-finite entries")
    return arr


def matvec(m, v):
    m = as_matrix(m)
    v = as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise ShapeError(f"matvec: matrix {m.shape} incompatible with vector ({v.shape[0]},)")
    return m @ v


def vecmat(v, m):
    """Row vector times matrix, returned as a 1-D array of length ``m.shape[1]``."""
    v = as_vector(v)
    m = as_matrix(m)
    if m.shape[0] != v.shape[0]:
        raise ShapeError(f"vecmat: vector ({v.shape[0]},) incompatible with matrix {m.shape}")
    return v @ m


def frobenius_inner(a, b):
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise ShapeError(f"frobenius_inner: shapes {a.shape} and {b.shape} differ")
    return float(np.sum(a * b))


def svd(m, tol=None, max_sweeps=60):
    """Thin SVD ``m = U @ diag(s) @ V.T`` by one-sided Jacobi rotations.

    Returns ``U`` (M x k), ``s`` (k,) nonincreasing and ``V`` (N x k) with
    k = min(M, N). Columns of U belonging to zero singular values are filled
    with an orthonormal completion so that U always has orthonormal columns.

    Raises SvdNotConverged when the off-diagonal mass has not vanished after
    ``max_sweeps`` sweeps.
    """
    m = as_matrix(m)
    transpose = m.shape[0] < m.shape[1]
    G = np.array(m.T if transpose else m, dtype=np.float64, order="C")
    rows, k = G.shape
    if tol is None:
        tol = rows * np.finfo(np.float64).eps
    V = np.eye(k)
    sweeps = kernels.jacobi_sweeps(G, V, tol, max_sweeps)
    if sweeps < 0:
        raise SvdNotConverged(f"Jacobi SVD of {m.shape} matrix did not converge in {max_sweeps} sweeps")

    s = np.sqrt(np.sum(G * G, axis=0))
    order = np.argsort(-s, kind="stable")
    s = s[order]
    G = G[:, order]
    V = V[:, order]

    U = np.zeros_like(G)
    cutoff = s[0] * rows * np.finfo(np.float64).eps if s[0] > 0 else 0.0
    nonzero = s > cutoff
    U[:, nonzero] = G[:, nonzero] / s[nonzero]
    if not np.all(nonzero):
        U = _complete_orthonormal(U, nonzero)

    if transpose:
        U, V = V, U
    return U, s, V


def _complete_orthonormal(U, filled):
    # Fill the unset columns of U with unit vectors orthogonal to the rest.
    U = U.copy()
    rows = U.shape[0]
    basis = [U[:, j] for j in np.flatnonzero(filled)]
    candidate = 0
    for j in np.flatnonzero(~filled):
        while True:
            e = np.zeros(rows)
            e[candidate % rows] = 1.0
            candidate += 1
            # two passes of projection for numerical orthogonality
            for _ in range(2):
                for q in basis:
                    e -= q * (q @ e)
            norm = np.linalg.norm(e)
            if norm > 1e-8:
                break
        U[:, j] = e / norm
        basis.append(U[:, j])
    return U


def gram_schmidt_residual(basis, v):
    """Return ``v - S (S^T v)`` where S stacks the normalised ``basis`` vectors."""
    v = as_vector(v)
    if len(basis) == 0:
        return v.copy()
    cols = []
    for i, b in enumerate(basis):
        b = as_vector(b, name=f"basis[{i}]")
        if b.shape != v.shape:
            raise ShapeError(f"basis[{i}] has length {b.shape[0]}, expected {v.shape[0]}")
        norm = np.linalg.norm(b)
        if norm == 0.0:
            raise ShapeError(f"basis[{i}] has zero norm")
        cols.append(b / norm)
    S = np.column_stack(cols)
    return v - S @ (S.T @ v)
