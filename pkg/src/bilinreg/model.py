"""Linear and bilinear classifiers: scores, activations, conversions, text I/O.

None of the models carry an intercept. A bilinear model of rank L scores an
M x N image as ``z = sum_l a_l^T X b_l``; at ``L = min(M, N)`` it can express
any linear score ``<W, X>`` through the SVD of W.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .exceptions import ConfigError, ShapeError
from .tensor import as_matrix, frobenius_inner, svd


@dataclass
class LinearModel:
    W: np.ndarray

    def __post_init__(self):
        self.W = as_matrix(self.W, "W")

    @property
    def shape(self):
        return self.W.shape


@dataclass
class BilinearModel:
    """Rank-L bilinear weights; ``A[:, l]`` is a_l and ``B[:, l]`` is b_l."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        self.A = as_matrix(self.A, "A")
        self.B = as_matrix(self.B, "B")
        if self.A.shape[1] != self.B.shape[1]:
            raise ShapeError(f"A {self.A.shape} and B {self.B.shape} disagree on rank")

    @property
    def rank(self):
        return self.A.shape[1]

    @property
    def shape(self):
        return self.A.shape[0], self.B.shape[0]


@dataclass
class LinearSoftmaxModel:
    W: np.ndarray  # (K, M, N)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.W.ndim != 3 or self.W.shape[0] < 1:
            raise ShapeError(f"W must have shape (K, M, N), got {self.W.shape}")
        if not np.all(np.isfinite(self.W)):
            raise ShapeError("W has non-finite entries")

    @property
    def n_classes(self):
        return self.W.shape[0]

    @property
    def shape(self):
        return self.W.shape[1:]


@dataclass
class BilinearSoftmaxModel:
    """Per-class bilinear weights: ``A[k]`` is (M, L), ``B[k]`` is (N, L)."""

    A: np.ndarray  # (K, M, L)
    B: np.ndarray  # (K, N, L)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        self.B = np.asarray(self.B, dtype=np.float64)
        if self.A.ndim != 3 or self.B.ndim != 3:
            raise ShapeError(f"A and B must be 3-D, got {self.A.shape} and {self.B.shape}")
        if self.A.shape[0] != self.B.shape[0] or self.A.shape[2] != self.B.shape[2]:
            raise ShapeError(f"A {self.A.shape} and B {self.B.shape} disagree on classes or rank")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.B))):
            raise ShapeError("non-finite weights")

    @property
    def n_classes(self):
        return self.A.shape[0]

    @property
    def rank(self):
        return self.A.shape[2]

    @property
    def shape(self):
        return self.A.shape[1], self.B.shape[1]

    def class_model(self, k):
        return BilinearModel(self.A[k], self.B[k])


# --- activations --------------------------------------------------------------


def logistic(z):
    """Logistic function in the sign-split form; exact symmetry, no overflow."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def softmax(z):
    """Softmax over the last axis with max subtraction."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - np.max(z, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


# --- scores ---------------------------------------------------------------------


def _check_image(X, shape):
    X = np.asarray(X, dtype=np.float64)
    if X.shape != tuple(shape):
        raise ShapeError(f"image shape {X.shape} does not match model shape {tuple(shape)}")
    return X


def _check_stack(X, shape):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[1:] != tuple(shape):
        raise ShapeError(f"image stack shape {X.shape} does not match model shape {tuple(shape)}")
    return X


def llr_score(m, X):
    return frobenius_inner(m.W, _check_image(X, m.shape))


def blr_score(m, X):
    X = _check_image(X, m.shape)
    return float(np.einsum("ml,mn,nl->", m.A, X, m.B))


def lsr_scores(m, X):
    X = _check_image(X, m.shape)
    return np.array([frobenius_inner(Wk, X) for Wk in m.W])


def bsr_scores(m, X):
    X = _check_image(X, m.shape)
    return np.array([np.einsum("ml,mn,nl->", m.A[k], X, m.B[k]) for k in range(m.n_classes)])


def batch_scores(m, X):
    """Scores for a stack of images: (T,) for binary models, (T, K) for softmax ones."""
    X = _check_stack(X, m.shape)
    if isinstance(m, LinearModel):
        return kernels.frobenius_scores(X, m.W)
    if isinstance(m, BilinearModel):
        return kernels.bilinear_scores(X, m.A, m.B)
    if isinstance(m, LinearSoftmaxModel):
        return np.column_stack([kernels.frobenius_scores(X, Wk) for Wk in m.W])
    if isinstance(m, BilinearSoftmaxModel):
        return np.column_stack(
            [kernels.bilinear_scores(X, m.A[k], m.B[k]) for k in range(m.n_classes)]
        )
    raise TypeError(f"unsupported model type {type(m).__name__}")


# --- linear <-> bilinear ----------------------------------------------------------


def reconstruct_w(m):
    """``W = sum_l a_l b_l^T`` as a LinearModel."""
    return LinearModel(m.A @ m.B.T)


def decompose_w(m, L):
    """Rank-L bilinear model from the SVD of W, splitting each s_l evenly.

    Exact (up to rounding) whenever L >= rank(W).
    """
    M, N = m.shape
    if not 1 <= L <= min(M, N):
        raise ConfigError(f"rank L={L} outside [1, {min(M, N)}] for a {M}x{N} weight matrix")
    U, s, V = svd(m.W)
    root = np.sqrt(s[:L])
    return BilinearModel(U[:, :L] * root, V[:, :L] * root)


# --- text serialisation ---------------------------------------------------------
#
# Header line, then one line per weight vector, values space-separated in
# shortest round-trip decimal form:
#   llr M N      -> M rows of W
#   lsr M N K    -> for each class, M rows of W_k
#   blr M N L    -> a_1 .. a_L, then b_1 .. b_L
#   bsr M N L K  -> for each class, a_1 .. a_L then b_1 .. b_L


def _fmt(values):
    return " ".join(repr(float(v)) for v in values)


def dumps(m):
    lines = []
    if isinstance(m, LinearModel):
        M, N = m.shape
        lines.append(f"llr {M} {N}")
        lines.extend(_fmt(row) for row in m.W)
    elif isinstance(m, LinearSoftmaxModel):
        M, N = m.shape
        lines.append(f"lsr {M} {N} {m.n_classes}")
        for Wk in m.W:
            lines.extend(_fmt(row) for row in Wk)
    elif isinstance(m, BilinearModel):
        M, N = m.shape
        lines.append(f"blr {M} {N} {m.rank}")
        lines.extend(_fmt(col) for col in m.A.T)
        lines.extend(_fmt(col) for col in m.B.T)
    elif isinstance(m, BilinearSoftmaxModel):
        M, N = m.shape
        lines.append(f"bsr {M} {N} {m.rank} {m.n_classes}")
        for k in range(m.n_classes):
            lines.extend(_fmt(col) for col in m.A[k].T)
            lines.extend(_fmt(col) for col in m.B[k].T)
    else:
        raise TypeError(f"unsupported model type {type(m).__name__}")
    return "\n".join(lines) + "\n"


def loads(text):
    lines = text.strip().splitlines()
    if not lines:
        raise ConfigError("empty model file")
    header = lines[0].split()
    kind, dims = header[0], [int(x) for x in header[1:]]
    values = np.array([float(x) for line in lines[1:] for x in line.split()], dtype=np.float64)

    expected = {"llr": 2, "lsr": 3, "blr": 3, "bsr": 4}
    if kind not in expected or len(dims) != expected[kind]:
        raise ConfigError(f"bad model header {lines[0]!r}")
    if kind == "llr":
        M, N = dims
        sizes = M * N
    elif kind == "lsr":
        M, N, K = dims
        sizes = K * M * N
    elif kind == "blr":
        M, N, L = dims
        sizes = L * (M + N)
    else:
        M, N, L, K = dims
        sizes = K * L * (M + N)
    if values.size != sizes:
        raise ConfigError(f"{kind} header expects {sizes} values, file has {values.size}")

    if kind == "llr":
        return LinearModel(values.reshape(M, N))
    if kind == "lsr":
        return LinearSoftmaxModel(values.reshape(K, M, N))
    if kind == "blr":
        A = values[: L * M].reshape(L, M).T
        B = values[L * M :].reshape(L, N).T
        return BilinearModel(A, B)
    per_class = values.reshape(K, L * (M + N))
    A = np.stack([c[: L * M].reshape(L, M).T for c in per_class])
    B = np.stack([c[L * M :].reshape(L, N).T for c in per_class])
    return BilinearSoftmaxModel(A, B)


def save_model(m, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(m))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
