"""Central finite-difference checks of every analytic gradient."""

import numpy as np

from . import objective as obj
from .model import BilinearModel, BilinearSoftmaxModel, LinearModel, LinearSoftmaxModel
from .objective import BinaryBatch, MulticlassBatch, ObjectiveConfig, RegularizerKind


def central_difference(f, x, h=1e-6):
    """Gradient of scalar ``f`` at array ``x`` by central differences."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f(x)
        flat[i] = orig - h
        f_minus = f(x)
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2 * h)
    return grad


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-300)
    return float(np.linalg.norm(analytic - numeric) / scale)


def random_fixture(M=5, N=5, L=2, T=10, K=3, seed=0):
    """Random models and batches for gradient checks; no weight is zero."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, (T, M, N))
    c = np.arange(T) % 2
    rng.shuffle(c)
    labels = np.arange(T) % K
    rng.shuffle(labels)
    return {
        "linear": LinearModel(rng.normal(0, 0.5, (M, N))),
        "lsr": LinearSoftmaxModel(rng.normal(0, 0.5, (K, M, N))),
        "bilinear": BilinearModel(rng.normal(0, 0.5, (M, L)), rng.normal(0, 0.5, (N, L))),
        "bsr": BilinearSoftmaxModel(rng.normal(0, 0.5, (K, M, L)), rng.normal(0, 0.5, (K, N, L))),
        "binary": BinaryBatch(X, c),
        "multiclass": MulticlassBatch.from_labels(X, labels, K),
    }


def gradient_checks(M=5, N=5, L=2, T=10, K=3, seed=0, alphas=(0.0, 0.1), h=1e-6, corrupt=None):
    """Yield ``(name, relative_error)`` for every analytic gradient.

    ``corrupt`` (a name prefix) perturbs the matching analytic gradients;
    it exists so callers can confirm that a broken gradient is caught.
    """
    fx = random_fixture(M, N, L, T, K, seed)
    binary, multi = fx["binary"], fx["multiclass"]

    def damage(name, g):
        return g * 1.01 + 1e-3 if corrupt and name.startswith(corrupt) else g

    for alpha in alphas:
        cfg = ObjectiveConfig(alpha, RegularizerKind.SUM_SQUARES)
        lin = fx["linear"]
        numeric = central_difference(lambda W: obj.llr_objective(LinearModel(W), binary, cfg), lin.W, h)
        name = f"llr alpha={alpha}"
        yield name, relative_error(damage(name, obj.llr_grad(lin, binary, cfg)), numeric)

        lsr = fx["lsr"]
        numeric = central_difference(lambda W: obj.lsr_objective(LinearSoftmaxModel(W), multi, cfg), lsr.W, h)
        name = f"lsr alpha={alpha}"
        yield name, relative_error(damage(name, obj.lsr_grad(lsr, multi, cfg)), numeric)

        for kind in obj.TRAINABLE:
            cfg = ObjectiveConfig(alpha, kind)
            blr = fx["bilinear"]
            for l in range(L):

                def f_a(a, l=l):
                    A = blr.A.copy()
                    A[:, l] = a
                    return obj.blr_objective(BilinearModel(A, blr.B), binary, cfg)

                def f_b(b, l=l):
                    B = blr.B.copy()
                    B[:, l] = b
                    return obj.blr_objective(BilinearModel(blr.A, B), binary, cfg)

                name = f"blr grad_a l={l} {kind.value} alpha={alpha}"
                g = damage(name, obj.blr_grad_a(blr, binary, cfg, l))
                yield name, relative_error(g, central_difference(f_a, blr.A[:, l], h))
                name = f"blr grad_b l={l} {kind.value} alpha={alpha}"
                g = damage(name, obj.blr_grad_b(blr, binary, cfg, l))
                yield name, relative_error(g, central_difference(f_b, blr.B[:, l], h))

            bsr = fx["bsr"]
            for l in range(L):
                for k in range(K):

                    def f_a(a, l=l, k=k):
                        A = bsr.A.copy()
                        A[k, :, l] = a
                        return obj.bsr_objective(BilinearSoftmaxModel(A, bsr.B), multi, cfg)

                    def f_b(b, l=l, k=k):
                        B = bsr.B.copy()
                        B[k, :, l] = b
                        return obj.bsr_objective(BilinearSoftmaxModel(bsr.A, B), multi, cfg)

                    name = f"bsr grad_a l={l} k={k} {kind.value} alpha={alpha}"
                    g = damage(name, obj.bsr_grad_a(bsr, multi, cfg, l, k))
                    yield name, relative_error(g, central_difference(f_a, bsr.A[k, :, l], h))
                    name = f"bsr grad_b l={l} k={k} {kind.value} alpha={alpha}"
                    g = damage(name, obj.bsr_grad_b(bsr, multi, cfg, l, k))
                    yield name, relative_error(g, central_difference(f_b, bsr.B[k, :, l], h))
