"""Armijo line search and the training loops.

The bilinear trainers run alternating block descent: for every rank l the
column a_l (or, for softmax models, the K-column block A_l) is optimised by
gradient steps with everything else frozen, then b_l (B_l), and the whole
pass over l is repeated ``outer_sweeps`` times. Each block problem is convex.

The trainers keep the score vector up to date incrementally. A gradient step
``a_l -= eta * g`` moves the scores by ``-eta * (X_t b_l) . g``, so probing a
step size costs O(T) instead of a full rescoring. Every objective value in
the trace comes from the same state the next line search starts from, so
the trace is nonincreasing by construction of the Armijo test.
"""

import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .exceptions import ConfigError, NumericError
from .model import BilinearModel, BilinearSoftmaxModel, LinearModel, LinearSoftmaxModel, logistic, softmax
from .objective import (
    TRAINABLE,
    ObjectiveConfig,
    RegularizerKind,
    binary_data_term,
    column_regularizer,
    multiclass_data_term,
)
from .tensor import gram_schmidt_residual

log = logging.getLogger(__name__)

ZERO_NORM = 1e-12
MAX_REDRAWS = 10


@dataclass(frozen=True)
class LineSearchParams:
    initial_step: float = 1.0
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    max_halvings: int = 50

    def __post_init__(self):
        if not self.initial_step > 0:
            raise ConfigError("initial_step must be positive")
        if not 0 < self.shrink < 1:
            raise ConfigError("shrink must lie in (0, 1)")
        if not 0 < self.sufficient_decrease < 1:
            raise ConfigError("sufficient_decrease must lie in (0, 1)")
        if self.max_halvings < 0:
            raise ConfigError("max_halvings must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    rank: int = 1
    alpha: float = 0.0
    regularizer: RegularizerKind = RegularizerKind.SUM_SQUARES
    outer_sweeps: int = 10
    inner_tol: float = 1e-6
    inner_max_iters: int = 100
    seed: int = 0
    line_search: LineSearchParams = field(default_factory=LineSearchParams)

    def __post_init__(self):
        object.__setattr__(self, "regularizer", RegularizerKind.parse(self.regularizer))
        if self.rank < 1:
            raise ConfigError(f"rank must be >= 1, got {self.rank}")
        if self.outer_sweeps < 1:
            raise ConfigError(f"outer_sweeps must be >= 1, got {self.outer_sweeps}")
        if not self.inner_tol > 0:
            raise ConfigError("inner_tol must be positive")
        if self.inner_max_iters < 1:
            raise ConfigError("inner_max_iters must be >= 1")
        # validates alpha
        ObjectiveConfig(self.alpha, self.regularizer)

    @property
    def objective(self):
        return ObjectiveConfig(self.alpha, self.regularizer)

    def with_alpha(self, alpha):
        return replace(self, alpha=alpha)


@dataclass
class TrainReport:
    objective_trace: list = field(default_factory=list)
    steps: list = field(default_factory=list)  # (sweep, block, eta, objective)
    outer_sweeps: int = 0
    converged: bool = False
    wall_time: float = 0.0

    @property
    def final_objective(self):
        return self.objective_trace[-1]

    def trace_csv(self):
        lines = ["step,sweep,block,eta,objective"]
        for i, (sweep, block, eta, value) in enumerate(self.steps):
            lines.append(f"{i},{sweep},{block},{eta!r},{value!r}")
        return "\n".join(lines) + "\n"


class LineSearchResult(NamedTuple):
    step: float
    value: float
    found: bool


def backtracking_line_search(evaluate, grad_sq_norm, params=LineSearchParams(), f0=None):
    """Largest ``initial * shrink**j`` meeting the Armijo condition.

    ``evaluate(eta)`` is the objective at ``x - eta * g`` and ``grad_sq_norm``
    is ``||g||^2``. Returns ``LineSearchResult(0.0, f0, False)`` when no
    probe gives sufficient decrease.
    """
    if f0 is None:
        f0 = evaluate(0.0)
    if not math.isfinite(f0):
        raise NumericError(f"objective is not finite at the line-search origin ({f0})")
    eta = params.initial_step
    for _ in range(params.max_halvings + 1):
        value = evaluate(eta)
        if math.isfinite(value) and value <= f0 - params.sufficient_decrease * eta * grad_sq_norm and value < f0:
            return LineSearchResult(eta, value, True)
        eta *= params.shrink
    return LineSearchResult(0.0, f0, False)


# --- initialisation --------------------------------------------------------------


def _orthogonal_columns(rng, n_rows, n_cols):
    """Uniform[-1, 1] columns, each made orthogonal to the earlier ones."""
    if n_cols > n_rows:
        warnings.warn(
            f"rank {n_cols} exceeds the vector length {n_rows}; columns beyond it cannot be orthogonalised",
            stacklevel=3,
        )
    cols = []
    for l in range(n_cols):
        for _ in range(MAX_REDRAWS):
            raw = rng.uniform(-1.0, 1.0, n_rows)
            b = gram_schmidt_residual(cols, raw)
            if np.linalg.norm(b) >= ZERO_NORM:
                break
        else:
            b = raw
        cols.append(b)
    return np.column_stack(cols)


def init_blr(M, N, L, seed):
    """A = 0; B uniform on [-1, 1] with Gram-Schmidt over its columns.

    Columns are drawn one after another, so the first l columns do not depend
    on L.
    """
    rng = np.random.default_rng(seed)
    return BilinearModel(np.zeros((M, L)), _orthogonal_columns(rng, N, L))


def init_bsr(M, N, L, K, seed):
    rng = np.random.default_rng(seed)
    B = np.stack([_orthogonal_columns(rng, N, L) for _ in range(K)])
    return BilinearSoftmaxModel(np.zeros((K, M, L)), B)


# --- shared descent loop ------------------------------------------------------------


def _check_finite(value, where):
    if not math.isfinite(value):
        raise NumericError(f"objective became non-finite ({value}) during {where}")


def _descend(state, direction, report, sweep, block, cfg, max_iters, trace_out):
    """Run gradient steps on one block until the relative decrease stalls.

    ``direction()`` returns ``(g_sq, probe)`` where ``probe(eta)`` gives the
    objective after the step and ``probe.commit()`` adopts the last probed
    step. Returns True when the loop ended before the iteration cap.
    """
    J = state["J"]
    for _ in range(max_iters):
        g_sq, probe = direction()
        if not math.isfinite(g_sq):
            raise NumericError(f"gradient became non-finite (||g||^2 = {g_sq}) in block {block} of sweep {sweep}")
        if g_sq == 0.0:
            return True
        found = backtracking_line_search(probe, g_sq, cfg.line_search, f0=J)
        if not found.found:
            return True
        probe.commit()
        _check_finite(found.value, f"block {block} of sweep {sweep}")
        decrease = (J - found.value) / max(abs(J), np.finfo(float).tiny)
        J = found.value
        state["J"] = J
        report.objective_trace.append(J)
        report.steps.append((sweep, block, found.step, J))
        if trace_out is not None:
            trace_out.write(f"{len(report.steps) - 1},{sweep},{block},{found.step!r},{J!r}\n")
        if decrease < cfg.inner_tol:
            return True
    return False


class _Probe:
    """Objective along ``x - eta * g`` for one block; remembers the last probe."""

    def __init__(self, value_at, apply):
        self._value_at = value_at
        self._apply = apply
        self._last = None

    def __call__(self, eta):
        value, trial = self._value_at(eta)
        self._last = trial
        return value

    def commit(self):
        self._apply(self._last)


def _start_report(trace_out):
    if trace_out is not None:
        trace_out.write("step,sweep,block,eta,objective\n")
    return TrainReport()


# --- binary trainers ----------------------------------------------------------------


def train_blr(batch, cfg, trace_out=None):
    """Alternating training of a rank-L bilinear logistic regression.

    Returns ``(BilinearModel, TrainReport)``.
    """
    if cfg.regularizer not in TRAINABLE:
        raise ConfigError(f"{cfg.regularizer.value} regularizer cannot be trained")
    if np.all(batch.labels == batch.labels[0]):
        warnings.warn("training batch contains a single class", stacklevel=2)
    started = time.perf_counter()
    X, c = batch.inputs, batch.labels
    T, M, N = X.shape
    L = cfg.rank
    alpha, kind = cfg.alpha, cfg.regularizer
    init = init_blr(M, N, L, cfg.seed)
    A, B = init.A.copy(), np.array(init.B, order="F")

    z = np.zeros(T)
    sq_a = np.sum(A * A, axis=0)
    sq_b = np.sum(B * B, axis=0)

    def objective(z_, sq_a_, sq_b_):
        return binary_data_term(z_, c) + alpha * column_regularizer(sq_a_, sq_b_, kind)

    state = {"J": objective(z, sq_a, sq_b)}
    _check_finite(state["J"], "initialisation")
    report = _start_report(trace_out)
    report.objective_trace.append(state["J"])

    def block_direction(l, side):
        own, other = (A, B) if side == "a" else (B, A)
        own_sq, other_sq = (sq_a, sq_b) if side == "a" else (sq_b, sq_a)
        proj = (kernels.right_project if side == "a" else kernels.left_project)(X, other[:, l : l + 1])[:, :, 0]

        def direction():
            r = logistic(z) - c
            g = proj.T @ r / T
            if kind is RegularizerKind.SUM_SQUARES:
                g = g + alpha * own[:, l]
            else:
                g = g + alpha * other_sq[l] * own[:, l]
            dz = proj @ g

            def value_at(eta):
                z_try = z - eta * dz
                v_try = own[:, l] - eta * g
                sq_try = own_sq.copy()
                sq_try[l] = v_try @ v_try
                sa, sb = (sq_try, other_sq) if side == "a" else (other_sq, sq_try)
                return objective(z_try, sa, sb), (z_try, v_try, sq_try[l])

            def apply(trial):
                nonlocal z
                z, own[:, l], own_sq[l] = trial

            return float(g @ g), _Probe(value_at, apply)

        return direction

    for sweep in range(cfg.outer_sweeps):
        settled = True
        for l in range(L):
            for side in ("a", "b"):
                done = _descend(state, block_direction(l, side), report, sweep, f"{side}{l}", cfg, cfg.inner_max_iters, trace_out)
                settled = settled and done
        report.outer_sweeps = sweep + 1
        report.converged = settled
        log.debug("blr sweep %d: J=%.10g", sweep, state["J"])

    report.wall_time = time.perf_counter() - started
    return BilinearModel(A, np.ascontiguousarray(B)), report


def train_llr(batch, cfg, init=None, trace_out=None):
    """Gradient descent on the ridge-regularised logistic loss.

    The iteration budget is ``outer_sweeps * inner_max_iters``. ``init`` is an
    optional starting W (zeros by default).
    """
    started = time.perf_counter()
    X, c = batch.inputs, batch.labels
    T, M, N = X.shape
    alpha = cfg.alpha
    W = np.zeros((M, N)) if init is None else np.array(init, dtype=np.float64)
    z = kernels.frobenius_scores(X, W)
    sq = float(np.sum(W * W))

    def objective(z_, sq_):
        return binary_data_term(z_, c) + alpha * 0.5 * sq_

    state = {"J": objective(z, sq)}
    _check_finite(state["J"], "initialisation")
    report = _start_report(trace_out)
    report.objective_trace.append(state["J"])

    def direction():
        r = logistic(z) - c
        g = kernels.weighted_sum(r, X) / T + alpha * W
        dz = kernels.frobenius_scores(X, g)

        def value_at(eta):
            z_try = z - eta * dz
            W_try = W - eta * g
            sq_try = float(np.sum(W_try * W_try))
            return objective(z_try, sq_try), (z_try, W_try, sq_try)

        def apply(trial):
            nonlocal z, W, sq
            z, W, sq = trial

        return float(np.sum(g * g)), _Probe(value_at, apply)

    report.converged = _descend(
        state, direction, report, 0, "W", cfg, cfg.outer_sweeps * cfg.inner_max_iters, trace_out
    )
    report.outer_sweeps = 1
    report.wall_time = time.perf_counter() - started
    return LinearModel(W), report


# --- softmax trainers ----------------------------------------------------------------


def train_bsr(batch, cfg, trace_out=None):
    """Alternating training of a rank-L bilinear softmax regression.

    For each rank l the K columns ``a_{l,1..K}`` move together along their
    stacked gradient with one shared step, then the ``b_{l,k}`` likewise.
    """
    if cfg.regularizer not in TRAINABLE:
        raise ConfigError(f"{cfg.regularizer.value} regularizer cannot be trained")
    started = time.perf_counter()
    X, C = batch.inputs, batch.onehot
    T, M, N = X.shape
    K = batch.n_classes
    L = cfg.rank
    alpha, kind = cfg.alpha, cfg.regularizer
    init = init_bsr(M, N, L, K, cfg.seed)
    # stored rank-major so that a block A_l = A[l] is an (M, K) matrix
    A = np.ascontiguousarray(np.transpose(init.A, (2, 1, 0)))  # (L, M, K)
    B = np.ascontiguousarray(np.transpose(init.B, (2, 1, 0)))  # (L, N, K)

    Z = np.zeros((T, K))
    sq_a = np.sum(A * A, axis=1)  # (L, K)
    sq_b = np.sum(B * B, axis=1)

    def objective(Z_, sq_a_, sq_b_):
        return multiclass_data_term(Z_, C) + alpha * column_regularizer(sq_a_, sq_b_, kind)

    state = {"J": objective(Z, sq_a, sq_b)}
    _check_finite(state["J"], "initialisation")
    report = _start_report(trace_out)
    report.objective_trace.append(state["J"])

    def block_direction(l, side):
        own, other = (A, B) if side == "a" else (B, A)
        own_sq, other_sq = (sq_a, sq_b) if side == "a" else (sq_b, sq_a)
        proj = (kernels.right_project if side == "a" else kernels.left_project)(X, other[l])  # (T, ., K)

        def direction():
            R = softmax(Z) - C
            G = np.einsum("tvk,tk->vk", proj, R) / T
            if kind is RegularizerKind.SUM_SQUARES:
                G = G + alpha * own[l]
            else:
                G = G + alpha * other_sq[l] * own[l]
            dZ = np.einsum("tvk,vk->tk", proj, G)

            def value_at(eta):
                Z_try = Z - eta * dZ
                V_try = own[l] - eta * G
                sq_try = own_sq.copy()
                sq_try[l] = np.sum(V_try * V_try, axis=0)
                sa, sb = (sq_try, other_sq) if side == "a" else (other_sq, sq_try)
                return objective(Z_try, sa, sb), (Z_try, V_try, sq_try[l])

            def apply(trial):
                nonlocal Z
                Z, own[l], own_sq[l] = trial

            return float(np.sum(G * G)), _Probe(value_at, apply)

        return direction

    for sweep in range(cfg.outer_sweeps):
        settled = True
        for l in range(L):
            for side in ("a", "b"):
                done = _descend(state, block_direction(l, side), report, sweep, f"{side}{l}", cfg, cfg.inner_max_iters, trace_out)
                settled = settled and done
        report.outer_sweeps = sweep + 1
        report.converged = settled
        log.debug("bsr sweep %d: J=%.10g", sweep, state["J"])

    report.wall_time = time.perf_counter() - started
    model = BilinearSoftmaxModel(np.transpose(A, (2, 1, 0)).copy(), np.transpose(B, (2, 1, 0)).copy())
    return model, report


def train_lsr(batch, cfg, init=None, trace_out=None):
    """Full-gradient descent for linear softmax regression, all classes at once."""
    started = time.perf_counter()
    X, C = batch.inputs, batch.onehot
    T, M, N = X.shape
    K = batch.n_classes
    alpha = cfg.alpha
    W = np.zeros((K, M, N)) if init is None else np.array(init, dtype=np.float64)
    flat = X.reshape(T, -1)

    def scores(W_):
        return np.column_stack([kernels.frobenius_scores(X, W_[k]) for k in range(K)])

    Z = scores(W)
    sq = float(np.sum(W * W))

    def objective(Z_, sq_):
        return multiclass_data_term(Z_, C) + alpha * 0.5 * sq_

    state = {"J": objective(Z, sq)}
    _check_finite(state["J"], "initialisation")
    report = _start_report(trace_out)
    report.objective_trace.append(state["J"])

    def direction():
        R = softmax(Z) - C
        G = np.stack([kernels.weighted_sum(np.ascontiguousarray(R[:, k]), X) for k in range(K)]) / T + alpha * W
        dZ = flat @ G.reshape(K, -1).T

        def value_at(eta):
            Z_try = Z - eta * dZ
            W_try = W - eta * G
            sq_try = float(np.sum(W_try * W_try))
            return objective(Z_try, sq_try), (Z_try, W_try, sq_try)

        def apply(trial):
            nonlocal Z, W, sq
            Z, W, sq = trial

        return float(np.sum(G * G)), _Probe(value_at, apply)

    report.converged = _descend(
        state, direction, report, 0, "W", cfg, cfg.outer_sweeps * cfg.inner_max_iters, trace_out
    )
    report.outer_sweeps = 1
    report.wall_time = time.perf_counter() - started
    return LinearSoftmaxModel(W), report
