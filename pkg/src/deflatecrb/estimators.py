"""Sparse recovery on a (possibly deflated) linear system ``y = H x + n``."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import DimensionError, ParameterError, SolverError

__all__ = [
    "ESTIMATORS",
    "SolverOptions",
    "SparseEstimate",
    "bpdn",
    "bpdn_kkt_residual",
    "bpdn_objective",
    "cosamp",
    "mse",
    "omp",
    "oracle_ls",
    "run_estimator",
    "soft_threshold",
    "support_metrics",
    "universal_lambda",
]

logger = logging.getLogger(__name__)

OMP_TOL = 1e-8
RELATIVE_TOL = 1e-6
LSTSQ_COND = 1e-10


@dataclass(frozen=True)
class SolverOptions:
    """Options shared by the solvers; ``None`` selects the solver's own default."""

    sparsity: int = 1
    lambda_: Optional[float] = None
    max_iters: int = 500
    tol: Optional[float] = None
    debias: Optional[bool] = None

    def __post_init__(self) -> None:
        if self.sparsity < 1:
            raise ParameterError(f"sparsity must be >= 1, got {self.sparsity}")
        if self.lambda_ is not None and not self.lambda_ >= 0.0:
            raise ParameterError(f"lambda_ must be >= 0, got {self.lambda_}")
        if self.tol is not None and not self.tol > 0.0:
            raise ParameterError(f"tol must be > 0, got {self.tol}")
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class SparseEstimate:
    x_hat: np.ndarray
    support: Tuple[int, ...]
    iterations: int
    residual_norm: float
    history: Tuple[float, ...] = ()


def _validate_system(h_bar: np.ndarray, y_bar: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    h = np.asarray(h_bar, dtype=float)
    y = np.asarray(y_bar, dtype=float).reshape(-1)
    if h.ndim != 2 or h.shape[0] != y.size:
        raise DimensionError(f"dictionary of shape {h.shape} does not match observation of length {y.size}")
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(y))):
        raise SolverError("dictionary or observation has non-finite entries")
    return h, y


def _least_squares(h: np.ndarray, y: np.ndarray, support: Sequence[int], what: str) -> np.ndarray:
    columns = h[:, list(support)]
    coef, _, rank, _ = scipy.linalg.lstsq(columns, y, cond=LSTSQ_COND, lapack_driver="gelsd")
    if rank < columns.shape[1]:
        raise SolverError(f"{what}: least squares on {columns.shape[1]} columns has rank {rank}")
    return coef


def _estimate(h: np.ndarray, y: np.ndarray, x: np.ndarray, iterations: int, history=()) -> SparseEstimate:
    support = tuple(int(i) for i in np.flatnonzero(x))
    return SparseEstimate(
        x_hat=x,
        support=support,
        iterations=iterations,
        residual_norm=float(np.linalg.norm(y - h @ x)),
        history=tuple(history),
    )


def _top_indices(values: np.ndarray, count: int) -> np.ndarray:
    # stable sort on -|v| keeps the lowest index first among ties
    return np.argsort(-np.abs(values), kind="stable")[:count]


def omp(h_bar: np.ndarray, y_bar: np.ndarray, opts: SolverOptions) -> SparseEstimate:
    """Orthogonal Matching Pursuit with a full least-squares refit at every step."""

    h, y = _validate_system(h_bar, y_bar)
    rows, k = h.shape
    if opts.sparsity > min(rows, k):
        raise DimensionError(f"sparsity {opts.sparsity} exceeds min(rows, K) = {min(rows, k)}")
    tol = OMP_TOL if opts.tol is None else opts.tol
    y_norm = float(np.linalg.norm(y))
    x = np.zeros(k)
    residual = y.copy()
    selected: list[int] = []
    coef = np.zeros(0)
    history = [y_norm]
    for _ in range(opts.sparsity):
        if history[-1] <= tol * y_norm:
            break
        correlations = np.abs(h.T @ residual)
        correlations[selected] = -np.inf
        selected.append(int(np.argmax(correlations)))
        coef = _least_squares(h, y, selected, "OMP")
        residual = y - h[:, selected] @ coef
        history.append(float(np.linalg.norm(residual)))
    x[selected] = coef
    estimate = SparseEstimate(
        x_hat=x,
        support=tuple(sorted(selected)),
        iterations=len(selected),
        residual_norm=float(np.linalg.norm(y - h @ x)),
        history=tuple(history),
    )
    logger.debug("OMP stopped after %d selections, residual %.3e", estimate.iterations, estimate.residual_norm)
    return estimate


def cosamp(h_bar: np.ndarray, y_bar: np.ndarray, opts: SolverOptions) -> SparseEstimate:
    """Compressive Sampling Matching Pursuit.

    Each pass merges the 2s largest proxy entries with the current support, solves
    least squares on the merged set and prunes back to the s largest entries. The
    merged set is capped at the number of rows so that the subproblem stays
    overdetermined.
    """

    h, y = _validate_system(h_bar, y_bar)
    rows, k = h.shape
    s = opts.sparsity
    if s > min(rows, k):
        raise DimensionError(f"sparsity {s} exceeds min(rows, K) = {min(rows, k)}")
    if 3 * s > rows:
        logger.warning("CoSaMP with sparsity %d on %d rows: 3s > rows, recovery guarantees do not apply", s, rows)
    tol = RELATIVE_TOL if opts.tol is None else opts.tol
    y_norm = float(np.linalg.norm(y))
    x = np.zeros(k)
    if y_norm == 0.0:
        return _estimate(h, y, x, 0, (0.0,))
    residual = y.copy()
    previous = y_norm
    history = [y_norm]
    iterations = 0
    for iterations in range(1, opts.max_iters + 1):
        current = np.flatnonzero(x)
        proxy = h.T @ residual
        proxy[current] = 0.0
        budget = min(2 * s, rows - current.size)
        merged = np.union1d(current, _top_indices(proxy, budget))
        coef = _least_squares(h, y, merged, "CoSaMP")
        kept = _top_indices(coef, s)
        x = np.zeros(k)
        x[merged[kept]] = coef[kept]
        residual = y - h @ x
        norm = float(np.linalg.norm(residual))
        history.append(norm)
        if norm <= tol * y_norm or abs(previous - norm) < tol * previous:
            break
        previous = norm
    return _estimate(h, y, x, iterations, history)


def soft_threshold(values: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(values) * np.maximum(np.abs(values) - threshold, 0.0)


def bpdn_objective(h: np.ndarray, y: np.ndarray, x: np.ndarray, lambda_: float) -> float:
    residual = y - h @ x
    return 0.5 * float(residual @ residual) + lambda_ * float(np.sum(np.abs(x)))


def bpdn_kkt_residual(h: np.ndarray, y: np.ndarray, x: np.ndarray, lambda_: float) -> float:
    """Violation of the subgradient optimality conditions of the l1-penalised problem."""

    correlation = h.T @ (y - h @ x)
    on = x != 0.0
    on_support = np.abs(correlation[on] - lambda_ * np.sign(x[on]))
    off_support = np.abs(correlation[~on]) - lambda_
    worst_on = float(np.max(on_support)) if on_support.size else 0.0
    worst_off = float(np.max(off_support)) if off_support.size else 0.0
    return max(worst_on, worst_off, 0.0)


def _lipschitz(h: np.ndarray, iters: int = 500, tol: float = 1e-12) -> float:
    """Largest squared singular value of ``h`` by power iteration on ``h^T h``."""

    v = np.ones(h.shape[1]) / math.sqrt(h.shape[1])
    estimate = 0.0
    for _ in range(iters):
        w = h.T @ (h @ v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(norm - estimate) <= tol * norm:
            return norm
        estimate = norm
    return estimate


def universal_lambda(sigma2: float, k: int) -> float:
    """``sigma sqrt(2 ln K)``."""

    return math.sqrt(sigma2) * math.sqrt(2.0 * math.log(k))


def bpdn(h_bar: np.ndarray, y_bar: np.ndarray, opts: SolverOptions) -> SparseEstimate:
    """Basis Pursuit DeNoise, ``min 1/2 ||y - H x||^2 + lambda ||x||_1``.

    Accelerated proximal gradient with step ``1/L`` and a function-value restart:
    whenever the accelerated step would increase the objective the momentum is
    dropped and a plain proximal step is taken from the last iterate. Stops once
    the relative objective change is below ``tol`` and the optimality residual is
    below ``10 tol lambda``, or after ``max_iters``. ``debias`` (default on)
    refits least squares on the detected support.
    """

    h, y = _validate_system(h_bar, y_bar)
    if opts.lambda_ is None:
        raise ParameterError("bpdn needs an explicit lambda_ (see universal_lambda)")
    lam = float(opts.lambda_)
    tol = RELATIVE_TOL if opts.tol is None else opts.tol
    debias = True if opts.debias is None else opts.debias
    k = h.shape[1]
    x = np.zeros(k)
    lipschitz = _lipschitz(h)
    if lipschitz == 0.0:
        return _estimate(h, y, x, 0, (bpdn_objective(h, y, x, lam),))
    step = 1.0 / lipschitz
    z = x.copy()
    t = 1.0
    objective = bpdn_objective(h, y, x, lam)
    history = [objective]
    iterations = 0
    for iterations in range(1, opts.max_iters + 1):
        candidate = soft_threshold(z - step * (h.T @ (h @ z - y)), step * lam)
        value = bpdn_objective(h, y, candidate, lam)
        if value > objective:
            t = 1.0
            candidate = soft_threshold(x - step * (h.T @ (h @ x - y)), step * lam)
            value = bpdn_objective(h, y, candidate, lam)
            if value > objective:
                candidate, value = x, objective
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        z = candidate + ((t - 1.0) / t_next) * (candidate - x)
        change = abs(objective - value) / max(abs(objective), np.finfo(float).tiny)
        x, objective, t = candidate, value, t_next
        history.append(objective)
        if change < tol and bpdn_kkt_residual(h, y, x, lam) <= 10.0 * tol * max(lam, np.finfo(float).tiny):
            break
    logger.debug("BPDN stopped after %d iterations, objective %.6e", iterations, objective)
    if debias:
        support = np.flatnonzero(x)
        if 0 < support.size <= h.shape[0]:
            try:
                refit = _least_squares(h, y, support, "BPDN debias")
            except SolverError:
                logger.debug("BPDN debias skipped: degenerate support of size %d", support.size)
            else:
                x = np.zeros(k)
                x[support] = refit
    return _estimate(h, y, x, iterations, history)


def oracle_ls(h_bar: np.ndarray, y_bar: np.ndarray, true_support: Iterable[int]) -> SparseEstimate:
    """Least squares restricted to the true support."""

    h, y = _validate_system(h_bar, y_bar)
    support = sorted(int(i) for i in true_support)
    x = np.zeros(h.shape[1])
    if support:
        x[support] = _least_squares(h, y, support, "oracle least squares")
    return SparseEstimate(
        x_hat=x,
        support=tuple(support),
        iterations=1,
        residual_norm=float(np.linalg.norm(y - h @ x)),
    )


def mse(alpha_hat: np.ndarray, alpha: np.ndarray) -> float:
    """``(1/L_A) ||alpha_hat - alpha||^2``."""

    alpha_hat = np.asarray(alpha_hat, dtype=float).reshape(-1)
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha_hat.size != alpha.size:
        raise DimensionError(f"estimate has {alpha_hat.size} entries, truth has {alpha.size}")
    if alpha.size == 0:
        raise DimensionError("mse of an empty amplitude vector")
    error = alpha_hat - alpha
    return float(error @ error) / alpha.size


def support_metrics(estimate: SparseEstimate, true_support: Iterable[int]) -> Tuple[float, int]:
    """Fraction of the true support recovered and number of false alarms."""

    truth = set(int(i) for i in true_support)
    declared = set(estimate.support)
    hit_rate = len(declared & truth) / len(truth) if truth else 1.0
    return hit_rate, len(declared - truth)


Solver = Callable[[np.ndarray, np.ndarray, SolverOptions, Sequence[int]], SparseEstimate]

ESTIMATORS: Dict[str, Solver] = {
    "omp": lambda h, y, opts, support: omp(h, y, opts),
    "cosamp": lambda h, y, opts, support: cosamp(h, y, opts),
    "bpdn": lambda h, y, opts, support: bpdn(h, y, opts),
    "oracle_ls": lambda h, y, opts, support: oracle_ls(h, y, support),
}


def run_estimator(
    name: str,
    h_bar: np.ndarray,
    y_bar: np.ndarray,
    opts: SolverOptions,
    true_support: Sequence[int],
) -> SparseEstimate:
    """Dispatch to a solver by name; ``true_support`` is only read by ``oracle_ls``."""

    try:
        solver = ESTIMATORS[name]
    except KeyError as exc:
        raise ParameterError(f"Unknown estimator: {name}") from exc
    if name == "bpdn" and opts.debias is None:
        opts = replace(opts, debias=True)
    return solver(h_bar, y_bar, opts, true_support)
