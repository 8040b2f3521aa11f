"""Random dictionaries, signal-plus-interference scenes and subspace deflation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
import scipy.linalg

from .errors import BoundDomainError, DimensionError, ParameterError, RankDeficiencyError

__all__ = [
    "AsymptoticRatios",
    "DeflatedSystem",
    "ProblemDims",
    "RANK_TOL",
    "SceneRealization",
    "SupportPair",
    "deflate_system",
    "deflated_gram",
    "draw_amplitudes",
    "draw_supports",
    "gen_dictionary",
    "gen_f_direct",
    "gen_steering_dictionary",
    "orth_complement",
    "projector_perp",
    "sample_supports",
    "stack_columns",
    "synthesize_observation",
]

RANK_TOL = 1e-10

DictionaryKind = Literal["gaussian", "rademacher"]
PriorKind = Literal["gaussian", "rademacher"]


@dataclass(frozen=True)
class AsymptoticRatios:
    """Limit ratios rho = N/L_A and c = L_B/L_A of the doubly asymptotic regime."""

    rho: float
    c: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.rho) or self.rho <= 1.0:
            raise ParameterError(f"rho must be a finite value > 1, got {self.rho}")
        if not math.isfinite(self.c) or self.c < 0.0:
            raise ParameterError(f"c must be a finite value >= 0, got {self.c}")
        # rho_tilde > 1 and rho_bar > 1 are the same condition: rho > 1 + c.
        if self.rho_tilde <= 1.0:
            raise BoundDomainError(
                f"rho_tilde = rho - c must exceed 1, got {self.rho_tilde} (rho={self.rho}, c={self.c})"
            )

    @property
    def rho_tilde(self) -> float:
        return self.rho - self.c

    @property
    def rho_bar(self) -> float:
        return self.rho / (1.0 + self.c)

    @classmethod
    def from_dims(cls, dims: "ProblemDims") -> "AsymptoticRatios":
        return cls(rho=dims.n / dims.l_a, c=dims.l_b / dims.l_a)


@dataclass(frozen=True)
class ProblemDims:
    """Integer sizes of one problem instance.

    ``l_b = 0`` describes the interference-free model.
    """

    n: int
    k: int
    l_a: int
    l_b: int = 0

    def __post_init__(self) -> None:
        for name in ("n", "k", "l_a", "l_b"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise DimensionError(f"{name} must be an integer, got {value!r}")
        if self.l_a < 1:
            raise DimensionError(f"l_a must be >= 1, got {self.l_a}")
        if self.l_b < 0:
            raise DimensionError(f"l_b must be >= 0, got {self.l_b}")
        if not self.n > self.l:
            raise DimensionError(f"need N > L_A + L_B, got N={self.n}, L={self.l}")
        if not self.k > self.n:
            raise DimensionError(f"need K > N, got K={self.k}, N={self.n}")

    @property
    def l(self) -> int:
        return self.l_a + self.l_b

    def ratios(self) -> AsymptoticRatios:
        return AsymptoticRatios.from_dims(self)


@dataclass(frozen=True)
class SupportPair:
    """Disjoint sorted supports of the sources of interest and the interferers."""

    t: tuple[int, ...]
    t_tilde: tuple[int, ...]

    def __post_init__(self) -> None:
        t = tuple(sorted(int(i) for i in self.t))
        t_tilde = tuple(sorted(int(i) for i in self.t_tilde))
        if len(set(t)) != len(t) or len(set(t_tilde)) != len(t_tilde):
            raise DimensionError("support indices must be unique")
        if set(t) & set(t_tilde):
            raise DimensionError("supports of interest and interference must be disjoint")
        if any(i < 0 for i in (*t, *t_tilde)):
            raise DimensionError("support indices must be non-negative")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "t_tilde", t_tilde)

    def check_range(self, k: int) -> None:
        if any(i >= k for i in (*self.t, *self.t_tilde)):
            raise DimensionError(f"support index out of range for K={k}")


@dataclass(frozen=True)
class SceneRealization:
    """One drawn instance ``y = A^psi alpha + B^psi beta + n``."""

    h: np.ndarray
    supports: SupportPair
    alpha: np.ndarray
    beta: np.ndarray
    noise_var: float
    noise: np.ndarray
    y: np.ndarray

    @property
    def a_psi(self) -> np.ndarray:
        return self.h[:, list(self.supports.t)]

    @property
    def b_psi(self) -> np.ndarray:
        return self.h[:, list(self.supports.t_tilde)]

    @property
    def x(self) -> np.ndarray:
        """Implied length-K sparse vector holding alpha on T and beta on T~."""

        x = np.zeros(self.h.shape[1])
        x[list(self.supports.t)] = self.alpha
        x[list(self.supports.t_tilde)] = self.beta
        return x


@dataclass(frozen=True)
class DeflatedSystem:
    """Observation and dictionary projected onto the complement of ``<B^psi>``."""

    u: np.ndarray
    y_bar: np.ndarray
    h_bar: np.ndarray
    supports: SupportPair

    @property
    def f(self) -> np.ndarray:
        """``U^T A^psi``, i.e. the T-columns of the deflated dictionary."""

        return self.h_bar[:, list(self.supports.t)]


def gen_dictionary(
    dims: ProblemDims,
    rng: np.random.Generator,
    kind: DictionaryKind = "gaussian",
) -> np.ndarray:
    """Draw an N x K dictionary with i.i.d. zero-mean entries of variance 1/N."""

    scale = 1.0 / math.sqrt(dims.n)
    if kind == "gaussian":
        return rng.standard_normal((dims.n, dims.k)) * scale
    if kind == "rademacher":
        signs = 2.0 * rng.integers(0, 2, size=(dims.n, dims.k)) - 1.0
        return signs * scale
    raise ParameterError(f"Unknown dictionary kind: {kind}")


def gen_f_direct(dims: ProblemDims, rng: np.random.Generator) -> np.ndarray:
    """Draw F directly as an (N - L_B) x L_A Gaussian matrix of variance 1/N."""

    return rng.standard_normal((dims.n - dims.l_b, dims.l_a)) / math.sqrt(dims.n)


def gen_steering_dictionary(
    waveform: Callable[[float], float],
    sample_period: float,
    dims: ProblemDims,
    rng: np.random.Generator,
) -> np.ndarray:
    """Return ``Psi @ Phi`` with ``Phi[k, k'] = g((k - k') T_S)``.

    ``Psi`` is drawn exactly as :func:`gen_dictionary` draws a Gaussian dictionary.
    """

    if not math.isfinite(sample_period) or sample_period <= 0.0:
        raise ParameterError(f"sample_period must be positive, got {sample_period}")
    lags = np.arange(dims.k) * sample_period
    column = np.fromiter((waveform(float(t)) for t in lags), dtype=float, count=dims.k)
    row = np.fromiter((waveform(float(-t)) for t in lags), dtype=float, count=dims.k)
    if not (np.all(np.isfinite(column)) and np.all(np.isfinite(row))):
        raise ParameterError("waveform produced non-finite samples on the sampling grid")
    phi = scipy.linalg.toeplitz(column, row)
    psi = gen_dictionary(dims, rng)
    return psi @ phi


def sample_supports(k: int, l_a: int, l_b: int, rng: np.random.Generator) -> SupportPair:
    """Draw disjoint uniformly random supports of sizes ``l_a`` and ``l_b`` in ``[0, k)``."""

    if l_a < 0 or l_b < 0:
        raise DimensionError("support sizes must be non-negative")
    if l_a + l_b > k:
        raise DimensionError(f"cannot place L_A + L_B = {l_a + l_b} indices among K = {k}")
    chosen = rng.choice(k, size=l_a + l_b, replace=False)
    return SupportPair(t=tuple(chosen[:l_a]), t_tilde=tuple(chosen[l_a:]))


def draw_supports(dims: ProblemDims, rng: np.random.Generator) -> SupportPair:
    return sample_supports(dims.k, dims.l_a, dims.l_b, rng)


def draw_amplitudes(
    size: int,
    variance: float,
    rng: np.random.Generator,
    prior: PriorKind = "gaussian",
) -> np.ndarray:
    """Draw i.i.d. amplitudes of the given variance under a Gaussian or scaled-sign prior."""

    if not math.isfinite(variance) or variance <= 0.0:
        raise ParameterError(f"amplitude variance must be positive, got {variance}")
    if size < 0:
        raise DimensionError(f"size must be non-negative, got {size}")
    scale = math.sqrt(variance)
    if prior == "gaussian":
        return rng.standard_normal(size) * scale
    if prior == "rademacher":
        return (2.0 * rng.integers(0, 2, size=size) - 1.0) * scale
    raise ParameterError(f"Unknown amplitude prior: {prior}")


def synthesize_observation(
    h: np.ndarray,
    supports: SupportPair,
    alpha: np.ndarray,
    beta: np.ndarray,
    noise_var: float,
    rng: np.random.Generator,
) -> SceneRealization:
    """Build ``y = A^psi alpha + B^psi beta + n`` with white Gaussian noise."""

    h = np.asarray(h, dtype=float)
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if h.ndim != 2:
        raise DimensionError(f"dictionary must be 2-D, got shape {h.shape}")
    supports.check_range(h.shape[1])
    if alpha.size != len(supports.t):
        raise DimensionError(f"alpha has {alpha.size} entries for |T| = {len(supports.t)}")
    if beta.size != len(supports.t_tilde):
        raise DimensionError(f"beta has {beta.size} entries for |T~| = {len(supports.t_tilde)}")
    if not math.isfinite(noise_var) or noise_var <= 0.0:
        raise ParameterError(f"noise variance must be positive, got {noise_var}")
    noise = rng.standard_normal(h.shape[0]) * math.sqrt(noise_var)
    y = h[:, list(supports.t)] @ alpha + h[:, list(supports.t_tilde)] @ beta + noise
    return SceneRealization(
        h=h,
        supports=supports,
        alpha=alpha,
        beta=beta,
        noise_var=float(noise_var),
        noise=noise,
        y=y,
    )


def _as_columns(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix.reshape(-1, 1)
    if matrix.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {matrix.shape}")
    return matrix


def _check_full_column_rank(matrix: np.ndarray, rank_tol: float, what: str) -> None:
    singular_values = scipy.linalg.svdvals(matrix)
    if singular_values.size == 0:
        return
    largest = singular_values[0]
    rank = int(np.count_nonzero(singular_values > rank_tol * largest)) if largest > 0 else 0
    if rank < matrix.shape[1]:
        raise RankDeficiencyError(f"{what} is rank deficient", rank=rank, expected=matrix.shape[1])


def orth_complement(b_psi: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal N x (N - L_B) basis of the orthogonal complement of ``<B^psi>``.

    The trailing left singular vectors of a full SVD span the complement.
    """

    b = _as_columns(b_psi)
    n, l_b = b.shape
    if l_b == 0:
        return np.eye(n)
    if l_b >= n:
        raise DimensionError(f"interference subspace of dimension {l_b} fills R^{n}")
    u, singular_values, _ = scipy.linalg.svd(b, full_matrices=True)
    largest = singular_values[0]
    rank = int(np.count_nonzero(singular_values > rank_tol * largest)) if largest > 0 else 0
    if rank < l_b:
        raise RankDeficiencyError("interference steering matrix is rank deficient", rank=rank, expected=l_b)
    return u[:, l_b:]


def projector_perp(b_psi: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """``I - B (B^T B)^{-1} B^T``, evaluated through an economic QR of ``B``."""

    b = _as_columns(b_psi)
    n, l_b = b.shape
    if l_b == 0:
        return np.eye(n)
    _check_full_column_rank(b, rank_tol, "interference steering matrix")
    q, _ = scipy.linalg.qr(b, mode="economic")
    return np.eye(n) - q @ q.T


def deflated_gram(
    a_psi: np.ndarray,
    b_psi: np.ndarray,
    rank_tol: float = RANK_TOL,
) -> np.ndarray:
    """``A^T P_perp A`` (equal to ``F^T F``) without forming an N x N matrix."""

    a = _as_columns(a_psi)
    b = _as_columns(b_psi)
    if b.shape[1] == 0:
        projected = a
    else:
        if a.shape[0] != b.shape[0]:
            raise DimensionError(f"A^psi has {a.shape[0]} rows, B^psi has {b.shape[0]}")
        _check_full_column_rank(b, rank_tol, "interference steering matrix")
        q, _ = scipy.linalg.qr(b, mode="economic")
        projected = a - q @ (q.T @ a)
    gram = projected.T @ projected
    return 0.5 * (gram + gram.T)


def deflate_system(u: np.ndarray, scene: SceneRealization) -> DeflatedSystem:
    """Project the observation and the dictionary with ``U^T``."""

    u = _as_columns(u)
    if u.shape[0] != scene.y.size:
        raise DimensionError(f"U has {u.shape[0]} rows for an observation of length {scene.y.size}")
    return DeflatedSystem(u=u, y_bar=u.T @ scene.y, h_bar=u.T @ scene.h, supports=scene.supports)


def stack_columns(*blocks: np.ndarray) -> np.ndarray:
    return np.hstack([_as_columns(block) for block in blocks])
