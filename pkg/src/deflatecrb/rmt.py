"""Marchenko-Pastur law of rho F^T F and Monte-Carlo checks of its trace limits.

With ``F`` an (N - L_B) x L_A matrix of i.i.d. zero-mean entries of variance
1/N, the eigenvalue distribution of ``rho F^T F`` tends to the Marchenko-Pastur
law of ratio ``rho_tilde = (N - L_B) / L_A``, supported on
``[(1 - sqrt(rho_tilde))^2, (1 + sqrt(rho_tilde))^2]``. Its Stieltjes transform
solves ``z S^2 + (z + 1 - rho_tilde) S + 1 = 0``; at ``z = 0`` this gives
``S(0) = 1 / (rho_tilde - 1)`` and hence the inverse-trace limit
``rho / (rho_tilde - 1)``.
"""
from __future__ import annotations

import cmath
import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.special
import scipy.stats
from scipy.stats import rv_continuous

from .bounds import trace_inverse
from .errors import BoundDomainError, DimensionError, ParameterError, SupportError
from .model import (
    AsymptoticRatios,
    ProblemDims,
    deflated_gram,
    draw_supports,
    gen_dictionary,
    gen_f_direct,
)

__all__ = [
    "Lemma1Report",
    "MPLaw",
    "SpectralSample",
    "empirical_stieltjes",
    "esd_moments",
    "ks_distance",
    "lemma1_limits",
    "marchenko_pastur",
    "mp_cdf",
    "mp_density",
    "mp_moment",
    "mp_stieltjes",
    "mp_summary",
    "spectral_sample",
    "standard_error",
    "stieltjes_residual",
    "verify_lemma1",
]

logger = logging.getLogger(__name__)

LEMMA1_MARGIN = 1.1


@dataclass(frozen=True)
class MPLaw:
    """Marchenko-Pastur law of aspect ratio ``rho_tilde``."""

    rho_tilde: float
    lambda_minus: float = field(init=False)
    lambda_plus: float = field(init=False)

    def __post_init__(self) -> None:
        if not math.isfinite(self.rho_tilde) or self.rho_tilde <= 0.0:
            raise ParameterError(f"rho_tilde must be positive, got {self.rho_tilde}")
        root = math.sqrt(self.rho_tilde)
        object.__setattr__(self, "lambda_minus", (1.0 - root) ** 2)
        object.__setattr__(self, "lambda_plus", (1.0 + root) ** 2)

    @classmethod
    def from_ratios(cls, ratios: AsymptoticRatios) -> "MPLaw":
        return cls(ratios.rho_tilde)

    @property
    def point_mass(self) -> float:
        """Mass of the atom at zero, present only when ``rho_tilde < 1``."""

        return max(0.0, 1.0 - self.rho_tilde)


@dataclass(frozen=True)
class SpectralSample:
    eigenvalues: np.ndarray
    dims: ProblemDims

    def __post_init__(self) -> None:
        values = np.sort(np.asarray(self.eigenvalues, dtype=float).reshape(-1))
        if values.size and values[0] < -1e-9:
            raise ParameterError(f"eigenvalues of a PSD product must be >= 0, got {values[0]}")
        object.__setattr__(self, "eigenvalues", values)


class _MarchenkoPasturGen(rv_continuous):
    """Absolutely continuous Marchenko-Pastur law, shape parameter ``rho_tilde >= 1``."""

    def _argcheck(self, rho_tilde):
        return rho_tilde >= 1.0

    def _get_support(self, rho_tilde):
        root = np.sqrt(rho_tilde)
        return (1.0 - root) ** 2, (1.0 + root) ** 2

    def _pdf(self, x, rho_tilde):
        root = np.sqrt(rho_tilde)
        lower, upper = (1.0 - root) ** 2, (1.0 + root) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.sqrt(np.clip((upper - x) * (x - lower), 0.0, None)) / (2.0 * np.pi * x)
        return np.where((x > lower) & (x < upper), values, 0.0)

    def _cdf(self, x, rho_tilde):
        return np.vectorize(_continuous_cdf, otypes=(float,))(x, rho_tilde)


marchenko_pastur = _MarchenkoPasturGen(name="marchenko_pastur", a=0.0)


def mp_density(x, law: MPLaw):
    """Density of the continuous part, ``sqrt((l+ - x)(x - l-)) / (2 pi x)`` on the support.

    Normalised so that, with the atom ``max(0, 1 - rho_tilde)`` at zero, the law
    has unit mass.
    """

    values = np.asarray(x, dtype=float)
    inside = (values > law.lambda_minus) & (values < law.lambda_plus)
    with np.errstate(divide="ignore", invalid="ignore"):
        density = np.sqrt(np.clip((law.lambda_plus - values) * (values - law.lambda_minus), 0.0, None)) / (
            2.0 * np.pi * values
        )
    density = np.where(inside, density, 0.0)
    if density.ndim == 0:
        return float(density)
    return density


def _continuous_cdf(x: float, rho_tilde: float) -> float:
    law = MPLaw(float(rho_tilde))
    upper = min(float(x), law.lambda_plus)
    if upper <= law.lambda_minus:
        return 0.0
    value, _ = scipy.integrate.quad(mp_density, law.lambda_minus, upper, args=(law,), limit=200)
    return value


def mp_cdf(x, law: MPLaw):
    """Cumulative distribution function, atom at zero included."""

    values = np.asarray(x, dtype=float)
    cdf = np.vectorize(_continuous_cdf, otypes=(float,))(values, law.rho_tilde)
    cdf = cdf + np.where(values >= 0.0, law.point_mass, 0.0)
    cdf = np.clip(cdf, 0.0, 1.0)
    if cdf.ndim == 0:
        return float(cdf)
    return cdf


def mp_stieltjes(z: complex, law: MPLaw) -> complex:
    """Stieltjes transform ``S(z) = int mu(dl) / (l - z)`` of the law.

    Uses the branch ``sqrt(z - l-) sqrt(z - l+)``, which behaves like ``z`` at
    infinity and is analytic off the support, so that ``S(z) ~ -1/z`` and
    ``Im S > 0`` whenever ``Im z > 0``.
    """

    z = complex(z)
    on_real_axis = z.imag == 0.0
    if on_real_axis and law.lambda_minus <= z.real <= law.lambda_plus:
        raise SupportError(f"z = {z.real} lies on the support [{law.lambda_minus}, {law.lambda_plus}]")
    if z == 0 and law.point_mass > 0.0:
        raise SupportError(f"z = 0 carries an atom of mass {law.point_mass} for rho_tilde < 1")
    b = z + 1.0 - law.rho_tilde
    root = cmath.sqrt(z - law.lambda_minus) * cmath.sqrt(z - law.lambda_plus)
    plus, minus = -b + root, -b - root
    # both expressions give the same root; pick the one free of cancellation
    if abs(minus) >= abs(plus):
        value = 2.0 / minus
    else:
        value = plus / (2.0 * z)
    if on_real_axis:
        return complex(value.real, 0.0)
    return value


def stieltjes_residual(s: complex, z: complex, law: MPLaw) -> float:
    """``|z S^2 + (z + 1 - rho_tilde) S + 1|``, zero for an exact transform value."""

    return abs(z * s * s + (z + 1.0 - law.rho_tilde) * s + 1.0)


def mp_moment(k: int, law: MPLaw) -> float:
    """k-th moment ``sum_i (1/k) C(k, i) C(k, i-1) rho_tilde^i`` (Narayana polynomial)."""

    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ParameterError(f"moment order must be a positive integer, got {k}")
    k = int(k)
    total = 0.0
    for i in range(1, k + 1):
        weight = scipy.special.comb(k, i, exact=True) * scipy.special.comb(k, i - 1, exact=True)
        total += weight * law.rho_tilde**i
    return total / k


def mp_summary(law: MPLaw, grid: int = 11, moments_up_to: int = 4) -> Dict[str, object]:
    """Edges, density table, moments and ``S(0)`` of ``law`` as a JSON-ready mapping."""

    if grid < 2:
        raise ParameterError(f"grid needs at least two points, got {grid}")
    xs = np.linspace(law.lambda_minus, law.lambda_plus, grid)
    payload: Dict[str, object] = {
        "rho_tilde": law.rho_tilde,
        "lambda_minus": law.lambda_minus,
        "lambda_plus": law.lambda_plus,
        "point_mass": law.point_mass,
        "density": [{"x": float(x), "density": mp_density(float(x), law)} for x in xs],
        "moments": [mp_moment(k, law) for k in range(1, moments_up_to + 1)],
    }
    if law.rho_tilde > 1.0:
        payload["stieltjes_at_zero"] = mp_stieltjes(0.0, law).real
    return payload


def spectral_sample(f: np.ndarray, dims: ProblemDims) -> SpectralSample:
    """Eigenvalues of ``rho F^T F`` (the L_A x L_A side, symmetric solver)."""

    f = np.asarray(f, dtype=float)
    if f.shape != (dims.n - dims.l_b, dims.l_a):
        raise DimensionError(f"F must have shape {(dims.n - dims.l_b, dims.l_a)}, got {f.shape}")
    gram = f.T @ f
    return _sample_from_gram(0.5 * (gram + gram.T), dims)


def _sample_from_gram(gram: np.ndarray, dims: ProblemDims) -> SpectralSample:
    rho = dims.n / dims.l_a
    return SpectralSample(eigenvalues=scipy.linalg.eigvalsh(rho * gram), dims=dims)


def esd_moments(sample: SpectralSample, k: int) -> float:
    """``(1/L_A) sum_i lambda_i^k`` of the empirical spectral distribution."""

    if sample.eigenvalues.size == 0:
        raise DimensionError("empirical spectral distribution has no eigenvalues")
    return float(np.mean(sample.eigenvalues**k))


def empirical_stieltjes(sample: SpectralSample, z: complex) -> complex:
    if sample.eigenvalues.size == 0:
        raise DimensionError("empirical spectral distribution has no eigenvalues")
    return complex(np.mean(1.0 / (sample.eigenvalues - z)))


def ks_distance(sample: SpectralSample, law: MPLaw) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF and the law's CDF."""

    if law.point_mass > 0.0:
        result = scipy.stats.kstest(sample.eigenvalues, lambda x: mp_cdf(x, law))
    else:
        result = scipy.stats.kstest(sample.eigenvalues, marchenko_pastur(law.rho_tilde).cdf)
    return float(result.statistic)


def lemma1_limits(ratios: AsymptoticRatios) -> Tuple[float, float]:
    """Limits of ``(1/L_A) Tr{(F^T F)^{-1}}`` and ``(1/(N - L_B)) Tr{F^T F}``."""

    return ratios.rho / (ratios.rho_tilde - 1.0), 1.0 / ratios.rho


@dataclass(frozen=True)
class Lemma1Report:
    dims: ProblemDims
    trials: int
    direct: bool
    inverse_trace_mean: float
    inverse_trace_stderr: float
    inverse_trace_limit: float
    inverse_trace_gap: float
    trace_mean: float
    trace_stderr: float
    trace_limit: float
    trace_gap: float
    bridge_residual: float
    inverse_traces: Tuple[float, ...]
    traces: Tuple[float, ...]

    def as_payload(self) -> Dict[str, object]:
        payload = asdict(self)
        payload["inverse_traces"] = list(self.inverse_traces)
        payload["traces"] = list(self.traces)
        return payload


def standard_error(values: Sequence[float]) -> float:
    """Standard error of the mean; ``0.0`` below two samples."""

    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(scipy.stats.sem(values, ddof=1))


def _lemma1_trial(dims: ProblemDims, direct: bool, stream: np.random.Generator) -> Tuple[float, float, float]:
    if direct:
        f = gen_f_direct(dims, stream)
        gram = f.T @ f
        gram = 0.5 * (gram + gram.T)
    else:
        h = gen_dictionary(dims, stream)
        supports = draw_supports(dims, stream)
        gram = deflated_gram(h[:, list(supports.t)], h[:, list(supports.t_tilde)])
    inverse_trace = trace_inverse(gram, "F^T F") / dims.l_a
    sample = _sample_from_gram(gram, dims)
    via_stieltjes = dims.n / dims.l_a * empirical_stieltjes(sample, 0.0).real
    bridge = abs(via_stieltjes - inverse_trace) / inverse_trace
    return inverse_trace, float(np.trace(gram)) / (dims.n - dims.l_b), bridge


def verify_lemma1(
    dims: ProblemDims,
    trials: int,
    rng: np.random.Generator,
    *,
    direct: bool = False,
    workers: int = 1,
) -> Lemma1Report:
    """Compare the empirical traces of ``F^T F`` and its inverse with their almost-sure limits.

    ``direct=False`` obtains ``F^T F = A^T P_perp A`` from a Gaussian dictionary and
    random supports; ``direct=True`` draws ``F`` i.i.d. Each trial uses its own
    child stream of ``rng``, so the report does not depend on ``workers``.
    """

    ratios = dims.ratios()
    if ratios.rho_tilde < LEMMA1_MARGIN:
        raise BoundDomainError(f"need rho_tilde >= {LEMMA1_MARGIN} for a stable inverse trace, got {ratios.rho_tilde}")
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    if workers < 1:
        raise ParameterError(f"worker count must be >= 1, got {workers}")
    inverse_limit, trace_limit = lemma1_limits(ratios)
    streams = rng.spawn(trials)
    job = functools.partial(_lemma1_trial, dims, direct)
    if workers == 1:
        outcomes = [job(stream) for stream in streams]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(job, streams))
    for index, (inverse_trace, trace, _) in enumerate(outcomes):
        logger.debug("lemma1 trial %d: inverse trace %.6g, trace %.6g", index, inverse_trace, trace)
    inverse_traces = [outcome[0] for outcome in outcomes]
    traces = [outcome[1] for outcome in outcomes]
    bridge = max(outcome[2] for outcome in outcomes)
    inverse_values = np.asarray(inverse_traces)
    trace_values = np.asarray(traces)
    inverse_mean = float(np.mean(inverse_values))
    trace_mean = float(np.mean(trace_values))
    return Lemma1Report(
        dims=dims,
        trials=trials,
        direct=direct,
        inverse_trace_mean=inverse_mean,
        inverse_trace_stderr=standard_error(inverse_values),
        inverse_trace_limit=inverse_limit,
        inverse_trace_gap=abs(inverse_mean - inverse_limit) / inverse_limit,
        trace_mean=trace_mean,
        trace_stderr=standard_error(trace_values),
        trace_limit=trace_limit,
        trace_gap=abs(trace_mean - trace_limit) / trace_limit,
        bridge_residual=bridge,
        inverse_traces=tuple(inverse_traces),
        traces=tuple(traces),
    )
