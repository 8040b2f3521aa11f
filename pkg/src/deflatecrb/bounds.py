"""Expected Cramer-Rao Bounds for the deflated, joint and interference-free models.

Every non-asymptotic bound is ``variance / L * Tr{G^{-1}}`` for a Gram matrix ``G``:

* deflated: ``G = A^T P_perp A`` (equivalently ``F^T F`` with ``F = U^T A``), ``L = L_A``;
* joint: ``G = [A B]^T [A B]``, ``L = L_A + L_B`` (interference treated as signal);
* ideal: ``G = A^T A``, ``L = L_A`` (no interference at all).

The closed forms are the almost-sure limits of these quantities when
``N, L_A, L_B`` grow with ``N/L_A -> rho`` and ``L_B/L_A -> c``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Dict, Literal

import numpy as np
import scipy.linalg

from .errors import BoundDomainError, DimensionError, ParameterError, SingularGramError
from .model import AsymptoticRatios, deflated_gram, stack_columns

__all__ = [
    "BoundReport",
    "CONDITION_LIMIT",
    "MODELS",
    "NoiseCalibration",
    "asymptotic_bounds",
    "bound_report",
    "calibrate_noise",
    "ecrb_deflated",
    "ecrb_deflated_asym",
    "ecrb_deflated_from_f",
    "ecrb_ideal",
    "ecrb_ideal_asym",
    "ecrb_joint",
    "ecrb_joint_asym",
    "snr0_asym",
    "snr_asym",
    "snr_na",
    "to_db",
    "trace_inverse",
]

CONDITION_LIMIT = 1e12

BoundModel = Literal["deflated", "joint", "ideal"]
MODELS: tuple[BoundModel, ...] = ("deflated", "joint", "ideal")


@dataclass(frozen=True)
class NoiseCalibration:
    """Noise variance that gives a model the requested asymptotic output SNR."""

    sigma2: float
    snr_target_db: float
    sigma_alpha2: float
    sigma_beta2: float
    sir: float


@dataclass(frozen=True)
class BoundReport:
    c_deflated: float
    c_joint: float
    c_ideal: float
    c_deflated_inf: float
    c_joint_inf: float
    c_ideal_inf: float
    snr_na_deflated: float
    snr_na_joint: float
    snr_na_ideal: float
    ratios: AsymptoticRatios

    def as_payload(self) -> Dict[str, float]:
        payload = asdict(self)
        ratios = payload.pop("ratios")
        payload.update(
            rho=ratios["rho"],
            c=ratios["c"],
            rho_tilde=self.ratios.rho_tilde,
            rho_bar=self.ratios.rho_bar,
        )
        return payload


def to_db(value: float) -> float:
    """``10 log10(value)``; ``-inf`` for zero."""

    if value == 0.0:
        return -math.inf
    return 10.0 * math.log10(value)


def _check_variance(name: str, value: float) -> None:
    if not math.isfinite(value) or value <= 0.0:
        raise ParameterError(f"{name} must be positive and finite, got {value}")


def trace_inverse(gram: np.ndarray, what: str = "Gram matrix") -> float:
    """Trace of the inverse of a symmetric positive-definite matrix.

    Uses ``Tr{G^{-1}} = ||L^{-1}||_F^2`` for the Cholesky factor ``G = L L^T``
    once the condition number is below :data:`CONDITION_LIMIT`.
    """

    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1] or gram.shape[0] == 0:
        raise DimensionError(f"{what} must be a non-empty square matrix, got shape {gram.shape}")
    if not np.all(np.isfinite(gram)):
        raise SingularGramError(f"{what} has non-finite entries", condition_number=math.inf)
    eigenvalues = scipy.linalg.eigvalsh(gram)
    smallest, largest = eigenvalues[0], eigenvalues[-1]
    condition = math.inf if smallest <= 0.0 else largest / smallest
    if condition > CONDITION_LIMIT:
        raise SingularGramError(f"{what} is singular or too ill-conditioned", condition_number=condition)
    lower = scipy.linalg.cholesky(gram, lower=True)
    inverse_factor = scipy.linalg.solve_triangular(lower, np.eye(gram.shape[0]), lower=True)
    return float(np.sum(inverse_factor * inverse_factor))


def ecrb_deflated(a_psi: np.ndarray, b_psi: np.ndarray, sigma2: float) -> float:
    """``sigma^2 / L_A * Tr{(A^T P_perp A)^{-1}}``."""

    _check_variance("sigma2", sigma2)
    gram = deflated_gram(a_psi, b_psi)
    return sigma2 / gram.shape[0] * trace_inverse(gram, "deflated Gram matrix A^T P_perp A")


def ecrb_deflated_from_f(f: np.ndarray, sigma2: float) -> float:
    """``sigma^2 / L_A * Tr{(F^T F)^{-1}}`` with ``F = U^T A^psi``."""

    _check_variance("sigma2", sigma2)
    f = np.asarray(f, dtype=float)
    gram = f.T @ f
    return sigma2 / gram.shape[0] * trace_inverse(0.5 * (gram + gram.T), "F^T F")


def ecrb_joint(a_psi: np.ndarray, b_psi: np.ndarray, sigma0_2: float) -> float:
    """``sigma_0^2 / L * Tr{([A B]^T [A B])^{-1}}``."""

    _check_variance("sigma0_2", sigma0_2)
    stacked = stack_columns(a_psi, b_psi)
    gram = stacked.T @ stacked
    return sigma0_2 / gram.shape[0] * trace_inverse(0.5 * (gram + gram.T), "stacked Gram matrix")


def ecrb_ideal(a_psi: np.ndarray, sigma1_2: float) -> float:
    """``sigma_1^2 / L_A * Tr{(A^T A)^{-1}}``."""

    _check_variance("sigma1_2", sigma1_2)
    a = stack_columns(a_psi)
    gram = a.T @ a
    return sigma1_2 / gram.shape[0] * trace_inverse(0.5 * (gram + gram.T), "A^T A")


def snr_na(
    model: BoundModel,
    a_psi: np.ndarray,
    b_psi: np.ndarray,
    sigma_alpha2: float,
    noise_var: float,
    sigma_beta2: float = 0.0,
) -> float:
    """Non-asymptotic output SNR of ``model`` on one dictionary draw.

    ``noise_var`` is sigma^2, sigma_0^2 or sigma_1^2 depending on ``model``.
    """

    if noise_var == 0.0:
        raise ParameterError("output SNR is undefined for zero noise variance")
    _check_variance("noise_var", noise_var)
    a = stack_columns(a_psi)
    b = stack_columns(b_psi) if np.size(b_psi) else np.zeros((a.shape[0], 0))
    n = a.shape[0]
    if model == "deflated":
        gram = deflated_gram(a, b)
        return sigma_alpha2 * float(np.trace(gram)) / (noise_var * (n - b.shape[1]))
    if model == "joint":
        energy = sigma_alpha2 * float(np.sum(a * a)) + sigma_beta2 * float(np.sum(b * b))
        return energy / (noise_var * n)
    if model == "ideal":
        return sigma_alpha2 * float(np.sum(a * a)) / (noise_var * n)
    raise ParameterError(f"Unknown bound model: {model}")


def snr_asym(ratios: AsymptoticRatios, sigma_alpha2: float, sigma2: float) -> float:
    """``sigma_alpha^2 / (sigma^2 rho)``, shared by the deflated and ideal models."""

    _check_variance("sigma2", sigma2)
    return sigma_alpha2 / (sigma2 * ratios.rho)


def snr0_asym(
    ratios: AsymptoticRatios,
    sigma_alpha2: float,
    sigma_beta2: float,
    sigma0_2: float,
) -> float:
    """Asymptotic output SNR of the joint model."""

    _check_variance("sigma0_2", sigma0_2)
    return (sigma_alpha2 - sigma_beta2) / (sigma0_2 * ratios.rho) + sigma_beta2 / (sigma0_2 * ratios.rho_bar)


def ecrb_deflated_asym(ratios: AsymptoticRatios, sigma_alpha2: float, snr: float) -> float:
    """``sigma_alpha^2 / SNR / (rho_tilde - 1)``."""

    _check_variance("snr", snr)
    return sigma_alpha2 / snr / (ratios.rho_tilde - 1.0)


def ecrb_joint_asym(
    ratios: AsymptoticRatios,
    sigma_alpha2: float,
    sigma_beta2: float,
    sigma0_2: float,
) -> float:
    rho, rho_bar = ratios.rho, ratios.rho_bar
    _check_variance("sigma_alpha2", sigma_alpha2)
    snr0 = snr0_asym(ratios, sigma_alpha2, sigma_beta2, sigma0_2)
    if snr0 <= 0.0:
        raise BoundDomainError(f"joint output SNR must be positive, got {snr0}")
    inv_sir = sigma_beta2 / sigma_alpha2
    mixing = (1.0 - inv_sir) / rho + inv_sir / rho_bar
    return sigma_alpha2 / snr0 * mixing * rho_bar / (rho_bar - 1.0)


def ecrb_ideal_asym(ratios: AsymptoticRatios, sigma_alpha2: float, snr1: float) -> float:
    _check_variance("snr1", snr1)
    return sigma_alpha2 / snr1 / (ratios.rho - 1.0)


def calibrate_noise(
    snr_db: float,
    sigma_alpha2: float,
    ratios: AsymptoticRatios,
    model: BoundModel,
    sigma_beta2: float = 0.0,
) -> NoiseCalibration:
    """Invert the asymptotic SNR definition of ``model`` for its noise variance."""

    if not math.isfinite(snr_db):
        raise ParameterError(f"snr_db must be finite, got {snr_db}")
    _check_variance("sigma_alpha2", sigma_alpha2)
    snr = 10.0 ** (snr_db / 10.0)
    if model in ("deflated", "ideal"):
        sigma2 = sigma_alpha2 / (ratios.rho * snr)
    elif model == "joint":
        sigma2 = ((sigma_alpha2 - sigma_beta2) / ratios.rho + sigma_beta2 / ratios.rho_bar) / snr
    else:
        raise ParameterError(f"Unknown bound model: {model}")
    if not sigma2 > 0.0:
        raise BoundDomainError(f"calibrated noise variance for the {model} model is not positive: {sigma2}")
    sir = sigma_alpha2 / sigma_beta2 if sigma_beta2 > 0.0 else math.inf
    return NoiseCalibration(
        sigma2=sigma2,
        snr_target_db=float(snr_db),
        sigma_alpha2=sigma_alpha2,
        sigma_beta2=sigma_beta2,
        sir=sir,
    )


def asymptotic_bounds(
    ratios: AsymptoticRatios,
    snr_db: float,
    sigma_alpha2: float = 1.0,
    sigma_beta2: float = 1.0,
) -> Dict[str, float]:
    """Closed-form bounds of the three models calibrated to a common output SNR."""

    sigma2 = calibrate_noise(snr_db, sigma_alpha2, ratios, "deflated", sigma_beta2).sigma2
    sigma0_2 = calibrate_noise(snr_db, sigma_alpha2, ratios, "joint", sigma_beta2).sigma2
    snr = snr_asym(ratios, sigma_alpha2, sigma2)
    return {
        "sigma2": sigma2,
        "sigma0_2": sigma0_2,
        "sigma1_2": sigma2,
        "c_deflated_inf": ecrb_deflated_asym(ratios, sigma_alpha2, snr),
        "c_joint_inf": ecrb_joint_asym(ratios, sigma_alpha2, sigma_beta2, sigma0_2),
        "c_ideal_inf": ecrb_ideal_asym(ratios, sigma_alpha2, snr),
    }


def bound_report(
    a_psi: np.ndarray,
    b_psi: np.ndarray,
    ratios: AsymptoticRatios,
    *,
    sigma2: float,
    sigma0_2: float,
    sigma1_2: float,
    sigma_alpha2: float,
    sigma_beta2: float,
) -> BoundReport:
    """All six bounds and the realized SNRs for one dictionary draw."""

    return BoundReport(
        c_deflated=ecrb_deflated(a_psi, b_psi, sigma2),
        c_joint=ecrb_joint(a_psi, b_psi, sigma0_2),
        c_ideal=ecrb_ideal(a_psi, sigma1_2),
        c_deflated_inf=ecrb_deflated_asym(ratios, sigma_alpha2, snr_asym(ratios, sigma_alpha2, sigma2)),
        c_joint_inf=ecrb_joint_asym(ratios, sigma_alpha2, sigma_beta2, sigma0_2),
        c_ideal_inf=ecrb_ideal_asym(ratios, sigma_alpha2, snr_asym(ratios, sigma_alpha2, sigma1_2)),
        snr_na_deflated=snr_na("deflated", a_psi, b_psi, sigma_alpha2, sigma2),
        snr_na_joint=snr_na("joint", a_psi, b_psi, sigma_alpha2, sigma0_2, sigma_beta2),
        snr_na_ideal=snr_na("ideal", a_psi, b_psi, sigma_alpha2, sigma1_2),
        ratios=ratios,
    )
