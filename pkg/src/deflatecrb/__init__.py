"""Interference deflation for sparse estimation: bounds, random-matrix limits and Monte-Carlo runs."""
from __future__ import annotations

from .bounds import (
    BoundReport,
    NoiseCalibration,
    asymptotic_bounds,
    bound_report,
    calibrate_noise,
    ecrb_deflated,
    ecrb_deflated_asym,
    ecrb_deflated_from_f,
    ecrb_ideal,
    ecrb_ideal_asym,
    ecrb_joint,
    ecrb_joint_asym,
    snr_na,
    to_db,
    trace_inverse,
)
from .config import GridPoint, Scenario, SolverSettings, load_figure_preset, load_scenario
from .errors import (
    BoundDomainError,
    DeflateCRBError,
    DimensionError,
    ExperimentError,
    ExportError,
    ParameterError,
    RankDeficiencyError,
    ScenarioLoadError,
    SingularGramError,
    SolverError,
    SupportError,
)
from .estimators import (
    SolverOptions,
    SparseEstimate,
    bpdn,
    cosamp,
    mse,
    omp,
    oracle_ls,
    support_metrics,
    universal_lambda,
)
from .harness import (
    ExperimentResult,
    FigureResult,
    TrialResult,
    export,
    load_json_result,
    reproduce_figure,
    run_experiment,
    run_trial,
)
from .model import (
    AsymptoticRatios,
    DeflatedSystem,
    ProblemDims,
    SceneRealization,
    SupportPair,
    deflate_system,
    deflated_gram,
    draw_amplitudes,
    draw_supports,
    gen_dictionary,
    gen_f_direct,
    gen_steering_dictionary,
    orth_complement,
    projector_perp,
    synthesize_observation,
)
from .rmt import (
    Lemma1Report,
    MPLaw,
    SpectralSample,
    empirical_stieltjes,
    ks_distance,
    lemma1_limits,
    mp_cdf,
    mp_density,
    mp_moment,
    mp_stieltjes,
    spectral_sample,
    verify_lemma1,
)

__all__ = [
    "AsymptoticRatios",
    "BoundDomainError",
    "BoundReport",
    "DeflateCRBError",
    "DeflatedSystem",
    "DimensionError",
    "ExperimentError",
    "ExperimentResult",
    "ExportError",
    "FigureResult",
    "GridPoint",
    "Lemma1Report",
    "MPLaw",
    "NoiseCalibration",
    "ParameterError",
    "ProblemDims",
    "RankDeficiencyError",
    "Scenario",
    "ScenarioLoadError",
    "SceneRealization",
    "SingularGramError",
    "SolverError",
    "SolverOptions",
    "SolverSettings",
    "SparseEstimate",
    "SpectralSample",
    "SupportError",
    "SupportPair",
    "TrialResult",
    "asymptotic_bounds",
    "bound_report",
    "bpdn",
    "calibrate_noise",
    "cosamp",
    "deflate_system",
    "deflated_gram",
    "draw_amplitudes",
    "draw_supports",
    "ecrb_deflated",
    "ecrb_deflated_asym",
    "ecrb_deflated_from_f",
    "ecrb_ideal",
    "ecrb_ideal_asym",
    "ecrb_joint",
    "ecrb_joint_asym",
    "empirical_stieltjes",
    "export",
    "gen_dictionary",
    "gen_f_direct",
    "gen_steering_dictionary",
    "ks_distance",
    "lemma1_limits",
    "load_figure_preset",
    "load_json_result",
    "load_scenario",
    "mp_cdf",
    "mp_density",
    "mp_moment",
    "mp_stieltjes",
    "mse",
    "omp",
    "oracle_ls",
    "orth_complement",
    "projector_perp",
    "reproduce_figure",
    "run_experiment",
    "run_trial",
    "snr_na",
    "spectral_sample",
    "support_metrics",
    "synthesize_observation",
    "to_db",
    "trace_inverse",
    "universal_lambda",
    "verify_lemma1",
]
