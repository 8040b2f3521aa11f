"""Monte-Carlo engine: seeded trials, aggregation, figure presets and export."""
from __future__ import annotations

import csv
import functools
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .bounds import MODELS, BoundReport, bound_report, calibrate_noise, to_db
from .config import GridPoint, Scenario, SolverSettings, load_figure_preset
from .errors import DeflateCRBError, ExperimentError, ExportError, ParameterError
from .estimators import SolverOptions, mse, run_estimator, support_metrics, universal_lambda
from .model import (
    deflate_system,
    draw_amplitudes,
    draw_supports,
    gen_dictionary,
    orth_complement,
    synthesize_observation,
)
from .rmt import standard_error

__all__ = [
    "CSV_COLUMNS",
    "ExperimentResult",
    "ExportedResult",
    "FAILURE_LIMIT",
    "FigureResult",
    "GridPoint",
    "ResultRow",
    "Scenario",
    "SolverSettings",
    "TrialResult",
    "bound_curves",
    "dump_json",
    "export",
    "json_ready",
    "load_json_result",
    "reproduce_figure",
    "resolve_workers",
    "run_experiment",
    "run_trial",
    "trial_streams",
]

logger = logging.getLogger(__name__)

FAILURE_LIMIT = 0.10
WORKERS_ENV = "DEFLATECRB_WORKERS"

CSV_COLUMNS: Tuple[str, ...] = (
    "figure_id",
    "n",
    "k",
    "l_a",
    "l_b",
    "snr_db",
    "estimator",
    "deflated",
    "mse",
    "mse_db",
    "c_deflated",
    "c_deflated_inf",
    "c_joint",
    "c_joint_inf",
    "c_ideal",
    "c_ideal_inf",
    "trials_ok",
    "stderr",
)

ArmKey = Tuple[str, bool]


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one (grid point, trial) cell; ``error`` is set when the cell failed."""

    grid_index: int
    trial_index: int
    mse: Dict[ArmKey, float] = field(default_factory=dict)
    support: Dict[ArmKey, Tuple[float, int]] = field(default_factory=dict)
    report: Optional[BoundReport] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class ResultRow:
    """One aggregated (grid point, estimator, arm) line of an experiment."""

    figure_id: Optional[int]
    n: int
    k: int
    l_a: int
    l_b: int
    snr_db: float
    estimator: str
    deflated: bool
    mse: float
    mse_db: float
    c_deflated: float
    c_deflated_inf: float
    c_joint: float
    c_joint_inf: float
    c_ideal: float
    c_ideal_inf: float
    trials_ok: int
    stderr: float
    hit_rate: float = math.nan
    false_alarms: float = math.nan

    def as_payload(self) -> Dict[str, object]:
        return {item.name: getattr(self, item.name) for item in fields(self)}

    def csv_cells(self) -> List[str]:
        cells = []
        for column in CSV_COLUMNS:
            value = getattr(self, column)
            if value is None:
                cells.append("")
            elif isinstance(value, bool):
                cells.append("true" if value else "false")
            elif isinstance(value, float):
                cells.append(repr(value))
            else:
                cells.append(str(value))
        return cells

    @classmethod
    def from_payload(cls, payload: Mapping[str, object]) -> "ResultRow":
        """Inverse of :meth:`as_payload` after a JSON round trip; ``null`` floats come back as NaN."""

        floats = {item.name for item in fields(cls) if item.type == "float"}
        known = {item.name for item in fields(cls)}
        values = {key: value for key, value in payload.items() if key in known}
        for name in floats & values.keys():
            if values[name] is None:
                values[name] = math.nan
        if payload.get("mse_db") is None and values.get("mse") is not None:
            values["mse_db"] = to_db(values["mse"])
        return cls(**values)


@dataclass(frozen=True)
class ExperimentResult:
    scenario: Scenario
    rows: Tuple[ResultRow, ...]
    trials: Tuple[TrialResult, ...] = ()
    failures: Dict[int, int] = field(default_factory=dict)

    def summary_lines(self) -> List[str]:
        """One human-readable line per grid point."""

        lines = []
        by_point: Dict[Tuple[int, int, int, int, float], List[ResultRow]] = {}
        for row in self.rows:
            by_point.setdefault((row.n, row.k, row.l_a, row.l_b, row.snr_db), []).append(row)
        for (n, k, l_a, l_b, snr_db), rows in by_point.items():
            head = rows[0]
            arms = "  ".join(
                f"{row.estimator}/{'defl' if row.deflated else 'raw'}={row.mse_db:.2f}dB" for row in rows
            )
            lines.append(
                f"N={n} K={k} L_A={l_a} L_B={l_b} SNR={snr_db:g}dB ok={head.trials_ok} "
                f"c_deflated={to_db(head.c_deflated):.2f}dB  {arms}"
            )
        return lines


@dataclass(frozen=True)
class FigureResult:
    experiment: ExperimentResult
    curves: Dict[str, List[Dict[str, float]]]


@dataclass(frozen=True)
class ExportedResult:
    """An experiment read back from its JSON export."""

    scenario: Dict[str, object]
    rows: Tuple[ResultRow, ...]
    curves: Dict[str, List[Dict[str, float]]]


def trial_streams(seed: int, grid_index: int, trial_index: int) -> List[np.random.Generator]:
    """Independent dictionary, support, amplitude and noise generators for one cell."""

    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(grid_index, trial_index))
    return [np.random.default_rng(child) for child in sequence.spawn(4)]


def _solver_options(settings: SolverSettings, sparsity: int, noise_var: float, k: int) -> SolverOptions:
    lambda_ = settings.bpdn_lambda if settings.bpdn_lambda is not None else universal_lambda(noise_var, k)
    return SolverOptions(
        sparsity=sparsity,
        lambda_=lambda_,
        max_iters=settings.max_iters,
        tol=settings.tol,
        debias=settings.debias_bpdn,
    )


def run_trial(scenario: Scenario, grid_point: GridPoint, trial_index: int) -> TrialResult:
    """Generate, calibrate, deflate, estimate and score one Monte-Carlo cell.

    The result depends only on ``(scenario.seed, grid_point.index, trial_index)``.
    With ``bound_statistic = "fixed"`` every trial of a grid point reuses the
    dictionary and supports of trial 0.
    """

    dims = grid_point.dims
    ratios = dims.ratios()
    _, _, amp_rng, noise_rng = trial_streams(scenario.seed, grid_point.index, trial_index)
    draw_index = 0 if scenario.bound_statistic == "fixed" else trial_index
    dict_rng, support_rng, _, _ = trial_streams(scenario.seed, grid_point.index, draw_index)
    try:
        h = gen_dictionary(dims, dict_rng, scenario.dictionary)
        supports = draw_supports(dims, support_rng)
        alpha = draw_amplitudes(dims.l_a, scenario.sigma_alpha2, amp_rng, scenario.prior)
        beta = draw_amplitudes(dims.l_b, scenario.sigma_beta2, amp_rng, scenario.prior)
        sigma2 = calibrate_noise(grid_point.snr_db, scenario.sigma_alpha2, ratios, "deflated").sigma2
        sigma0_2 = calibrate_noise(
            grid_point.snr_db, scenario.sigma_alpha2, ratios, "joint", scenario.sigma_beta2
        ).sigma2
        scene = synthesize_observation(h, supports, alpha, beta, sigma2, noise_rng)
        report = bound_report(
            scene.a_psi,
            scene.b_psi,
            ratios,
            sigma2=sigma2,
            sigma0_2=sigma0_2,
            sigma1_2=sigma2,
            sigma_alpha2=scenario.sigma_alpha2,
            sigma_beta2=scenario.sigma_beta2,
        )

        t = list(supports.t)
        errors: Dict[ArmKey, float] = {}
        hits: Dict[ArmKey, Tuple[float, int]] = {}
        for deflated in scenario.deflation_arms:
            if deflated:
                system = deflate_system(orth_complement(scene.b_psi), scene)
                h_arm, y_arm = system.h_bar, system.y_bar
                opts = _solver_options(scenario.solver, dims.l_a, sigma2, dims.k)
                oracle_support = supports.t
            else:
                h_arm, y_arm = h, scene.y
                opts = _solver_options(scenario.solver, dims.l, sigma2, dims.k)
                oracle_support = tuple(sorted((*supports.t, *supports.t_tilde)))
            for name in scenario.estimators:
                estimate = run_estimator(name, h_arm, y_arm, opts, oracle_support)
                errors[(name, deflated)] = mse(estimate.x_hat[t], alpha)
                hits[(name, deflated)] = support_metrics(estimate, supports.t)
    except (DeflateCRBError, np.linalg.LinAlgError) as exc:
        logger.warning("trial %d at grid point %d failed: %s", trial_index, grid_point.index, exc)
        return TrialResult(grid_point.index, trial_index, error=f"{type(exc).__name__}: {exc}")
    return TrialResult(grid_point.index, trial_index, mse=errors, support=hits, report=report)


def _run_cell(scenario: Scenario, points: Sequence[GridPoint], cell: Tuple[int, int]) -> TrialResult:
    grid_index, trial_index = cell
    return run_trial(scenario, points[grid_index], trial_index)


def resolve_workers(requested: Optional[int] = None) -> int:
    """``requested``, else ``$DEFLATECRB_WORKERS``, else the processor count."""

    if requested is None:
        raw = os.environ.get(WORKERS_ENV)
        if raw:
            try:
                requested = int(raw)
            except ValueError as exc:
                raise ParameterError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
        else:
            requested = os.cpu_count() or 1
    if requested < 1:
        raise ParameterError(f"worker count must be >= 1, got {requested}")
    return requested


def _aggregate(scenario: Scenario, point: GridPoint, trials: Sequence[TrialResult]) -> List[ResultRow]:
    ok = [trial for trial in trials if not trial.failed]
    failed = len(trials) - len(ok)
    if failed > FAILURE_LIMIT * len(trials):
        first = next(trial.error for trial in trials if trial.failed)
        raise ExperimentError(
            f"{failed} of {len(trials)} trials failed at grid point {point.index} "
            f"({point.dims}, {point.snr_db} dB); first error: {first}"
        )
    reports = [trial.report for trial in ok]
    bounds = {
        name: float(np.mean([getattr(report, name) for report in reports]))
        for name in ("c_deflated", "c_joint", "c_ideal", "c_deflated_inf", "c_joint_inf", "c_ideal_inf")
    }
    dims = point.dims
    rows = []
    for name in scenario.estimators:
        for deflated in scenario.deflation_arms:
            key = (name, deflated)
            values = np.array([trial.mse[key] for trial in ok])
            mean = float(np.mean(values))
            rows.append(
                ResultRow(
                    figure_id=scenario.figure_id,
                    n=dims.n,
                    k=dims.k,
                    l_a=dims.l_a,
                    l_b=dims.l_b,
                    snr_db=point.snr_db,
                    estimator=name,
                    deflated=deflated,
                    mse=mean,
                    mse_db=to_db(mean),
                    trials_ok=len(ok),
                    stderr=standard_error(values),
                    hit_rate=float(np.mean([trial.support[key][0] for trial in ok])),
                    false_alarms=float(np.mean([trial.support[key][1] for trial in ok])),
                    **bounds,
                )
            )
    return rows


def run_experiment(scenario: Scenario, workers: Optional[int] = None) -> ExperimentResult:
    """Run every (grid point, trial) cell and aggregate in index order.

    The result does not depend on ``workers``: cells are keyed by index and
    reduced in that order whatever order they complete in.
    """

    points = scenario.grid_points()
    cells = [(point.index, trial) for point in points for trial in range(scenario.trials)]
    workers = resolve_workers(workers)
    run_cell = functools.partial(_run_cell, scenario, points)
    if workers == 1 or len(cells) == 1:
        outcomes = [run_cell(cell) for cell in cells]
    else:
        chunksize = max(1, len(cells) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(run_cell, cells, chunksize=chunksize))
    table = {(trial.grid_index, trial.trial_index): trial for trial in outcomes}

    rows: List[ResultRow] = []
    failures: Dict[int, int] = {}
    ordered: List[TrialResult] = []
    for point in points:
        trials = [table[(point.index, t)] for t in range(scenario.trials)]
        ordered.extend(trials)
        point_rows = _aggregate(scenario, point, trials)
        failures[point.index] = sum(trial.failed for trial in trials)
        rows.extend(point_rows)
        logger.info(
            "grid point %d/%d done (%s, %.1f dB): %d trials ok",
            point.index + 1,
            len(points),
            point.dims,
            point.snr_db,
            point_rows[0].trials_ok,
        )
    return ExperimentResult(scenario=scenario, rows=tuple(rows), trials=tuple(ordered), failures=failures)


def bound_curves(result: ExperimentResult) -> Dict[str, List[Dict[str, float]]]:
    """Bound curves per grid point.

    ``bounds`` holds the averaged non-asymptotic bounds next to their closed
    forms. ``gap_<model>`` holds the mean squared relative gap and the median
    absolute relative gap between each drawn bound and its closed form.
    """

    scenario = result.scenario
    points = scenario.grid_points()
    curves: Dict[str, List[Dict[str, float]]] = {"bounds": []}
    curves.update({f"gap_{model}": [] for model in MODELS})
    for point in points:
        reports = [
            trial.report
            for trial in result.trials
            if trial.grid_index == point.index and not trial.failed
        ]
        if not reports:
            continue
        dims = point.dims
        where = {"n": dims.n, "k": dims.k, "l_a": dims.l_a, "l_b": dims.l_b, "snr_db": point.snr_db}
        entry = dict(where)
        for model in MODELS:
            drawn = np.array([getattr(report, f"c_{model}") for report in reports])
            limit = getattr(reports[0], f"c_{model}_inf")
            entry[f"c_{model}"] = float(np.mean(drawn))
            entry[f"c_{model}_inf"] = limit
            gaps = (drawn - limit) / limit
            curves[f"gap_{model}"].append(
                {
                    **where,
                    "mean_squared_gap": float(np.mean(gaps**2)),
                    "median_abs_gap": float(np.median(np.abs(gaps))),
                    "draws": len(reports),
                }
            )
        curves["bounds"].append(entry)
    return curves


def reproduce_figure(
    figure_id: int,
    *,
    seed: Optional[int] = None,
    trials: Optional[int] = None,
    workers: Optional[int] = None,
) -> FigureResult:
    """Run the packaged preset of a published figure and attach its bound curves."""

    scenario = load_figure_preset(figure_id).with_overrides(seed=seed, trials=trials)
    experiment = run_experiment(scenario, workers=workers)
    return FigureResult(experiment=experiment, curves=bound_curves(experiment))


def _split(result: ExperimentResult | FigureResult) -> Tuple[ExperimentResult, Dict[str, List[Dict[str, float]]]]:
    if isinstance(result, FigureResult):
        return result.experiment, result.curves
    return result, {}


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _curve_cells(curves: Mapping[str, List[Dict[str, float]]]) -> Tuple[List[str], List[List[str]]]:
    columns: List[str] = []
    for points in curves.values():
        for point in points:
            columns.extend(key for key in point if key not in columns)
    rows = []
    for name, points in curves.items():
        for point in points:
            cells = [name]
            for column in columns:
                value = point.get(column, "")
                cells.append(repr(value) if isinstance(value, float) else str(value))
            rows.append(cells)
    return ["curve", *columns], rows


def json_ready(value: object) -> object:
    """Copy of ``value`` with non-finite floats replaced by ``None``."""

    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, Mapping):
        return {key: json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(item) for item in value]
    return value


def dump_json(payload: object) -> str:
    """Strict JSON: ``NaN`` and infinities are written as ``null``."""

    return json.dumps(json_ready(payload), indent=2, allow_nan=False)


def export(result: ExperimentResult | FigureResult, fmt: str, path: str | Path) -> Path:
    """Write ``result`` as CSV (plus ``<stem>_curves.csv`` for figures) or JSON."""

    experiment, curves = _split(result)
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            _write_csv(target, CSV_COLUMNS, (row.csv_cells() for row in experiment.rows))
            if curves:
                header, rows = _curve_cells(curves)
                _write_csv(target.with_name(f"{target.stem}_curves.csv"), header, rows)
        elif fmt == "json":
            payload = {
                "scenario": experiment.scenario.as_payload(),
                "failures": {str(index): count for index, count in experiment.failures.items()},
                "rows": [row.as_payload() for row in experiment.rows],
                "curves": curves,
            }
            target.write_text(dump_json(payload) + "\n", encoding="utf-8")
        else:
            raise ParameterError(f"Unknown export format: {fmt}")
    except OSError as exc:
        raise ExportError(f"Cannot write {target}: {exc}") from exc
    return target


def load_json_result(path: str | Path) -> ExportedResult:
    """Read back a file written by :func:`export` in JSON format."""

    source = Path(path)
    try:
        payload = json.loads(source.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ExportError(f"Cannot read {source}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ExportError(f"Invalid JSON in {source}: {exc}") from exc
    try:
        rows = tuple(ResultRow.from_payload(row) for row in payload["rows"])
        return ExportedResult(scenario=payload["scenario"], rows=rows, curves=payload.get("curves", {}))
    except (KeyError, TypeError) as exc:
        raise ExportError(f"{source} is not an exported experiment: {exc}") from exc
