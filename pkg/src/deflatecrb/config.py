"""Scenario files: TOML descriptions of a Monte-Carlo experiment."""
from __future__ import annotations

import itertools
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import DeflateCRBError, ScenarioLoadError
from .model import ProblemDims

__all__ = [
    "BOUND_STATISTICS",
    "DEFLATION_MODES",
    "ESTIMATOR_NAMES",
    "FIGURE_IDS",
    "GridPoint",
    "Scenario",
    "SolverSettings",
    "load_figure_preset",
    "load_scenario",
    "parse_scenario",
]

ESTIMATOR_NAMES = ("omp", "cosamp", "bpdn", "oracle_ls")
DEFLATION_MODES = ("on", "off", "both")
BOUND_STATISTICS = ("mean", "fixed")
FIGURE_IDS = (2, 3, 4, 5)
_PRIORS = ("gaussian", "rademacher")
_GRIDS = ("zip", "product")


@dataclass(frozen=True)
class SolverSettings:
    """Solver knobs shared by every trial of a scenario."""

    bpdn_lambda: Optional[float] = None
    max_iters: int = 500
    tol: Optional[float] = None
    debias_bpdn: bool = True


@dataclass(frozen=True)
class GridPoint:
    index: int
    dims: ProblemDims
    snr_db: float


@dataclass(frozen=True)
class Scenario:
    """A grid of problem sizes and SNRs, the estimators to run and the trial budget."""

    dims: Tuple[ProblemDims, ...]
    snr_grid_db: Tuple[float, ...]
    sigma_alpha2: float = 1.0
    sigma_beta2: float = 1.0
    prior: str = "gaussian"
    dictionary: str = "gaussian"
    trials: int = 100
    estimators: Tuple[str, ...] = ("oracle_ls",)
    deflation: str = "on"
    seed: int = 0
    bound_statistic: str = "mean"
    figure_id: Optional[int] = None
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self) -> None:
        if not self.dims:
            raise ScenarioLoadError("scenario needs at least one problem size")
        if not self.snr_grid_db:
            raise ScenarioLoadError("scenario needs at least one SNR value")
        if self.trials < 1:
            raise ScenarioLoadError(f"run.trials must be >= 1, got {self.trials}")
        if not self.estimators:
            raise ScenarioLoadError("run.estimators must not be empty")
        unknown = [name for name in self.estimators if name not in ESTIMATOR_NAMES]
        if unknown:
            raise ScenarioLoadError(f"Unknown estimators: {', '.join(unknown)}")
        if len(set(self.estimators)) != len(self.estimators):
            raise ScenarioLoadError("run.estimators lists an estimator twice")
        _check_choice("run.deflation", self.deflation, DEFLATION_MODES)
        _check_choice("run.prior", self.prior, _PRIORS)
        _check_choice("run.dictionary", self.dictionary, _PRIORS)
        _check_choice("run.bound_statistic", self.bound_statistic, BOUND_STATISTICS)
        for name in ("sigma_alpha2", "sigma_beta2"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise ScenarioLoadError(f"noise.{name} must be positive, got {value}")
        if any(not math.isfinite(snr) for snr in self.snr_grid_db):
            raise ScenarioLoadError("noise.snr_db values must be finite")
        if self.seed < 0:
            raise ScenarioLoadError(f"run.seed must be non-negative, got {self.seed}")
        if self.figure_id is not None and self.figure_id not in FIGURE_IDS:
            raise ScenarioLoadError(f"run.figure_id must be one of {FIGURE_IDS}, got {self.figure_id}")

    @property
    def deflation_arms(self) -> Tuple[bool, ...]:
        """Arms to run, deflated first."""

        return {"on": (True,), "off": (False,), "both": (True, False)}[self.deflation]

    def grid_points(self) -> List[GridPoint]:
        """Problem sizes crossed with SNRs, sizes outermost."""

        cells = itertools.product(self.dims, self.snr_grid_db)
        return [GridPoint(index, dims, float(snr)) for index, (dims, snr) in enumerate(cells)]

    def with_overrides(self, **changes: Any) -> "Scenario":
        """Copy with the non-``None`` entries of ``changes`` applied."""

        return replace(self, **{key: value for key, value in changes.items() if value is not None})

    def as_payload(self) -> Dict[str, object]:
        return {
            "figure_id": self.figure_id,
            "dims": [asdict(dims) for dims in self.dims],
            "snr_grid_db": list(self.snr_grid_db),
            "sigma_alpha2": self.sigma_alpha2,
            "sigma_beta2": self.sigma_beta2,
            "prior": self.prior,
            "dictionary": self.dictionary,
            "trials": self.trials,
            "estimators": list(self.estimators),
            "deflation": self.deflation,
            "seed": self.seed,
            "bound_statistic": self.bound_statistic,
            "solver": asdict(self.solver),
        }


def _check_choice(key: str, value: str, choices: Sequence[str]) -> None:
    if value not in choices:
        raise ScenarioLoadError(f"{key} must be one of {', '.join(choices)}, got {value!r}")


def _section(data: Mapping[str, Any], name: str) -> Mapping[str, Any]:
    section = data.get(name, {})
    if not isinstance(section, dict):
        raise ScenarioLoadError(f"[{name}] must be a table")
    return section


def _int_list(section: Mapping[str, Any], key: str, where: str) -> Optional[List[int]]:
    if key not in section:
        return None
    raw = section[key]
    values = raw if isinstance(raw, list) else [raw]
    if not values or any(isinstance(v, bool) or not isinstance(v, int) for v in values):
        raise ScenarioLoadError(f"{where}.{key} must be an integer or a non-empty list of integers")
    return list(values)


def _number(section: Mapping[str, Any], key: str, where: str, default: Optional[float]) -> Optional[float]:
    raw = section.get(key, default)
    if raw is None:
        return None
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ScenarioLoadError(f"{where}.{key} must be a number, got {raw!r}")
    return float(raw)


def _build_dims(section: Mapping[str, Any]) -> Tuple[ProblemDims, ...]:
    columns: Dict[str, Optional[List[int]]] = {
        key: _int_list(section, key, "dims") for key in ("n", "k", "la", "lb")
    }
    for key in ("n", "la"):
        if columns[key] is None:
            raise ScenarioLoadError(f"dims.{key} is required")
    if columns["lb"] is None:
        columns["lb"] = [0]
    grid = section.get("grid", "zip")
    _check_choice("dims.grid", grid, _GRIDS)
    present = {key: values for key, values in columns.items() if values is not None}

    if grid == "product":
        keys = list(present)
        combos = [dict(zip(keys, combo)) for combo in itertools.product(*(present[key] for key in keys))]
    else:
        lengths = {len(values) for values in present.values() if len(values) > 1}
        if len(lengths) > 1:
            raise ScenarioLoadError(f"dims lists must have equal lengths in zip mode, got {sorted(lengths)}")
        size = lengths.pop() if lengths else 1
        combos = [
            {key: values[i] if len(values) > 1 else values[0] for key, values in present.items()}
            for i in range(size)
        ]

    points = []
    for combo in combos:
        try:
            points.append(
                ProblemDims(
                    n=combo["n"],
                    k=combo.get("k", 2 * combo["n"]),
                    l_a=combo["la"],
                    l_b=combo["lb"],
                )
            )
        except DeflateCRBError as exc:
            raise ScenarioLoadError(f"Invalid dimensions {combo}: {exc}") from exc
    return tuple(points)


def parse_scenario(data: Mapping[str, Any], source: str = "<scenario>") -> Scenario:
    """Validate a decoded TOML document into a :class:`Scenario`."""

    if not isinstance(data, dict):
        raise ScenarioLoadError(f"{source}: scenario root must be a table")
    dims = _section(data, "dims")
    noise = _section(data, "noise")
    solver = _section(data, "estimators")
    run = _section(data, "run")

    snr_raw = noise.get("snr_db", 10.0)
    snr_values = snr_raw if isinstance(snr_raw, list) else [snr_raw]
    if not snr_values or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in snr_values):
        raise ScenarioLoadError(f"{source}: noise.snr_db must be a number or a non-empty list of numbers")

    estimators = run.get("estimators", ["oracle_ls"])
    if not isinstance(estimators, list) or not all(isinstance(name, str) for name in estimators):
        raise ScenarioLoadError(f"{source}: run.estimators must be a list of names")

    max_iters = solver.get("max_iters", 500)
    if isinstance(max_iters, bool) or not isinstance(max_iters, int) or max_iters < 1:
        raise ScenarioLoadError(f"{source}: estimators.max_iters must be a positive integer")
    debias = solver.get("debias_bpdn", True)
    if not isinstance(debias, bool):
        raise ScenarioLoadError(f"{source}: estimators.debias_bpdn must be a boolean")
    tol = _number(solver, "tol", "estimators", None)
    if tol is not None and tol <= 0.0:
        raise ScenarioLoadError(f"{source}: estimators.tol must be positive")
    bpdn_lambda = _number(solver, "bpdn_lambda", "estimators", None)
    if bpdn_lambda is not None and bpdn_lambda < 0.0:
        raise ScenarioLoadError(f"{source}: estimators.bpdn_lambda must be non-negative")

    for key in ("trials", "seed"):
        value = run.get(key, 0)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioLoadError(f"{source}: run.{key} must be an integer")
    figure_id = run.get("figure_id")
    if figure_id is not None and (isinstance(figure_id, bool) or not isinstance(figure_id, int)):
        raise ScenarioLoadError(f"{source}: run.figure_id must be an integer")

    try:
        return Scenario(
            dims=_build_dims(dims),
            snr_grid_db=tuple(float(v) for v in snr_values),
            sigma_alpha2=_number(noise, "sigma_alpha2", "noise", 1.0),
            sigma_beta2=_number(noise, "sigma_beta2", "noise", 1.0),
            prior=run.get("prior", "gaussian"),
            dictionary=run.get("dictionary", "gaussian"),
            trials=run.get("trials", 100),
            estimators=tuple(estimators),
            deflation=run.get("deflation", "on"),
            seed=run.get("seed", 0),
            bound_statistic=run.get("bound_statistic", "mean"),
            figure_id=figure_id,
            solver=SolverSettings(
                bpdn_lambda=bpdn_lambda,
                max_iters=max_iters,
                tol=tol,
                debias_bpdn=debias,
            ),
        )
    except ScenarioLoadError as exc:
        raise ScenarioLoadError(f"{source}: {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario from a TOML file."""

    scenario_path = Path(path)
    if not scenario_path.exists():
        raise ScenarioLoadError(f"Scenario file not found: {scenario_path}")
    try:
        data = tomllib.loads(scenario_path.read_text(encoding="utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ScenarioLoadError(f"Invalid TOML in scenario: {scenario_path}: {exc}") from exc
    except OSError as exc:
        raise ScenarioLoadError(f"Cannot read scenario {scenario_path}: {exc}") from exc
    return parse_scenario(data, str(scenario_path))


def load_figure_preset(figure_id: int) -> Scenario:
    """Load the packaged scenario that reproduces one of the published figures."""

    if figure_id not in FIGURE_IDS:
        raise ScenarioLoadError(f"Unknown figure id {figure_id}; expected one of {FIGURE_IDS}")
    name = f"fig{figure_id}.toml"
    resource = resources.files("deflatecrb.figures").joinpath(name)
    data = tomllib.loads(resource.read_text(encoding="utf-8"))
    return parse_scenario(data, f"figures/{name}")
