"""Command-line interface: ``deflatecrb {bound,mp,lemma1,simulate,figure}``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .bounds import bound_report, calibrate_noise, to_db
from .config import FIGURE_IDS, load_scenario
from .errors import (
    BoundDomainError,
    DeflateCRBError,
    DimensionError,
    ExportError,
    ParameterError,
    ScenarioLoadError,
)
from .harness import (
    ExperimentResult,
    FigureResult,
    dump_json,
    export,
    reproduce_figure,
    resolve_workers,
    run_experiment,
)
from .model import ProblemDims, draw_supports, gen_dictionary
from .rmt import MPLaw, mp_summary, standard_error, verify_lemma1

__all__ = ["build_default_parser", "main", "run"]

_BOUND_FIELDS = ("c_deflated", "c_joint", "c_ideal")
_USAGE_ERRORS = (ScenarioLoadError, DimensionError, ParameterError)
_LEMMA1_TRIALS = 20


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="Print machine-readable JSON instead of text.")
    common.add_argument("-v", "--verbose", action="store_true", help="Log progress and solver details.")
    return common


def _add_dims(parser: argparse.ArgumentParser, *, lb_default: Optional[int] = None, required: bool = True) -> None:
    parser.add_argument("--n", type=int, required=required, help="Number of measurements N.")
    parser.add_argument("--k", type=int, default=None, help="Dictionary size K (default 2N).")
    parser.add_argument("--la", type=int, required=required, help="Number of sources of interest L_A.")
    if lb_default is None:
        parser.add_argument("--lb", type=int, required=required, help="Number of interferers L_B.")
    else:
        parser.add_argument("--lb", type=int, default=lb_default, help="Number of interferers L_B.")


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, default=None, help="Write the aggregated rows to this file.")
    parser.add_argument(
        "--format",
        choices=("csv", "json"),
        default=None,
        help="Output format (default: from the --out suffix, else csv).",
    )
    parser.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Worker processes (default: $DEFLATECRB_WORKERS or the CPU count).",
    )
    parser.add_argument("--seed", type=int, default=None, help="Override the master seed.")
    parser.add_argument("--trials", type=int, default=None, help="Override the Monte-Carlo trial count.")


def build_default_parser() -> argparse.ArgumentParser:
    """Construct the CLI argument parser."""

    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="deflatecrb",
        description="Expected Cramer-Rao bounds and Monte-Carlo runs for interference-deflated sparse estimation",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    bound = commands.add_parser("bound", parents=[common], help="Evaluate the three bounds and their closed forms.")
    _add_dims(bound, lb_default=0)
    bound.add_argument("--snr-db", type=float, default=10.0, help="Target asymptotic output SNR in dB.")
    bound.add_argument("--sigma-alpha2", type=float, default=1.0, help="Prior variance of the sources of interest.")
    bound.add_argument("--sigma-beta2", type=float, default=1.0, help="Prior variance of the interferers.")
    bound.add_argument("--draws", type=int, default=1, help="Dictionary draws to average over.")
    bound.add_argument("--seed", type=int, default=0, help="Seed for the dictionary draws.")

    mp = commands.add_parser("mp", parents=[common], help="Tabulate the Marchenko-Pastur law.")
    mp.add_argument("--rho-tilde", type=float, required=True, help="Aspect ratio (N - L_B) / L_A.")
    mp.add_argument("--grid", type=int, default=11, help="Density grid points across the support.")
    mp.add_argument("--moments-up-to", type=int, default=4, help="Highest moment order to print.")

    lemma1 = commands.add_parser("lemma1", parents=[common], help="Monte-Carlo check of the trace limits of F^T F.")
    _add_dims(lemma1, required=False)
    lemma1.add_argument(
        "--config",
        type=Path,
        default=None,
        help="TOML scenario file; checks every problem size it lists instead of --n/--la/--lb.",
    )
    lemma1.add_argument("--direct", action="store_true", help="Draw F i.i.d. instead of deflating a dictionary.")
    _add_run_options(lemma1)

    simulate = commands.add_parser("simulate", parents=[common], help="Run a scenario file.")
    simulate.add_argument("--config", type=Path, required=True, help="TOML scenario file.")
    _add_run_options(simulate)

    figure = commands.add_parser("figure", parents=[common], help="Reproduce the data behind a published figure.")
    figure.add_argument("--id", type=int, required=True, choices=FIGURE_IDS, help="Figure number.")
    _add_run_options(figure)
    return parser


def _dims_from(args: argparse.Namespace) -> ProblemDims:
    return ProblemDims(n=args.n, k=args.k if args.k is not None else 2 * args.n, l_a=args.la, l_b=args.lb)


def _format_for(args: argparse.Namespace) -> str:
    if args.format is not None:
        return args.format
    if args.out is not None and args.out.suffix.lower() == ".json":
        return "json"
    return "csv"


def _cmd_bound(args: argparse.Namespace) -> Dict[str, object]:
    if args.draws < 1:
        raise ParameterError(f"--draws must be >= 1, got {args.draws}")
    dims = _dims_from(args)
    ratios = dims.ratios()
    sigma2 = calibrate_noise(args.snr_db, args.sigma_alpha2, ratios, "deflated").sigma2
    sigma0_2 = calibrate_noise(args.snr_db, args.sigma_alpha2, ratios, "joint", args.sigma_beta2).sigma2
    reports = []
    for stream in np.random.SeedSequence(args.seed).spawn(args.draws):
        rng = np.random.default_rng(stream)
        h = gen_dictionary(dims, rng)
        supports = draw_supports(dims, rng)
        reports.append(
            bound_report(
                h[:, list(supports.t)],
                h[:, list(supports.t_tilde)],
                ratios,
                sigma2=sigma2,
                sigma0_2=sigma0_2,
                sigma1_2=sigma2,
                sigma_alpha2=args.sigma_alpha2,
                sigma_beta2=args.sigma_beta2,
            ).as_payload()
        )
    keys = [key for key, value in reports[0].items() if isinstance(value, float)]
    mean = {key: float(np.mean([report[key] for report in reports])) for key in keys}
    stderr = {key: standard_error([report[key] for report in reports]) for key in _BOUND_FIELDS}
    return {
        "dims": asdict(dims),
        "snr_db": args.snr_db,
        "sigma2": sigma2,
        "sigma0_2": sigma0_2,
        "draws": args.draws,
        "bounds": mean,
        "stderr": stderr,
    }


def _print_bound(payload: Dict[str, object]) -> None:
    dims = payload["dims"]
    bounds = payload["bounds"]
    print(
        f"N={dims['n']} K={dims['k']} L_A={dims['l_a']} L_B={dims['l_b']} SNR={payload['snr_db']:g}dB "
        f"draws={payload['draws']} sigma2={payload['sigma2']:.6g} sigma0_2={payload['sigma0_2']:.6g}"
    )
    for model in ("deflated", "joint", "ideal"):
        value = bounds[f"c_{model}"]
        limit = bounds[f"c_{model}_inf"]
        print(
            f"  {model:<9} c={value:.6g} ({to_db(value):.2f} dB) +/- {payload['stderr'][f'c_{model}']:.2g}"
            f"  c_inf={limit:.6g} ({to_db(limit):.2f} dB)  snr_na={bounds[f'snr_na_{model}']:.6g}"
        )


def _print_mp(payload: Dict[str, object]) -> None:
    print(
        f"rho_tilde={payload['rho_tilde']:g} lambda-={payload['lambda_minus']:.6g} "
        f"lambda+={payload['lambda_plus']:.6g} point_mass={payload['point_mass']:.6g}"
    )
    for point in payload["density"]:
        print(f"  x={point['x']:.6g}  density={point['density']:.6g}")
    print("  moments: " + ", ".join(f"{value:.10g}" for value in payload["moments"]))
    if "stieltjes_at_zero" in payload:
        print(f"  S(0)={payload['stieltjes_at_zero']:.10g}")


def _write_lemma1(payload: Dict[str, object], fmt: str, path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            path.write_text(dump_json(payload) + "\n", encoding="utf-8")
            return
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["n", "k", "l_a", "l_b", "trial", "inverse_trace", "trace"])
            for report in payload["reports"]:
                dims = report["dims"]
                size = [dims["n"], dims["k"], dims["l_a"], dims["l_b"]]
                for index, (inverse, trace) in enumerate(zip(report["inverse_traces"], report["traces"])):
                    writer.writerow([*size, index, repr(inverse), repr(trace)])
    except OSError as exc:
        raise ExportError(f"Cannot write {path}: {exc}") from exc


def _lemma1_plan(args: argparse.Namespace) -> Tuple[List[ProblemDims], int, int]:
    flags = [flag for flag, value in (("--n", args.n), ("--la", args.la), ("--lb", args.lb)) if value is not None]
    if args.config is None:
        if len(flags) < 3:
            raise ParameterError("lemma1 needs --n, --la and --lb, or --config")
        trials = args.trials if args.trials is not None else _LEMMA1_TRIALS
        seed = args.seed if args.seed is not None else 0
        return [_dims_from(args)], trials, seed
    if flags or args.k is not None:
        raise ParameterError("--config cannot be combined with --n, --k, --la or --lb")
    scenario = load_scenario(args.config).with_overrides(seed=args.seed, trials=args.trials)
    return list(scenario.dims), scenario.trials, scenario.seed


def _cmd_lemma1(args: argparse.Namespace) -> Dict[str, object]:
    sizes, trials, seed = _lemma1_plan(args)
    workers = resolve_workers(args.workers)
    reports = []
    for index, dims in enumerate(sizes):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))
        report = verify_lemma1(dims, trials, rng, direct=args.direct, workers=workers)
        reports.append(report.as_payload())
    payload: Dict[str, object] = {"seed": seed, "reports": reports}
    if args.out is not None:
        _write_lemma1(payload, _format_for(args), args.out)
    return payload


def _print_lemma1(payload: Dict[str, object]) -> None:
    for report in payload["reports"]:
        dims = report["dims"]
        print(f"N={dims['n']} K={dims['k']} L_A={dims['l_a']} L_B={dims['l_b']} trials={report['trials']}")
        print(
            f"  inverse trace: mean={report['inverse_trace_mean']:.6g} +/- {report['inverse_trace_stderr']:.2g} "
            f"limit={report['inverse_trace_limit']:.6g} gap={100 * report['inverse_trace_gap']:.2f}%"
        )
        print(
            f"  trace:         mean={report['trace_mean']:.6g} +/- {report['trace_stderr']:.2g} "
            f"limit={report['trace_limit']:.6g} gap={100 * report['trace_gap']:.2f}%"
        )


def _report_run(result: ExperimentResult | FigureResult, args: argparse.Namespace) -> None:
    experiment = result.experiment if isinstance(result, FigureResult) else result
    if args.out is not None:
        export(result, _format_for(args), args.out)
    if args.json:
        payload = {"rows": [row.as_payload() for row in experiment.rows]}
        if isinstance(result, FigureResult):
            payload["curves"] = result.curves
        print(dump_json(payload))
        return
    for line in experiment.summary_lines():
        print(line)


def _emit(payload: Dict[str, object], args: argparse.Namespace, printer) -> None:
    if args.json:
        print(dump_json(payload))
    else:
        printer(payload)


def _dispatch(args: argparse.Namespace) -> None:
    if args.command == "bound":
        _emit(_cmd_bound(args), args, _print_bound)
    elif args.command == "mp":
        if not args.rho_tilde > 0.0:
            raise ParameterError(f"--rho-tilde must be positive, got {args.rho_tilde}")
        payload = mp_summary(MPLaw(args.rho_tilde), grid=args.grid, moments_up_to=args.moments_up_to)
        _emit(payload, args, _print_mp)
    elif args.command == "lemma1":
        _emit(_cmd_lemma1(args), args, _print_lemma1)
    elif args.command == "simulate":
        scenario = load_scenario(args.config).with_overrides(seed=args.seed, trials=args.trials)
        _report_run(run_experiment(scenario, workers=args.workers), args)
    elif args.command == "figure":
        result = reproduce_figure(args.id, seed=args.seed, trials=args.trials, workers=args.workers)
        _report_run(result, args)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point for ``deflatecrb``; returns the process exit code."""

    parser = build_default_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        _dispatch(args)
    except BoundDomainError as exc:
        print(f"deflatecrb: error: {exc}", file=sys.stderr)
        return 1
    except _USAGE_ERRORS as exc:
        parser.error(str(exc))
    except DeflateCRBError as exc:
        print(f"deflatecrb: error: {exc}", file=sys.stderr)
        return 1
    return 0


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":  # pragma: no cover - manual execution helper
    run()
