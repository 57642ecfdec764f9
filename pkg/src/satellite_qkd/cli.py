"""Command-line entry point.

Standard output carries only CSV or JSON; log records and error messages go to
standard error.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys
from collections.abc import Sequence
from enum import IntEnum
from functools import partial
from typing import Any, Optional, TextIO

import numpy as np

from .channel import TimeOfDay, herald_stats, mc_herald_stats, transmittance
from .config import ConfigError, ExperimentConfig, configure_logging, load_config
from .optimize import (
    COMPARISON_COLUMNS,
    compare_schemes,
    evaluate_pump_grid,
    idealization_check,
    optimize_blockwise,
    optimize_nonblockwise,
)
from .orbit import EmptyPassError, GeoScenario, link_geometry, summarize_contact
from .runner import JobRunner
from .scenario import OutputError, format_number, run_paper_matrix
from .source import emission_for

logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    """Process exit codes."""

    SUCCESS = 0
    VALIDATION_FAILURE = 1
    USAGE_ERROR = 2


class UsageError(Exception):
    """Raised when flags and configuration together describe an unusable request."""

    pass


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'") from None
    if not (math.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got '{text}'")
    return value


def _non_negative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'") from None
    if not (math.isfinite(value) and value >= 0):
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got '{text}'")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got '{text}'")
    return value


def _days_list(text: str) -> list[int]:
    days = [_positive_int(part.strip()) for part in text.split(",") if part.strip()]
    if not days:
        raise argparse.ArgumentTypeError("expected a comma-separated list of days, e.g. 1,20,40")
    return days


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, float)):
        return format_number(value)
    return str(value)


def _write_csv(out: TextIO, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([_cell(v) for v in row] for row in rows)


def _write_json(out: TextIO, payload: Any) -> None:
    out.write(json.dumps(payload, indent=2) + "\n")


def _scenario(config: ExperimentConfig, args: argparse.Namespace) -> GeoScenario:
    altitude = getattr(args, "altitude_km", None)
    distance = getattr(args, "distance_km", None)
    if altitude is None and distance is None:
        return config.geo_scenario()
    return config.scenario_at(
        config.geo.altitude_km if altitude is None else altitude,
        config.geo.ground_distance_km if distance is None else distance,
    )


def cmd_contact(config: ExperimentConfig, args: argparse.Namespace, out: TextIO) -> ExitCode:
    scenario = _scenario(config, args)
    summary = summarize_contact(scenario)
    header = (
        "altitude_km",
        "ground_distance_km",
        "orbital_period_s",
        "max_central_angle_rad",
        "contact_length_s",
        "night_passes",
        "day_passes",
    )
    row = (
        scenario.altitude_km,
        scenario.ground_distance_km,
        summary.orbital_period_s,
        summary.max_central_angle_rad,
        summary.contact_length_s,
        summary.passes.night_passes,
        summary.passes.day_passes,
    )
    _write_csv(out, header, [row])
    return ExitCode.SUCCESS


def cmd_sweep(config: ExperimentConfig, args: argparse.Namespace, out: TextIO) -> ExitCode:
    """Herald statistics at the middle sample of the pass across a log-spaced pump grid.

    The full source is used unless ``--idealized`` drops the two-photon sector.
    """
    scenario = _scenario(config, args)
    try:
        geometry = link_geometry(scenario, config.geo.step_s)
    except EmptyPassError as e:
        raise UsageError(str(e)) from e
    sample = geometry.samples[len(geometry.samples) // 2]

    profile = dict(zip((TimeOfDay.NIGHT, TimeOfDay.DAY), config.time_profiles()))[TimeOfDay(args.profile)]
    optics = config.optical_params()
    eta1 = transmittance(sample.slant1_km, sample.elev1_rad, optics, profile)
    eta2 = transmittance(sample.slant2_km, sample.elev2_rad, optics, profile)
    two_photon = not args.idealized

    pumps = np.logspace(np.log10(config.grid.pump_min), np.log10(config.grid.pump_max), args.points)
    rows = []
    for pump in pumps:
        point = herald_stats(emission_for(float(pump), two_photon), eta1, eta2, profile.dark_click_prob)
        rows.append((float(pump), point.p_succ, point.fidelity, point.qber))
    _write_csv(out, ("pump", "p_succ", "fidelity", "qber"), rows)
    return ExitCode.SUCCESS


def cmd_optimize(config: ExperimentConfig, args: argparse.Namespace, out: TextIO) -> ExitCode:
    scenario = _scenario(config, args)
    settings = config.link_settings()
    optics = config.optical_params()
    profiles = config.time_profiles()
    grid = config.search_grid()
    sec = config.security_params()
    evaluation = evaluate_pump_grid(scenario, optics, profiles, grid.pump_values, settings)

    results = {}
    if args.scheme in ("blockwise", "both"):
        results["blockwise"] = optimize_blockwise(
            scenario, optics, profiles, grid, sec, args.days, settings, evaluation
        )
    if args.scheme in ("nonblockwise", "both"):
        results["nonblockwise"] = optimize_nonblockwise(
            scenario, optics, profiles, grid, sec, args.days, settings, evaluation
        )
    payload = {name: result.to_dict() for name, result in results.items()}
    _write_json(out, payload if len(payload) > 1 else next(iter(payload.values())))
    return ExitCode.SUCCESS


def cmd_compare(config: ExperimentConfig, args: argparse.Namespace, out: TextIO) -> ExitCode:
    scenario = _scenario(config, args)
    rows = compare_schemes(
        scenario,
        config.optical_params(),
        config.time_profiles(),
        config.search_grid(),
        config.security_params(),
        args.days or config.days_list,
        config.link_settings(),
    )
    _write_csv(out, COMPARISON_COLUMNS, [[row.as_dict()[name] for name in COMPARISON_COLUMNS] for row in rows])
    return ExitCode.SUCCESS


def _mc_point(job: tuple[float, float, float], config: ExperimentConfig, threads: Optional[int]) -> list[Any]:
    pump, eta, dark = job
    emission = emission_for(pump, two_photon_enabled=True)
    analytic = herald_stats(emission, eta, eta, dark)
    estimate, errors = mc_herald_stats(emission, eta, eta, dark, config.mc_config(), threads)
    z_p = abs(estimate.p_succ - analytic.p_succ) / errors.p_succ
    z_f = abs(estimate.fidelity - analytic.fidelity) / errors.fidelity
    ok = max(z_p, z_f) <= config.mc.max_standard_errors
    return [
        pump,
        eta,
        dark,
        analytic.p_succ,
        estimate.p_succ,
        errors.p_succ,
        analytic.fidelity,
        estimate.fidelity,
        errors.fidelity,
        z_p,
        z_f,
        ok,
    ]


def cmd_mc_validate(config: ExperimentConfig, args: argparse.Namespace, out: TextIO) -> ExitCode:
    """Analytic herald statistics against Monte Carlo over the configured grid."""
    if args.trials is not None:
        config.mc.trials = args.trials
    if args.seed is not None:
        config.mc.seed = args.seed
    config.validate()

    mc = config.mc
    jobs = [(p, eta, d) for p in mc.pump_values for eta in mc.transmittances for d in mc.dark_click_probs]
    rows = [_mc_point(job, config, config.workers.count) for job in jobs]
    header = (
        "pump",
        "eta",
        "dark",
        "p_succ_analytic",
        "p_succ_mc",
        "p_succ_se",
        "fidelity_analytic",
        "fidelity_mc",
        "fidelity_se",
        "z_p_succ",
        "z_fidelity",
        "ok",
    )
    _write_csv(out, header, rows)
    failed = sum(1 for row in rows if not row[-1])
    if failed:
        logger.error(f"{failed} of {len(rows)} points exceed {config.mc.max_standard_errors} standard errors")
        return ExitCode.VALIDATION_FAILURE
    logger.info(f"All {len(rows)} points within {config.mc.max_standard_errors} standard errors")
    return ExitCode.SUCCESS


def cmd_matrix(config: ExperimentConfig, args: argparse.Namespace, out: TextIO) -> ExitCode:
    records = run_paper_matrix(config, config.workers.count, args.out)
    logger.info(f"Matrix finished: {len(records)} records in {args.out or config.output_dir}")
    return ExitCode.SUCCESS


def _idealization_rows(scenario: GeoScenario, config: ExperimentConfig, k_days: int) -> list[list[Any]]:
    rows = idealization_check(
        scenario,
        config.optical_params(),
        config.time_profiles(),
        config.search_grid(),
        config.security_params(),
        k_days,
        config.link_settings(),
    )
    return [
        [
            scenario.altitude_km,
            scenario.ground_distance_km,
            r.label,
            r.pump_power,
            r.p_succ_full,
            r.p_succ_idealized,
            r.p_succ_delta,
            r.fidelity_full,
            r.fidelity_idealized,
            r.fidelity_delta,
        ]
        for r in rows
    ]


def cmd_idealization(config: ExperimentConfig, args: argparse.Namespace, out: TextIO) -> ExitCode:
    """Full versus idealized source at each matrix scenario's blockwise optimum."""
    per_scenario = JobRunner.run_jobs(
        partial(_idealization_rows, config=config, k_days=args.days),
        config.matrix_scenarios(),
        config.workers.count,
    )
    header = (
        "altitude_km",
        "ground_distance_km",
        "label",
        "pump_power",
        "p_succ_full",
        "p_succ_idealized",
        "p_succ_delta",
        "fidelity_full",
        "fidelity_idealized",
        "fidelity_delta",
    )
    _write_csv(out, header, [row for rows in per_scenario for row in rows])
    return ExitCode.SUCCESS


def _add_location_flags(parser: argparse.ArgumentParser, required: bool = False) -> None:
    parser.add_argument("--altitude-km", type=_positive_float, required=required, help="Satellite altitude (km)")
    parser.add_argument(
        "--distance-km", type=_non_negative_float, required=required, help="Ground distance between stations (km)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="satqkd", description="Satellite dual-downlink entanglement QKD simulator and optimizer."
    )
    parser.add_argument("--config", help="JSON/YAML configuration file (falls back to $SATKD_CONFIG)")
    parser.add_argument("--threads", type=_positive_int, help="Worker cap (default: available parallelism)")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"], help="Log level")
    sub = parser.add_subparsers(dest="cmd", required=True)

    contact = sub.add_parser("contact", help="Orbital period, contact length and pass counts.")
    _add_location_flags(contact, required=True)
    contact.set_defaults(handler=cmd_contact)

    sweep = sub.add_parser("sweep", help="Herald statistics at mid-pass across pump values.")
    sweep.add_argument("--param", choices=["pump"], default="pump")
    sweep.add_argument("--points", type=_positive_int, default=20)
    sweep.add_argument("--profile", choices=[t.value for t in TimeOfDay], default=TimeOfDay.NIGHT.value)
    sweep.add_argument("--idealized", action="store_true", help="Drop the two-photon emission sector")
    _add_location_flags(sweep)
    sweep.set_defaults(handler=cmd_sweep)

    optimize = sub.add_parser("optimize", help="Optimal pump and sampling rate as JSON.")
    optimize.add_argument("--scheme", choices=["blockwise", "nonblockwise", "both"], default="both")
    optimize.add_argument("--days", type=_positive_int, default=1)
    _add_location_flags(optimize)
    optimize.set_defaults(handler=cmd_optimize)

    compare = sub.add_parser("compare", help="Blockwise versus non-blockwise table as CSV.")
    compare.add_argument("--days", type=_days_list, help="Comma-separated accumulation periods, e.g. 1,20,40,60,80")
    _add_location_flags(compare)
    compare.set_defaults(handler=cmd_compare)

    mc = sub.add_parser("mc-validate", help="Check analytic herald statistics against Monte Carlo.")
    mc.add_argument("--trials", type=_positive_int)
    mc.add_argument("--seed", type=int)
    mc.set_defaults(handler=cmd_mc_validate)

    matrix = sub.add_parser("matrix", help="Run the altitude x distance matrix into an output directory.")
    matrix.add_argument("--out", help="Output directory (default: config output_dir)")
    matrix.set_defaults(handler=cmd_matrix)

    ideal = sub.add_parser("idealization", help="Full versus idealized source at the blockwise optimum.")
    ideal.add_argument("--days", type=_positive_int, default=1)
    ideal.set_defaults(handler=cmd_idealization)
    return parser


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config or os.getenv("SATKD_CONFIG") or None)
    if args.threads is not None:
        config.workers.count = args.threads
    if args.log_level is not None:
        config.logger.log_level = args.log_level
    return config


def main(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None) -> int:
    """Run the CLI and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    out = out if out is not None else sys.stdout

    try:
        config = _load(args)
    except ConfigError as e:
        print(f"satqkd: {e}", file=sys.stderr)
        return ExitCode.USAGE_ERROR
    configure_logging(config)

    try:
        return int(args.handler(config, args, out))
    except (ConfigError, UsageError, ValueError) as e:
        print(f"satqkd {args.cmd}: {e}", file=sys.stderr)
        return ExitCode.USAGE_ERROR
    except OutputError as e:
        print(f"satqkd {args.cmd}: {e}", file=sys.stderr)
        return ExitCode.VALIDATION_FAILURE


if __name__ == "__main__":
    sys.exit(main())
