"""Scenario-matrix experiment: compare both schemes per scenario and write CSV/JSON results."""

import csv
import io
import json
import logging
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Any, Optional, Union

from .config import ExperimentConfig
from .keyrate import Scheme
from .optimize import ComparisonRow, OptimizationResult, compare_schemes, evaluate_pump_grid
from .orbit import GeoScenario, orbital_period
from .runner import JobRunner

logger = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "altitude_km",
    "ground_distance_km",
    "scheme",
    "k_days",
    "pump_night",
    "pump_day",
    "sampling_night",
    "sampling_day",
    "B_night",
    "B_day",
    "Q_night",
    "Q_day",
    "secret_bits",
    "effective_rate",
    "relative_diff",
    "orbital_period_s",
    "contact_length_s",
    "signals_N",
)

_SCHEME_ORDER = (Scheme.BLOCKWISE, Scheme.NONBLOCKWISE, Scheme.ASYMPTOTIC_BLOCK, Scheme.ASYMPTOTIC_NONBLOCK)


class OutputError(Exception):
    """Raised when a result file cannot be written."""

    pass


def format_number(value: Union[int, float]) -> str:
    """Render a number with 9 significant digits."""
    if isinstance(value, int):
        return str(value)
    return format(value, ".9g")


def _rounded(value: Any) -> Any:
    if isinstance(value, float):
        return float(format_number(value))
    return value


@dataclass(frozen=True)
class ResultRecord:
    """One (scenario, scheme, k) row of the matrix output.

    Asymptotic rows use the operating point of the matching finite-key optimum.
    """

    altitude_km: float
    ground_distance_km: float
    scheme: Scheme
    k_days: int
    pump_night: float
    pump_day: float
    sampling_night: float
    sampling_day: float
    B_night: float
    B_day: float
    Q_night: float
    Q_day: float
    secret_bits: float
    effective_rate: float
    relative_diff: Optional[float]
    orbital_period_s: float
    contact_length_s: float
    signals_N: float

    def as_json(self) -> dict[str, Any]:
        """Field mapping rounded the same way as the CSV row."""
        values: dict[str, Any] = {}
        for name in RESULT_COLUMNS:
            value = getattr(self, name)
            values[name] = value.value if isinstance(value, Scheme) else _rounded(value)
        return values

    def as_row(self) -> list[str]:
        """CSV cells in column order; an undefined relative difference is an empty cell."""
        cells = []
        for name in RESULT_COLUMNS:
            value = getattr(self, name)
            if value is None:
                cells.append("")
            elif isinstance(value, Scheme):
                cells.append(value.value)
            else:
                cells.append(format_number(value))
        return cells


def _record(
    scenario: GeoScenario,
    row: ComparisonRow,
    optimum: OptimizationResult,
    scheme: Scheme,
    secret_bits: float,
    effective_rate: float,
    relative_diff: Optional[float],
    contact_length_s: float,
) -> ResultRecord:
    night = optimum.block("night")
    day = optimum.block("day")
    return ResultRecord(
        altitude_km=scenario.altitude_km,
        ground_distance_km=scenario.ground_distance_km,
        scheme=scheme,
        k_days=row.k_days,
        pump_night=night.pump_power,
        pump_day=day.pump_power,
        sampling_night=night.sampling_rate,
        sampling_day=day.sampling_rate,
        B_night=night.stats.pairs_B,
        B_day=day.stats.pairs_B,
        Q_night=night.stats.qber_Q,
        Q_day=day.stats.qber_Q,
        secret_bits=secret_bits,
        effective_rate=effective_rate,
        relative_diff=relative_diff,
        orbital_period_s=orbital_period(scenario),
        contact_length_s=contact_length_s,
        signals_N=optimum.signals_N,
    )


def records_for_scenario(scenario: GeoScenario, config: ExperimentConfig) -> list[ResultRecord]:
    """Compare both schemes for one scenario; rows are ordered by scheme, then k."""
    settings = config.link_settings()
    profiles = config.time_profiles()
    grid = config.search_grid()
    optics = config.optical_params()
    evaluation = evaluate_pump_grid(scenario, optics, profiles, grid.pump_values, settings)
    rows = compare_schemes(
        scenario,
        optics,
        profiles,
        grid,
        config.security_params(),
        config.days_list,
        settings,
        evaluation,
    )
    contact = evaluation.contact_length_s

    by_scheme: dict[Scheme, list[ResultRecord]] = {scheme: [] for scheme in _SCHEME_ORDER}
    for row in rows:
        signals = row.blockwise.signals_N
        by_scheme[Scheme.BLOCKWISE].append(
            _record(
                scenario,
                row,
                row.blockwise,
                Scheme.BLOCKWISE,
                row.bits_block,
                row.rate_block,
                row.relative_diff,
                contact,
            )
        )
        by_scheme[Scheme.NONBLOCKWISE].append(
            _record(
                scenario,
                row,
                row.nonblockwise,
                Scheme.NONBLOCKWISE,
                row.bits_nonblock,
                row.rate_nonblock,
                row.relative_diff,
                contact,
            )
        )
        by_scheme[Scheme.ASYMPTOTIC_BLOCK].append(
            _record(
                scenario,
                row,
                row.blockwise,
                Scheme.ASYMPTOTIC_BLOCK,
                row.rate_block_asymptotic * signals,
                row.rate_block_asymptotic,
                row.relative_diff_asymptotic,
                contact,
            )
        )
        by_scheme[Scheme.ASYMPTOTIC_NONBLOCK].append(
            _record(
                scenario,
                row,
                row.nonblockwise,
                Scheme.ASYMPTOTIC_NONBLOCK,
                row.rate_nonblock_asymptotic * signals,
                row.rate_nonblock_asymptotic,
                row.relative_diff_asymptotic,
                contact,
            )
        )
    logger.info(
        f"Scenario A={scenario.altitude_km} km, D={scenario.ground_distance_km} km: "
        f"contact {contact:.1f} s, {len(rows)} accumulation periods"
    )
    return [record for scheme in _SCHEME_ORDER for record in by_scheme[scheme]]


def results_csv(records: list[ResultRecord]) -> str:
    """Header plus one row per record, with ``\\n`` line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    writer.writerows(record.as_row() for record in records)
    return buffer.getvalue()


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise OutputError(f"Cannot write '{path}': {e}") from e


def write_results(records: list[ResultRecord], out_dir: Union[str, Path], config: ExperimentConfig) -> Path:
    """Write results.csv, results.json and meta.json into ``out_dir``.

    Raises:
        OutputError: If the directory or a file cannot be written
    """
    from . import __version__

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(f"Cannot create output directory '{out}': {e}") from e

    _write_text(out / "results.csv", results_csv(records))
    _write_text(out / "results.json", json.dumps([r.as_json() for r in records], indent=2) + "\n")
    meta = {"version": __version__, "seed": config.mc.seed, "config": config.to_dict()}
    _write_text(out / "meta.json", json.dumps(meta, indent=2) + "\n")
    logger.info(f"Wrote {len(records)} records to {out}")
    return out


def run_paper_matrix(
    config: ExperimentConfig,
    threads: Optional[int] = None,
    out_dir: Optional[Union[str, Path]] = None,
) -> list[ResultRecord]:
    """Run the altitude x distance matrix and write its results.

    Scenarios run in parallel; records are ordered scenario-major, then by
    scheme, then by k, independent of scheduling.

    Args:
        config: Validated experiment configuration
        threads: Worker count (defaults to ``config.workers.count``, then the available parallelism)
        out_dir: Output directory (defaults to ``config.output_dir``)
    """
    scenarios = config.matrix_scenarios()
    per_scenario = JobRunner.run_jobs(
        partial(records_for_scenario, config=config),
        scenarios,
        threads if threads is not None else config.workers.count,
    )
    records = [record for records in per_scenario for record in records]
    write_results(records, out_dir if out_dir is not None else config.output_dir, config)
    return records
