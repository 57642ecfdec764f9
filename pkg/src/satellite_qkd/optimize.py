"""Exhaustive search over pump power and sampling rate for both post-processing schemes.

Per-pass yields depend only on the pump value and the time-of-day profile, so
they are computed once per grid (``evaluate_pump_grid``) and then scaled to any
number of days. The key-length objective is evaluated over whole numpy grids
and maximised with ``argmax``; grids are ascending, so the first maximum in
C order is the one with the lowest pump, then the lowest sampling rate.
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .channel import (
    BlockContribution,
    OpticalParams,
    TimeOfDay,
    TimeProfile,
    link_aggregate,
    pass_transmittances,
)
from .errors import raise_for_violations
from .keyrate import (
    BlockStats,
    KeyResult,
    Scheme,
    SecurityParams,
    UndefinedRelativeDifferenceError,
    asymptotic_bits_blockwise,
    asymptotic_bits_pooled,
    key_len_blockwise,
    key_len_nonblockwise,
    key_len_pooled,
    relative_difference,
)
from .orbit import EmptyPassError, GeoScenario, PassCounts, PassGeometry, link_geometry, pass_counts
from .source import MAX_PUMP_POWER, emission_for

logger = logging.getLogger(__name__)

DEFAULT_DAYS = (1, 20, 40, 60, 80)


def _logspace(start: float, stop: float, points: int) -> tuple[float, ...]:
    return tuple(float(v) for v in np.logspace(np.log10(start), np.log10(stop), points))


@dataclass(frozen=True)
class SearchGrid:
    """Pump values and one-day sampling rates searched by the optimizers.

    The sampling rates used for a k-day run are ``base_sampling_rates / k``, so
    the absolute number of test bits at a given grid index does not depend on k.
    """

    pump_values: tuple[float, ...] = field(default_factory=lambda: (0.0,) + _logspace(1e-3, 0.1, 100))
    base_sampling_rates: tuple[float, ...] = field(default_factory=lambda: _logspace(5e-4, 0.3, 30))

    def __post_init__(self) -> None:
        problems = []
        if not self.pump_values:
            problems.append("pump_values: must not be empty")
        elif any(not 0.0 <= p <= MAX_PUMP_POWER for p in self.pump_values):
            problems.append(f"pump_values: every value must be in [0, {MAX_PUMP_POWER}]")
        elif list(self.pump_values) != sorted(set(self.pump_values)):
            problems.append("pump_values: must be strictly ascending")
        if not self.base_sampling_rates:
            problems.append("base_sampling_rates: must not be empty")
        elif any(not 0.0 < r < 0.5 for r in self.base_sampling_rates):
            problems.append("base_sampling_rates: every value must be in (0, 0.5)")
        elif list(self.base_sampling_rates) != sorted(set(self.base_sampling_rates)):
            problems.append("base_sampling_rates: must be strictly ascending")
        raise_for_violations("SearchGrid", problems)

    @classmethod
    def logspaced(
        cls,
        pump_points: int = 100,
        pump_min: float = 1e-3,
        pump_max: float = 0.1,
        rate_points: int = 30,
        rate_min: float = 5e-4,
        rate_max: float = 0.3,
        include_zero_pump: bool = True,
    ) -> "SearchGrid":
        """Build a grid of log-spaced pumps (optionally preceded by 0) and rates."""
        pumps = _logspace(pump_min, pump_max, pump_points)
        if include_zero_pump:
            pumps = (0.0,) + pumps
        return cls(pump_values=pumps, base_sampling_rates=_logspace(rate_min, rate_max, rate_points))

    def sampling_rates(self, k_days: int) -> np.ndarray:
        """Sampling rates searched for raw key accumulated over ``k_days`` days."""
        if k_days < 1:
            raise ValueError(f"k_days must be >= 1, got {k_days}")
        return np.asarray(self.base_sampling_rates, dtype=float) / k_days


@dataclass(frozen=True)
class LinkSettings:
    """Source and post-processing settings shared by every pass of a scenario."""

    source_rate_hz: float = 1e9
    two_photon_enabled: bool = False
    sifting: bool = False
    step_s: float = 1.0

    def __post_init__(self) -> None:
        problems = []
        if not self.source_rate_hz > 0:
            problems.append(f"source_rate_hz: must be > 0, got {self.source_rate_hz}")
        if not self.step_s > 0:
            problems.append(f"step_s: must be > 0, got {self.step_s}")
        raise_for_violations("LinkSettings", problems)


@dataclass(frozen=True, eq=False)
class PumpGridEvaluation:
    """Single-pass yields of every block for every pump value of a grid."""

    pump_values: np.ndarray
    passes: PassCounts
    contact_length_s: float
    contributions: Mapping[str, tuple[BlockContribution, ...]]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.contributions)

    def accumulated(self, label: str, k_days: int) -> tuple[np.ndarray, np.ndarray, float]:
        """Pairs B and QBER Q per pump value, and signals N, after ``k_days`` days."""
        if k_days < 1:
            raise ValueError(f"k_days must be >= 1, got {k_days}")
        scale = self.passes.for_label(label) * k_days
        per_pump = self.contributions[label]
        pairs = np.array([c.pairs_B for c in per_pump], dtype=float) * scale
        qbers = np.array([c.qber_Q for c in per_pump], dtype=float)
        return pairs, qbers, per_pump[0].signals_N * scale

    def pump_index(self, pump_power: float) -> int:
        matches = np.flatnonzero(self.pump_values == pump_power)
        if not matches.size:
            raise ValueError(f"pump power {pump_power} is not on the evaluated grid")
        return int(matches[0])


@dataclass(frozen=True)
class BlockOptimum:
    """Operating point and accumulated statistics of one block at an optimum."""

    label: str
    pump_power: float
    sampling_rate: float
    stats: BlockStats
    mean_p_succ: float
    mean_fidelity: float
    secret_bits: Optional[float] = None


@dataclass(frozen=True)
class OptimizationResult:
    per_block_pump: dict[str, float]
    per_block_sampling: dict[str, float]
    key: KeyResult
    evaluations: int
    blocks: tuple[BlockOptimum, ...] = ()

    @property
    def signals_N(self) -> float:
        return sum(block.stats.signals_N for block in self.blocks)

    def block(self, label: str) -> BlockOptimum:
        for block in self.blocks:
            if block.label == label:
                return block
        raise KeyError(label)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scheme": self.key.scheme.value,
            "secret_bits": self.key.secret_bits,
            "effective_rate": self.key.effective_rate,
            "signals_N": self.signals_N,
            "evaluations": self.evaluations,
            "per_block_pump": dict(self.per_block_pump),
            "per_block_sampling": dict(self.per_block_sampling),
            "blocks": [
                {
                    "label": b.label,
                    "pump_power": b.pump_power,
                    "sampling_rate": b.sampling_rate,
                    "pairs_B": b.stats.pairs_B,
                    "signals_N": b.stats.signals_N,
                    "qber_Q": b.stats.qber_Q,
                    "sample_m": b.stats.sample_m,
                    "mean_p_succ": b.mean_p_succ,
                    "mean_fidelity": b.mean_fidelity,
                    "secret_bits": b.secret_bits,
                }
                for b in self.blocks
            ],
        }


COMPARISON_COLUMNS = (
    "k_days",
    "rate_block",
    "rate_nonblock",
    "rate_block_asymptotic",
    "rate_nonblock_asymptotic",
    "relative_diff",
    "bits_block",
    "bits_nonblock",
    "bits_per_day_diff",
    "relative_diff_asymptotic",
)


@dataclass(frozen=True)
class ComparisonRow:
    """Blockwise versus non-blockwise outcome for one accumulation period.

    ``relative_diff`` is None when the non-blockwise rate is zero.
    """

    k_days: int
    rate_block: float
    rate_nonblock: float
    rate_block_asymptotic: float
    rate_nonblock_asymptotic: float
    relative_diff: Optional[float]
    bits_block: float
    bits_nonblock: float
    bits_per_day_diff: float
    relative_diff_asymptotic: Optional[float]
    blockwise: OptimizationResult = field(repr=False, compare=False)
    nonblockwise: OptimizationResult = field(repr=False, compare=False)

    def as_dict(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in COMPARISON_COLUMNS}


@dataclass(frozen=True)
class IdealizationRow:
    """Full versus idealized source at one block's blockwise-optimal pump."""

    label: str
    pump_power: float
    p_succ_full: float
    p_succ_idealized: float
    fidelity_full: float
    fidelity_idealized: float

    @property
    def p_succ_delta(self) -> float:
        return abs(self.p_succ_full - self.p_succ_idealized)

    @property
    def fidelity_delta(self) -> float:
        return abs(self.fidelity_full - self.fidelity_idealized)


def _idle_contribution(label: str, geometry: Optional[PassGeometry], source_rate_hz: float) -> BlockContribution:
    """A pass with the source switched off: attempts are counted, nothing is delivered."""
    duration = geometry.duration_s if geometry is not None else 0.0
    return BlockContribution(
        label=label,
        pairs_B=0.0,
        signals_N=source_rate_hz * duration,
        qber_Q=0.0,
        mean_p_succ=0.0,
        mean_fidelity=1.0,
        duration_s=duration,
    )


def _contact_geometry(scenario: GeoScenario, step_s: float) -> Optional[PassGeometry]:
    try:
        return link_geometry(scenario, step_s)
    except EmptyPassError as e:
        logger.info(f"{e}; every block yields nothing")
        return None


def evaluate_pump_grid(
    scenario: GeoScenario,
    optics: OpticalParams,
    profiles: Sequence[TimeProfile],
    pump_values: Sequence[float],
    settings: LinkSettings = LinkSettings(),
) -> PumpGridEvaluation:
    """Compute the single-pass contribution of every profile at every pump value.

    A pump of 0 switches the source off for that block, so the block delivers
    no pairs (dark-count heralds are not collected).
    """
    labels = [TimeOfDay(profile.label).value for profile in profiles]
    if len(set(labels)) != len(labels):
        raise ValueError(f"profile labels must be unique, got {labels}")

    geometry = _contact_geometry(scenario, settings.step_s)
    contributions: dict[str, tuple[BlockContribution, ...]] = {}
    for label, profile in zip(labels, profiles):
        if geometry is None:
            contributions[label] = tuple(_idle_contribution(label, None, settings.source_rate_hz) for _ in pump_values)
            continue
        eta1, eta2 = pass_transmittances(geometry, optics, profile)
        contributions[label] = tuple(
            _idle_contribution(label, geometry, settings.source_rate_hz)
            if pump == 0.0
            else link_aggregate(
                label,
                emission_for(pump, settings.two_photon_enabled),
                eta1,
                eta2,
                profile.dark_click_prob,
                geometry,
                settings.source_rate_hz,
                settings.sifting,
            )
            for pump in pump_values
        )
    logger.debug(
        f"Evaluated {len(pump_values)} pumps x {len(labels)} blocks for "
        f"A={scenario.altitude_km} km, D={scenario.ground_distance_km} km"
    )
    return PumpGridEvaluation(
        pump_values=np.asarray(pump_values, dtype=float),
        passes=pass_counts(scenario),
        contact_length_s=geometry.duration_s if geometry is not None else 0.0,
        contributions=contributions,
    )


def accumulate_block(contribution: BlockContribution, passes: int, k_days: int) -> BlockStats:
    """Scale one pass's pairs and signals to ``passes`` passes a day over ``k_days`` days."""
    if k_days < 1:
        raise ValueError(f"k_days must be >= 1, got {k_days}")
    scale = passes * k_days
    return BlockStats(
        label=contribution.label,
        pairs_B=contribution.pairs_B * scale,
        qber_Q=contribution.qber_Q,
        signals_N=contribution.signals_N * scale,
    )


def accumulate_days(
    night: BlockContribution, day: BlockContribution, scenario: GeoScenario, k_days: int
) -> tuple[BlockStats, BlockStats]:
    """Night and day blocks after ``k_days`` days; the QBER of each block is unchanged."""
    counts = pass_counts(scenario)
    return accumulate_block(night, counts.night_passes, k_days), accumulate_block(day, counts.day_passes, k_days)


def _resolve_evaluation(
    evaluation: Optional[PumpGridEvaluation],
    scenario: GeoScenario,
    optics: OpticalParams,
    profiles: Sequence[TimeProfile],
    grid: SearchGrid,
    settings: LinkSettings,
) -> PumpGridEvaluation:
    if evaluation is None:
        return evaluate_pump_grid(scenario, optics, profiles, grid.pump_values, settings)
    if not np.array_equal(evaluation.pump_values, np.asarray(grid.pump_values, dtype=float)):
        raise ValueError("evaluation was computed for a different pump grid")
    return evaluation


def _block_optimum(
    evaluation: PumpGridEvaluation,
    label: str,
    pump_index: int,
    sampling_rate: float,
    k_days: int,
    secret_bits: Optional[float],
) -> BlockOptimum:
    pairs, qbers, signals = evaluation.accumulated(label, k_days)
    contribution = evaluation.contributions[label][pump_index]
    stats = BlockStats(
        label=label,
        pairs_B=float(pairs[pump_index]),
        qber_Q=float(qbers[pump_index]),
        signals_N=signals,
        sample_m=float(pairs[pump_index]) * sampling_rate,
    )
    return BlockOptimum(
        label=label,
        pump_power=float(evaluation.pump_values[pump_index]),
        sampling_rate=sampling_rate,
        stats=stats,
        mean_p_succ=contribution.mean_p_succ,
        mean_fidelity=contribution.mean_fidelity,
        secret_bits=secret_bits,
    )


def optimize_blockwise(
    scenario: GeoScenario,
    optics: OpticalParams,
    profiles: Sequence[TimeProfile],
    grid: SearchGrid,
    sec: SecurityParams,
    k_days: int,
    settings: LinkSettings = LinkSettings(),
    evaluation: Optional[PumpGridEvaluation] = None,
) -> OptimizationResult:
    """Maximise each block's clamped key independently over (pump, sampling rate)."""
    evaluation = _resolve_evaluation(evaluation, scenario, optics, profiles, grid, settings)
    rates = grid.sampling_rates(k_days)
    blocks = []
    evaluations = 0
    for label in evaluation.labels:
        pairs, qbers, _ = evaluation.accumulated(label, k_days)
        samples = pairs[:, None] * rates[None, :]
        bits = np.asarray(key_len_nonblockwise(pairs[:, None] - samples, samples, qbers[:, None], sec))
        evaluations += bits.size
        pump_index, rate_index = np.unravel_index(int(np.argmax(bits)), bits.shape)
        best = float(bits[pump_index, rate_index])
        blocks.append(_block_optimum(evaluation, label, int(pump_index), float(rates[rate_index]), k_days, best))

    total_bits = sum(block.secret_bits or 0.0 for block in blocks)
    signals = sum(block.stats.signals_N for block in blocks)
    logger.debug(f"Blockwise optimum for k={k_days}: {total_bits:.6g} bits")
    return OptimizationResult(
        per_block_pump={b.label: b.pump_power for b in blocks},
        per_block_sampling={b.label: b.sampling_rate for b in blocks},
        key=KeyResult.from_bits(total_bits, signals, Scheme.BLOCKWISE),
        evaluations=evaluations,
        blocks=tuple(blocks),
    )


def optimize_nonblockwise(
    scenario: GeoScenario,
    optics: OpticalParams,
    profiles: Sequence[TimeProfile],
    grid: SearchGrid,
    sec: SecurityParams,
    k_days: int,
    settings: LinkSettings = LinkSettings(),
    evaluation: Optional[PumpGridEvaluation] = None,
) -> OptimizationResult:
    """Maximise the pooled key over one pump per block and a shared sampling rate.

    The search array has one pump axis per block followed by the rate axis.
    """
    evaluation = _resolve_evaluation(evaluation, scenario, optics, profiles, grid, settings)
    rates = grid.sampling_rates(k_days)
    labels = evaluation.labels
    axes = len(labels)

    total_pairs = np.zeros((1,) * (axes + 1))
    weighted_errors = np.zeros((1,) * (axes + 1))
    for axis, label in enumerate(labels):
        pairs, qbers, _ = evaluation.accumulated(label, k_days)
        shape = [1] * (axes + 1)
        shape[axis] = len(pairs)
        total_pairs = total_pairs + pairs.reshape(shape)
        weighted_errors = weighted_errors + (pairs * qbers).reshape(shape)
    pooled = np.divide(weighted_errors, total_pairs, out=np.zeros_like(total_pairs), where=total_pairs > 0)
    samples = total_pairs * rates.reshape((1,) * axes + (-1,))
    bits = np.asarray(key_len_nonblockwise(total_pairs - samples, samples, pooled, sec))

    index = np.unravel_index(int(np.argmax(bits)), bits.shape)
    rate = float(rates[index[-1]])
    blocks = tuple(
        _block_optimum(evaluation, label, int(index[axis]), rate, k_days, None) for axis, label in enumerate(labels)
    )
    total_bits = float(bits[index])
    signals = sum(block.stats.signals_N for block in blocks)
    logger.debug(f"Non-blockwise optimum for k={k_days}: {total_bits:.6g} bits")
    return OptimizationResult(
        per_block_pump={b.label: b.pump_power for b in blocks},
        per_block_sampling={b.label: rate for b in blocks},
        key=KeyResult.from_bits(total_bits, signals, Scheme.NONBLOCKWISE),
        evaluations=int(bits.size),
        blocks=blocks,
    )


def _blocks_at(
    evaluation: PumpGridEvaluation, per_block_pump: Mapping[str, float], k_days: int
) -> list[BlockStats]:
    stats = []
    for label in evaluation.labels:
        index = evaluation.pump_index(per_block_pump[label])
        pairs, qbers, signals = evaluation.accumulated(label, k_days)
        stats.append(
            BlockStats(label=label, pairs_B=float(pairs[index]), qber_Q=float(qbers[index]), signals_N=signals)
        )
    return stats


def blockwise_bits(
    evaluation: PumpGridEvaluation,
    per_block_pump: Mapping[str, float],
    per_block_sampling: Mapping[str, float],
    sec: SecurityParams,
    k_days: int,
) -> float:
    """Blockwise key at one fixed operating point, computed block by block."""
    blocks = [
        BlockStats(
            label=b.label,
            pairs_B=b.pairs_B,
            qber_Q=b.qber_Q,
            signals_N=b.signals_N,
            sample_m=b.pairs_B * per_block_sampling[b.label],
        )
        for b in _blocks_at(evaluation, per_block_pump, k_days)
    ]
    return key_len_blockwise(blocks, sec)


def nonblockwise_bits(
    evaluation: PumpGridEvaluation,
    per_block_pump: Mapping[str, float],
    sampling_rate: float,
    sec: SecurityParams,
    k_days: int,
) -> float:
    """Non-blockwise key at one fixed operating point."""
    blocks = _blocks_at(evaluation, per_block_pump, k_days)
    return key_len_pooled(blocks, sampling_rate * sum(b.pairs_B for b in blocks), sec)


def _relative_or_none(rate_block: float, rate_nonblock: float) -> Optional[float]:
    try:
        return relative_difference(rate_block, rate_nonblock)
    except UndefinedRelativeDifferenceError:
        return None


def compare_schemes(
    scenario: GeoScenario,
    optics: OpticalParams,
    profiles: Sequence[TimeProfile],
    grid: SearchGrid,
    sec: SecurityParams,
    days_list: Sequence[int] = DEFAULT_DAYS,
    settings: LinkSettings = LinkSettings(),
    evaluation: Optional[PumpGridEvaluation] = None,
) -> list[ComparisonRow]:
    """Optimise both schemes for every accumulation period in ``days_list``.

    Asymptotic rates are taken at each scheme's finite-key optimum and share
    its bits-per-attempted-signal normalisation.
    """
    if not days_list:
        raise ValueError("days_list must not be empty")
    evaluation = _resolve_evaluation(evaluation, scenario, optics, profiles, grid, settings)

    rows = []
    for k_days in days_list:
        block = optimize_blockwise(scenario, optics, profiles, grid, sec, k_days, settings, evaluation)
        nonblock = optimize_nonblockwise(scenario, optics, profiles, grid, sec, k_days, settings, evaluation)
        signals = block.signals_N
        asym_block = asymptotic_bits_blockwise([b.stats for b in block.blocks])
        asym_nonblock = asymptotic_bits_pooled([b.stats for b in nonblock.blocks])
        rate_block_asym = asym_block / signals if signals > 0 else 0.0
        rate_nonblock_asym = asym_nonblock / signals if signals > 0 else 0.0
        rows.append(
            ComparisonRow(
                k_days=k_days,
                rate_block=block.key.effective_rate,
                rate_nonblock=nonblock.key.effective_rate,
                rate_block_asymptotic=rate_block_asym,
                rate_nonblock_asymptotic=rate_nonblock_asym,
                relative_diff=_relative_or_none(block.key.effective_rate, nonblock.key.effective_rate),
                bits_block=block.key.secret_bits,
                bits_nonblock=nonblock.key.secret_bits,
                bits_per_day_diff=(block.key.secret_bits - nonblock.key.secret_bits) / k_days,
                relative_diff_asymptotic=_relative_or_none(rate_block_asym, rate_nonblock_asym),
                blockwise=block,
                nonblockwise=nonblock,
            )
        )
        logger.debug(
            f"k={k_days}: blockwise {block.key.effective_rate:.6g}, "
            f"non-blockwise {nonblock.key.effective_rate:.6g}"
        )
    return rows


def _pass_means(
    geometry: Optional[PassGeometry],
    optics: OpticalParams,
    profile: TimeProfile,
    pump_power: float,
    idealized: bool,
    settings: LinkSettings,
) -> tuple[float, float]:
    if geometry is None or pump_power == 0.0:
        return 0.0, 1.0
    eta1, eta2 = pass_transmittances(geometry, optics, profile)
    contribution = link_aggregate(
        TimeOfDay(profile.label).value,
        emission_for(pump_power, not idealized),
        eta1,
        eta2,
        profile.dark_click_prob,
        geometry,
        settings.source_rate_hz,
        settings.sifting,
    )
    return contribution.mean_p_succ, contribution.mean_fidelity


def idealization_check(
    scenario: GeoScenario,
    optics: OpticalParams,
    profiles: Sequence[TimeProfile],
    grid: SearchGrid,
    sec: SecurityParams,
    k_days: int = 1,
    settings: LinkSettings = LinkSettings(),
) -> list[IdealizationRow]:
    """Pass-averaged p_succ and fidelity with and without two-photon emission.

    Each block is evaluated at its blockwise-optimal pump for the configured source.
    """
    optimum = optimize_blockwise(scenario, optics, profiles, grid, sec, k_days, settings)
    geometry = _contact_geometry(scenario, settings.step_s)
    rows = []
    for profile in profiles:
        label = TimeOfDay(profile.label).value
        pump = optimum.per_block_pump[label]
        p_full, f_full = _pass_means(geometry, optics, profile, pump, False, settings)
        p_ideal, f_ideal = _pass_means(geometry, optics, profile, pump, True, settings)
        rows.append(
            IdealizationRow(
                label=label,
                pump_power=pump,
                p_succ_full=p_full,
                p_succ_idealized=p_ideal,
                fidelity_full=f_full,
                fidelity_idealized=f_ideal,
            )
        )
    return rows
