"""Downlink transmittance and herald statistics of the dual-downlink detection process.

Event model per source attempt:

1. An emission sector is drawn (vacuum, Bell pair, or one of the three
   two-photon placements).
2. Every photon independently triggers its destination detector with the
   transmittance of its downlink.
3. Each of the four threshold detectors (rails a/b at both stations) dark-clicks
   independently with probability P_d.
4. A station heralds iff exactly one of its two detectors clicks; the attempt
   succeeds iff both stations herald.
5. A success is good only for a Bell pair whose two photons were both detected
   while neither idle detector dark-clicked. Every other success is bad and
   contributes fidelity 1/4.

``herald_stats`` evaluates this model in closed form; ``mc_herald_stats``
simulates it trial by trial and serves as its oracle.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from .errors import raise_for_violations
from .orbit import PassGeometry
from .source import EmissionDistribution, SourceParams, emission_distribution, two_photon_configurations

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Photon counts on (rail a, rail b) at each station for the non-two-photon sectors.
_VACUUM = ((0, 0), (0, 0))
_PAIR = ((1, 0), (1, 0))


class TimeOfDay(str, Enum):
    """Block labels used by the post-processing schemes."""

    NIGHT = "night"
    DAY = "day"


@dataclass(frozen=True)
class OpticalParams:
    """Transmitter beam, receiver aperture and detector efficiency."""

    wavelength_nm: float = 810.0
    beam_waist_m: float = 0.15
    receiver_radius_m: float = 0.5
    detector_efficiency: float = 0.7

    def __post_init__(self) -> None:
        problems = []
        for name in ("wavelength_nm", "beam_waist_m", "receiver_radius_m"):
            if not getattr(self, name) > 0:
                problems.append(f"{name}: must be > 0, got {getattr(self, name)}")
        if not 0 < self.detector_efficiency <= 1:
            problems.append(f"detector_efficiency: must be in (0, 1], got {self.detector_efficiency}")
        raise_for_violations("OpticalParams", problems)

    @property
    def rayleigh_range_m(self) -> float:
        return math.pi * self.beam_waist_m**2 / (self.wavelength_nm * 1e-9)


@dataclass(frozen=True)
class TimeProfile:
    """Sky conditions for one time-of-day block."""

    label: TimeOfDay
    dark_click_prob: float
    zenith_transmittance: float = 0.5

    def __post_init__(self) -> None:
        problems = []
        if not 0 <= self.dark_click_prob < 0.5:
            problems.append(f"dark_click_prob: must be in [0, 0.5), got {self.dark_click_prob}")
        if not 0 < self.zenith_transmittance <= 1:
            problems.append(f"zenith_transmittance: must be in (0, 1], got {self.zenith_transmittance}")
        raise_for_violations("TimeProfile", problems)


@dataclass(frozen=True)
class ChannelPoint:
    """Herald statistics of one link configuration."""

    p_succ: float
    fidelity: float
    qber: float


@dataclass(frozen=True)
class StandardErrors:
    p_succ: float
    fidelity: float
    qber: float


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo budget and seed for the herald oracle."""

    trials: int = 1_000_000
    seed: int = 7
    chunk_size: int = 65_536

    def __post_init__(self) -> None:
        problems = []
        if not self.trials >= 1:
            problems.append(f"trials: must be >= 1, got {self.trials}")
        if not 0 <= self.seed < 2**64:
            problems.append(f"seed: must be a 64-bit unsigned integer, got {self.seed}")
        if not self.chunk_size >= 1:
            problems.append(f"chunk_size: must be >= 1, got {self.chunk_size}")
        raise_for_violations("McConfig", problems)


@dataclass(frozen=True)
class BlockContribution:
    """Raw-key yield of a single pass in one time-of-day block."""

    label: str
    pairs_B: float
    signals_N: float
    qber_Q: float
    mean_p_succ: float
    mean_fidelity: float
    duration_s: float


def transmittance(
    slant_km: ArrayLike,
    elevation_rad: ArrayLike,
    optics: OpticalParams,
    profile: TimeProfile,
) -> ArrayLike:
    """Probability that a photon sent down one link triggers its detector.

    Gaussian-beam collection by a circular aperture (quadratic in range in the
    far field) times airmass-scaled atmospheric transmittance (exponential in
    the aerial path) times detector efficiency.
    """
    distance_m = np.asarray(slant_km, dtype=float) * 1e3
    beam_radius = optics.beam_waist_m * np.sqrt(1.0 + (distance_m / optics.rayleigh_range_m) ** 2)
    collected = -np.expm1(-2.0 * optics.receiver_radius_m**2 / beam_radius**2)
    airmass = 1.0 / np.sin(np.asarray(elevation_rad, dtype=float))
    atmosphere = profile.zenith_transmittance**airmass
    eta = optics.detector_efficiency * collected * atmosphere
    return float(eta) if np.ndim(eta) == 0 else eta


def _station_herald(counts: tuple[int, int], eta: ArrayLike, dark: float) -> ArrayLike:
    """Probability that exactly one of a station's two detectors clicks."""
    click_a = 1.0 - (1.0 - eta) ** counts[0] * (1.0 - dark)
    click_b = 1.0 - (1.0 - eta) ** counts[1] * (1.0 - dark)
    return click_a * (1.0 - click_b) + click_b * (1.0 - click_a)


def herald_probabilities(
    emission: EmissionDistribution,
    eta1: ArrayLike,
    eta2: ArrayLike,
    dark: float,
) -> tuple[ArrayLike, ArrayLike]:
    """Success and good-success probabilities per attempt (array-friendly)."""
    eta1 = np.asarray(eta1, dtype=float)
    eta2 = np.asarray(eta2, dtype=float)
    sectors = [(emission.p_vacuum, _VACUUM), (emission.p_pair, _PAIR)]
    sectors.extend(
        (emission.p_two_photon * placement.weight, (placement.station1, placement.station2))
        for placement in two_photon_configurations()
    )
    p_succ = sum(
        weight * _station_herald(station1, eta1, dark) * _station_herald(station2, eta2, dark)
        for weight, (station1, station2) in sectors
    )
    p_good = emission.p_pair * eta1 * eta2 * (1.0 - dark) ** 2
    return p_succ, p_good


def fidelity_from_heralds(p_succ: ArrayLike, p_good: ArrayLike) -> ArrayLike:
    """F = 1/4 + 3/4 * p_good / p_succ, or 1 where nothing heralds."""
    with np.errstate(divide="ignore", invalid="ignore"):
        fidelity = 0.25 + 0.75 * np.asarray(p_good) / np.asarray(p_succ)
    return np.where(np.asarray(p_succ) > 0, fidelity, 1.0)


def herald_stats(emission: EmissionDistribution, eta1: float, eta2: float, dark: float) -> ChannelPoint:
    """Closed-form success probability, fidelity and QBER of delivered pairs.

    By convention a link that never heralds reports fidelity 1 and QBER 0.
    """
    p_succ, p_good = herald_probabilities(emission, eta1, eta2, dark)
    fidelity = float(fidelity_from_heralds(p_succ, p_good))
    return ChannelPoint(p_succ=float(p_succ), fidelity=fidelity, qber=(1.0 - fidelity) / 2.0)


_PLACEMENT_TABLE = np.array(
    [list(p.station1) + list(p.station2) for p in two_photon_configurations()],
    dtype=np.int64,
)


def _simulate_chunk(
    emission: EmissionDistribution,
    eta1: float,
    eta2: float,
    dark: float,
    size: int,
    seed: int,
    chunk: int,
) -> tuple[int, int]:
    """Run ``size`` literal trials; return (successes, good successes)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))
    rows = np.arange(size)

    edges = np.array([emission.p_vacuum, emission.p_vacuum + emission.p_pair])
    sector = np.searchsorted(edges, rng.random(size), side="right")
    rail = rng.integers(0, 2, size)
    placement = rng.integers(0, len(_PLACEMENT_TABLE), size)

    # Columns: station-1 rail a, station-1 rail b, station-2 rail a, station-2 rail b.
    photons = np.zeros((size, 4), dtype=np.int64)
    pair = sector == 1
    photons[rows[pair], rail[pair]] = 1
    photons[rows[pair], 2 + rail[pair]] = 1
    two = sector == 2
    photons[two] = _PLACEMENT_TABLE[placement[two]]

    triggered = rng.binomial(photons, np.array([eta1, eta1, eta2, eta2])) > 0
    darks = rng.random((size, 4)) < dark
    clicks = triggered | darks

    success = (clicks[:, 0] ^ clicks[:, 1]) & (clicks[:, 2] ^ clicks[:, 3])
    good = (
        success
        & pair
        & triggered[rows, rail]
        & triggered[rows, 2 + rail]
        & ~darks[rows, 1 - rail]
        & ~darks[rows, 3 - rail]
    )
    return int(success.sum()), int(good.sum())


def mc_herald_stats(
    emission: EmissionDistribution,
    eta1: float,
    eta2: float,
    dark: float,
    cfg: McConfig,
    threads: Optional[int] = None,
) -> tuple[ChannelPoint, StandardErrors]:
    """Brute-force estimate of ``herald_stats`` with standard errors.

    Trials are split into fixed-size chunks, each with its own generator keyed
    by (seed, chunk index), so the output only depends on (seed, trials).
    Standard errors are floored at one count's worth of resolution so that
    zero- and single-event estimates are not reported as exact.
    """
    sizes = [cfg.chunk_size] * (cfg.trials // cfg.chunk_size)
    if cfg.trials % cfg.chunk_size:
        sizes.append(cfg.trials % cfg.chunk_size)
    jobs = [(emission, eta1, eta2, dark, size, cfg.seed, chunk) for chunk, size in enumerate(sizes)]

    if threads == 1 or len(jobs) == 1:
        tallies = [_simulate_chunk(*job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            tallies = list(executor.map(lambda job: _simulate_chunk(*job), jobs))

    successes = sum(s for s, _ in tallies)
    goods = sum(g for _, g in tallies)
    trials = cfg.trials
    logger.debug(f"Monte Carlo: {successes} heralds ({goods} good) in {trials} trials")

    p_succ = successes / trials
    se_p = math.sqrt(max(p_succ * (1.0 - p_succ), 1.0 / trials) / trials)
    if successes == 0:
        fidelity, se_f = 1.0, 0.75
    else:
        good_fraction = goods / successes
        fidelity = 0.25 + 0.75 * good_fraction
        se_f = 0.75 * math.sqrt(max(good_fraction * (1.0 - good_fraction), 1.0 / successes) / successes)
    point = ChannelPoint(p_succ=p_succ, fidelity=fidelity, qber=(1.0 - fidelity) / 2.0)
    return point, StandardErrors(p_succ=se_p, fidelity=se_f, qber=se_f / 2.0)


def pass_transmittances(
    geometry: PassGeometry, optics: OpticalParams, profile: TimeProfile
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample transmittance of both downlinks over a pass."""
    slant1, slant2 = geometry.slant_km
    elev1, elev2 = geometry.elevation_rad
    return (
        np.asarray(transmittance(slant1, elev1, optics, profile)),
        np.asarray(transmittance(slant2, elev2, optics, profile)),
    )


def aggregate_samples(
    label: str,
    p_succ: np.ndarray,
    fidelity: np.ndarray,
    step_s: float,
    duration_s: float,
    source_rate_hz: float,
    sifting: bool = False,
) -> BlockContribution:
    """Fold per-sample herald statistics into one pass's block contribution."""
    qber = (1.0 - fidelity) / 2.0
    weight = float(np.sum(p_succ))
    pairs = source_rate_hz * weight * step_s
    if sifting:
        pairs *= 0.5
    qber_Q = float(np.sum(p_succ * qber)) / weight if weight > 0 else 0.0
    return BlockContribution(
        label=label,
        pairs_B=pairs,
        signals_N=source_rate_hz * duration_s,
        qber_Q=qber_Q,
        mean_p_succ=float(np.mean(p_succ)),
        mean_fidelity=float(np.mean(fidelity)),
        duration_s=duration_s,
    )


def pass_aggregate(
    geometry: PassGeometry,
    source: SourceParams,
    optics: OpticalParams,
    profile: TimeProfile,
    source_rate_hz: float,
    sifting: bool = False,
) -> BlockContribution:
    """Delivered pairs, attempted signals and pair-weighted QBER for one pass.

    Raises:
        ValueError: If the geometry has no samples
    """
    if not geometry.samples:
        raise ValueError("pass_aggregate requires a non-empty pass geometry")
    eta1, eta2 = pass_transmittances(geometry, optics, profile)
    return link_aggregate(
        TimeOfDay(profile.label).value,
        emission_distribution(source),
        eta1,
        eta2,
        profile.dark_click_prob,
        geometry,
        source_rate_hz,
        sifting,
    )


def link_aggregate(
    label: str,
    emission: EmissionDistribution,
    eta1: np.ndarray,
    eta2: np.ndarray,
    dark: float,
    geometry: PassGeometry,
    source_rate_hz: float,
    sifting: bool = False,
) -> BlockContribution:
    """Same as ``pass_aggregate`` for transmittances already computed over ``geometry``."""
    p_succ, p_good = herald_probabilities(emission, eta1, eta2, dark)
    p_succ = np.broadcast_to(p_succ, np.shape(eta1))
    fidelity = fidelity_from_heralds(p_succ, p_good)
    return aggregate_samples(label, p_succ, fidelity, geometry.step_s, geometry.duration_s, source_rate_hz, sifting)
