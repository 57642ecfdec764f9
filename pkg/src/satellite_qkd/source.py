"""SPDC dual-rail entanglement source photon-number statistics."""

from dataclasses import dataclass

from .errors import raise_for_violations

# Above this mean photon number the n <= 2 truncation stops being accurate.
MAX_PUMP_POWER = 0.2


@dataclass(frozen=True)
class SourceParams:
    """Pump setting of the source.

    ``pump_power`` is the mean photon number per mode (N_s). With ``idealized``
    set, the two-photon sector is removed and the rest renormalised.
    """

    pump_power: float
    idealized: bool = False

    def __post_init__(self) -> None:
        problems = []
        if not 0.0 <= self.pump_power <= MAX_PUMP_POWER:
            problems.append(f"pump_power: must be in [0, {MAX_PUMP_POWER}], got {self.pump_power}")
        raise_for_violations("SourceParams", problems)


@dataclass(frozen=True)
class EmissionDistribution:
    """Probabilities of the vacuum, Bell-pair and two-photon sectors per attempt."""

    p_vacuum: float
    p_pair: float
    p_two_photon: float

    def as_tuple(self) -> tuple[float, float, float]:
        return self.p_vacuum, self.p_pair, self.p_two_photon


@dataclass(frozen=True)
class TwoPhotonPlacement:
    """Photon counts per rail (a, b) at each station for one two-photon ket."""

    station1: tuple[int, int]
    station2: tuple[int, int]
    weight: float


_TWO_PHOTON_PLACEMENTS = (
    TwoPhotonPlacement(station1=(2, 0), station2=(0, 2), weight=1.0 / 3.0),
    TwoPhotonPlacement(station1=(1, 1), station2=(1, 1), weight=1.0 / 3.0),
    TwoPhotonPlacement(station1=(0, 2), station2=(2, 0), weight=1.0 / 3.0),
)


def photon_number_probability(n: int, pump_power: float) -> float:
    """Unnormalised probability of an n-photon term in each pair of modes."""
    return (n + 1) * pump_power**n / (pump_power + 1.0) ** (n + 2)


def normalization_squared(pump_power: float) -> float:
    """N_0^2 = (N_s + 1)^4 / (6 N_s^2 + 4 N_s + 1) for the state truncated at two photons."""
    return (pump_power + 1.0) ** 4 / (6.0 * pump_power**2 + 4.0 * pump_power + 1.0)


def emission_distribution(params: SourceParams) -> EmissionDistribution:
    """Sector probabilities renormalised over n in {0, 1, 2}."""
    raw = [photon_number_probability(n, params.pump_power) for n in range(3)]
    total = sum(raw)
    p0, p1, p2 = (value / total for value in raw)
    if params.idealized:
        return EmissionDistribution(p_vacuum=p0 / (1.0 - p2), p_pair=p1 / (1.0 - p2), p_two_photon=0.0)
    return EmissionDistribution(p_vacuum=p0, p_pair=p1, p_two_photon=p2)


def emission_for(pump_power: float, two_photon_enabled: bool) -> EmissionDistribution:
    """Emission statistics for the full source or its idealized variant."""
    return emission_distribution(SourceParams(pump_power=pump_power, idealized=not two_photon_enabled))


def two_photon_configurations() -> list[TwoPhotonPlacement]:
    """The three equally weighted placements of the two-photon sector."""
    return list(_TWO_PHOTON_PLACEMENTS)
