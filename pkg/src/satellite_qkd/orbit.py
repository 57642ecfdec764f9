"""Contact geometry for a satellite sweeping over two equatorial ground stations.

The satellite flies a circular, prograde, equatorial orbit. Both stations sit
on the equator, separated by ``ground_distance_km`` of arc. A pair can only be
delivered while the satellite is above the elevation threshold of *both*
stations, which happens once per orbit relative to the rotating Earth.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import raise_for_violations


class EmptyPassError(Exception):
    """Raised when per-second geometry is requested for a zero-length contact."""

    pass


@dataclass(frozen=True)
class GeoScenario:
    """Orbital constants and day/night schedule for one satellite and station pair."""

    altitude_km: float = 500.0
    ground_distance_km: float = 600.0
    elevation_threshold_deg: float = 20.0
    earth_radius_km: float = 6371.0
    gravitational_parameter_km3s2: float = 398600.4418
    sidereal_day_s: float = 86164.1
    night_window_s: float = 36000.0
    day_window_s: float = 50400.0
    orbit_period_override_s: Optional[float] = None

    def __post_init__(self) -> None:
        raise_for_violations("GeoScenario", self.violations())

    def violations(self) -> list[str]:
        """List every violated invariant as "<field>: <problem>"."""
        problems = []
        if not self.altitude_km > 0:
            problems.append(f"altitude_km: must be > 0, got {self.altitude_km}")
        if not 0 < self.elevation_threshold_deg < 90:
            problems.append(f"elevation_threshold_deg: must be in (0, 90), got {self.elevation_threshold_deg}")
        if not self.ground_distance_km >= 0:
            problems.append(f"ground_distance_km: must be >= 0, got {self.ground_distance_km}")
        if not self.earth_radius_km > 0:
            problems.append(f"earth_radius_km: must be > 0, got {self.earth_radius_km}")
        if not self.gravitational_parameter_km3s2 > 0:
            problems.append(
                f"gravitational_parameter_km3s2: must be > 0, got {self.gravitational_parameter_km3s2}"
            )
        if not self.sidereal_day_s > 0:
            problems.append(f"sidereal_day_s: must be > 0, got {self.sidereal_day_s}")
        if not self.night_window_s >= 0:
            problems.append(f"night_window_s: must be >= 0, got {self.night_window_s}")
        if not self.day_window_s >= 0:
            problems.append(f"day_window_s: must be >= 0, got {self.day_window_s}")
        if self.orbit_period_override_s is not None and not self.orbit_period_override_s > 0:
            problems.append(f"orbit_period_override_s: must be > 0, got {self.orbit_period_override_s}")
        return problems

    @property
    def orbit_radius_km(self) -> float:
        return self.earth_radius_km + self.altitude_km

    @property
    def elevation_threshold_rad(self) -> float:
        return math.radians(self.elevation_threshold_deg)

    @property
    def station_separation_rad(self) -> float:
        """Earth-central angle between the two stations."""
        return self.ground_distance_km / self.earth_radius_km


@dataclass(frozen=True)
class LinkSample:
    """Satellite-to-station geometry at one instant of a pass."""

    t_s: float
    gamma1_rad: float
    gamma2_rad: float
    slant1_km: float
    slant2_km: float
    elev1_rad: float
    elev2_rad: float


@dataclass(frozen=True)
class PassGeometry:
    """Ordered link samples covering one contact window.

    Each sample stands for ``step_s`` seconds of the pass, so
    ``len(samples) * step_s == duration_s``.
    """

    samples: tuple[LinkSample, ...]
    duration_s: float
    step_s: float

    def column(self, name: str) -> np.ndarray:
        """Return one LinkSample field across the pass as an array."""
        return np.array([getattr(sample, name) for sample in self.samples], dtype=float)

    @property
    def slant_km(self) -> tuple[np.ndarray, np.ndarray]:
        return self.column("slant1_km"), self.column("slant2_km")

    @property
    def elevation_rad(self) -> tuple[np.ndarray, np.ndarray]:
        return self.column("elev1_rad"), self.column("elev2_rad")


@dataclass(frozen=True)
class PassCounts:
    night_passes: int
    day_passes: int

    def for_label(self, label: str) -> int:
        return {"night": self.night_passes, "day": self.day_passes}[label]


@dataclass(frozen=True)
class ContactSummary:
    """Everything the ``contact`` command reports for one scenario."""

    orbital_period_s: float
    max_central_angle_rad: float
    contact_length_s: float
    passes: PassCounts


def orbital_period(scenario: GeoScenario) -> float:
    """Orbital period in seconds (Kepler's third law unless overridden)."""
    if scenario.orbit_period_override_s is not None:
        return float(scenario.orbit_period_override_s)
    r_o = scenario.orbit_radius_km
    return 2.0 * math.pi * math.sqrt(r_o**3 / scenario.gravitational_parameter_km3s2)


def max_central_angle(scenario: GeoScenario) -> float:
    """Largest Earth-central angle at which a station still sees the satellite above threshold."""
    theta = scenario.elevation_threshold_rad
    ratio = scenario.earth_radius_km / scenario.orbit_radius_km
    return math.acos(ratio * math.cos(theta)) - theta


def relative_angular_rate(scenario: GeoScenario) -> float:
    """Angular rate (rad/s) of the sub-satellite point over the rotating Earth."""
    return 2.0 * math.pi / orbital_period(scenario) - 2.0 * math.pi / scenario.sidereal_day_s


def contact_length(scenario: GeoScenario) -> float:
    """Seconds per pass during which both stations see the satellite above threshold.

    Returns 0 when the stations are too far apart to share a visibility arc.
    """
    arc = 2.0 * max_central_angle(scenario) - scenario.station_separation_rad
    return max(0.0, arc) / relative_angular_rate(scenario)


def pass_counts(scenario: GeoScenario) -> PassCounts:
    """Passes per night and day window, with one pass anchored at each window start."""
    period = orbital_period(scenario)
    return PassCounts(
        night_passes=math.floor(scenario.night_window_s / period) + 1,
        day_passes=math.floor(scenario.day_window_s / period) + 1,
    )


def station_view(scenario: GeoScenario, gamma_rad: float) -> tuple[float, float]:
    """Slant range (km) and elevation (rad) seen from a station at central angle ``gamma_rad``."""
    r_e = scenario.earth_radius_km
    r_o = scenario.orbit_radius_km
    gamma = abs(gamma_rad)
    slant = math.sqrt(r_e**2 + r_o**2 - 2.0 * r_e * r_o * math.cos(gamma))
    if gamma == 0.0:
        return scenario.altitude_km, math.pi / 2.0
    elevation = math.atan2(math.cos(gamma) - r_e / r_o, math.sin(gamma))
    return slant, elevation


def link_geometry(scenario: GeoScenario, step_s: float = 1.0) -> PassGeometry:
    """Sample the pass at (roughly) ``step_s`` resolution.

    The sub-satellite point moves from the window's western edge to its eastern
    edge at the relative angular rate; stations sit at -Δ/2 and +Δ/2 around the
    midpoint. The window is split into ``ceil(duration / step_s)`` equal
    intervals and each sample sits at an interval midpoint.

    Raises:
        EmptyPassError: If the contact length is zero
        ValueError: If step_s is not positive
    """
    if not step_s > 0:
        raise ValueError(f"step_s must be > 0, got {step_s}")
    duration = contact_length(scenario)
    if duration <= 0.0:
        raise EmptyPassError(
            f"No common visibility for altitude {scenario.altitude_km} km "
            f"and ground distance {scenario.ground_distance_km} km"
        )

    count = max(1, math.ceil(duration / step_s))
    step = duration / count
    rate = relative_angular_rate(scenario)
    half_separation = scenario.station_separation_rad / 2.0
    start = -(2.0 * max_central_angle(scenario) - scenario.station_separation_rad) / 2.0

    samples = []
    for k in range(count):
        t = (k + 0.5) * step
        x = start + rate * t
        gamma1 = abs(x + half_separation)
        gamma2 = abs(x - half_separation)
        slant1, elev1 = station_view(scenario, gamma1)
        slant2, elev2 = station_view(scenario, gamma2)
        samples.append(LinkSample(t, gamma1, gamma2, slant1, slant2, elev1, elev2))
    return PassGeometry(samples=tuple(samples), duration_s=duration, step_s=step)


def summarize_contact(scenario: GeoScenario) -> ContactSummary:
    """Collect period, visibility angle, contact length and pass counts."""
    return ContactSummary(
        orbital_period_s=orbital_period(scenario),
        max_central_angle_rad=max_central_angle(scenario),
        contact_length_s=contact_length(scenario),
        passes=pass_counts(scenario),
    )
