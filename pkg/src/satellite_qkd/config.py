"""Configuration module using dataclasses and environment variables.

Configuration files are JSON objects; they are read with ``yaml.safe_load`` so
commented YAML files are accepted too. Every key is optional (defaults are the
published satellite scenario) and unknown keys are rejected.
"""

import logging
import os
import sys
from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Any, Optional, Union, get_args, get_origin, get_type_hints

import yaml

from .channel import McConfig, OpticalParams, TimeOfDay, TimeProfile
from .errors import InvalidParameterError
from .keyrate import SecurityParams
from .optimize import DEFAULT_DAYS, LinkSettings, SearchGrid
from .orbit import GeoScenario
from .source import MAX_PUMP_POWER


class ConfigError(Exception):
    """Base configuration error."""

    pass


class ConfigValidationError(ConfigError):
    """Raised with every invariant violation found in a configuration."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("Invalid configuration: " + "; ".join(self.violations))


@dataclass
class GeoConfig:
    """Orbit, station and schedule configuration."""

    altitude_km: float = 500.0
    ground_distance_km: float = 600.0
    elevation_threshold_deg: float = 20.0
    earth_radius_km: float = 6371.0
    gravitational_parameter_km3s2: float = 398600.4418
    sidereal_day_s: float = 86164.1
    night_window_s: float = 36000.0
    day_window_s: float = 50400.0
    orbit_period_override_s: Optional[float] = None
    step_s: float = 1.0


@dataclass
class OpticsConfig:
    """Transmitter and receiver optics."""

    wavelength_nm: float = 810.0
    beam_waist_m: float = 0.15
    receiver_radius_m: float = 0.5
    detector_efficiency: float = 0.7


@dataclass
class ProfileConfig:
    """Background and atmosphere for one time of day."""

    dark_click_prob: float = 3e-6
    zenith_transmittance: float = 0.5


@dataclass
class ProfilesConfig:
    night: ProfileConfig = field(default_factory=ProfileConfig)
    day: ProfileConfig = field(default_factory=lambda: ProfileConfig(dark_click_prob=3e-3))


@dataclass
class SecurityConfig:
    """Finite-key security parameters and error-correction leakage."""

    eps_sec: float = 1e-9
    eps_cor: float = 1e-9
    ec_efficiency: float = 1.0
    ec_uses_deviation: bool = True


@dataclass
class GridConfig:
    """Search grid densities (sampling rates are divided by the number of days)."""

    pump_points: int = 100
    pump_min: float = 1e-3
    pump_max: float = 0.1
    include_zero_pump: bool = True
    rate_points: int = 30
    rate_min: float = 5e-4
    rate_max: float = 0.3


@dataclass
class MonteCarloConfig:
    """Budget and validation grid for the Monte Carlo herald oracle."""

    trials: int = 1_000_000
    seed: int = 7
    chunk_size: int = 65_536
    pump_values: list[float] = field(default_factory=lambda: [0.01, 0.05, 0.1])
    transmittances: list[float] = field(default_factory=lambda: [1e-4, 1e-3, 1e-2])
    dark_click_probs: list[float] = field(default_factory=lambda: [3e-6, 3e-3])
    max_standard_errors: float = 3.0


@dataclass
class MatrixConfig:
    """Scenario matrix; period overrides are empty or one per altitude."""

    altitudes_km: list[float] = field(default_factory=lambda: [500.0, 800.0, 1000.0])
    distances_km: list[float] = field(default_factory=lambda: [600.0, 1200.0, 1800.0])
    period_overrides_s: list[float] = field(default_factory=list)


@dataclass
class LoggerConfig:
    """Logger configuration; records always go to standard error."""

    log_file: Optional[str] = None
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


@dataclass
class WorkersConfig:
    """Workers configuration; ``None`` uses the available parallelism."""

    count: Optional[int] = None


_LOG_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _coerce(value: Any, hint: Any, path: str, errors: list[str]) -> Any:
    """Check ``value`` against a field annotation, returning it in the field's type.

    Mismatches are appended to ``errors`` and the raw value is returned.
    """
    origin = get_origin(hint)
    if origin is Union:
        args = [arg for arg in get_args(hint) if arg is not type(None)]
        return None if value is None else _coerce(value, args[0], path, errors)
    if origin is list:
        if not isinstance(value, list):
            errors.append(f"{path}: expected a list, got {type(value).__name__}")
            return value
        (item,) = get_args(hint)
        return [_coerce(v, item, f"{path}[{i}]", errors) for i, v in enumerate(value)]
    if hint is bool:
        if not isinstance(value, bool):
            errors.append(f"{path}: expected a boolean, got {value!r}")
        return value
    if hint is int:
        if not (_is_number(value) and float(value).is_integer()):
            errors.append(f"{path}: expected an integer, got {value!r}")
            return value
        return int(value)
    if hint is float:
        if not _is_number(value):
            errors.append(f"{path}: expected a number, got {value!r}")
            return value
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            errors.append(f"{path}: expected a string, got {value!r}")
        return value
    return value


def _apply_section(target: Any, data: Any, path: str, errors: list[str]) -> None:
    """Merge a mapping into a dataclass section, rejecting unknown keys.

    Type mismatches are collected in ``errors``; the offending fields keep their defaults.
    """
    if not isinstance(data, dict):
        errors.append(f"{path or 'config'}: expected an object, got {type(data).__name__}")
        return
    hints = get_type_hints(type(target))
    known = {f.name for f in fields(target)}
    for key, value in data.items():
        dotted = f"{path}.{key}" if path else str(key)
        if key not in known:
            raise ConfigError(f"unknown key: {dotted}")
        current = getattr(target, key)
        if is_dataclass(current):
            _apply_section(current, value, dotted, errors)
            continue
        found = len(errors)
        coerced = _coerce(value, hints[key], dotted, errors)
        if len(errors) == found:
            setattr(target, key, coerced)


def _merge(target: Any, data: dict[str, Any]) -> None:
    """Apply ``data`` to ``target``, raising once with every type mismatch."""
    errors: list[str] = []
    _apply_section(target, data, "", errors)
    if errors:
        raise ConfigValidationError(errors)


def _section_dict(section: Any) -> dict[str, Any]:
    result = {}
    for f in fields(section):
        value = getattr(section, f.name)
        if is_dataclass(value):
            result[f.name] = _section_dict(value)
        elif isinstance(value, list):
            result[f.name] = list(value)
        else:
            result[f.name] = value
    return result


def _prefixed(prefix: str, error: InvalidParameterError) -> list[str]:
    return [f"{prefix}.{violation}" for violation in error.violations]


@dataclass
class ExperimentConfig:
    """Complete experiment configuration."""

    geo: GeoConfig = field(default_factory=GeoConfig)
    optics: OpticsConfig = field(default_factory=OpticsConfig)
    profiles: ProfilesConfig = field(default_factory=ProfilesConfig)
    security: SecurityConfig = field(default_factory=SecurityConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    mc: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    matrix: MatrixConfig = field(default_factory=MatrixConfig)
    logger: LoggerConfig = field(default_factory=LoggerConfig)
    workers: WorkersConfig = field(default_factory=WorkersConfig)
    source_rate_hz: float = 1e9
    two_photon_enabled: bool = False
    sifting_enabled: bool = False
    days_list: list[int] = field(default_factory=lambda: list(DEFAULT_DAYS))
    output_dir: str = "results"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        """Build and validate a configuration from a parsed mapping.

        Raises:
            ConfigError: On unknown keys
            ConfigValidationError: On wrong types or violated invariants
        """
        config = cls()
        _merge(config, data)
        config.validate()
        return config

    @classmethod
    def from_file(cls, config_file: str) -> "ExperimentConfig":
        """Load configuration from a JSON (or YAML) file with environment variable override.

        Args:
            config_file: Path to the configuration file

        Raises:
            ConfigError: If the file cannot be read or parsed, or holds unknown keys
            ConfigValidationError: If any value is invalid
        """
        try:
            with open(config_file, encoding="utf-8") as f:
                data = yaml.safe_load(f)
        except OSError as e:
            raise ConfigError(f"Cannot read configuration file '{config_file}': {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"Cannot parse configuration file '{config_file}': {e}") from e
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"Configuration file '{config_file}' must hold an object, got {type(data).__name__}")

        config = cls()
        _merge(config, data)
        config._apply_env_overrides()
        config.validate()
        return config

    def _apply_env_overrides(self) -> None:
        """Apply environment variable overrides."""
        if log_level := os.getenv("SATKD_LOG_LEVEL"):
            self.logger.log_level = log_level
        if log_file := os.getenv("SATKD_LOG_FILE"):
            self.logger.log_file = log_file
        if threads := os.getenv("SATKD_THREADS"):
            try:
                self.workers.count = int(threads)
            except ValueError as e:
                raise ConfigError(f"SATKD_THREADS must be an integer, got '{threads}'") from e
        if output_dir := os.getenv("SATKD_OUTPUT_DIR"):
            self.output_dir = output_dir

    def violations(self) -> list[str]:
        """Every violated invariant, as "<dotted.key>: <problem>"."""
        problems = []
        builders = [
            ("geo", self.geo_scenario),
            ("optics", self.optical_params),
            ("profiles.night", lambda: self._time_profile(TimeOfDay.NIGHT)),
            ("profiles.day", lambda: self._time_profile(TimeOfDay.DAY)),
            ("security", self.security_params),
            ("mc", self.mc_config),
        ]
        grid_problems = self._grid_point_violations()
        problems.extend(grid_problems)
        if not grid_problems:
            builders.append(("grid", self.search_grid))
        for prefix, build in builders:
            try:
                build()
            except InvalidParameterError as e:
                problems.extend(_prefixed(prefix, e))

        if not self.geo.step_s > 0:
            problems.append(f"geo.step_s: must be > 0, got {self.geo.step_s}")
        if not self.source_rate_hz > 0:
            problems.append(f"source_rate_hz: must be > 0, got {self.source_rate_hz}")
        if not self.days_list:
            problems.append("days_list: must not be empty")
        problems.extend(f"days_list: must be >= 1, got {k}" for k in self.days_list if k < 1)
        problems.extend(self._mc_grid_violations())
        problems.extend(self._matrix_violations())
        if self.logger.log_level.upper() not in _LOG_LEVELS:
            problems.append(f"logger.log_level: must be one of {sorted(_LOG_LEVELS)}, got '{self.logger.log_level}'")
        if self.workers.count is not None and self.workers.count < 1:
            problems.append(f"workers.count: must be >= 1, got {self.workers.count}")
        return problems

    def _grid_point_violations(self) -> list[str]:
        problems = []
        if self.grid.pump_points < 1:
            problems.append(f"grid.pump_points: must be >= 1, got {self.grid.pump_points}")
        if self.grid.rate_points < 1:
            problems.append(f"grid.rate_points: must be >= 1, got {self.grid.rate_points}")
        if not 0 < self.grid.pump_min <= self.grid.pump_max:
            problems.append("grid.pump_min: must satisfy 0 < pump_min <= pump_max")
        if not 0 < self.grid.rate_min <= self.grid.rate_max:
            problems.append("grid.rate_min: must satisfy 0 < rate_min <= rate_max")
        return problems

    def _mc_grid_violations(self) -> list[str]:
        problems = []
        for name in ("pump_values", "transmittances", "dark_click_probs"):
            if not getattr(self.mc, name):
                problems.append(f"mc.{name}: must not be empty")
        problems.extend(
            f"mc.pump_values: must be in [0, {MAX_PUMP_POWER}], got {p}"
            for p in self.mc.pump_values
            if not 0 <= p <= MAX_PUMP_POWER
        )
        problems.extend(
            f"mc.transmittances: must be in [0, 1], got {eta}" for eta in self.mc.transmittances if not 0 <= eta <= 1
        )
        problems.extend(
            f"mc.dark_click_probs: must be in [0, 0.5), got {d}" for d in self.mc.dark_click_probs if not 0 <= d < 0.5
        )
        if not self.mc.max_standard_errors > 0:
            problems.append(f"mc.max_standard_errors: must be > 0, got {self.mc.max_standard_errors}")
        return problems

    def _matrix_violations(self) -> list[str]:
        problems = []
        if not self.matrix.altitudes_km:
            problems.append("matrix.altitudes_km: must not be empty")
        if not self.matrix.distances_km:
            problems.append("matrix.distances_km: must not be empty")
        problems.extend(f"matrix.altitudes_km: must be > 0, got {a}" for a in self.matrix.altitudes_km if not a > 0)
        problems.extend(
            f"matrix.distances_km: must be >= 0, got {d}" for d in self.matrix.distances_km if not d >= 0
        )
        overrides = self.matrix.period_overrides_s
        if overrides and len(overrides) != len(self.matrix.altitudes_km):
            problems.append(
                f"matrix.period_overrides_s: expected 0 or {len(self.matrix.altitudes_km)} values, got {len(overrides)}"
            )
        problems.extend(f"matrix.period_overrides_s: must be > 0, got {p}" for p in overrides if not p > 0)
        return problems

    def validate(self) -> None:
        """Raise ConfigValidationError listing every violation, if any."""
        if problems := self.violations():
            raise ConfigValidationError(problems)

    def to_dict(self) -> dict[str, Any]:
        """JSON-compatible mapping that ``from_dict`` turns back into an equal config."""
        return _section_dict(self)

    def geo_scenario(self) -> GeoScenario:
        geo = _section_dict(self.geo)
        del geo["step_s"]
        return GeoScenario(**geo)

    def period_override_for(self, altitude_km: float) -> Optional[float]:
        """Period override for an altitude: the matrix entry, else the geo one if the altitude matches."""
        overrides = self.matrix.period_overrides_s
        if overrides and altitude_km in self.matrix.altitudes_km:
            return overrides[self.matrix.altitudes_km.index(altitude_km)]
        if altitude_km == self.geo.altitude_km:
            return self.geo.orbit_period_override_s
        return None

    def scenario_at(self, altitude_km: float, ground_distance_km: float) -> GeoScenario:
        """The configured scenario moved to another altitude and station distance."""
        return replace(
            self.geo_scenario(),
            altitude_km=altitude_km,
            ground_distance_km=ground_distance_km,
            orbit_period_override_s=self.period_override_for(altitude_km),
        )

    def matrix_scenarios(self) -> list[GeoScenario]:
        """Scenarios of the altitude x distance matrix, altitude-major."""
        return [
            self.scenario_at(altitude, distance)
            for altitude in self.matrix.altitudes_km
            for distance in self.matrix.distances_km
        ]

    def optical_params(self) -> OpticalParams:
        return OpticalParams(**_section_dict(self.optics))

    def _time_profile(self, label: TimeOfDay) -> TimeProfile:
        section = self.profiles.night if label is TimeOfDay.NIGHT else self.profiles.day
        return TimeProfile(label=label, **_section_dict(section))

    def time_profiles(self) -> tuple[TimeProfile, TimeProfile]:
        """Night and day profiles, in that order."""
        return self._time_profile(TimeOfDay.NIGHT), self._time_profile(TimeOfDay.DAY)

    def security_params(self) -> SecurityParams:
        return SecurityParams(**_section_dict(self.security))

    def search_grid(self) -> SearchGrid:
        return SearchGrid.logspaced(**_section_dict(self.grid))

    def mc_config(self) -> McConfig:
        return McConfig(trials=self.mc.trials, seed=self.mc.seed, chunk_size=self.mc.chunk_size)

    def link_settings(self) -> LinkSettings:
        return LinkSettings(
            source_rate_hz=self.source_rate_hz,
            two_photon_enabled=self.two_photon_enabled,
            sifting=self.sifting_enabled,
            step_s=self.geo.step_s,
        )

    def get_log_level_int(self) -> int:
        """Convert log level string to integer."""
        return _LOG_LEVELS.get(self.logger.log_level.upper(), logging.INFO)


def configure_logging(config: ExperimentConfig) -> None:
    """Route package logging to standard error (and the optional log file)."""
    formatter = logging.Formatter(config.logger.log_format)
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if config.logger.log_file:
        handlers.append(logging.FileHandler(config.logger.log_file, encoding="utf-8"))

    package_logger = logging.getLogger("satellite_qkd")
    for handler in list(package_logger.handlers):
        package_logger.removeHandler(handler)
        handler.close()
    for handler in handlers:
        handler.setFormatter(formatter)
        package_logger.addHandler(handler)
    package_logger.setLevel(config.get_log_level_int())
    package_logger.propagate = False


# Convenience function for quick setup
def load_config(config_file: Optional[str] = None) -> ExperimentConfig:
    """Load experiment configuration from file, or the defaults when no file is given."""
    if config_file is None:
        config = ExperimentConfig()
        config._apply_env_overrides()
        config.validate()
        return config
    return ExperimentConfig.from_file(config_file)
