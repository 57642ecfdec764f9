"""Pytest configuration and fixtures for satellite QKD tests."""

import json
import logging

import pytest
import yaml

from satellite_qkd import (
    ExperimentConfig,
    GeoScenario,
    LinkSettings,
    OpticalParams,
    SearchGrid,
    SecurityParams,
    TimeOfDay,
    TimeProfile,
)

SATKD_ENV_VARS = (
    "SATKD_CONFIG",
    "SATKD_LOG_LEVEL",
    "SATKD_LOG_FILE",
    "SATKD_THREADS",
    "SATKD_OUTPUT_DIR",
)


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    """Keep SATKD_* variables from the developer's shell out of the tests."""
    for name in SATKD_ENV_VARS:
        monkeypatch.delenv(name, raising=False)


@pytest.fixture(autouse=True)
def restore_package_logger():
    """Undo configure_logging() so later tests can still capture records."""
    package_logger = logging.getLogger("satellite_qkd")
    handlers = list(package_logger.handlers)
    level = package_logger.level
    propagate = package_logger.propagate
    yield
    for handler in list(package_logger.handlers):
        if handler not in handlers:
            package_logger.removeHandler(handler)
            handler.close()
    package_logger.setLevel(level)
    package_logger.propagate = propagate


@pytest.fixture
def reference_scenario():
    """500 km altitude, 600 km ground distance, published period."""
    return GeoScenario(altitude_km=500.0, ground_distance_km=600.0, orbit_period_override_s=5647.0)


@pytest.fixture
def optics():
    return OpticalParams()


@pytest.fixture
def profiles():
    """Night and day profiles, in that order."""
    return (
        TimeProfile(label=TimeOfDay.NIGHT, dark_click_prob=3e-6),
        TimeProfile(label=TimeOfDay.DAY, dark_click_prob=3e-3),
    )


@pytest.fixture
def sec():
    return SecurityParams()


@pytest.fixture
def small_grid():
    """Coarse grid that keeps optimizer tests fast."""
    return SearchGrid.logspaced(pump_points=12, rate_points=8)


@pytest.fixture
def coarse_settings():
    """10 s samples over the pass instead of 1 s."""
    return LinkSettings(step_s=10.0)


@pytest.fixture
def small_config_data():
    """Configuration mapping for a small, fast 2 x 2 matrix."""
    return {
        "geo": {"orbit_period_override_s": 5647.0, "step_s": 10.0},
        "grid": {"pump_points": 8, "rate_points": 6},
        "days_list": [1, 20],
        "matrix": {
            "altitudes_km": [500.0, 800.0],
            "distances_km": [600.0, 1200.0],
            "period_overrides_s": [5647.0, 6022.0],
        },
        "mc": {
            "trials": 20000,
            "chunk_size": 4096,
            "pump_values": [0.1],
            "transmittances": [0.01],
            "dark_click_probs": [3e-3],
        },
        "workers": {"count": 2},
    }


@pytest.fixture
def small_config(small_config_data):
    return ExperimentConfig.from_dict(small_config_data)


@pytest.fixture
def write_config(tmp_path):
    """Factory writing a configuration mapping to a JSON or YAML file."""

    def _write(data, suffix=".json"):
        path = tmp_path / f"config{suffix}"
        with open(path, "w", encoding="utf-8") as f:
            if suffix == ".json":
                json.dump(data, f)
            else:
                yaml.dump(data, f, default_flow_style=False)
        return str(path)

    return _write
