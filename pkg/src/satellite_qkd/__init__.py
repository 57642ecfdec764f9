"""Satellite QKD - simulator and optimizer for satellite dual-downlink entanglement QKD.

This library covers the whole pipeline from orbit to secret key:
- Contact geometry and pass counts for a satellite over two ground stations
- SPDC source photon-number statistics
- Downlink transmittance and herald statistics with dark counts (analytic and Monte Carlo)
- Finite-key and asymptotic key lengths for blockwise and non-blockwise post-processing
- Pump-power and sampling-rate optimization and multi-day scheme comparison

Example:
    Basic usage:

    >>> from satellite_qkd import GeoScenario, contact_length, load_config
    >>> contact_length(GeoScenario(altitude_km=500, ground_distance_km=600))
    >>> config = load_config("config.yaml")
"""

from .channel import (
    BlockContribution,
    ChannelPoint,
    McConfig,
    OpticalParams,
    StandardErrors,
    TimeOfDay,
    TimeProfile,
    herald_stats,
    mc_herald_stats,
    pass_aggregate,
    transmittance,
)
from .config import ConfigError, ConfigValidationError, ExperimentConfig, configure_logging, load_config
from .errors import InvalidParameterError
from .keyrate import (
    BlockStats,
    EmptyBlocksError,
    KeyResult,
    Scheme,
    SecurityParams,
    UndefinedRelativeDifferenceError,
    asymptotic_bits_blockwise,
    asymptotic_bits_pooled,
    asymptotic_rate_block,
    asymptotic_rate_nonblock,
    entropy_ext,
    key_len_blockwise,
    key_len_nonblockwise,
    pooled_qber,
    relative_difference,
    sampling_deviation,
)
from .optimize import (
    ComparisonRow,
    IdealizationRow,
    LinkSettings,
    OptimizationResult,
    SearchGrid,
    accumulate_days,
    compare_schemes,
    evaluate_pump_grid,
    idealization_check,
    optimize_blockwise,
    optimize_nonblockwise,
)
from .orbit import (
    EmptyPassError,
    GeoScenario,
    PassGeometry,
    contact_length,
    link_geometry,
    max_central_angle,
    orbital_period,
    pass_counts,
)
from .runner import JobRunner, async_worker, create_worker_pool
from .scenario import OutputError, ResultRecord, run_paper_matrix
from .source import EmissionDistribution, SourceParams, emission_distribution, two_photon_configurations

try:
    import importlib.metadata

    __version__ = importlib.metadata.version("muxu-io-satellite-qkd")
except (importlib.metadata.PackageNotFoundError, ImportError):
    __version__ = "unknown"
__author__ = "Alex Gonzalez"
__email__ = "alex@muxu.io"
__description__ = "Simulator and optimizer for satellite dual-downlink entanglement QKD"
__license__ = "MIT"

__all__ = [
    # Orbit
    "GeoScenario",
    "PassGeometry",
    "EmptyPassError",
    "orbital_period",
    "max_central_angle",
    "contact_length",
    "pass_counts",
    "link_geometry",
    # Source
    "SourceParams",
    "EmissionDistribution",
    "emission_distribution",
    "two_photon_configurations",
    # Channel
    "OpticalParams",
    "TimeOfDay",
    "TimeProfile",
    "ChannelPoint",
    "StandardErrors",
    "McConfig",
    "BlockContribution",
    "transmittance",
    "herald_stats",
    "mc_herald_stats",
    "pass_aggregate",
    # Key rates
    "SecurityParams",
    "BlockStats",
    "KeyResult",
    "Scheme",
    "EmptyBlocksError",
    "UndefinedRelativeDifferenceError",
    "entropy_ext",
    "sampling_deviation",
    "key_len_nonblockwise",
    "key_len_blockwise",
    "pooled_qber",
    "asymptotic_rate_nonblock",
    "asymptotic_rate_block",
    "asymptotic_bits_blockwise",
    "asymptotic_bits_pooled",
    "relative_difference",
    # Optimization
    "SearchGrid",
    "LinkSettings",
    "OptimizationResult",
    "ComparisonRow",
    "IdealizationRow",
    "evaluate_pump_grid",
    "accumulate_days",
    "optimize_blockwise",
    "optimize_nonblockwise",
    "compare_schemes",
    "idealization_check",
    # Experiments
    "ResultRecord",
    "OutputError",
    "run_paper_matrix",
    "JobRunner",
    "async_worker",
    "create_worker_pool",
    # Configuration
    "ConfigError",
    "ConfigValidationError",
    "ExperimentConfig",
    "configure_logging",
    "load_config",
    # Error handling
    "InvalidParameterError",
    # Metadata
    "__version__",
    "__author__",
    "__email__",
    "__description__",
    "__license__",
]
