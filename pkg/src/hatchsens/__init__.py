"""hatchsens: a desk-scale simulated wireless sensor network that monitors a
brine-shrimp hatching culture over a lossy star-topology link."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    Band,
    Classification,
    CultureSpec,
    HatchThresholds,
    Reading,
    SensorKind,
    classify,
    default_thresholds,
    param_score,
    suitability,
    validate_culture,
)
