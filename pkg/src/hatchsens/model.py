"""Domain types and threshold logic shared by every other module.

The culture is judged against per-parameter bands: a soft band (the
recommended operating range) nested inside a hard band (beyond which the
culture is in real trouble).  Band edges belong to the more benign class,
so a value sitting exactly on a setpoint never alarms.

Values travel the wire as centi-units (signed 32-bit, engineering value
x100) so the virtual microcontroller never touches floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum


class InvalidReadingError(ValueError):
    """A measurement that cannot be classified (NaN or unknown kind)."""


class IncompleteSnapshotError(ValueError):
    """Suitability was asked for before every required kind had a value."""


class InvalidSpecError(ValueError):
    """A culture spec that is structurally impossible (e.g. volume <= 0)."""


# Fraction of viable cysts hatched at which the culture counts as done: a
# nominal incubation under ideal conditions lands exactly on this threshold
# (the last stragglers trickle in afterwards).  Both the physical hatch model
# and the gateway estimator integrate suitability at HATCH_COMPLETE/t_hatch
# per second, so the two curves track each other.
HATCH_COMPLETE = 0.999


def round_half_away(x: float) -> int:
    """Round half away from zero (the one rounding rule used everywhere)."""
    if x >= 0:
        return math.floor(x + 0.5)
    return math.ceil(x - 0.5)


class SensorKind(IntEnum):
    """The five monitored parameters; values are the wire codes."""

    TEMPERATURE_C = 0x01
    PH = 0x02
    O2_MG_L = 0x03
    HUMIDITY_PCT = 0x04
    LIGHT_LUX = 0x05

    @property
    def unit(self) -> str:
        return _UNITS[self]

    @property
    def key(self) -> str:
        """Stable lowercase name used in JSON payloads and config files."""
        return self.name.lower()

    @classmethod
    def from_key(cls, key: str) -> "SensorKind":
        try:
            return cls[key.upper()]
        except KeyError:
            raise InvalidReadingError(f"unknown sensor kind {key!r}") from None


_UNITS = {
    SensorKind.TEMPERATURE_C: "degC",
    SensorKind.PH: "pH",
    SensorKind.O2_MG_L: "mg/L",
    SensorKind.HUMIDITY_PCT: "%",
    SensorKind.LIGHT_LUX: "lux",
}

# Kinds that feed the suitability product.  Humidity is room air, not
# culture water, so it is monitored and alertable but never scored.
REQUIRED_KINDS = (
    SensorKind.TEMPERATURE_C,
    SensorKind.PH,
    SensorKind.O2_MG_L,
    SensorKind.LIGHT_LUX,
)


class Classification(Enum):
    IN_RANGE = "in_range"
    LOW_SOFT = "low_soft"
    HIGH_SOFT = "high_soft"
    LOW_HARD = "low_hard"
    HIGH_HARD = "high_hard"


@dataclass(frozen=True)
class Reading:
    """One calibrated measurement as reconstructed at the gateway."""

    node_addr: int
    kind: SensorKind
    seq: int
    t: int  # sim seconds since run epoch
    centi: int  # engineering value x100, signed 32-bit on the wire

    @property
    def value(self) -> float:
        return self.centi / 100.0


@dataclass(frozen=True)
class Band:
    """Trapezoid envelope: hard_lo <= soft_lo <= soft_hi <= hard_hi."""

    hard_lo: float
    soft_lo: float
    soft_hi: float
    hard_hi: float

    def __post_init__(self):
        if not (self.hard_lo <= self.soft_lo <= self.soft_hi <= self.hard_hi):
            raise ValueError(
                f"band edges out of order: {self.hard_lo}, {self.soft_lo}, "
                f"{self.soft_hi}, {self.hard_hi}"
            )

    def as_dict(self) -> dict:
        return {
            "hard_lo": self.hard_lo,
            "soft_lo": self.soft_lo,
            "soft_hi": self.soft_hi,
            "hard_hi": self.hard_hi,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Band":
        return cls(d["hard_lo"], d["soft_lo"], d["soft_hi"], d["hard_hi"])


@dataclass
class HatchThresholds:
    """Operating envelope for the hatching culture.

    Defaults encode the recommended bench conditions: pH 7.2-8.5,
    temperature centered on 25 degC, salinity 5-8 ppt, cyst density at
    most 10 g/L, nominal incubation 24 h, yeast feeding due 18-22 h in.
    """

    temperature: Band = field(default_factory=lambda: Band(18.0, 24.0, 26.0, 35.0))
    ph: Band = field(default_factory=lambda: Band(6.5, 7.2, 8.5, 9.2))
    o2: Band = field(default_factory=lambda: Band(2.0, 5.0, 12.0, 20.0))
    light: Band = field(default_factory=lambda: Band(500.0, 2000.0, 100000.0, 200000.0))
    humidity: Band | None = field(default_factory=lambda: Band(10.0, 30.0, 85.0, 95.0))
    salinity_ppt: tuple[float, float] = (5.0, 8.0)
    max_density_g_per_l: float = 10.0
    t_hatch_s: int = 86400
    feeding_window_s: tuple[int, int] = (64800, 79200)

    def band_for(self, kind: SensorKind) -> Band | None:
        return {
            SensorKind.TEMPERATURE_C: self.temperature,
            SensorKind.PH: self.ph,
            SensorKind.O2_MG_L: self.o2,
            SensorKind.LIGHT_LUX: self.light,
            SensorKind.HUMIDITY_PCT: self.humidity,
        }[kind]

    def as_dict(self) -> dict:
        return {
            "temperature": self.temperature.as_dict(),
            "ph": self.ph.as_dict(),
            "o2": self.o2.as_dict(),
            "light": self.light.as_dict(),
            "humidity": self.humidity.as_dict() if self.humidity else None,
            "salinity_ppt": list(self.salinity_ppt),
            "max_density_g_per_l": self.max_density_g_per_l,
            "t_hatch_s": self.t_hatch_s,
            "feeding_window_s": list(self.feeding_window_s),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HatchThresholds":
        base = default_thresholds()
        for name in ("temperature", "ph", "o2", "light"):
            if name in d and d[name] is not None:
                setattr(base, name, Band.from_dict(d[name]))
        if "humidity" in d:
            base.humidity = Band.from_dict(d["humidity"]) if d["humidity"] else None
        if "salinity_ppt" in d:
            lo, hi = d["salinity_ppt"]
            base.salinity_ppt = (float(lo), float(hi))
        if "max_density_g_per_l" in d:
            base.max_density_g_per_l = float(d["max_density_g_per_l"])
        if "t_hatch_s" in d:
            base.t_hatch_s = int(d["t_hatch_s"])
        if "feeding_window_s" in d:
            lo, hi = d["feeding_window_s"]
            base.feeding_window_s = (int(lo), int(hi))
        return base


@dataclass(frozen=True)
class CultureSpec:
    """Bench prep sheet: media mix, volume, cysts, manually measured salinity."""

    seawater_parts: int = 1
    tapwater_parts: int = 1
    volume_l: float = 2.0
    cysts_g: float = 1.0
    salinity_ppt: float = 6.5
    label: str = ""
    water_quality: str = "good"  # free-text manifest field, not quantifiable

    @property
    def density_g_per_l(self) -> float:
        if self.volume_l <= 0:
            raise InvalidSpecError(f"volume_l must be positive, got {self.volume_l}")
        return self.cysts_g / self.volume_l


@dataclass(frozen=True)
class Violation:
    parameter: str
    observed: float
    bound: str

    def as_dict(self) -> dict:
        return {"parameter": self.parameter, "observed": self.observed, "bound": self.bound}


@dataclass(frozen=True)
class PrepReport:
    passed: bool
    density_g_per_l: float
    violations: tuple[Violation, ...] = ()

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "density_g_per_l": self.density_g_per_l,
            "violations": [v.as_dict() for v in self.violations],
        }


def default_thresholds() -> HatchThresholds:
    """The stock operating envelope; every field is config-overridable."""
    return HatchThresholds()


def validate_culture(spec: CultureSpec, thr: HatchThresholds) -> PrepReport:
    """Check the prep-time inputs that have no sensor: salinity and density."""
    if spec.volume_l <= 0:
        raise InvalidSpecError(f"volume_l must be positive, got {spec.volume_l}")
    if spec.cysts_g < 0:
        raise InvalidSpecError(f"cysts_g must be non-negative, got {spec.cysts_g}")
    violations = []
    lo, hi = thr.salinity_ppt
    if not (lo <= spec.salinity_ppt <= hi):
        violations.append(
            Violation("salinity_ppt", spec.salinity_ppt, f"must be within [{lo}, {hi}] ppt")
        )
    density = spec.density_g_per_l
    if density > thr.max_density_g_per_l:
        violations.append(
            Violation(
                "density_g_per_l",
                density,
                f"must not exceed {thr.max_density_g_per_l} g/L",
            )
        )
    return PrepReport(passed=not violations, density_g_per_l=density, violations=tuple(violations))


def classify(value: float, band: Band) -> Classification:
    """Place a value in one of five classes; edges belong to the inner class."""
    if math.isnan(value):
        raise InvalidReadingError("cannot classify NaN")
    if value > band.hard_hi:
        return Classification.HIGH_HARD
    if value < band.hard_lo:
        return Classification.LOW_HARD
    if value > band.soft_hi:
        return Classification.HIGH_SOFT
    if value < band.soft_lo:
        return Classification.LOW_SOFT
    return Classification.IN_RANGE


def param_score(value: float, band: Band) -> float:
    """Trapezoid membership: 1 on the soft band, 0 at/outside the hard band,
    linear on the two ramps."""
    if math.isnan(value):
        raise InvalidReadingError("cannot score NaN")
    if band.soft_lo <= value <= band.soft_hi:
        return 1.0
    if value <= band.hard_lo or value >= band.hard_hi:
        return 0.0
    if value < band.soft_lo:
        return (value - band.hard_lo) / (band.soft_lo - band.hard_lo)
    return (band.hard_hi - value) / (band.hard_hi - band.soft_hi)


def suitability(snapshot: dict[SensorKind, float], thr: HatchThresholds) -> float:
    """Product of the four per-parameter scores (humidity excluded)."""
    score = 1.0
    for kind in REQUIRED_KINDS:
        if kind not in snapshot:
            raise IncompleteSnapshotError(f"snapshot missing {kind.key}")
        band = thr.band_for(kind)
        assert band is not None
        score *= param_score(snapshot[kind], band)
    return score
