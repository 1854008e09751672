"""Run configuration: one declarative TOML file equals one reproducible run."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import CultureSpec, HatchThresholds, InvalidSpecError, SensorKind, validate_culture
from .node import INTERVAL_MAX_S, INTERVAL_MIN_S, Calibration, EnergyModel, NodeParams
from .plant import PRESET_NAMES
from .radio import BROADCAST_ADDR, GATEWAY_ADDR, DirectionParams, LinkParams

DEFAULT_MAX_DURATION_S = 129600  # 24 h nominal + 50 % margin


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class NodeConfig:
    addr: int
    kinds: tuple[SensorKind, ...] = tuple(SensorKind)
    sampling_interval_s: int = 60
    energy: EnergyModel = field(default_factory=EnergyModel)
    params: NodeParams = field(default_factory=NodeParams)
    calibration: Calibration = field(default_factory=Calibration)


@dataclass
class RunConfig:
    label: str = "run"
    seed: int = 1
    mode: str = "batch"  # batch | live
    accel: float = 60.0
    max_duration_s: float = DEFAULT_MAX_DURATION_S
    out_dir: str | None = None
    log_frames: bool = True
    serve: str | None = None
    culture: CultureSpec = field(default_factory=CultureSpec)
    aerator_attested: bool = True
    plant_preset: str = "ideal"
    plant_overrides: dict = field(default_factory=dict)
    link: LinkParams = field(default_factory=LinkParams)
    nodes: list[NodeConfig] = field(default_factory=lambda: [NodeConfig(addr=1)])
    thresholds: HatchThresholds = field(default_factory=HatchThresholds)
    ack_delay_ms: float = 8.0

    def echo(self) -> dict:
        """The config facts worth freezing into the manifest."""
        return {
            "label": self.label,
            "seed": self.seed,
            "mode": self.mode,
            "max_duration_s": self.max_duration_s,
            "plant_preset": self.plant_preset,
            "plant_overrides": dict(sorted(self.plant_overrides.items())),
            "aerator_on": self.aerator_attested,
            "culture": {
                "label": self.culture.label,
                "seawater_parts": self.culture.seawater_parts,
                "tapwater_parts": self.culture.tapwater_parts,
                "volume_l": self.culture.volume_l,
                "cysts_g": self.culture.cysts_g,
                "salinity_ppt": self.culture.salinity_ppt,
                "water_quality": self.culture.water_quality,
                "density_g_per_l": self.culture.density_g_per_l,
            },
            "link": {
                "loss_probability": self.link.loss_probability,
                "base_ms": self.link.base_ms,
                "jitter_ms": self.link.jitter_ms,
                "bit_flip_probability": self.link.bit_flip_probability,
            },
            "nodes": [
                {
                    "addr": n.addr,
                    "kinds": [k.key for k in n.kinds],
                    "sampling_interval_s": n.sampling_interval_s,
                }
                for n in self.nodes
            ],
        }


def _direction(table: dict) -> DirectionParams:
    return DirectionParams(
        loss_probability=float(table.get("loss_probability", 0.0)),
        base_ms=float(table.get("base_ms", 2.0)),
        jitter_ms=float(table.get("jitter_ms", 3.0)),
        bit_flip_probability=float(table.get("bit_flip_probability", 0.0)),
    )


def _parse(raw: dict, errors: list[str]) -> RunConfig:
    cfg = RunConfig()
    run = raw.get("run", {})
    cfg.label = str(run.get("label", "run"))
    if "seed" not in run:
        errors.append("run.seed is required (determinism contract)")
    else:
        cfg.seed = int(run["seed"])
    cfg.mode = str(run.get("mode", "batch"))
    if cfg.mode not in ("batch", "live"):
        errors.append(f"run.mode must be 'batch' or 'live', got {cfg.mode!r}")
    cfg.accel = float(run.get("accel", 60.0))
    cfg.max_duration_s = float(run.get("max_duration_s", DEFAULT_MAX_DURATION_S))
    cfg.out_dir = run.get("out_dir")
    cfg.log_frames = bool(run.get("log_frames", True))
    cfg.serve = run.get("serve")

    culture = raw.get("culture", {})
    try:
        cfg.culture = CultureSpec(
            seawater_parts=int(culture.get("seawater_parts", 1)),
            tapwater_parts=int(culture.get("tapwater_parts", 1)),
            volume_l=float(culture.get("volume_l", 2.0)),
            cysts_g=float(culture.get("cysts_g", 1.0)),
            salinity_ppt=float(culture.get("salinity_ppt", 6.5)),
            label=str(culture.get("label", "")),
            water_quality=str(culture.get("water_quality", "good")),
        )
        if cfg.culture.volume_l <= 0:
            errors.append("culture.volume_l must be positive")
    except (TypeError, ValueError) as err:
        errors.append(f"culture: {err}")

    cfg.aerator_attested = bool(raw.get("attest", {}).get("aerator_on", True))

    plant = raw.get("plant", {})
    cfg.plant_preset = str(plant.get("preset", "ideal"))
    if cfg.plant_preset not in PRESET_NAMES:
        errors.append(
            f"plant.preset {cfg.plant_preset!r} unknown (choose from {', '.join(PRESET_NAMES)})"
        )
    cfg.plant_overrides = dict(plant.get("overrides", {}))

    link = raw.get("link", {})
    try:
        cfg.link = LinkParams(
            loss_probability=float(link.get("loss_probability", 0.0)),
            base_ms=float(link.get("base_ms", 2.0)),
            jitter_ms=float(link.get("jitter_ms", 3.0)),
            bit_flip_probability=float(link.get("bit_flip_probability", 0.0)),
            uplink=_direction(link["uplink"]) if "uplink" in link else None,
            downlink=_direction(link["downlink"]) if "downlink" in link else None,
        )
    except ValueError as err:
        errors.append(f"link: {err}")

    thr = raw.get("thresholds", {})
    try:
        cfg.thresholds = HatchThresholds.from_dict(thr)
    except (ValueError, KeyError) as err:
        errors.append(f"thresholds: {err}")

    nodes = raw.get("nodes", [{"addr": 1}])
    cfg.nodes = []
    for i, n in enumerate(nodes):
        try:
            addr = int(n["addr"])
        except (KeyError, TypeError, ValueError):
            errors.append(f"nodes[{i}]: addr missing or not an integer")
            continue
        kind_names = n.get("kinds")
        if kind_names is None:
            kinds = tuple(SensorKind)
        else:
            kinds = []
            for name in kind_names:
                try:
                    kinds.append(SensorKind.from_key(name))
                except Exception:
                    errors.append(f"nodes[{i}]: unknown sensor kind {name!r}")
            kinds = tuple(kinds)
        interval = int(n.get("sampling_interval_s", 60))
        energy = EnergyModel(
            tx_ma=float(n.get("tx_ma", 45.0)),
            rx_ma=float(n.get("rx_ma", 19.0)),
            idle_ma=float(n.get("idle_ma", 2.0)),
            sleep_ma=float(n.get("sleep_ma", 0.01)),
            capacity_mah=float(n.get("capacity_mah", 1000.0)),
        )
        params = NodeParams(
            idle_ms=float(n.get("idle_ms", 4.0)),
            frame_tx_ms=float(n.get("frame_tx_ms", 1.0)),
            rx_window_ms=float(n.get("rx_window_ms", 190.0)),
            heartbeat_interval_samples=int(n.get("heartbeat_interval_samples", 10)),
        )
        cfg.nodes.append(
            NodeConfig(
                addr=addr,
                kinds=kinds,
                sampling_interval_s=interval,
                energy=energy,
                params=params,
            )
        )
    cfg.ack_delay_ms = float(raw.get("gateway", {}).get("ack_delay_ms", 8.0))
    return cfg


def structural_errors(cfg: RunConfig) -> list[str]:
    """Problems that make a run undefined (checked before any run starts)."""
    errors = []
    seen = set()
    for n in cfg.nodes:
        if n.addr in (GATEWAY_ADDR, BROADCAST_ADDR) or not (0 < n.addr < 0xFFFF):
            errors.append(f"node addr 0x{n.addr:04x} reserved or out of range")
        if n.addr in seen:
            errors.append(f"duplicate node addr 0x{n.addr:04x}")
        seen.add(n.addr)
        if not (1 <= n.sampling_interval_s <= INTERVAL_MAX_S):
            errors.append(
                f"node 0x{n.addr:04x}: sampling_interval_s {n.sampling_interval_s} "
                f"outside [1, {INTERVAL_MAX_S}]"
            )
    if not cfg.nodes:
        errors.append("at least one node is required")
    if cfg.max_duration_s <= 0:
        errors.append("run.max_duration_s must be positive")
    if cfg.mode == "live" and cfg.accel <= 0:
        errors.append("run.accel must be positive in live mode")
    return errors


def semantic_errors(cfg: RunConfig) -> list[str]:
    """Stricter checks used by `validate`: would the run pass its prep gate?"""
    errors = []
    try:
        prep = validate_culture(cfg.culture, cfg.thresholds)
        errors.extend(f"culture: {v.parameter} {v.observed:g} {v.bound}" for v in prep.violations)
    except InvalidSpecError as err:
        errors.append(f"culture: {err}")
    lo, hi = INTERVAL_MIN_S, INTERVAL_MAX_S
    for n in cfg.nodes:
        if not (lo <= n.sampling_interval_s <= hi):
            errors.append(
                f"node 0x{n.addr:04x}: sampling interval {n.sampling_interval_s} "
                f"outside the commandable range [{lo}, {hi}]"
            )
    return errors


def load_config(path: Path | str) -> tuple[RunConfig, list[str]]:
    """Parse a config file; returns (config, structural error list).

    Raises ConfigError on TOML syntax errors (with tomllib's line/column
    message) or an unreadable file.
    """
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as err:
        raise ConfigError([f"cannot read {path}: {err}"]) from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError([f"{path}: {err}"]) from None
    errors: list[str] = []
    cfg = _parse(raw, errors)
    errors.extend(structural_errors(cfg))
    return cfg, errors


def with_seed(cfg: RunConfig, seed: int | None) -> RunConfig:
    return replace(cfg, seed=int(seed)) if seed is not None else cfg
