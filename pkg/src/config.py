import copy
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, NamedTuple, Optional

import yaml

from src.analytic.quadrature import QuadratureSettings
from src.channel.radio import ChannelParams, RadioParams
from src.errors import ConfigError, ValidationError
from src.geometry.space import AltitudeBand, BoxSpace, Intensity
from src.scenario import PAPER_LITERAL, Scenario

logger = logging.getLogger(__name__)

WORKERS_ENV_VAR = "ADSB_INTERFERENCE_WORKERS"
DEFAULT_CONFIG_PATH = "config/config.yaml"

# Reference scenario values; a configuration document only overrides what it names.
DEFAULTS: Dict[str, Any] = {
    "space": {"half_extent_x_km": 10.0, "half_extent_y_km": 10.0, "height_km": 10.0},
    "uav": {"band_km": [1.0, 6.0], "intensity": {"count": 30.0}, "tx_power_w": 16.0, "gain_dbi": 23.0},
    "ca": {"band_km": [6.0, 10.0], "intensity": {"count": 15.0}, "tx_power_w": 30.0, "gain_dbi": 20.0},
    # Intensity of the nearest-distance law; null follows uav.intensity and the preset.
    "target": {"intensity": None},
    "channel": {
        "alpha": 2.0,
        "noise_density_dbm_hz": -174.0,
        "bandwidth_hz": 1.0e6,
        "fading_shape": 1.0,
        "pathloss_reference_m": 1.0,
    },
    "theta_db": 7.0,
    "range_cutoff_km": 15.0,
    "preset": "self-consistent",
    "quadrature": {
        "volume_rtol": 1e-6,
        "outer_rtol": 1e-7,
        "truncation_quantile": 1.0 - 1e-9,
        "max_subdivisions": 4000,
        "outer_limit": 200,
        "nodes_per_decade": 8,
        "placements_log2": 17,
    },
    "simulation": {"trials": 100000, "seed": 20240607, "confidence": 0.95, "workers": None},
}


@dataclass(frozen=True)
class SimulationSettings:
    trials: int = 100000
    seed: int = 20240607
    confidence: float = 0.95
    workers: Optional[int] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError("simulation.trials", "must be >= 1")
        if self.seed < 0:
            raise ValidationError("simulation.seed", "must be >= 0")
        if not 0 < self.confidence < 1:
            raise ValidationError("simulation.confidence", "must be in (0, 1)")
        if self.workers is not None and self.workers < 1:
            raise ValidationError("simulation.workers", "must be >= 1")


class RunConfig(NamedTuple):
    scenario: Scenario
    quadrature: QuadratureSettings
    simulation: SimulationSettings


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit count, else the environment override, else every CPU."""
    if workers is not None:
        return max(1, int(workers))
    raw = os.environ.get(WORKERS_ENV_VAR)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning(f"Ignoring {WORKERS_ENV_VAR}={raw!r}: not an integer")
    return os.cpu_count() or 1


def load_config(config_path: str = DEFAULT_CONFIG_PATH) -> dict:
    """Reads a YAML or JSON document; the path is tried against cwd, then its parent."""
    base_path = Path(os.getcwd())
    full_path = base_path / config_path

    if not full_path.exists():
        # Running from inside src/
        full_path = base_path.parent / config_path

    if not full_path.exists():
        raise FileNotFoundError(f"Config file not found at {config_path} or {full_path}")

    with open(full_path, "r") as f:
        try:
            # PyYAML reads 1e-6 (no dot) as a string, so JSON goes through json.
            config = json.load(f) if full_path.suffix == ".json" else yaml.safe_load(f)
        except (yaml.YAMLError, json.JSONDecodeError) as e:
            raise ConfigError(str(config_path), f"not a valid YAML/JSON document: {e}") from e

    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ConfigError(str(config_path), "top level must be a mapping")
    return config


# ---------------------------------------------------------------------- #
# Merging and typed access                                                #
# ---------------------------------------------------------------------- #

def _merge(defaults: dict, overrides: dict, prefix: str = "") -> dict:
    merged = copy.deepcopy(defaults)
    for key, value in overrides.items():
        field = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(field, "unknown key")
        base = defaults[key]
        if isinstance(base, dict):
            if not isinstance(value, dict):
                raise ConfigError(field, f"expected a mapping, got {type(value).__name__}")
            if key == "intensity":
                # Intensities are replaced whole: {count: ..} or {density: ..}.
                merged[key] = value
            else:
                merged[key] = _merge(base, value, f"{field}.")
        else:
            merged[key] = value
    return merged


def _number(value: Any, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    return float(value)


def _integer(value: Any, field: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(field, f"expected an integer, got {value!r}")
    return value


def _band(value: Any, field: str) -> AltitudeBand:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(field, f"expected [z_lo, z_hi], got {value!r}")
    return AltitudeBand(_number(value[0], f"{field}[0]"), _number(value[1], f"{field}[1]"))


def _intensity(value: Any, field: str, volume: float) -> Intensity:
    if not isinstance(value, dict) or len(value) != 1:
        raise ConfigError(field, "expected exactly one of {count: N} or {density: X}")
    (kind, raw), = value.items()
    if kind == "count":
        return Intensity.from_count(_number(raw, f"{field}.count"), volume)
    if kind == "density":
        return Intensity.from_density(_number(raw, f"{field}.density"))
    raise ConfigError(f"{field}.{kind}", "unknown intensity kind (use count or density)")


def _radio(section: dict, prefix: str) -> RadioParams:
    return RadioParams(
        _number(section["tx_power_w"], f"{prefix}.tx_power_w"),
        _number(section["gain_dbi"], f"{prefix}.gain_dbi"),
    )


# ---------------------------------------------------------------------- #
# Typed configuration                                                     #
# ---------------------------------------------------------------------- #

def build_scenario(doc: dict) -> Scenario:
    space_doc = doc["space"]
    space = BoxSpace(
        _number(space_doc["half_extent_x_km"], "space.half_extent_x_km"),
        _number(space_doc["half_extent_y_km"], "space.half_extent_y_km"),
        _number(space_doc["height_km"], "space.height_km"),
    )
    preset = doc["preset"]
    if not isinstance(preset, str):
        raise ConfigError("preset", f"expected a string, got {preset!r}")

    # Counts are expected aircraft in the whole box V.
    uav_int = _intensity(doc["uav"]["intensity"], "uav.intensity", space.volume)
    ca_int = _intensity(doc["ca"]["intensity"], "ca.intensity", space.volume)
    target_doc = doc["target"]["intensity"]
    if target_doc is not None:
        target = _intensity(target_doc, "target.intensity", space.volume)
    elif preset == PAPER_LITERAL and uav_int.count is not None:
        target = Intensity.from_density(uav_int.count)
    else:
        target = uav_int

    ch = doc["channel"]
    channel = ChannelParams(
        alpha=_number(ch["alpha"], "channel.alpha"),
        noise_density_dbm_hz=_number(ch["noise_density_dbm_hz"], "channel.noise_density_dbm_hz"),
        bandwidth_hz=_number(ch["bandwidth_hz"], "channel.bandwidth_hz"),
        fading_shape=_number(ch["fading_shape"], "channel.fading_shape"),
        pathloss_reference_m=_number(ch["pathloss_reference_m"], "channel.pathloss_reference_m"),
    )
    return Scenario(
        space=space,
        uav_band=_band(doc["uav"]["band_km"], "uav.band_km"),
        ca_band=_band(doc["ca"]["band_km"], "ca.band_km"),
        lambda_pdf=target,
        lambda_uav_int=uav_int,
        lambda_ca=ca_int,
        uav_radio=_radio(doc["uav"], "uav"),
        ca_radio=_radio(doc["ca"], "ca"),
        channel=channel,
        theta_db=_number(doc["theta_db"], "theta_db"),
        range_cutoff=_number(doc["range_cutoff_km"], "range_cutoff_km"),
        preset=preset,
    )


def build_quadrature(section: dict) -> QuadratureSettings:
    return QuadratureSettings(
        volume_rtol=_number(section["volume_rtol"], "quadrature.volume_rtol"),
        outer_rtol=_number(section["outer_rtol"], "quadrature.outer_rtol"),
        truncation_quantile=_number(section["truncation_quantile"], "quadrature.truncation_quantile"),
        max_subdivisions=_integer(section["max_subdivisions"], "quadrature.max_subdivisions"),
        outer_limit=_integer(section["outer_limit"], "quadrature.outer_limit"),
        nodes_per_decade=_integer(section["nodes_per_decade"], "quadrature.nodes_per_decade"),
        placements_log2=_integer(section["placements_log2"], "quadrature.placements_log2"),
    )


def build_simulation(section: dict) -> SimulationSettings:
    workers = section["workers"]
    return SimulationSettings(
        trials=_integer(section["trials"], "simulation.trials"),
        seed=_integer(section["seed"], "simulation.seed"),
        confidence=_number(section["confidence"], "simulation.confidence"),
        workers=None if workers is None else _integer(workers, "simulation.workers"),
    )


def parse_run_config(document: Optional[dict]) -> RunConfig:
    doc = _merge(DEFAULTS, document or {})
    return RunConfig(build_scenario(doc), build_quadrature(doc["quadrature"]), build_simulation(doc["simulation"]))


def load_run_config(config_path: Optional[str] = None) -> RunConfig:
    """reference defaults overlaid with the document at config_path, if any."""
    document = load_config(config_path) if config_path else {}
    run = parse_run_config(document)
    logger.info(
        f"Loaded configuration from {config_path or 'built-in defaults'} (preset {run.scenario.preset})"
    )
    return run


def load_scenario(config_path: Optional[str] = None) -> Scenario:
    return load_run_config(config_path).scenario
