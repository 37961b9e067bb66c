import math
from dataclasses import dataclass, field, replace
from typing import Optional

from src.channel.radio import ChannelParams, RadioParams
from src.errors import ValidationError
from src.geometry.space import (
    DEFAULT_RANGE_CUTOFF_KM,
    AltitudeBand,
    BoxSpace,
    Intensity,
    region_volume,
)

SELF_CONSISTENT = "self-consistent"
PAPER_LITERAL = "paper-literal"
PRESETS = (SELF_CONSISTENT, PAPER_LITERAL)


def reference_space() -> BoxSpace:
    return BoxSpace(10.0, 10.0, 10.0)


@dataclass(frozen=True)
class Scenario:
    """
    One experiment: populations, radios, channel and decoding threshold.

    lambda_pdf drives the nearest-distance law of the target; lambda_uav_int and
    lambda_ca are the interferer fields. They default to the same value; the
    paper-literal preset decouples lambda_pdf.
    """
    space: BoxSpace = field(default_factory=reference_space)
    uav_band: AltitudeBand = AltitudeBand(1.0, 6.0)
    ca_band: AltitudeBand = AltitudeBand(6.0, 10.0)
    lambda_pdf: Intensity = Intensity.from_count(30.0, 4000.0)
    lambda_uav_int: Intensity = Intensity.from_count(30.0, 4000.0)
    lambda_ca: Intensity = Intensity.from_count(15.0, 4000.0)
    uav_radio: RadioParams = RadioParams(16.0, 23.0)
    ca_radio: RadioParams = RadioParams(30.0, 20.0)
    channel: ChannelParams = ChannelParams()
    theta_db: float = 7.0
    range_cutoff: float = DEFAULT_RANGE_CUTOFF_KM
    preset: str = SELF_CONSISTENT

    def __post_init__(self):
        self.uav_band.check_within(self.space)
        self.ca_band.check_within(self.space)
        if not math.isfinite(self.theta_db):
            raise ValidationError("theta_db", "must be finite")
        if not self.range_cutoff >= 0:
            raise ValidationError("range_cutoff_km", "must be >= 0")
        if self.preset not in PRESETS:
            raise ValidationError("preset", f"must be one of {PRESETS}, got {self.preset!r}")

    @property
    def uav_volume(self) -> float:
        return region_volume(self.space, self.uav_band)

    @property
    def ca_volume(self) -> float:
        return region_volume(self.space, self.ca_band)

    def with_uav_count(self, count: float) -> "Scenario":
        """Sets lambda1 as an expected UAV count in the whole box V, honouring the preset."""
        interferers = Intensity.from_count(count, self.space.volume)
        if self.preset == PAPER_LITERAL:
            # The nearest-distance law reads lambda1 as a per-km^3 number.
            target = Intensity.from_density(count)
        else:
            target = interferers
        return replace(self, lambda_pdf=target, lambda_uav_int=interferers)

    def with_preset(self, preset: str) -> "Scenario":
        rebuilt = replace(self, preset=preset)
        if self.lambda_uav_int.count is not None:
            rebuilt = rebuilt.with_uav_count(self.lambda_uav_int.count)
        return rebuilt

    def with_powers(self, uav_power: Optional[float] = None, ca_power: Optional[float] = None) -> "Scenario":
        uav = RadioParams(uav_power, self.uav_radio.total_gain_db) if uav_power is not None else self.uav_radio
        ca = RadioParams(ca_power, self.ca_radio.total_gain_db) if ca_power is not None else self.ca_radio
        return replace(self, uav_radio=uav, ca_radio=ca)
