import logging
from dataclasses import dataclass, field

import numpy as np

from src.errors import DomainError, SingularDistanceError, ValidationError

logger = logging.getLogger(__name__)

M_PER_KM = 1000.0
# Pathloss exponents covered by the reference scenario; others are accepted with a warning.
ALPHA_RANGE = (2.0, 5.0)
# Noise below this fraction of the weakest mean signal does not move the success probability.
NOISE_NEGLIGIBLE_RATIO = 1e-3


def db_to_linear(x_db):
    if np.ndim(x_db):
        return np.power(10.0, np.asarray(x_db, dtype=float) / 10.0)
    return 10.0 ** (x_db / 10.0)


def noise_power(n0_dbm_hz: float, bandwidth_hz: float) -> float:
    """Thermal noise N = n0 * B in watts."""
    if not bandwidth_hz > 0:
        raise DomainError(f"bandwidth must be > 0 Hz, got {bandwidth_hz}")
    return 10.0 ** ((n0_dbm_hz - 30.0) / 10.0) * bandwidth_hz


def pathloss_factor(d, alpha: float):
    """d^(-alpha) with d already expressed in pathloss reference units."""
    if np.any(np.asarray(d) <= 0):
        raise SingularDistanceError("pathloss is singular at zero distance")
    return np.power(d, -alpha)


@dataclass(frozen=True)
class RadioParams:
    """Transmit power and combined transmitter x receiver gain for one aircraft class."""
    tx_power: float
    total_gain_db: float
    total_gain_linear: float = field(init=False)

    def __post_init__(self):
        if not self.tx_power > 0:
            raise ValidationError("tx_power", f"must be > 0 W, got {self.tx_power}")
        object.__setattr__(self, "total_gain_linear", db_to_linear(self.total_gain_db))


@dataclass(frozen=True)
class ChannelParams:
    alpha: float = 2.0
    noise_density_dbm_hz: float = -174.0
    bandwidth_hz: float = 1e6
    fading_shape: float = 1.0
    # Positions are km; d^(-alpha) is evaluated with d in units of this many metres.
    pathloss_reference_m: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValidationError("alpha", f"must be > 0, got {self.alpha}")
        if not ALPHA_RANGE[0] <= self.alpha <= ALPHA_RANGE[1]:
            logger.warning(f"alpha={self.alpha} is outside the reference range {ALPHA_RANGE}")
        if not self.bandwidth_hz > 0:
            raise ValidationError("bandwidth_hz", f"must be > 0, got {self.bandwidth_hz}")
        if not self.fading_shape > 0:
            raise ValidationError("fading_shape", f"must be > 0, got {self.fading_shape}")
        if not self.pathloss_reference_m > 0:
            raise ValidationError("pathloss_reference_m", "must be > 0")

    @property
    def noise(self) -> float:
        return noise_power(self.noise_density_dbm_hz, self.bandwidth_hz)

    @property
    def is_rayleigh(self) -> bool:
        return self.fading_shape == 1.0


def to_pathloss_units(d_km, channel: ChannelParams):
    scale = M_PER_KM / channel.pathloss_reference_m
    if np.ndim(d_km):
        return np.asarray(d_km, dtype=float) * scale
    return d_km * scale


def noise_to_signal(d_km, radio: RadioParams, channel: ChannelParams):
    """Ratio of thermal noise to the mean received power of a transmitter d_km away."""
    received = radio.tx_power * radio.total_gain_linear * pathloss_factor(
        to_pathloss_units(d_km, channel), channel.alpha
    )
    return channel.noise / received
