import enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from src.channel.radio import (
    M_PER_KM,
    ChannelParams,
    RadioParams,
    db_to_linear,
    pathloss_factor,
    to_pathloss_units,
)
from src.errors import NoTargetError, SingularDistanceError
from src.geometry.space import Point3, distance_to_gs


class AircraftClass(str, enum.Enum):
    UAV = "uav"
    CA = "ca"


class RealizedTransmitter(NamedTuple):
    position: Point3
    fading: float
    kind: AircraftClass = AircraftClass.UAV


class SinrBreakdown(NamedTuple):
    """Received powers in watts; sinr = signal / (noise + uav_interference + ca_interference)."""
    signal: float
    noise: float
    uav_interference: float
    ca_interference: float
    sinr: float


def interference_sum(
    transmitters: Sequence[RealizedTransmitter],
    gain: float,
    alpha: float,
    exclude: Optional[int] = None,
    reference_m: float = 1.0,
) -> float:
    """
    Sum of gain * h * d^(-alpha) over the transmitters, skipping index `exclude`.
    Power-free: the caller multiplies by the class transmit power.
    """
    total = 0.0
    for i, tx in enumerate(transmitters):
        if i == exclude:
            continue
        d = distance_to_gs(tx.position)
        if d == 0:
            raise SingularDistanceError(f"transmitter {i} sits on the ground station")
        total += gain * tx.fading * pathloss_factor(d * M_PER_KM / reference_m, alpha)
    return float(total)


def compute_sinr(
    target_index: int,
    uavs: Sequence[RealizedTransmitter],
    cas: Sequence[RealizedTransmitter],
    uav_radio: RadioParams,
    ca_radio: RadioParams,
    channel: ChannelParams,
) -> SinrBreakdown:
    if not uavs:
        raise NoTargetError("no UAV to evaluate as target")
    target = uavs[target_index]
    d = distance_to_gs(target.position)
    if d == 0:
        raise SingularDistanceError("target sits on the ground station")

    signal = (
        uav_radio.tx_power * uav_radio.total_gain_linear * target.fading
        * pathloss_factor(to_pathloss_units(d, channel), channel.alpha)
    )
    # All other UAVs transmit at the same time; only the target is excluded.
    i_uav = uav_radio.tx_power * interference_sum(
        uavs, uav_radio.total_gain_linear, channel.alpha, exclude=target_index,
        reference_m=channel.pathloss_reference_m,
    )
    i_ca = ca_radio.tx_power * interference_sum(
        cas, ca_radio.total_gain_linear, channel.alpha, reference_m=channel.pathloss_reference_m
    )
    noise = channel.noise
    return SinrBreakdown(float(signal), noise, i_uav, i_ca, float(signal / (noise + i_uav + i_ca)))


def success(sinr, theta_db: float):
    """Decoded iff SINR >= theta (inclusive)."""
    return sinr >= db_to_linear(theta_db)


def target_sinr(
    uav_distances: np.ndarray,
    ca_distances: np.ndarray,
    targets: np.ndarray,
    uav_fading: np.ndarray,
    ca_fading: np.ndarray,
    uav_radio: RadioParams,
    ca_radio: RadioParams,
    channel: ChannelParams,
) -> np.ndarray:
    """
    Vectorised SINR for several target evaluations over one population.

    uav_distances / ca_distances are km to the GS. Row k of uav_fading (shape
    (len(targets), n_uav)) and ca_fading (len(targets), n_ca) holds the fading
    realised for the evaluation of target targets[k].
    """
    if len(uav_distances) == 0:
        raise NoTargetError("no UAV to evaluate as target")
    if np.any(uav_distances == 0) or np.any(ca_distances == 0):
        raise SingularDistanceError("an aircraft sits on the ground station")
    rows = np.arange(len(targets))

    uav_gain = uav_radio.total_gain_linear * pathloss_factor(to_pathloss_units(uav_distances, channel), channel.alpha)
    uav_rx = uav_radio.tx_power * uav_fading * uav_gain
    signal = uav_rx[rows, targets]
    uav_rx[rows, targets] = 0.0
    i_uav = uav_rx.sum(axis=1)

    if len(ca_distances):
        ca_gain = ca_radio.total_gain_linear * pathloss_factor(to_pathloss_units(ca_distances, channel), channel.alpha)
        i_ca = ca_radio.tx_power * (ca_fading * ca_gain).sum(axis=1)
    else:
        i_ca = np.zeros(len(targets))
    return signal / (channel.noise + i_uav + i_ca)
