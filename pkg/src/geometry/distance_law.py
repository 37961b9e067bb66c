"""
Nearest-neighbour distance law of a homogeneous 3D PPP seen from the GS.

The void probability of a ball of radius d is exp(-(4/3) pi lambda d^3); the
CDF and PDF below follow from it. The law is the unbounded-ball one: it does
not account for the finite box or the altitude band.
"""
import math
from typing import Optional, Union

import numpy as np

from src.errors import DomainError
from src.geometry.space import Intensity

IntensityLike = Union[Intensity, float]


def _density(intensity: IntensityLike) -> float:
    value = intensity.value if isinstance(intensity, Intensity) else float(intensity)
    if not value > 0:
        raise DomainError(f"nearest-distance law needs intensity > 0, got {value}")
    return value


def _check_distance(d) -> None:
    if np.any(np.asarray(d) < 0):
        raise DomainError("distance must be >= 0")


def nearest_distance_cdf(d, intensity: IntensityLike):
    _check_distance(d)
    lam = _density(intensity)
    return -np.expm1(-(4.0 / 3.0) * math.pi * lam * np.power(d, 3))


def nearest_distance_pdf(d, intensity: IntensityLike):
    _check_distance(d)
    lam = _density(intensity)
    d = np.asarray(d, dtype=float)
    out = 4.0 * math.pi * lam * d ** 2 * np.exp(-(4.0 / 3.0) * math.pi * lam * d ** 3)
    return out if out.ndim else float(out)


def nearest_distance_quantile(q: float, intensity: IntensityLike) -> float:
    if not 0 <= q < 1:
        raise DomainError(f"quantile level must be in [0, 1), got {q}")
    lam = _density(intensity)
    return (-math.log1p(-q) * 3.0 / (4.0 * math.pi * lam)) ** (1.0 / 3.0)


def sample_ball_min_distance(
    intensity: IntensityLike, radius: float, rng: np.random.Generator
) -> Optional[float]:
    """Smallest distance to the centre in one PPP draw over a ball; None if the ball is empty."""
    lam = _density(intensity)
    n = rng.poisson(lam * (4.0 / 3.0) * math.pi * radius ** 3)
    if n == 0:
        return None
    # Radii of uniform points in a ball are R * U^(1/3).
    return float(radius * np.min(rng.random(n)) ** (1.0 / 3.0))
