import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from src.errors import InvalidBandError, ValidationError

DEFAULT_RANGE_CUTOFF_KM = 15.0


class Point3(NamedTuple):
    """Aircraft position in km; the ground station sits at the origin."""
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class BoxSpace:
    """Airspace [-Lx, Lx] x [-Ly, Ly] x [0, Lz], all in km."""
    half_extent_x: float
    half_extent_y: float
    height: float

    def __post_init__(self):
        for name in ("half_extent_x", "half_extent_y", "height"):
            if not getattr(self, name) > 0:
                raise ValidationError(name, "must be > 0 km")

    @property
    def volume(self) -> float:
        return 4.0 * self.half_extent_x * self.half_extent_y * self.height


@dataclass(frozen=True)
class AltitudeBand:
    z_lo: float
    z_hi: float

    def __post_init__(self):
        if self.z_lo < 0 or self.z_hi < self.z_lo:
            raise InvalidBandError("band", f"need 0 <= z_lo <= z_hi, got [{self.z_lo}, {self.z_hi}]")

    @property
    def thickness(self) -> float:
        return self.z_hi - self.z_lo

    def check_within(self, space: BoxSpace) -> None:
        if self.z_hi > space.height:
            raise InvalidBandError(
                "band", f"[{self.z_lo}, {self.z_hi}] km exceeds box height {space.height} km"
            )

    @classmethod
    def full(cls, space: BoxSpace) -> "AltitudeBand":
        return cls(0.0, space.height)


class IntensityOrigin(str, enum.Enum):
    DENSITY = "density"
    COUNT = "count"


@dataclass(frozen=True)
class Intensity:
    """Expected aircraft per km^3, remembering how the user supplied it."""
    value: float
    origin: IntensityOrigin = IntensityOrigin.DENSITY
    count: Optional[float] = None
    reference_volume: Optional[float] = None

    def __post_init__(self):
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise ValidationError("intensity", f"must be finite and >= 0, got {self.value}")

    @classmethod
    def from_density(cls, density: float) -> "Intensity":
        return cls(float(density))

    @classmethod
    def from_count(cls, count: float, volume: float) -> "Intensity":
        if volume <= 0:
            raise ValidationError("intensity", "count conversion needs a positive region volume")
        if count < 0:
            raise ValidationError("intensity", f"expected count must be >= 0, got {count}")
        return cls(count / volume, IntensityOrigin.COUNT, float(count), float(volume))

    def expected_count(self, volume: float) -> float:
        return self.value * volume


class RangeBucket(str, enum.Enum):
    SHORT = "short"
    LONG = "long"


def region_volume(space: BoxSpace, band: AltitudeBand) -> float:
    band.check_within(space)
    return 4.0 * space.half_extent_x * space.half_extent_y * band.thickness


def distance_bounds(space: BoxSpace, band: AltitudeBand) -> Tuple[float, float]:
    """Closest and farthest distance (km) from the GS to the band-restricted box."""
    band.check_within(space)
    far = math.sqrt(space.half_extent_x ** 2 + space.half_extent_y ** 2 + band.z_hi ** 2)
    return band.z_lo, far


def sample_population(
    space: BoxSpace, band: AltitudeBand, intensity: Intensity, rng: np.random.Generator
) -> np.ndarray:
    """
    Draws one realization of a homogeneous PPP over the band-restricted box.
    Returns an (n, 3) array of x, y, z columns in km.
    """
    volume = region_volume(space, band)
    mean = intensity.value * volume
    n = int(rng.poisson(mean)) if mean > 0 else 0
    if n == 0:
        return np.empty((0, 3))
    x = rng.uniform(-space.half_extent_x, space.half_extent_x, n)
    y = rng.uniform(-space.half_extent_y, space.half_extent_y, n)
    z = rng.uniform(band.z_lo, band.z_hi, n)
    return np.column_stack((x, y, z))


def distance_to_gs(p: Point3) -> float:
    return math.sqrt(p.x * p.x + p.y * p.y + p.z * p.z)


def distances_to_gs(points: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.square(points), axis=-1))


def classify_range(d: float, cutoff: float = DEFAULT_RANGE_CUTOFF_KM) -> RangeBucket:
    # The boundary belongs to Long: d >= cutoff.
    return RangeBucket.SHORT if d < cutoff else RangeBucket.LONG
