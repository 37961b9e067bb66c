"""
Laplace exponents of the UAV and CA interference fields.

For a PPP of intensity lambda over a region R, the probability generating
functional gives L(s) = exp(-lambda * H(s)) with

    H(s) = int_R 1 - 1 / (1 + s G r^-alpha) dV = int_R sG / (r^alpha + sG) dV.

The second form is bounded in [0, 1] and has no singularity at r -> 0.
Everything here works with the scale-free product c = s G expressed in
km^alpha, which makes H independent of the pathloss reference unit.
"""
import functools
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import cubature
from scipy.interpolate import PchipInterpolator

from src.channel.radio import M_PER_KM
from src.errors import DomainError, IntegrationAccuracyError, ValidationError
from src.geometry.space import AltitudeBand, BoxSpace, distance_bounds, region_volume

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureSettings:
    volume_rtol: float = 1e-6
    outer_rtol: float = 1e-7
    # Outer integrals over the nearest-distance law stop at this quantile.
    truncation_quantile: float = 1.0 - 1e-9
    max_subdivisions: int = 4000
    outer_limit: int = 200
    nodes_per_decade: int = 8
    placements_log2: int = 17

    def __post_init__(self):
        if not (self.volume_rtol > 0 and self.outer_rtol > 0):
            raise ValidationError("quadrature", "tolerances must be > 0")
        if not 0 < self.truncation_quantile < 1:
            raise ValidationError("quadrature.truncation_quantile", "must be in (0, 1)")
        if self.max_subdivisions < 1 or self.outer_limit < 1:
            raise ValidationError("quadrature", "subdivision limits must be >= 1")
        if self.nodes_per_decade < 2:
            raise ValidationError("quadrature.nodes_per_decade", "must be >= 2")
        if not 1 <= self.placements_log2 <= 24:
            raise ValidationError("quadrature.placements_log2", "must be in [1, 24]")


class Exponent(NamedTuple):
    value: float
    error: float


@functools.lru_cache(maxsize=None)
def _volume_integral(
    c: float, alpha: float, lx: float, ly: float, z_lo: float, z_hi: float, rtol: float, max_subdivisions: int
) -> Exponent:
    def integrand(points: np.ndarray) -> np.ndarray:
        r_alpha = np.sum(points * points, axis=-1) ** (alpha / 2.0)
        return c / (r_alpha + c)

    # r is symmetric in the signs of x and y: integrate one quadrant, times 4.
    res = cubature(
        integrand,
        np.array([0.0, 0.0, z_lo]),
        np.array([lx, ly, z_hi]),
        rule="gk21",
        rtol=rtol,
        max_subdivisions=max_subdivisions,
    )
    value, error = 4.0 * float(res.estimate), 4.0 * float(res.error)
    if res.status != "converged":
        raise IntegrationAccuracyError(
            f"triple integral (c={c:.4g} km^{alpha}, z=[{z_lo}, {z_hi}]) did not reach rtol={rtol} "
            f"within {max_subdivisions} subdivisions; error estimate {error:.3g}",
            error,
        )
    return Exponent(value, error)


def exponent_from_product(
    c_km: float, alpha: float, space: BoxSpace, band: AltitudeBand, quad: QuadratureSettings
) -> Exponent:
    """H for the product c = s G already expressed in km^alpha."""
    volume = region_volume(space, band)
    if c_km == 0 or volume == 0:
        return Exponent(0.0, 0.0)
    return _volume_integral(
        float(c_km), float(alpha), space.half_extent_x, space.half_extent_y,
        band.z_lo, band.z_hi, quad.volume_rtol, quad.max_subdivisions,
    )


def exponent_with_error(
    s: float,
    gain: float,
    alpha: float,
    space: BoxSpace,
    band: AltitudeBand,
    quad: QuadratureSettings,
    reference_m: float = 1.0,
) -> Exponent:
    """
    H(s) in km^3 with its quadrature error estimate. `s` carries the pathloss
    reference unit to the power alpha (metres by default).
    """
    if not s >= 0:
        raise DomainError(f"Laplace variable must be >= 0, got {s}")
    c_km = s * gain * (reference_m / M_PER_KM) ** alpha
    return exponent_from_product(c_km, alpha, space, band, quad)


def laplace_exponent(
    s: float,
    gain: float,
    alpha: float,
    space: BoxSpace,
    band: AltitudeBand,
    quad: QuadratureSettings = QuadratureSettings(),
    reference_m: float = 1.0,
) -> float:
    return exponent_with_error(s, gain, alpha, space, band, quad, reference_m).value


class ExponentCurve:
    """
    H(c) over one region, tabulated at c = 10^(k / nodes_per_decade) for
    integer k and interpolated by a monotone cubic in log-log space. Grid nodes
    are memoised, so curves for neighbouring sweep points reuse them.

    Below the first node H follows its small-c power law (linear in log-log);
    above the saturation point H equals the region volume to 1e-12.
    """

    def __init__(
        self,
        alpha: float,
        space: BoxSpace,
        band: AltitudeBand,
        quad: QuadratureSettings,
        c_lo: float,
        c_hi: float,
        h_floor: float = 0.0,
    ):
        self.volume = region_volume(space, band)
        self._params = (alpha, space, band, quad)
        r_max = distance_bounds(space, band)[1]
        # 1 - H / V <= r_max^alpha / c, so past this point H is the volume.
        self._c_saturated = r_max ** alpha * 1e12
        c_hi = min(max(c_hi, c_lo), self._c_saturated)
        per = quad.nodes_per_decade
        k_hi = math.ceil(per * math.log10(c_hi)) + 2
        k_lo = math.floor(per * math.log10(c_lo)) - 2 if c_lo > 0 else k_hi - 12 * per

        ks, values = [], []
        for k in range(k_hi, k_lo - 1, -1):
            h = exponent_from_product(10.0 ** (k / per), alpha, space, band, quad).value
            if h <= 0 and len(ks) >= 2:
                break
            ks.append(k)
            values.append(h)
            # Once lambda * H is negligible the power-law tail takes over.
            if len(ks) >= 4 and h < h_floor:
                break
        ks.reverse()
        values.reverse()

        self._log_c = np.array(ks, dtype=float) / per * math.log(10.0)
        self._log_h = np.log(np.array(values))
        self._spline = PchipInterpolator(self._log_c, self._log_h)
        self._slope_lo = (self._log_h[1] - self._log_h[0]) / (self._log_c[1] - self._log_c[0])
        logger.debug(
            f"Exponent curve alpha={alpha} band=[{band.z_lo}, {band.z_hi}] "
            f"over {len(ks)} nodes, c in [{math.exp(self._log_c[0]):.3g}, {math.exp(self._log_c[-1]):.3g}]"
        )

    def __call__(self, c) -> np.ndarray:
        c = np.atleast_1d(np.asarray(c, dtype=float))
        with np.errstate(divide="ignore"):
            log_c = np.log(c)
        out = np.empty_like(log_c)
        below = log_c < self._log_c[0]
        above = log_c > self._log_c[-1]
        inside = ~(below | above)
        out[inside] = self._spline(log_c[inside])
        out[below] = self._log_h[0] + self._slope_lo * (log_c[below] - self._log_c[0])
        out[above] = [self._log_exact(v) for v in c[above]]
        return np.minimum(np.exp(out), self.volume)

    def _log_exact(self, c: float) -> float:
        if c >= self._c_saturated:
            return math.log(self.volume)
        return math.log(exponent_from_product(c, *self._params).value)
