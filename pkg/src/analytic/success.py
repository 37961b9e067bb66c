"""
Rayleigh-fading success probabilities.

Conditioned on the target distance d, the probability that the target's SINR
reaches theta is

    exp(-theta d^a N / (P_U G_U)) * exp(-lambda_U H1(s1)) * exp(-lambda_C H2(s2))

with s1 = theta d^a / G_U and s2 = s1 P_C / P_U. The UAV interferer field is
the PPP with the target removed; by Slivnyak's theorem the reduced process has
the same law, so H1 integrates the full intensity over the UAV band.
"""
import functools
import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.stats import qmc

from src.analytic.quadrature import ExponentCurve, QuadratureSettings, laplace_exponent
from src.channel.radio import M_PER_KM, db_to_linear
from src.errors import DomainError, EmptyBucketError, IntegrationAccuracyError, UnsupportedFadingError
from src.geometry.distance_law import nearest_distance_pdf, nearest_distance_quantile
from src.geometry.space import AltitudeBand, BoxSpace, RangeBucket, distance_bounds, distances_to_gs
from src.scenario import Scenario

logger = logging.getLogger(__name__)

# lambda * H below this is dropped from the exponent tables.
NEGLIGIBLE_EXPONENT = 1e-12


def _require_rayleigh(scenario: Scenario) -> None:
    if not scenario.channel.is_rayleigh:
        raise UnsupportedFadingError(
            f"analytic success probability is only defined for Rayleigh fading (shape 1), "
            f"got shape {scenario.channel.fading_shape}; use the Monte Carlo engine"
        )


def _coefficients(scenario: Scenario) -> Tuple[float, float, float]:
    """Multipliers of d_km^alpha giving the noise exponent, c1 and c2 (km^alpha)."""
    theta = db_to_linear(scenario.theta_db)
    ch = scenario.channel
    uav, ca = scenario.uav_radio, scenario.ca_radio
    unit = M_PER_KM / ch.pathloss_reference_m
    noise = theta * unit ** ch.alpha * ch.noise / (uav.tx_power * uav.total_gain_linear)
    c1 = theta
    c2 = theta * (ca.tx_power * ca.total_gain_linear) / (uav.tx_power * uav.total_gain_linear)
    return noise, c1, c2


def conditional_success(d: float, scenario: Scenario, quad: QuadratureSettings = QuadratureSettings()) -> float:
    """P(SINR >= theta | target at d km), evaluated with direct triple integrals."""
    _require_rayleigh(scenario)
    if not d > 0:
        raise DomainError(f"target distance must be > 0 km, got {d}")
    theta = db_to_linear(scenario.theta_db)
    ch = scenario.channel
    uav, ca = scenario.uav_radio, scenario.ca_radio

    d_units = d * M_PER_KM / ch.pathloss_reference_m
    s1 = theta * d_units ** ch.alpha / uav.total_gain_linear
    s2 = s1 * ca.tx_power / uav.tx_power

    log_p = -theta * d_units ** ch.alpha * ch.noise / (uav.tx_power * uav.total_gain_linear)
    if scenario.lambda_uav_int.value > 0:
        h1 = laplace_exponent(
            s1, uav.total_gain_linear, ch.alpha, scenario.space, scenario.uav_band, quad, ch.pathloss_reference_m
        )
        log_p -= scenario.lambda_uav_int.value * h1
    if scenario.lambda_ca.value > 0:
        h2 = laplace_exponent(
            s2, ca.total_gain_linear, ch.alpha, scenario.space, scenario.ca_band, quad, ch.pathloss_reference_m
        )
        log_p -= scenario.lambda_ca.value * h2
    return math.exp(log_p)


class SuccessKernel:
    """
    Vectorised conditional_success over a distance range, built on tabulated
    exponent curves. Used wherever the success probability is averaged over a
    distance law.
    """

    def __init__(self, scenario: Scenario, quad: QuadratureSettings, d_lo: float, d_hi: float):
        _require_rayleigh(scenario)
        self.alpha = scenario.channel.alpha
        self._noise, self._c1, self._c2 = _coefficients(scenario)
        self._fields = []
        span_lo, span_hi = d_lo ** self.alpha, d_hi ** self.alpha
        for lam, coef, band in (
            (scenario.lambda_uav_int.value, self._c1, scenario.uav_band),
            (scenario.lambda_ca.value, self._c2, scenario.ca_band),
        ):
            if lam == 0 or band.thickness == 0:
                continue
            curve = ExponentCurve(
                self.alpha, scenario.space, band, quad,
                coef * span_lo, coef * span_hi, h_floor=NEGLIGIBLE_EXPONENT / lam,
            )
            self._fields.append((lam, coef, curve))

    def log_success(self, d) -> np.ndarray:
        d_alpha = np.atleast_1d(np.asarray(d, dtype=float)) ** self.alpha
        out = -self._noise * d_alpha
        for lam, coef, curve in self._fields:
            out -= lam * curve(coef * d_alpha)
        return out

    def __call__(self, d) -> np.ndarray:
        return np.exp(self.log_success(d))


def _outer_quad(func, a: float, b: float, quad: QuadratureSettings, points=None) -> float:
    result = integrate.quad(
        func, a, b, epsabs=1e-12, epsrel=quad.outer_rtol, limit=quad.outer_limit, points=points, full_output=1
    )
    if len(result) > 3:
        value, error, _, message = result[:4]
        raise IntegrationAccuracyError(
            f"outer integral over [{a:.4g}, {b:.4g}] km failed: {message} (value {value:.6g})", error
        )
    return float(result[0])


def p_suc_nearest(scenario: Scenario, quad: QuadratureSettings = QuadratureSettings()) -> float:
    """
    Success probability of the UAV nearest to the GS, averaging the conditional
    success over the nearest-distance density. The integral stops at the
    truncation quantile and is not renormalised.
    """
    _require_rayleigh(scenario)
    lam = scenario.lambda_pdf
    if not lam.value > 0:
        raise DomainError("nearest-target success needs lambda_pdf > 0")
    d_hi = nearest_distance_quantile(quad.truncation_quantile, lam)
    d_lo = nearest_distance_quantile(1.0 - quad.truncation_quantile, lam)
    kernel = SuccessKernel(scenario, quad, d_lo, d_hi)

    def integrand(d: float) -> float:
        return float(kernel(d)[0]) * nearest_distance_pdf(d, lam)

    mode = (1.0 / (2.0 * math.pi * lam.value)) ** (1.0 / 3.0)
    value = _outer_quad(integrand, 0.0, d_hi, quad, points=[mode] if mode < d_hi else None)
    return min(max(value, 0.0), 1.0)


@functools.lru_cache(maxsize=16)
def _placement_distances(space: BoxSpace, band: AltitudeBand, log2_n: int) -> np.ndarray:
    """Distances of 2^log2_n Sobol placements filling the band-restricted box."""
    u = qmc.Sobol(d=3, scramble=False).random_base2(m=log2_n)
    points = np.column_stack((
        (2.0 * u[:, 0] - 1.0) * space.half_extent_x,
        (2.0 * u[:, 1] - 1.0) * space.half_extent_y,
        band.z_lo + u[:, 2] * band.thickness,
    ))
    d = distances_to_gs(points)
    d.setflags(write=False)
    return d


def _uniform_average(scenario: Scenario, quad: QuadratureSettings, bucket: Optional[RangeBucket]) -> float:
    _require_rayleigh(scenario)
    d = _placement_distances(scenario.space, scenario.uav_band, quad.placements_log2)
    if bucket is RangeBucket.SHORT:
        d = d[d < scenario.range_cutoff]
    elif bucket is RangeBucket.LONG:
        d = d[d >= scenario.range_cutoff]
    d = d[d > 0]
    if d.size == 0:
        raise EmptyBucketError(
            f"no placements in the {bucket.value if bucket else 'full'} bucket "
            f"(cutoff {scenario.range_cutoff} km)"
        )
    kernel = SuccessKernel(scenario, quad, float(d.min()), float(d.max()))
    return float(np.mean(kernel(d)))


def p_suc_uniform(scenario: Scenario, quad: QuadratureSettings = QuadratureSettings()) -> float:
    """Success probability of a UAV placed uniformly in its band, no range conditioning."""
    return _uniform_average(scenario, quad, None)


def p_suc_bucket(
    scenario: Scenario, bucket: RangeBucket, quad: QuadratureSettings = QuadratureSettings()
) -> float:
    """
    Success probability of a uniformly placed UAV conditioned on its range
    bucket. The nearest-distance law carries almost no mass past the 15 km
    cutoff, so bucket curves weight distance by uniform placement, the way the
    simulation classifies generated aircraft.
    """
    d_min, d_max = distance_bounds(scenario.space, scenario.uav_band)
    cutoff = scenario.range_cutoff
    if (bucket is RangeBucket.SHORT and cutoff <= d_min) or (bucket is RangeBucket.LONG and cutoff > d_max):
        raise EmptyBucketError(
            f"{bucket.value} bucket is empty: cutoff {cutoff} km vs distances [{d_min:.3f}, {d_max:.3f}] km"
        )
    return _uniform_average(scenario, quad, bucket)
