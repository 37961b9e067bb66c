import math
from dataclasses import replace

import numpy as np
import pytest

from src.analytic.quadrature import (
    ExponentCurve,
    QuadratureSettings,
    exponent_from_product,
    exponent_with_error,
    laplace_exponent,
)
from src.analytic.success import (
    conditional_success,
    p_suc_bucket,
    p_suc_nearest,
    p_suc_uniform,
)
from src.channel.radio import ChannelParams, db_to_linear
from src.errors import DomainError, EmptyBucketError, UnsupportedFadingError, ValidationError
from src.geometry.space import Intensity, RangeBucket
from src.scenario import Scenario


@pytest.fixture
def quad():
    return QuadratureSettings(placements_log2=12)


@pytest.fixture
def scenario():
    return Scenario()


@pytest.fixture
def quiet(scenario):
    """No interferers: success is limited by noise alone."""
    return replace(scenario, lambda_uav_int=Intensity.from_density(0.0), lambda_ca=Intensity.from_density(0.0))


def test_quadrature_settings_validation():
    with pytest.raises(ValidationError):
        QuadratureSettings(truncation_quantile=1.0)
    with pytest.raises(ValidationError):
        QuadratureSettings(nodes_per_decade=1)


def test_exponent_is_zero_at_origin(scenario, quad):
    assert laplace_exponent(0.0, 200.0, 2.0, scenario.space, scenario.uav_band, quad) == 0.0


def test_exponent_grows_to_region_volume(scenario, quad):
    values = [
        exponent_from_product(c, 2.0, scenario.space, scenario.uav_band, quad).value
        for c in (1e-2, 1.0, 1e2, 1e4)
    ]
    assert all(b > a for a, b in zip(values, values[1:]))
    saturated = exponent_from_product(1e14, 2.0, scenario.space, scenario.uav_band, quad).value
    assert saturated == pytest.approx(scenario.uav_volume, rel=1e-6)


def test_exponent_matches_sampled_integral(scenario, quad):
    c, alpha = 45.1, 2.0
    h = exponent_from_product(c, alpha, scenario.space, scenario.uav_band, quad)
    rng = np.random.default_rng(5)
    n = 2_000_000
    p = rng.random((n, 3)) * [20.0, 20.0, 5.0] + [-10.0, -10.0, 1.0]
    f = c / (np.sum(p * p, axis=1) ** (alpha / 2.0) + c)
    mc, se = 2000.0 * f.mean(), 2000.0 * f.std() / math.sqrt(n)
    assert abs(h.value - mc) <= 4 * se + h.error


def test_exponent_rejects_negative_variable(scenario, quad):
    with pytest.raises(DomainError):
        exponent_with_error(-1.0, 200.0, 2.0, scenario.space, scenario.uav_band, quad)


def test_exponent_unit_invariance(scenario, quad):
    gain, alpha, d = scenario.uav_radio.total_gain_linear, 3.5, 4.0
    theta = db_to_linear(7.0)
    in_m = laplace_exponent(theta * (d * 1000.0) ** alpha / gain, gain, alpha,
                            scenario.space, scenario.uav_band, quad, reference_m=1.0)
    in_km = laplace_exponent(theta * d ** alpha / gain, gain, alpha,
                             scenario.space, scenario.uav_band, quad, reference_m=1000.0)
    assert in_m == pytest.approx(in_km, rel=1e-9)


def test_exponent_curve_tracks_direct_integral(scenario, quad):
    curve = ExponentCurve(2.0, scenario.space, scenario.uav_band, quad, 1.0, 1e3)
    for c in (1.7, 23.0, 410.0):
        direct = exponent_from_product(c, 2.0, scenario.space, scenario.uav_band, quad).value
        assert curve(c)[0] == pytest.approx(direct, rel=5e-3)


def test_noise_only_conditional_success(quiet, quad):
    ch, uav = quiet.channel, quiet.uav_radio
    k = db_to_linear(quiet.theta_db) * 1e6 * ch.noise / (uav.tx_power * uav.total_gain_linear)
    for d in (0.5, 5.0, 14.0):
        assert conditional_success(d, quiet, quad) == pytest.approx(math.exp(-k * d ** 2), rel=1e-12)


def test_conditional_success_near_ground_station(scenario, quad):
    assert conditional_success(1e-3, scenario, quad) > 0.999


def test_conditional_success_decreases_with_distance(scenario, quad):
    values = [conditional_success(d, scenario, quad) for d in (2.0, 5.0, 10.0, 14.0)]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert all(b < a for a, b in zip(values, values[1:]))


def test_conditional_success_domain(scenario, quad):
    with pytest.raises(DomainError):
        conditional_success(0.0, scenario, quad)
    nakagami = replace(scenario, channel=ChannelParams(fading_shape=2.0))
    with pytest.raises(UnsupportedFadingError):
        conditional_success(3.0, nakagami, quad)
    with pytest.raises(UnsupportedFadingError):
        p_suc_nearest(nakagami, quad)


def test_nearest_noise_only_is_almost_certain(quiet, quad):
    assert p_suc_nearest(quiet, quad) == pytest.approx(1.0, abs=1e-6)


def test_nearest_decreases_with_threshold(scenario, quad):
    values = [p_suc_nearest(replace(scenario, theta_db=t), quad) for t in (7.0, 10.0, 14.0)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_short_bucket_beats_long(scenario):
    # Only the box corners above 5 km reach the long bucket.
    quad = QuadratureSettings()
    short = p_suc_bucket(scenario, RangeBucket.SHORT, quad)
    long_ = p_suc_bucket(scenario, RangeBucket.LONG, quad)
    assert 0.0 < long_ < short < 1.0


def test_long_bucket_with_zero_cutoff_is_uniform(scenario, quad):
    everything = replace(scenario, range_cutoff=0.0)
    assert p_suc_bucket(everything, RangeBucket.LONG, quad) == pytest.approx(
        p_suc_uniform(everything, quad), rel=1e-12
    )


def test_empty_buckets(scenario, quad):
    with pytest.raises(EmptyBucketError):
        p_suc_bucket(replace(scenario, range_cutoff=100.0), RangeBucket.LONG, quad)
    with pytest.raises(EmptyBucketError):
        p_suc_bucket(replace(scenario, range_cutoff=0.5), RangeBucket.SHORT, quad)


def test_success_ignores_uav_power_without_noise_or_aircraft(scenario, quad):
    silent = replace(
        scenario,
        channel=ChannelParams(noise_density_dbm_hz=float("-inf")),
        lambda_ca=Intensity.from_density(0.0),
    )
    weak, strong = silent.with_powers(uav_power=1.0), silent.with_powers(uav_power=70.0)
    for d in (2.0, 8.0, 14.0):
        assert conditional_success(d, weak, quad) == pytest.approx(conditional_success(d, strong, quad), rel=1e-12)
    assert p_suc_bucket(weak, RangeBucket.SHORT, quad) == pytest.approx(
        p_suc_bucket(strong, RangeBucket.SHORT, quad), rel=1e-12
    )


def test_conditional_success_decreases_with_aircraft_density(scenario, quad):
    values = [
        conditional_success(8.0, replace(scenario, lambda_ca=Intensity.from_count(n, 4000.0)), quad)
        for n in (0.0, 15.0, 60.0)
    ]
    assert all(b < a for a, b in zip(values, values[1:]))
