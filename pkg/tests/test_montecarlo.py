import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from src.analytic.quadrature import QuadratureSettings
from src.analytic.success import conditional_success
from src.errors import DomainError, NoTargetError, PlacementError, ValidationError
from src.geometry.space import Intensity, RangeBucket, distance_bounds
from src.montecarlo.engine import (
    TrialProtocol,
    population_counts,
    run_fixed_distance,
    run_nearest,
    run_population,
)
from src.montecarlo.estimate import Estimate, ratio_standard_error, wilson_interval
from src.montecarlo.streams import block_ranges, derive_key, trial_generator
from src.scenario import Scenario

SEED = 20240607


@pytest.fixture
def scenario():
    return Scenario()


@pytest.fixture
def quiet(scenario):
    return replace(
        scenario, lambda_uav_int=Intensity.from_density(0.0), lambda_ca=Intensity.from_density(0.0)
    ).with_powers(uav_power=1e6)


# ---------------------------------------------------------------------- #
# Streams                                                                 #
# ---------------------------------------------------------------------- #

def test_keys_are_deterministic_per_label():
    assert np.array_equal(derive_key(1, 3), derive_key(1, 3))
    assert not np.array_equal(derive_key(1, 3), derive_key(1, 2))
    assert not np.array_equal(derive_key(1, 3), derive_key(2, 3))


def test_trial_streams_are_addressable():
    key = derive_key(SEED, 1)
    a = trial_generator(key, 7).random(5)
    b = trial_generator(key, 7).random(5)
    c = trial_generator(key, 8).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_block_ranges():
    assert block_ranges(2500, 1000) == ((0, 1000), (1000, 2000), (2000, 2500))
    assert block_ranges(1, 1000) == ((0, 1),)


# ---------------------------------------------------------------------- #
# Wilson interval                                                         #
# ---------------------------------------------------------------------- #

def test_wilson_matches_textbook_formula():
    k, n = 8, 10
    z = stats.norm.ppf(0.975)
    p = k / n
    center = (k + z * z / 2) / (n + z * z)
    half = z * math.sqrt(n) / (n + z * z) * math.sqrt(p * (1 - p) + z * z / (4 * n))
    low, high = wilson_interval(k, n)
    assert low == pytest.approx(center - half, abs=1e-12)
    assert high == pytest.approx(center + half, abs=1e-12)


def test_wilson_edges():
    assert wilson_interval(0, 20)[0] == 0.0
    assert wilson_interval(20, 20)[1] == 1.0
    low, high = wilson_interval(500, 1000)
    assert (low + high) / 2 == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(DomainError):
        wilson_interval(5, 4)
    with pytest.raises(DomainError):
        wilson_interval(1, 4, confidence=1.0)


def test_estimate_from_counts():
    est = Estimate.from_counts(30, 100)
    assert est.p_hat == 0.3
    assert est.ci_low <= est.p_hat <= est.ci_high
    assert est.agrees_with(0.3)
    assert not est.agrees_with(0.9)
    empty = Estimate.from_counts(0, 0, bucket=RangeBucket.LONG)
    assert empty.empty
    assert math.isnan(empty.p_hat)
    assert (empty.ci_low, empty.ci_high) == (0.0, 1.0)
    assert not empty.agrees_with(0.5)


def test_ratio_standard_error_over_trials():
    # Three trials with (successes, targets) = (2, 3), (0, 1), (4, 4).
    s, n = np.array([2, 0, 4]), np.array([3, 1, 4])
    se = ratio_standard_error(s.sum(), n.sum(), (s * s).sum(), (s * n).sum(), (n * n).sum())
    p = 6 / 8
    assert se == pytest.approx(math.sqrt(np.sum((s - p * n) ** 2)) / 8)
    assert math.isnan(ratio_standard_error(0, 0, 0, 0, 0))


def test_standard_error_widens_to_cluster_error():
    plain = Estimate.from_counts(600, 1000)
    clustered = Estimate.from_counts(600, 1000, cluster_se=0.05)
    assert clustered.standard_error == 0.05 > plain.standard_error
    assert Estimate.from_counts(600, 1000, cluster_se=1e-6).standard_error == plain.standard_error
    assert not clustered.agrees_with(0.8)
    assert clustered.agrees_with(0.73)


# ---------------------------------------------------------------------- #
# Trial engine                                                            #
# ---------------------------------------------------------------------- #

def test_fixed_protocol_needs_distance():
    with pytest.raises(ValidationError):
        TrialProtocol.fixed_distance(0.0)
    assert TrialProtocol.fixed_distance(5.0).distance_km == 5.0


def test_fixed_distance_without_interference_always_succeeds(quiet):
    est = run_fixed_distance(10.0, quiet, 2000, SEED, workers=1)
    assert est.trials == 2000
    assert est.p_hat == 1.0


def test_single_trial(scenario):
    est = run_fixed_distance(5.0, scenario, 1, SEED, workers=1)
    assert est.trials == 1
    assert est.successes in (0, 1)


def test_fixed_distance_at_band_extremes(scenario):
    d_min, d_max = distance_bounds(scenario.space, scenario.uav_band)
    for d in (d_min, d_max):
        assert run_fixed_distance(d, scenario, 5, SEED, workers=1).trials == 5
    with pytest.raises(PlacementError):
        run_fixed_distance(d_max + 0.01, scenario, 5, SEED, workers=1)


def test_unreachable_distance(scenario):
    with pytest.raises(PlacementError):
        run_fixed_distance(0.5, scenario, 10, SEED, workers=1)
    with pytest.raises(PlacementError):
        run_fixed_distance(20.0, scenario, 10, SEED, workers=1)


def test_zero_trials_rejected(scenario):
    with pytest.raises(ValidationError):
        run_fixed_distance(5.0, scenario, 0, SEED, workers=1)


def test_nearest_needs_uavs(scenario):
    with pytest.raises(NoTargetError):
        run_nearest(replace(scenario, lambda_uav_int=Intensity.from_density(0.0)), 10, SEED, workers=1)


def test_nearest_threshold_extremes(scenario):
    assert run_nearest(replace(scenario, theta_db=100.0), 300, SEED, workers=1).p_hat == 0.0
    assert run_nearest(replace(scenario, theta_db=-100.0), 300, SEED, workers=1).p_hat == 1.0


def test_population_buckets(scenario):
    estimates = run_population(scenario, 300, SEED, workers=1)
    assert set(estimates) == {RangeBucket.SHORT, RangeBucket.LONG}
    short, long_ = estimates[RangeBucket.SHORT], estimates[RangeBucket.LONG]
    assert short.trials > 0
    assert short.trials >= long_.trials
    assert 0.0 <= short.p_hat <= 1.0


def test_population_estimates_carry_cluster_error(scenario):
    short = run_population(scenario, 300, SEED, workers=1)[RangeBucket.SHORT]
    assert short.cluster_se is not None and short.cluster_se >= 0.0
    wilson = (short.ci_high - short.ci_low) / (2 * stats.norm.ppf(0.975))
    assert short.standard_error >= wilson


def test_population_counts_are_reproducible_across_workers(scenario):
    serial = population_counts(scenario, 2500, SEED, workers=1)
    again = population_counts(scenario, 2500, SEED, workers=1)
    parallel = population_counts(scenario, 2500, SEED, workers=2)
    assert np.array_equal(serial, again)
    assert np.array_equal(serial, parallel)


def test_fixed_distance_agrees_with_analytic(scenario):
    est = run_fixed_distance(10.0, scenario, 5000, SEED, workers=1)
    p = conditional_success(10.0, scenario, QuadratureSettings())
    assert est.agrees_with(p)
