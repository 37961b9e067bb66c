"""
Monte Carlo estimates of the received probability.

A trial is one full redraw: interferer populations and fading on every link.
The received probability depends on the target only through its distance.
Trials are grouped in fixed blocks of trial indices and each trial runs on its
own counter-derived stream, so counts are identical for any worker count.
"""
import enum
import functools
import logging
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Callable, Dict, Optional

import numpy as np

from src.channel.fading import sample_fading_array
from src.config import resolve_workers
from src.errors import NoTargetError, PlacementError, ValidationError
from src.geometry.space import RangeBucket, distance_bounds, distances_to_gs, sample_population
from src.montecarlo.estimate import Estimate, ratio_standard_error
from src.montecarlo.streams import block_ranges, derive_key, trial_generator
from src.scenario import Scenario
from src.sinr.interference import success, target_sinr

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1000
MAX_EMPTY_RESAMPLES = 10_000
POPULATION_COUNT_FIELDS = 11


class ProtocolKind(str, enum.Enum):
    FIXED = "fixed"
    NEAREST = "nearest"
    POPULATION = "population"


# Stream labels keep the protocols on unrelated keys for one master seed.
_STREAM_LABEL = {ProtocolKind.FIXED: 1, ProtocolKind.NEAREST: 2, ProtocolKind.POPULATION: 3}


@dataclass(frozen=True)
class TrialProtocol:
    kind: ProtocolKind
    distance_km: Optional[float] = None

    def __post_init__(self):
        if self.kind is ProtocolKind.FIXED and not (self.distance_km is not None and self.distance_km > 0):
            raise ValidationError("distance_km", "fixed-distance protocol needs d > 0")

    @classmethod
    def fixed_distance(cls, d: float) -> "TrialProtocol":
        return cls(ProtocolKind.FIXED, d)

    @classmethod
    def nearest(cls) -> "TrialProtocol":
        return cls(ProtocolKind.NEAREST)

    @classmethod
    def population(cls) -> "TrialProtocol":
        return cls(ProtocolKind.POPULATION)


# ---------------------------------------------------------------------- #
# Single trials                                                           #
# ---------------------------------------------------------------------- #

def _check_reachable(d: float, scenario: Scenario) -> None:
    d_min, d_max = distance_bounds(scenario.space, scenario.uav_band)
    if not d_min <= d <= d_max:
        raise PlacementError(
            f"target distance {d} km is unreachable in the UAV band: distances span [{d_min:.3f}, {d_max:.3f}] km"
        )


def _sinr_for_targets(
    scenario: Scenario, uav_d: np.ndarray, ca_d: np.ndarray, targets: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    beta = scenario.channel.fading_shape
    # Fresh fading on every link for every target evaluation.
    uav_fading = sample_fading_array(beta, (len(targets), len(uav_d)), rng)
    ca_fading = sample_fading_array(beta, (len(targets), len(ca_d)), rng)
    return target_sinr(
        uav_d, ca_d, targets, uav_fading, ca_fading, scenario.uav_radio, scenario.ca_radio, scenario.channel
    )


def _fixed_trial(scenario: Scenario, d: float, rng: np.random.Generator) -> bool:
    interferers = sample_population(scenario.space, scenario.uav_band, scenario.lambda_uav_int, rng)
    cas = sample_population(scenario.space, scenario.ca_band, scenario.lambda_ca, rng)
    uav_d = np.concatenate(([d], distances_to_gs(interferers)))
    sinr = _sinr_for_targets(scenario, uav_d, distances_to_gs(cas), np.array([0]), rng)
    return bool(success(sinr[0], scenario.theta_db))


def _nearest_trial(scenario: Scenario, rng: np.random.Generator):
    empties = 0
    uavs = sample_population(scenario.space, scenario.uav_band, scenario.lambda_uav_int, rng)
    while len(uavs) == 0:
        empties += 1
        if empties > MAX_EMPTY_RESAMPLES:
            raise NoTargetError(f"UAV population stayed empty for {MAX_EMPTY_RESAMPLES} redraws")
        uavs = sample_population(scenario.space, scenario.uav_band, scenario.lambda_uav_int, rng)
    cas = sample_population(scenario.space, scenario.ca_band, scenario.lambda_ca, rng)
    uav_d = distances_to_gs(uavs)
    target = np.array([int(np.argmin(uav_d))])
    sinr = _sinr_for_targets(scenario, uav_d, distances_to_gs(cas), target, rng)
    return bool(success(sinr[0], scenario.theta_db)), empties


def _population_trial(scenario: Scenario, rng: np.random.Generator) -> np.ndarray:
    """
    Counts [short successes, short targets, long successes, long targets, empty draws]
    followed by the per-trial products summed for the cluster standard error:
    short s*s, s*n, n*n then long s*s, s*n, n*n.
    """
    uavs = sample_population(scenario.space, scenario.uav_band, scenario.lambda_uav_int, rng)
    cas = sample_population(scenario.space, scenario.ca_band, scenario.lambda_ca, rng)
    if len(uavs) == 0:
        return np.array([0, 0, 0, 0, 1] + [0] * 6, dtype=np.int64)
    uav_d = distances_to_gs(uavs)
    sinr = _sinr_for_targets(scenario, uav_d, distances_to_gs(cas), np.arange(len(uav_d)), rng)
    ok = success(sinr, scenario.theta_db)
    short = uav_d < scenario.range_cutoff
    ss, sn = int(np.sum(ok & short)), int(np.sum(short))
    ls, ln = int(np.sum(ok & ~short)), int(np.sum(~short))
    return np.array(
        [ss, sn, ls, ln, 0, ss * ss, ss * sn, sn * sn, ls * ls, ls * ln, ln * ln], dtype=np.int64
    )


# ---------------------------------------------------------------------- #
# Blocks and dispatch                                                     #
# ---------------------------------------------------------------------- #

def _fixed_block(scenario: Scenario, d: float, key: np.ndarray, bounds) -> np.ndarray:
    start, stop = bounds
    hits = sum(_fixed_trial(scenario, d, trial_generator(key, i)) for i in range(start, stop))
    return np.array([hits, stop - start], dtype=np.int64)


def _nearest_block(scenario: Scenario, key: np.ndarray, bounds) -> np.ndarray:
    start, stop = bounds
    counts = np.zeros(3, dtype=np.int64)
    for i in range(start, stop):
        ok, empties = _nearest_trial(scenario, trial_generator(key, i))
        counts += (int(ok), 1, empties)
    return counts


def _population_block(scenario: Scenario, key: np.ndarray, bounds) -> np.ndarray:
    start, stop = bounds
    counts = np.zeros(POPULATION_COUNT_FIELDS, dtype=np.int64)
    for i in range(start, stop):
        counts += _population_trial(scenario, trial_generator(key, i))
    return counts


def _dispatch(block_fn: Callable, trials: int, workers: Optional[int]) -> np.ndarray:
    if trials < 1:
        raise ValidationError("trials", f"must be >= 1, got {trials}")
    blocks = block_ranges(trials, BLOCK_SIZE)
    n_workers = min(resolve_workers(workers), len(blocks))
    if n_workers <= 1:
        parts = [block_fn(b) for b in blocks]
    else:
        with Pool(processes=n_workers) as pool:
            parts = pool.map(block_fn, blocks)
    # Integer sums: independent of block completion order.
    return np.sum(parts, axis=0)


def fixed_distance_counts(d: float, scenario: Scenario, trials: int, seed: int,
                          workers: Optional[int] = None) -> np.ndarray:
    _check_reachable(d, scenario)
    key = derive_key(seed, _STREAM_LABEL[ProtocolKind.FIXED])
    return _dispatch(functools.partial(_fixed_block, scenario, d, key), trials, workers)


def nearest_counts(scenario: Scenario, trials: int, seed: int, workers: Optional[int] = None) -> np.ndarray:
    if not scenario.lambda_uav_int.value > 0:
        raise NoTargetError("nearest-target protocol needs a UAV intensity > 0")
    key = derive_key(seed, _STREAM_LABEL[ProtocolKind.NEAREST])
    return _dispatch(functools.partial(_nearest_block, scenario, key), trials, workers)


def population_counts(scenario: Scenario, trials: int, seed: int, workers: Optional[int] = None) -> np.ndarray:
    key = derive_key(seed, _STREAM_LABEL[ProtocolKind.POPULATION])
    return _dispatch(functools.partial(_population_block, scenario, key), trials, workers)


# ---------------------------------------------------------------------- #
# Public estimators                                                       #
# ---------------------------------------------------------------------- #

def run_fixed_distance(d: float, scenario: Scenario, trials: int, seed: int,
                       workers: Optional[int] = None, confidence: float = 0.95) -> Estimate:
    hits, n = fixed_distance_counts(d, scenario, trials, seed, workers)
    return Estimate.from_counts(int(hits), int(n), confidence)


def run_nearest(scenario: Scenario, trials: int, seed: int,
                workers: Optional[int] = None, confidence: float = 0.95) -> Estimate:
    hits, n, empties = nearest_counts(scenario, trials, seed, workers)
    if empties:
        logger.warning(f"Nearest-target run redrew {empties} empty UAV populations over {n} trials")
    return Estimate.from_counts(int(hits), int(n), confidence)


def run_population(scenario: Scenario, trials: int, seed: int,
                   workers: Optional[int] = None, confidence: float = 0.95) -> Dict[RangeBucket, Estimate]:
    counts = [int(c) for c in population_counts(scenario, trials, seed, workers)]
    short_hits, short_n, long_hits, long_n, empties = counts[:5]
    if empties:
        logger.info(f"Population run: {empties} of {trials} trials drew no UAV")
    short_se = ratio_standard_error(short_hits, short_n, *counts[5:8])
    long_se = ratio_standard_error(long_hits, long_n, *counts[8:11])
    estimates = {
        RangeBucket.SHORT: Estimate.from_counts(short_hits, short_n, confidence, RangeBucket.SHORT, short_se),
        RangeBucket.LONG: Estimate.from_counts(long_hits, long_n, confidence, RangeBucket.LONG, long_se),
    }
    for bucket, est in estimates.items():
        if est.empty:
            logger.warning(f"Population run: {bucket.value} bucket received no targets")
    return estimates
