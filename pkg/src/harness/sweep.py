import enum
import functools
import itertools
import logging
from dataclasses import dataclass, replace
from multiprocessing import Pool
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from src.analytic.quadrature import QuadratureSettings
from src.analytic.success import conditional_success, p_suc_bucket, p_suc_nearest
from src.channel.radio import NOISE_NEGLIGIBLE_RATIO, noise_to_signal
from src.config import resolve_workers
from src.errors import AdsbModelError, ValidationError
from src.geometry.space import RangeBucket, distance_bounds
from src.montecarlo.engine import ProtocolKind, TrialProtocol, run_fixed_distance, run_nearest, run_population
from src.montecarlo.estimate import Estimate
from src.scenario import PAPER_LITERAL, Scenario

logger = logging.getLogger(__name__)


class SweepVariable(str, enum.Enum):
    PU = "pu"
    PC = "pc"
    LAMBDA1 = "lambda1"
    ALPHA = "alpha"
    THETA = "theta"


class Engine(str, enum.Enum):
    ANALYTIC = "analytic"
    MONTECARLO = "montecarlo"
    BOTH = "both"


# Reference scenario ranges; values outside still run, with a warning.
REFERENCE_RANGES: Dict[SweepVariable, Tuple[float, float]] = {
    SweepVariable.PU: (1.0, 70.0),
    SweepVariable.PC: (15.0, 140.0),
    SweepVariable.LAMBDA1: (0.0, 100.0),
    SweepVariable.ALPHA: (2.0, 5.0),
    SweepVariable.THETA: (7.0, 14.0),
}

PROVENANCE_NOTE = (
    "paper-literal: best-effort match of reference values; "
    "self-consistent preset holds the model-consistent numbers"
)
DISAGREEMENT_NOTE = "monte carlo outside 3 standard errors of analytic"
NOISE_LIMITED_NOTE = "noise-limited: noise is not negligible against the farthest UAV signal"


class SweepRow(NamedTuple):
    """One CSV row; field order is the column order."""
    figure: str
    x_name: str
    x_value: float
    series_name: str
    series_value: Optional[float]
    bucket: str
    p_analytic: Optional[float]
    p_mc: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    trials: Optional[int]
    seed: Optional[int]
    preset: str
    warnings: str


@dataclass(frozen=True)
class SweepSpec:
    variable: SweepVariable
    grid: Tuple[float, ...]
    base: Scenario
    series_variable: Optional[SweepVariable] = None
    series: Tuple[float, ...] = ()
    engine: Engine = Engine.ANALYTIC
    protocol: TrialProtocol = TrialProtocol.population()
    buckets: Tuple[RangeBucket, ...] = (RangeBucket.SHORT, RangeBucket.LONG)
    figure: str = "sweep"
    trials: int = 100000
    confidence: float = 0.95
    quad: QuadratureSettings = QuadratureSettings()
    notes: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.grid:
            raise ValidationError("grid", "must be nonempty")
        if list(self.grid) != sorted(self.grid):
            raise ValidationError("grid", "must be sorted ascending")
        if self.series and self.series_variable is None:
            raise ValidationError("series", "series values need a series variable")
        if self.series_variable is not None:
            if not self.series:
                raise ValidationError("series", "series variable needs at least one value")
            if self.series_variable is self.variable:
                raise ValidationError("series", "series variable must differ from the swept variable")
            if list(self.series) != sorted(self.series):
                raise ValidationError("series", "must be sorted ascending")
        if not self.buckets:
            raise ValidationError("buckets", "must name at least one bucket")
        if self.trials < 1:
            raise ValidationError("trials", "must be >= 1")

    @property
    def series_values(self) -> Tuple[Optional[float], ...]:
        return self.series if self.series_variable is not None else (None,)


def apply_variable(scenario: Scenario, variable: SweepVariable, value: float) -> Scenario:
    if variable is SweepVariable.PU:
        return scenario.with_powers(uav_power=value)
    if variable is SweepVariable.PC:
        return scenario.with_powers(ca_power=value)
    if variable is SweepVariable.LAMBDA1:
        return scenario.with_uav_count(value)
    if variable is SweepVariable.ALPHA:
        return replace(scenario, channel=replace(scenario.channel, alpha=value))
    if variable is SweepVariable.THETA:
        return replace(scenario, theta_db=value)
    raise ValidationError("variable", f"unknown sweep variable {variable!r}")


def range_warnings(variable: SweepVariable, value: float) -> List[str]:
    lo, hi = REFERENCE_RANGES[variable]
    if lo <= value <= hi:
        return []
    return [f"{variable.value}={value:g} outside reference range [{lo:g}, {hi:g}]"]


# ---------------------------------------------------------------------- #
# One grid point                                                          #
# ---------------------------------------------------------------------- #

def _analytic_value(scenario: Scenario, protocol: TrialProtocol, bucket: Optional[RangeBucket],
                    quad: QuadratureSettings) -> float:
    if protocol.kind is ProtocolKind.FIXED:
        return conditional_success(protocol.distance_km, scenario, quad)
    if protocol.kind is ProtocolKind.NEAREST:
        return p_suc_nearest(scenario, quad)
    return p_suc_bucket(scenario, bucket, quad)


def _mc_estimates(scenario: Scenario, spec: SweepSpec, seed: int,
                  workers: Optional[int]) -> Dict[Optional[RangeBucket], Estimate]:
    protocol = spec.protocol
    if protocol.kind is ProtocolKind.FIXED:
        est = run_fixed_distance(protocol.distance_km, scenario, spec.trials, seed, workers, spec.confidence)
        return {None: est}
    if protocol.kind is ProtocolKind.NEAREST:
        return {None: run_nearest(scenario, spec.trials, seed, workers, spec.confidence)}
    return run_population(scenario, spec.trials, seed, workers, spec.confidence)


def noise_limited(scenario: Scenario) -> Optional[float]:
    """Noise-to-signal ratio at the farthest UAV distance when it is not negligible, else None."""
    _, d_max = distance_bounds(scenario.space, scenario.uav_band)
    ratio = float(noise_to_signal(d_max, scenario.uav_radio, scenario.channel))
    return ratio if ratio >= NOISE_NEGLIGIBLE_RATIO else None


def evaluate_point(spec: SweepSpec, seed: int, workers: Optional[int],
                   point: Tuple[float, Optional[float]]) -> List[SweepRow]:
    x, series_value = point
    label = f"{spec.variable.value}={x:g}"
    if spec.series_variable is not None:
        label += f", {spec.series_variable.value}={series_value:g}"
    warnings = range_warnings(spec.variable, x)
    if spec.series_variable is not None:
        warnings += range_warnings(spec.series_variable, series_value)
    for w in warnings:
        logger.warning(f"{spec.figure}: {w}")
    warnings += list(spec.notes)
    if spec.protocol.kind is ProtocolKind.POPULATION:
        buckets: Sequence[Optional[RangeBucket]] = spec.buckets
    else:
        buckets = (None,)

    try:
        scenario = apply_variable(spec.base, spec.variable, x)
        if spec.series_variable is not None:
            scenario = apply_variable(scenario, spec.series_variable, series_value)
        if scenario.preset == PAPER_LITERAL and PROVENANCE_NOTE not in warnings:
            warnings.append(PROVENANCE_NOTE)
        ratio = noise_limited(scenario)
        if ratio is not None:
            logger.warning(f"{spec.figure} {label}: noise-to-signal ratio {ratio:.3g} at the farthest UAV")
            warnings.append(NOISE_LIMITED_NOTE)
        estimates = (
            _mc_estimates(scenario, spec, seed, workers) if spec.engine is not Engine.ANALYTIC else {}
        )
        rows = []
        for bucket in buckets:
            row_warnings = list(warnings)
            p_analytic = None
            if spec.engine is not Engine.MONTECARLO:
                p_analytic = _analytic_value(scenario, spec.protocol, bucket, spec.quad)
            est = estimates.get(bucket)
            if est is not None and est.empty:
                row_warnings.append("empty bucket")
            if est is not None and p_analytic is not None and not est.empty and not est.agrees_with(p_analytic):
                row_warnings.append(DISAGREEMENT_NOTE)
                logger.warning(
                    f"{spec.figure} {label}: mc {est.p_hat:.4f} vs analytic {p_analytic:.4f}"
                )
            has_mc = est is not None and not est.empty
            rows.append(SweepRow(
                figure=spec.figure,
                x_name=spec.variable.value,
                x_value=float(x),
                series_name=spec.series_variable.value if spec.series_variable is not None else "",
                series_value=None if series_value is None else float(series_value),
                bucket=bucket.value if bucket is not None else spec.protocol.kind.value,
                p_analytic=p_analytic,
                p_mc=est.p_hat if has_mc else None,
                ci_low=est.ci_low if has_mc else None,
                ci_high=est.ci_high if has_mc else None,
                trials=est.trials if est is not None else None,
                seed=seed if est is not None else None,
                preset=scenario.preset,
                warnings="; ".join(row_warnings),
            ))
    except AdsbModelError as e:
        e.add_note(f"while evaluating {spec.figure} at {label}")
        raise
    logger.info(f"{spec.figure}: finished {label}")
    return rows


_BUCKET_ORDER = {"short": 0, "long": 1, "nearest": 2, "fixed": 3}


def _row_key(row: SweepRow):
    series = row.series_value if row.series_value is not None else float("-inf")
    return row.x_value, series, _BUCKET_ORDER.get(row.bucket, 9)


def run_sweep(spec: SweepSpec, seed: int, workers: Optional[int] = None) -> List[SweepRow]:
    """
    One row per (grid point x series value x bucket), sorted by (x, series, bucket).
    Every point reuses the same trial streams, so neighbouring Monte Carlo
    points share common random numbers.
    """
    points = list(itertools.product(spec.grid, spec.series_values))
    n_workers = min(resolve_workers(workers), len(points))
    logger.info(
        f"Sweep {spec.figure}: {len(points)} points over {spec.variable.value}, engine {spec.engine.value}, "
        f"{n_workers} worker(s)"
    )
    if n_workers <= 1:
        # Serial points: the trial engine may use the whole pool itself.
        nested = [evaluate_point(spec, seed, workers, p) for p in points]
    else:
        # Pool workers cannot start their own pools.
        with Pool(processes=n_workers) as pool:
            nested = pool.map(functools.partial(evaluate_point, spec, seed, 1), points)
    rows = [row for part in nested for row in part]
    return sorted(rows, key=_row_key)
