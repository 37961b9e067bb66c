"""
Executable property suite behind the `validate` command.

Each property returns (passed, detail). Reported properties carry
information only and never fail the suite. A fault can be injected to check
that the suite notices a broken model.
"""
import contextlib
import json
import logging
import math
import tempfile
import time
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple
from unittest import mock

import numpy as np
from scipy import integrate, stats

from src.analytic.quadrature import QuadratureSettings, exponent_from_product, exponent_with_error
from src.analytic.success import conditional_success, p_suc_bucket, p_suc_nearest
from src.channel import fading
from src.channel.radio import NOISE_NEGLIGIBLE_RATIO, ChannelParams, RadioParams, db_to_linear, noise_to_signal
from src.errors import ConfigError
from src.geometry.distance_law import (
    nearest_distance_cdf,
    nearest_distance_pdf,
    nearest_distance_quantile,
    sample_ball_min_distance,
)
from src.geometry.space import (
    AltitudeBand,
    Intensity,
    Point3,
    RangeBucket,
    classify_range,
    distance_bounds,
    region_volume,
    sample_population,
)
from src.harness.figures import FIGURES, figure_base
from src.harness.output import read_rows, write_rows
from src.harness.sweep import Engine, SweepSpec, SweepVariable, apply_variable, run_sweep
from src.montecarlo import engine
from src.montecarlo.estimate import wilson_interval
from src.scenario import SELF_CONSISTENT, Scenario
from src.sinr import interference

logger = logging.getLogger(__name__)

REPORT_NAME = "property_report.json"
# Diagonal of the full 20 x 20 x 10 km box.
BOX_DIAGONAL_KM = 17.33
# (figure, x, series) points where both engines are compared on the short bucket.
FIGURE_AGREEMENT_POINTS = ((5, 30.0, 7.0), (6, 3.0, 7.0), (7, 24.0, 40.0))


class PropertyResult(NamedTuple):
    name: str
    passed: bool
    asserted: bool
    detail: str
    seconds: float


class SuiteReport(NamedTuple):
    passed: bool
    results: List[PropertyResult]
    path: Path


class SuiteContext(NamedTuple):
    seed: int
    quad: QuadratureSettings
    workdir: Path


Check = Tuple[bool, str]


def _fig(figure_id: int) -> Scenario:
    return figure_base(figure_id, Scenario(), SELF_CONSISTENT)


# ---------------------------------------------------------------------- #
# Estimators and samplers                                                 #
# ---------------------------------------------------------------------- #

def check_wilson_formula(ctx: SuiteContext) -> Check:
    k, n = 8, 10
    z = stats.norm.ppf(0.975)
    p = k / n
    center = (k + z * z / 2.0) / (n + z * z)
    half = z * math.sqrt(n) / (n + z * z) * math.sqrt(p * (1.0 - p) + z * z / (4.0 * n))
    low, high = wilson_interval(k, n)
    sym_low, sym_high = wilson_interval(500, 1000)
    ok = (
        abs(low - (center - half)) <= 1e-12
        and abs(high - (center + half)) <= 1e-12
        and abs((sym_low + sym_high) / 2.0 - 0.5) <= 1e-15
        and wilson_interval(0, 50)[0] == 0.0
    )
    return ok, f"k=8 n=10 interval ({low:.12f}, {high:.12f}) vs ({center - half:.12f}, {center + half:.12f})"


def check_wilson_coverage(ctx: SuiteContext) -> Check:
    rng = np.random.default_rng(ctx.seed)
    n, reps = 10_000, 1_000
    details, ok = [], True
    for p in (0.02, 0.3, 0.85):
        hits = rng.binomial(n, p, reps)
        covered = sum(lo <= p <= hi for lo, hi in (wilson_interval(int(k), n) for k in hits))
        coverage = covered / reps
        ok &= coverage >= 0.93
        details.append(f"p={p}: {coverage:.3f}")
    return ok, "coverage " + ", ".join(details)


def check_fading_moments(ctx: SuiteContext) -> Check:
    rng = np.random.default_rng(ctx.seed)
    n = 1_000_000
    ok, details = True, []
    for beta in (1.0, 2.5):
        h = fading.sample_fading_array(beta, n, rng)
        var = 1.0 / beta
        mean_se = math.sqrt(var / n)
        # Gamma(k, 1/k): central fourth moment 3(k+2)/k^3
        var_se = math.sqrt((3.0 * (beta + 2.0) / beta ** 3 - var ** 2) / n)
        mean_ok = abs(h.mean() - 1.0) <= 3 * mean_se
        var_ok = abs(h.var() - var) <= 3 * var_se
        tail_ok, tails = True, []
        for t in (1.0, 2.0):
            tail = stats.gamma.sf(t, beta, scale=1.0 / beta)
            observed = float(np.mean(h > t))
            tail_ok &= abs(observed - tail) <= 3 * math.sqrt(tail * (1.0 - tail) / n)
            tails.append(f"P(h>{t:g}) {observed:.5f} vs {tail:.5f}")
        ok &= mean_ok and var_ok and tail_ok
        details.append(f"beta={beta}: mean {h.mean():.5f}, var {h.var():.5f}, " + ", ".join(tails))
    return ok, "; ".join(details)


def check_nearest_distance_law(ctx: SuiteContext) -> Check:
    rng = np.random.default_rng(ctx.seed)
    lam = Intensity.from_count(30.0, 4000.0)
    radius = nearest_distance_quantile(1.0 - 1e-12, lam)
    draws = [sample_ball_min_distance(lam, radius, rng) for _ in range(5000)]
    draws = [d for d in draws if d is not None]
    result = stats.kstest(draws, lambda d: nearest_distance_cdf(d, lam))
    return result.pvalue > 1e-3, f"KS statistic {result.statistic:.4f}, p-value {result.pvalue:.4f}"


def check_range_classification(ctx: SuiteContext) -> Check:
    ok = (
        classify_range(15.0) is RangeBucket.LONG
        and classify_range(14.999999) is RangeBucket.SHORT
        and classify_range(0.001) is RangeBucket.SHORT
    )
    return ok, "boundary at 15 km belongs to the long bucket"


def check_population_bounds(ctx: SuiteContext) -> Check:
    rng = np.random.default_rng(ctx.seed)
    scenario = Scenario()
    pts = sample_population(scenario.space, scenario.uav_band, Intensity.from_density(0.05), rng)
    ok = bool(
        np.all(np.abs(pts[:, 0]) <= scenario.space.half_extent_x)
        and np.all(np.abs(pts[:, 1]) <= scenario.space.half_extent_y)
        and np.all((pts[:, 2] >= scenario.uav_band.z_lo) & (pts[:, 2] <= scenario.uav_band.z_hi))
    )
    return ok, f"{len(pts)} points inside the UAV band"


# ---------------------------------------------------------------------- #
# SINR                                                                    #
# ---------------------------------------------------------------------- #

def check_sinr_kernels_agree(ctx: SuiteContext) -> Check:
    rng = np.random.default_rng(ctx.seed)
    scenario = Scenario()
    uav_pts = sample_population(scenario.space, scenario.uav_band, Intensity.from_density(0.01), rng)
    ca_pts = sample_population(scenario.space, scenario.ca_band, Intensity.from_density(0.01), rng)
    uav_h = fading.sample_fading_array(1.0, len(uav_pts), rng)
    ca_h = fading.sample_fading_array(1.0, len(ca_pts), rng)
    uavs = [interference.RealizedTransmitter(Point3(*p), h) for p, h in zip(uav_pts, uav_h)]
    cas = [interference.RealizedTransmitter(Point3(*p), h, interference.AircraftClass.CA) for p, h in zip(ca_pts, ca_h)]

    targets = np.arange(len(uavs))
    fast = interference.target_sinr(
        np.linalg.norm(uav_pts, axis=1), np.linalg.norm(ca_pts, axis=1), targets,
        np.tile(uav_h, (len(targets), 1)), np.tile(ca_h, (len(targets), 1)),
        scenario.uav_radio, scenario.ca_radio, scenario.channel,
    )
    slow = np.array([
        interference.compute_sinr(i, uavs, cas, scenario.uav_radio, scenario.ca_radio, scenario.channel).sinr
        for i in targets
    ])
    worst = float(np.max(np.abs(fast - slow) / slow))
    return worst <= 1e-12, f"{len(uavs)} targets, worst relative difference {worst:.2e}"


def check_noise_negligible(ctx: SuiteContext) -> Check:
    gain_db = Scenario().uav_radio.total_gain_db
    ratio = float(noise_to_signal(BOX_DIAGONAL_KM, RadioParams(1.0, gain_db), ChannelParams(alpha=2.0)))
    return ratio < NOISE_NEGLIGIBLE_RATIO, (
        f"noise-to-signal {ratio:.3g} at P_U=1 W, d={BOX_DIAGONAL_KM} km, alpha=2 (limit {NOISE_NEGLIGIBLE_RATIO:g})"
    )


def report_noise_ratios(ctx: SuiteContext) -> Check:
    gain_db = Scenario().uav_radio.total_gain_db
    ratios = {
        alpha: float(noise_to_signal(BOX_DIAGONAL_KM, RadioParams(1.0, gain_db), ChannelParams(alpha=alpha)))
        for alpha in (3.0, 4.0, 5.0)
    }
    return True, f"noise-to-signal at P_U=1 W, d={BOX_DIAGONAL_KM} km: " + ", ".join(
        f"alpha={a:g} {r:.3g}" for a, r in ratios.items()
    )


def check_success_threshold(ctx: SuiteContext) -> Check:
    theta = db_to_linear(7.0)
    ok = bool(interference.success(theta, 7.0)) and not bool(interference.success(theta * (1 - 1e-12), 7.0))
    return ok, "success is SINR >= theta, inclusive"


# ---------------------------------------------------------------------- #
# Analytic engine                                                         #
# ---------------------------------------------------------------------- #

def check_laplace_bounds(ctx: SuiteContext) -> Check:
    scenario = Scenario()
    band = scenario.uav_band
    volume = region_volume(scenario.space, band)
    r_max = distance_bounds(scenario.space, band)[1]
    values = [exponent_from_product(c, 2.0, scenario.space, band, ctx.quad).value for c in (0.0, 1e-2, 1.0, 1e2, 1e4)]
    saturated = exponent_from_product(r_max ** 2 * 1e6, 2.0, scenario.space, band, ctx.quad).value
    ok = (
        values[0] == 0.0
        and all(b > a for a, b in zip(values, values[1:]))
        and all(0.0 <= v <= volume for v in values)
        and abs(saturated - volume) <= 1e-3 * volume
    )
    return ok, f"H over c grid {[round(v, 6) for v in values]}, saturated {saturated:.4f} of {volume:.1f} km^3"


def _mc_volume_integral(c: float, alpha: float, lx: float, ly: float, band: AltitudeBand,
                        rng: np.random.Generator, samples: int = 10_000_000, chunk: int = 1_000_000):
    total = total_sq = 0.0
    for _ in range(samples // chunk):
        p = rng.random((chunk, 3)) * [lx, ly, band.thickness] + [0.0, 0.0, band.z_lo]
        f = c / (np.sum(p * p, axis=1) ** (alpha / 2.0) + c)
        total += f.sum()
        total_sq += (f * f).sum()
    mean = total / samples
    std = math.sqrt(max(total_sq / samples - mean * mean, 0.0))
    vol = 4.0 * lx * ly * band.thickness
    return vol * mean, vol * std / math.sqrt(samples)


def check_quadrature_vs_monte_carlo(ctx: SuiteContext) -> Check:
    rng = np.random.default_rng(ctx.seed)
    space = Scenario().space
    failures, worst = [], 0.0
    for i in range(10):
        alpha = float(rng.uniform(2.0, 5.0))
        z_lo = float(rng.uniform(0.2, 8.0))
        band = AltitudeBand(z_lo, float(rng.uniform(z_lo + 0.5, space.height)))
        c = float(10.0 ** rng.uniform(0.0, alpha))
        h = exponent_from_product(c, alpha, space, band, ctx.quad)
        mc, se = _mc_volume_integral(c, alpha, space.half_extent_x, space.half_extent_y, band, rng)
        z = abs(h.value - mc) / (se + h.error)
        worst = max(worst, z)
        if z > 3.0:
            failures.append(f"alpha={alpha:.2f} band=[{band.z_lo:.2f}, {band.z_hi:.2f}] c={c:.3g}")
    return not failures, f"worst deviation {worst:.2f} oracle standard errors" + (
        f"; failing: {failures}" if failures else ""
    )


def check_unit_invariance(ctx: SuiteContext) -> Check:
    scenario = Scenario()
    theta, gain = db_to_linear(7.0), scenario.uav_radio.total_gain_linear
    lam = scenario.lambda_uav_int.value
    worst = 0.0
    for alpha in (2.0, 3.5):
        for d in (0.5, 3.0, 12.0):
            in_m = exponent_with_error(theta * (d * 1000.0) ** alpha / gain, gain, alpha,
                                       scenario.space, scenario.uav_band, ctx.quad, reference_m=1.0)
            in_km = exponent_with_error(theta * d ** alpha / gain, gain, alpha,
                                        scenario.space, scenario.uav_band, ctx.quad, reference_m=1000.0)
            worst = max(worst, abs(lam * in_m.value - lam * in_km.value) / (lam * in_km.value))
    return worst <= 1e-9, f"worst relative difference {worst:.2e}"


def check_noise_only_closed_form(ctx: SuiteContext) -> Check:
    quiet = replace(
        Scenario(), lambda_uav_int=Intensity.from_density(0.0), lambda_ca=Intensity.from_density(0.0)
    ).with_powers(uav_power=1e-9)
    ch, uav = quiet.channel, quiet.uav_radio
    k = db_to_linear(quiet.theta_db) * (1000.0 / ch.pathloss_reference_m) ** ch.alpha * ch.noise / (
        uav.tx_power * uav.total_gain_linear
    )
    worst_rel = 0.0
    for d in np.linspace(0.5, 14.0, 10):
        expected = math.exp(-k * d ** ch.alpha)
        worst_rel = max(worst_rel, abs(conditional_success(float(d), quiet, ctx.quad) - expected) / expected)

    lam = quiet.lambda_pdf
    oracle, _ = integrate.quad(
        lambda d: math.exp(-k * d ** ch.alpha) * nearest_distance_pdf(d, lam), 0.0, np.inf, epsabs=1e-12
    )
    nearest = p_suc_nearest(quiet, ctx.quad)
    ok = worst_rel <= 1e-9 and abs(nearest - oracle) <= 1e-6
    return ok, f"conditional worst rel {worst_rel:.2e}; nearest {nearest:.8f} vs oracle {oracle:.8f}"


def _strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def check_monotonicity(ctx: SuiteContext) -> Check:
    fig4, fig7 = _fig(4), _fig(7)
    short = RangeBucket.SHORT

    def bucket(s: Scenario) -> float:
        return p_suc_bucket(s, short, ctx.quad)

    theta = [bucket(replace(fig4, theta_db=t)) for t in (7.0, 10.0, 11.0, 13.0, 14.0)]
    theta_nearest = [p_suc_nearest(replace(fig4, theta_db=t), ctx.quad) for t in (7.0, 10.0, 11.0, 13.0, 14.0)]
    lam = [bucket(fig4.with_uav_count(n)) for n in (10.0, 30.0, 60.0)]
    pu = [bucket(fig4.with_powers(uav_power=p)) for p in (1.0, 16.0, 30.0, 70.0)]
    pc = [bucket(fig7.with_powers(ca_power=p)) for p in (15.0, 40.0, 73.0, 140.0)]
    long_ = p_suc_bucket(fig4, RangeBucket.LONG, ctx.quad)

    checks = {
        "theta": _strictly_decreasing(theta) and _strictly_decreasing(theta_nearest),
        "lambda1": _strictly_decreasing(lam),
        "P_U": all(b >= a for a, b in zip(pu, pu[1:])),
        "P_C": _strictly_decreasing(pc),
        "short>=long": theta[0] >= long_,
    }
    failed = [name for name, ok in checks.items() if not ok]
    return not failed, f"theta {np.round(theta, 4).tolist()}, short {theta[0]:.4f} vs long {long_:.4f}" + (
        f"; failing: {failed}" if failed else ""
    )


# ---------------------------------------------------------------------- #
# Engine agreement and reproducibility                                    #
# ---------------------------------------------------------------------- #

def check_fixed_distance_agreement(ctx: SuiteContext) -> Check:
    scenario = _fig(4)
    est = engine.run_fixed_distance(10.0, scenario, 20_000, ctx.seed, workers=1)
    p = conditional_success(10.0, scenario, ctx.quad)
    return est.agrees_with(p), f"mc {est.p_hat:.4f} +/- {est.standard_error:.4f} vs analytic {p:.4f}"


def check_population_agreement(ctx: SuiteContext) -> Check:
    scenario = _fig(4)
    estimates = engine.run_population(scenario, 3_000, ctx.seed, workers=1)
    details, ok = [], True
    for bucket, est in estimates.items():
        p = p_suc_bucket(scenario, bucket, ctx.quad)
        ok &= est.agrees_with(p)
        details.append(f"{bucket.value}: mc {est.p_hat:.4f} (n={est.trials}) vs analytic {p:.4f}")
    return ok, "; ".join(details)


def check_figure_agreement(ctx: SuiteContext) -> Check:
    details, ok = [], True
    for figure_id, x, series in FIGURE_AGREEMENT_POINTS:
        spec = FIGURES[figure_id]
        scenario = apply_variable(_fig(figure_id), spec.variable, x)
        scenario = apply_variable(scenario, spec.series_variable, series)
        est = engine.run_population(scenario, 3_000, ctx.seed, workers=1)[RangeBucket.SHORT]
        p = p_suc_bucket(scenario, RangeBucket.SHORT, ctx.quad)
        ok &= est.agrees_with(p)
        details.append(
            f"fig{figure_id} {spec.variable.value}={x:g} {spec.series_variable.value}={series:g}: "
            f"mc {est.p_hat:.4f} +/- {est.standard_error:.4f} vs analytic {p:.4f}"
        )
    return ok, "; ".join(details)


def report_nearest_agreement(ctx: SuiteContext) -> Check:
    scenario = _fig(4)
    est = engine.run_nearest(scenario, 5_000, ctx.seed, workers=1)
    p = p_suc_nearest(scenario, ctx.quad)
    z = abs(est.p_hat - p) / est.standard_error
    return True, (
        f"mc {est.p_hat:.4f} vs ball-law analytic {p:.4f} ({z:.1f} standard errors); "
        "the ball law ignores the box and band, so this is reported only"
    )


def check_worker_count_independence(ctx: SuiteContext) -> Check:
    scenario = _fig(4)
    serial = engine.population_counts(scenario, 2_500, ctx.seed, workers=1)
    again = engine.population_counts(scenario, 2_500, ctx.seed, workers=1)
    parallel = engine.population_counts(scenario, 2_500, ctx.seed, workers=2)
    ok = np.array_equal(serial, again) and np.array_equal(serial, parallel)
    return ok, f"counts {serial.tolist()} vs {parallel.tolist()}"


def check_standard_error_scaling(ctx: SuiteContext) -> Check:
    scenario = _fig(4)
    ladder = (1_000, 4_000, 16_000, 64_000)
    errors = [engine.run_fixed_distance(10.0, scenario, n, ctx.seed, workers=1).standard_error for n in ladder]
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    # Quadrupling trials halves the standard error.
    return all(1.6 <= r <= 2.5 for r in ratios), f"ratios {np.round(ratios, 3).tolist()}"


def check_csv_determinism(ctx: SuiteContext) -> Check:
    spec = SweepSpec(
        variable=SweepVariable.PU, grid=(16.0,), base=_fig(4), engine=Engine.BOTH,
        figure="determinism", trials=2_000, quad=ctx.quad,
    )
    first = write_rows(run_sweep(spec, ctx.seed, workers=1), ctx.workdir / "determinism_a.csv")
    second = write_rows(run_sweep(spec, ctx.seed, workers=2), ctx.workdir / "determinism_b.csv")
    identical = first.read_bytes() == second.read_bytes()
    round_trip = read_rows(first) == run_sweep(spec, ctx.seed, workers=1)
    return identical and round_trip, f"byte-identical {identical}, round-trip {round_trip}"


# name -> (check, asserted)
PROPERTIES: Dict[str, Tuple[Callable[[SuiteContext], Check], bool]] = {
    "wilson_formula": (check_wilson_formula, True),
    "wilson_coverage": (check_wilson_coverage, True),
    "fading_moments": (check_fading_moments, True),
    "nearest_distance_law": (check_nearest_distance_law, True),
    "range_classification": (check_range_classification, True),
    "population_bounds": (check_population_bounds, True),
    "sinr_kernels_agree": (check_sinr_kernels_agree, True),
    "success_threshold": (check_success_threshold, True),
    "noise_negligible": (check_noise_negligible, True),
    "noise_ratios": (report_noise_ratios, False),
    "laplace_bounds": (check_laplace_bounds, True),
    "quadrature_vs_monte_carlo": (check_quadrature_vs_monte_carlo, True),
    "unit_invariance": (check_unit_invariance, True),
    "noise_only_closed_form": (check_noise_only_closed_form, True),
    "monotonicity": (check_monotonicity, True),
    "fixed_distance_agreement": (check_fixed_distance_agreement, True),
    "population_agreement": (check_population_agreement, True),
    "figure_agreement": (check_figure_agreement, True),
    "nearest_agreement": (report_nearest_agreement, False),
    "worker_count_independence": (check_worker_count_independence, True),
    "standard_error_scaling": (check_standard_error_scaling, True),
    "csv_determinism": (check_csv_determinism, True),
}


# ---------------------------------------------------------------------- #
# Fault injection                                                         #
# ---------------------------------------------------------------------- #

def _flipped_success(sinr, theta_db: float):
    return sinr < db_to_linear(theta_db)


def _skewed_fading(beta: float, size, rng: np.random.Generator) -> np.ndarray:
    return 1.2 * rng.gamma(beta, 1.0 / beta, size)


FAULTS: Dict[str, List[Tuple[str, Callable]]] = {
    "flipped-success": [
        ("src.sinr.interference.success", _flipped_success),
        ("src.montecarlo.engine.success", _flipped_success),
    ],
    "skewed-fading": [
        ("src.channel.fading.sample_fading_array", _skewed_fading),
        ("src.montecarlo.engine.sample_fading_array", _skewed_fading),
    ],
}


@contextlib.contextmanager
def injected(fault: Optional[str]):
    if fault is None:
        yield
        return
    if fault not in FAULTS:
        raise ConfigError("fault", f"unknown fault {fault!r}; choose from {sorted(FAULTS)}")
    with contextlib.ExitStack() as stack:
        for target, replacement in FAULTS[fault]:
            stack.enter_context(mock.patch(target, replacement))
        logger.warning(f"Fault injected: {fault}")
        yield


def run_property_suite(
    outdir: Path,
    only: Optional[Sequence[str]] = None,
    fault: Optional[str] = None,
    seed: int = 20240607,
    quad: QuadratureSettings = QuadratureSettings(),
) -> SuiteReport:
    names = list(only) if only else list(PROPERTIES)
    unknown = [n for n in names if n not in PROPERTIES]
    if unknown:
        raise ConfigError("only", f"unknown properties {unknown}; choose from {sorted(PROPERTIES)}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    results: List[PropertyResult] = []
    with tempfile.TemporaryDirectory() as tmp, injected(fault):
        ctx = SuiteContext(seed, quad, Path(tmp))
        for name in names:
            check, asserted = PROPERTIES[name]
            start = time.perf_counter()
            try:
                passed, detail = check(ctx)
            except Exception as e:
                logger.error(f"Property {name} raised: {e}", exc_info=True)
                passed, detail = False, f"raised {type(e).__name__}: {e}"
            elapsed = time.perf_counter() - start
            passed = bool(passed) or not asserted
            results.append(PropertyResult(name, passed, asserted, detail, round(elapsed, 3)))
            logger.info(f"{'PASS' if passed else 'FAIL'} {name} ({elapsed:.1f}s): {detail}")

    overall = all(r.passed for r in results)
    path = outdir / REPORT_NAME
    with open(path, "w") as f:
        json.dump(
            {"passed": overall, "seed": seed, "fault": fault, "properties": [r._asdict() for r in results]},
            f,
            indent=2,
        )
    logger.info(f"Property suite {'passed' if overall else 'FAILED'}: report at {path}")
    return SuiteReport(overall, results, path)
