import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

from src.analytic.success import conditional_success, p_suc_bucket, p_suc_nearest
from src.config import load_run_config
from src.errors import AdsbModelError, ConfigError, IntegrationAccuracyError
from src.geometry.space import RangeBucket
from src.harness.figures import FIGURES, reproduce_figure
from src.harness.output import write_metadata, write_rows
from src.harness.properties import FAULTS, PROPERTIES, run_property_suite
from src.harness.sweep import Engine, SweepSpec, SweepVariable, run_sweep
from src.montecarlo.engine import TrialProtocol, run_fixed_distance, run_nearest, run_population
from src.scenario import PRESETS

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ACCURACY = 2
EXIT_PROPERTIES = 3


def _floats(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _series(text: str) -> Tuple[SweepVariable, Tuple[float, ...]]:
    name, sep, values = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected VAR=a,b,c, got {text!r}")
    try:
        variable = SweepVariable(name.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown series variable {name!r}")
    return variable, _floats(values)


def _protocol(args) -> TrialProtocol:
    if args.protocol == "fixed":
        if args.distance is None:
            raise ConfigError("--distance", "the fixed protocol needs a target distance in km")
        return TrialProtocol.fixed_distance(args.distance)
    if args.protocol == "nearest":
        return TrialProtocol.nearest()
    return TrialProtocol.population()


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, default=str))


# ---------------------------------------------------------------------- #
# Subcommands                                                             #
# ---------------------------------------------------------------------- #

def cmd_analytic(args) -> int:
    run = load_run_config(args.config)
    scenario, quad = run.scenario, run.quadrature
    if args.at_distance is not None:
        value, what = conditional_success(args.at_distance, scenario, quad), f"d={args.at_distance} km"
    elif args.nearest:
        value, what = p_suc_nearest(scenario, quad), "nearest target"
    else:
        bucket = RangeBucket(args.bucket)
        value, what = p_suc_bucket(scenario, bucket, quad), f"{bucket.value} bucket"
    logger.info(f"Analytic success probability ({what}, preset {scenario.preset}): {value:.6f}")
    _emit({"quantity": what, "p_analytic": value, "preset": scenario.preset})
    return EXIT_OK


def cmd_simulate(args) -> int:
    run = load_run_config(args.config)
    sim = run.simulation
    trials = args.trials or sim.trials
    seed = sim.seed if args.seed is None else args.seed
    workers = args.workers or sim.workers
    protocol = _protocol(args)

    if args.protocol == "fixed":
        estimates = {"fixed": run_fixed_distance(protocol.distance_km, run.scenario, trials, seed, workers, sim.confidence)}
    elif args.protocol == "nearest":
        estimates = {"nearest": run_nearest(run.scenario, trials, seed, workers, sim.confidence)}
    else:
        estimates = {b.value: e for b, e in run_population(run.scenario, trials, seed, workers, sim.confidence).items()}

    for name, est in estimates.items():
        logger.info(f"{name}: p_hat={est.p_hat:.4f} [{est.ci_low:.4f}, {est.ci_high:.4f}] over {est.trials}")
    _emit({
        "protocol": args.protocol,
        "trials": trials,
        "seed": seed,
        "estimates": {k: {**e._asdict(), "bucket": k} for k, e in estimates.items()},
    })
    return EXIT_OK


def cmd_sweep(args) -> int:
    run = load_run_config(args.config)
    sim = run.simulation
    series_variable, series = args.series if args.series else (None, ())
    spec = SweepSpec(
        variable=SweepVariable(args.var),
        grid=tuple(sorted(args.grid)),
        base=run.scenario,
        series_variable=series_variable,
        series=tuple(sorted(series)),
        engine=Engine(args.engine),
        protocol=_protocol(args),
        buckets=tuple(RangeBucket(b) for b in args.buckets.split(",")),
        figure=args.name,
        trials=args.trials or sim.trials,
        confidence=sim.confidence,
        quad=run.quadrature,
    )
    seed = sim.seed if args.seed is None else args.seed
    rows = run_sweep(spec, seed, args.workers or sim.workers)
    out = Path(args.out)
    write_rows(rows, out)
    write_metadata(
        out.with_suffix(".meta.json"),
        config=args.config, seed=seed, trials=spec.trials, engine=spec.engine.value, rows=len(rows),
    )
    return EXIT_OK


def cmd_fig(args) -> int:
    run = load_run_config(args.config)
    sim = run.simulation
    result = reproduce_figure(
        args.id,
        args.preset,
        Path(args.out),
        seed=sim.seed if args.seed is None else args.seed,
        trials=args.trials or sim.trials,
        engine=Engine(args.engine),
        base=run.scenario,
        quad=run.quadrature,
        workers=args.workers or sim.workers,
        fig5_uav_power=args.fig5_uav_power,
    )
    _emit({
        "csv": str(result.csv_path),
        "replication_report": str(result.report_path),
        "anchors_within_tolerance": result.report["anchors_within_tolerance"],
        "anchors": len(result.report["anchors"]),
        "anchors_within_tolerance_nearest": result.report.get("anchors_within_tolerance_nearest"),
        "shapes_reproduced": result.report["shapes_reproduced"],
    })
    return EXIT_OK


def cmd_validate(args) -> int:
    report = run_property_suite(
        Path(args.out),
        only=args.only.split(",") if args.only else None,
        fault=args.fault,
        seed=args.seed,
    )
    failed = [r.name for r in report.results if not r.passed]
    if failed:
        logger.error(f"Failed properties: {', '.join(failed)}")
        return EXIT_PROPERTIES
    return EXIT_OK


# ---------------------------------------------------------------------- #
# Entry point                                                             #
# ---------------------------------------------------------------------- #

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="ADS-B received probability of UAVs under UAV and civil-aircraft interference"
    )
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", default=None, help="YAML/JSON run configuration (default: reference scenario)")
        return p

    def with_mc(p):
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None, help="Worker processes (overrides the env var)")
        return p

    p = with_config(sub.add_parser("analytic", help="Analytic success probability"))
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--at-distance", type=float, metavar="KM")
    target.add_argument("--nearest", action="store_true")
    target.add_argument("--bucket", choices=[b.value for b in RangeBucket])
    p.set_defaults(func=cmd_analytic)

    p = with_mc(with_config(sub.add_parser("simulate", help="Monte Carlo estimate")))
    p.add_argument("--protocol", choices=["fixed", "nearest", "population"], default="population")
    p.add_argument("--distance", type=float, default=None, help="Target distance for the fixed protocol (km)")
    p.set_defaults(func=cmd_simulate)

    p = with_mc(with_config(sub.add_parser("sweep", help="One-variable parameter sweep to CSV")))
    p.add_argument("--var", required=True, choices=[v.value for v in SweepVariable])
    p.add_argument("--grid", required=True, type=_floats, help="Comma-separated values")
    p.add_argument("--series", type=_series, default=None, help="Second variable, e.g. theta=7,10,11,13,14")
    p.add_argument("--engine", choices=[e.value for e in Engine], default=Engine.ANALYTIC.value)
    p.add_argument("--protocol", choices=["fixed", "nearest", "population"], default="population")
    p.add_argument("--distance", type=float, default=None)
    p.add_argument("--buckets", default="short,long")
    p.add_argument("--name", default="sweep", help="Value of the figure column")
    p.add_argument("--out", default="sweep.csv")
    p.set_defaults(func=cmd_sweep)

    p = with_mc(with_config(sub.add_parser("fig", help="Reproduce one reference figure")))
    p.add_argument("--id", type=int, required=True, choices=sorted(FIGURES))
    p.add_argument("--preset", choices=PRESETS, default=PRESETS[0])
    p.add_argument("--engine", choices=[e.value for e in Engine], default=Engine.BOTH.value)
    p.add_argument("--out", default="results")
    p.add_argument("--fig5-uav-power", type=float, default=16.0, help="P_U for figure 5 in W")
    p.set_defaults(func=cmd_fig)

    p = sub.add_parser("validate", help="Run the property suite")
    p.add_argument("--out", default="results")
    p.add_argument("--only", default=None, help=f"Comma-separated subset of: {', '.join(PROPERTIES)}")
    p.add_argument("--fault", choices=sorted(FAULTS), default=None, help="Inject a known fault")
    p.add_argument("--seed", type=int, default=20240607)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
    )
    try:
        return args.func(args)
    except IntegrationAccuracyError as e:
        logger.error(f"Numerical accuracy failure: {e}")
        for note in getattr(e, "__notes__", []):
            logger.error(note)
        return EXIT_ACCURACY
    except (AdsbModelError, FileNotFoundError) as e:
        logger.error(f"Invalid input: {e}")
        for note in getattr(e, "__notes__", []):
            logger.error(note)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
