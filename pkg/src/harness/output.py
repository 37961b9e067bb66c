import datetime
import json
import logging
import math
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional

import pandas as pd

from src.errors import ConfigError
from src.harness.sweep import SweepRow

logger = logging.getLogger(__name__)

COLUMNS = list(SweepRow._fields)


def _optional(cast: Callable) -> Callable:
    def parse(text: str):
        return None if text == "" else cast(text)
    return parse


# CSV text -> SweepRow field value
_PARSERS: Dict[str, Callable] = {
    "figure": str,
    "x_name": str,
    "x_value": float,
    "series_name": str,
    "series_value": _optional(float),
    "bucket": str,
    "p_analytic": _optional(float),
    "p_mc": _optional(float),
    "ci_low": _optional(float),
    "ci_high": _optional(float),
    "trials": _optional(int),
    "seed": _optional(int),
    "preset": str,
    "warnings": str,
}


def rows_to_frame(rows: Iterable[SweepRow]) -> pd.DataFrame:
    # object dtype keeps ints as ints and None as an empty cell
    return pd.DataFrame([r._asdict() for r in rows], columns=COLUMNS, dtype=object)


def write_rows(rows: Iterable[SweepRow], path: Path) -> Path:
    """CSV with the fixed column order; the body holds no timestamps."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows_to_frame(rows).to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Wrote {path}")
    return path


def read_rows(path: Path) -> List[SweepRow]:
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(df.columns) != COLUMNS:
        raise ConfigError(str(path), f"unexpected CSV columns {list(df.columns)}")
    return [
        SweepRow(**{name: _PARSERS[name](record[name]) for name in COLUMNS})
        for record in df.to_dict(orient="records")
    ]


def _fmt(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NaN"
    return f"{value:.10g}"


def write_plot_data(rows: Iterable[SweepRow], outdir: Path, stem: str) -> List[Path]:
    """
    One gnuplot-readable file per (series value, bucket) curve:
    whitespace-separated x, p_analytic, p_mc, ci_low, ci_high.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    curves: Dict[tuple, List[SweepRow]] = {}
    for row in rows:
        curves.setdefault((row.series_name, row.series_value, row.bucket), []).append(row)

    paths = []
    for (series_name, series_value, bucket), curve in curves.items():
        suffix = f"_{series_name}{series_value:g}" if series_value is not None else ""
        path = outdir / f"{stem}{suffix}_{bucket}.dat"
        with open(path, "w") as f:
            f.write(f"# {stem} {series_name}={'' if series_value is None else f'{series_value:g}'} bucket={bucket}\n")
            f.write(f"# {curve[0].x_name} p_analytic p_mc ci_low ci_high\n")
            for row in sorted(curve, key=lambda r: r.x_value):
                f.write(" ".join(_fmt(v) for v in (row.x_value, row.p_analytic, row.p_mc, row.ci_low, row.ci_high)))
                f.write("\n")
        paths.append(path)
    logger.info(f"Wrote {len(paths)} plot-data files for {stem}")
    return paths


def write_metadata(path: Path, **info) -> Path:
    """JSON sidecar: timestamps and run settings live here, never in the CSV body."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(), **info}
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, default=str)
    return path
