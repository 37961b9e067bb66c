import logging
from dataclasses import replace

import pytest

from src.analytic.quadrature import QuadratureSettings
from src.channel.radio import ChannelParams
from src.errors import ConfigError, UnsupportedFadingError, ValidationError
from src.geometry.space import RangeBucket
from src.harness.figures import (
    FIG5_UAV_POWER_NOTE,
    figure_base,
    figure_sweeps,
    replication_report,
)
from src.harness.output import COLUMNS, read_rows, write_plot_data, write_rows
from src.harness.sweep import (
    NOISE_LIMITED_NOTE,
    PROVENANCE_NOTE,
    Engine,
    SweepRow,
    SweepSpec,
    SweepVariable,
    apply_variable,
    noise_limited,
    range_warnings,
    run_sweep,
)
from src.montecarlo.engine import ProtocolKind
from src.scenario import PAPER_LITERAL, SELF_CONSISTENT, Scenario

QUAD = QuadratureSettings(placements_log2=12)


def _row(x, series, p, bucket="short", figure="fig4", p_mc=None):
    return SweepRow(
        figure=figure, x_name="pu", x_value=x, series_name="theta", series_value=series, bucket=bucket,
        p_analytic=p, p_mc=p_mc, ci_low=None, ci_high=None, trials=None, seed=None,
        preset=SELF_CONSISTENT, warnings="",
    )


@pytest.fixture
def short_spec():
    return SweepSpec(
        variable=SweepVariable.PU, grid=(16.0,), base=Scenario(), buckets=(RangeBucket.SHORT,), quad=QUAD,
    )


# ---------------------------------------------------------------------- #
# Sweep specification                                                     #
# ---------------------------------------------------------------------- #

def test_spec_rejects_bad_grids():
    with pytest.raises(ValidationError):
        SweepSpec(variable=SweepVariable.PU, grid=(), base=Scenario())
    with pytest.raises(ValidationError):
        SweepSpec(variable=SweepVariable.PU, grid=(16.0, 1.0), base=Scenario())
    with pytest.raises(ValidationError):
        SweepSpec(variable=SweepVariable.PU, grid=(1.0,), base=Scenario(),
                  series_variable=SweepVariable.PU, series=(7.0,))


def test_apply_variable():
    base = Scenario()
    assert apply_variable(base, SweepVariable.PU, 25.0).uav_radio.tx_power == 25.0
    assert apply_variable(base, SweepVariable.PC, 73.0).ca_radio.tx_power == 73.0
    assert apply_variable(base, SweepVariable.ALPHA, 3.0).channel.alpha == 3.0
    assert apply_variable(base, SweepVariable.THETA, 11.0).theta_db == 11.0
    assert apply_variable(base, SweepVariable.LAMBDA1, 40.0).lambda_uav_int.value == pytest.approx(0.01)


def test_range_warnings():
    assert range_warnings(SweepVariable.PU, 16.0) == []
    assert "outside reference range" in range_warnings(SweepVariable.PU, 100.0)[0]


# ---------------------------------------------------------------------- #
# Running sweeps                                                          #
# ---------------------------------------------------------------------- #

def test_analytic_point_leaves_simulation_columns_empty(short_spec):
    rows = run_sweep(short_spec, seed=1, workers=1)
    assert len(rows) == 1
    row = rows[0]
    assert row.bucket == "short"
    assert 0.0 < row.p_analytic < 1.0
    assert (row.p_mc, row.ci_low, row.ci_high, row.trials, row.seed) == (None,) * 5
    assert row.warnings == ""


def test_series_curves_are_ordered(short_spec):
    spec = replace(short_spec, grid=(1.0, 16.0, 70.0), series_variable=SweepVariable.THETA, series=(7.0, 11.0))
    rows = run_sweep(spec, seed=1, workers=1)
    assert len(rows) == 6
    assert [r.x_value for r in rows] == [1.0, 1.0, 16.0, 16.0, 70.0, 70.0]
    by_series = {s: [r.p_analytic for r in rows if r.series_value == s] for s in (7.0, 11.0)}
    for curve in by_series.values():
        assert all(b >= a for a, b in zip(curve, curve[1:]))
    assert all(hard < easy for easy, hard in zip(by_series[7.0], by_series[11.0]))


def test_out_of_range_value_is_flagged(short_spec):
    rows = run_sweep(replace(short_spec, grid=(100.0,)), seed=1, workers=1)
    assert "outside reference range" in rows[0].warnings


def test_paper_literal_rows_carry_provenance(short_spec):
    spec = replace(short_spec, base=Scenario().with_preset(PAPER_LITERAL))
    row = run_sweep(spec, seed=1, workers=1)[0]
    assert row.preset == PAPER_LITERAL
    assert PROVENANCE_NOTE in row.warnings


def test_noise_limited_ratio():
    assert noise_limited(Scenario()) is None
    assert noise_limited(apply_variable(Scenario(), SweepVariable.ALPHA, 5.0)) > 1.0


def test_noise_limited_points_are_flagged(short_spec, caplog):
    spec = replace(short_spec, variable=SweepVariable.ALPHA, grid=(2.0, 5.0))
    with caplog.at_level(logging.WARNING):
        rows = run_sweep(spec, seed=1, workers=1)
    assert NOISE_LIMITED_NOTE not in rows[0].warnings
    assert NOISE_LIMITED_NOTE in rows[1].warnings
    assert "noise-to-signal" in caplog.text


def test_monte_carlo_columns(short_spec):
    spec = replace(short_spec, engine=Engine.BOTH, trials=200)
    row = run_sweep(spec, seed=7, workers=1)[0]
    assert row.seed == 7
    assert row.trials > 0
    assert row.ci_low <= row.p_mc <= row.ci_high


def test_failing_point_is_named(short_spec):
    spec = replace(short_spec, base=replace(Scenario(), channel=ChannelParams(fading_shape=2.0)))
    with pytest.raises(UnsupportedFadingError) as excinfo:
        run_sweep(spec, seed=1, workers=1)
    assert any("sweep at pu=16" in note for note in excinfo.value.__notes__)


# ---------------------------------------------------------------------- #
# Output files                                                            #
# ---------------------------------------------------------------------- #

def test_csv_header_and_round_trip(tmp_path):
    rows = [_row(1.0, 7.0, 0.5), _row(16.0, None, 0.8, p_mc=0.81)]
    path = write_rows(rows, tmp_path / "out.csv")
    assert path.read_text().splitlines()[0] == ",".join(COLUMNS)
    assert read_rows(path) == rows


def test_csv_is_byte_stable(tmp_path):
    rows = [_row(1.0, 7.0, 0.5), _row(16.0, 7.0, 0.8)]
    a = write_rows(rows, tmp_path / "a.csv").read_bytes()
    b = write_rows(rows, tmp_path / "b.csv").read_bytes()
    assert a == b


def test_read_rows_rejects_foreign_csv(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError):
        read_rows(path)


def test_plot_data_files(tmp_path):
    rows = [_row(16.0, 7.0, 0.8), _row(1.0, 7.0, 0.5), _row(1.0, 11.0, 0.4)]
    paths = write_plot_data(rows, tmp_path, "fig4_self-consistent")
    assert sorted(p.name for p in paths) == [
        "fig4_self-consistent_theta11_short.dat",
        "fig4_self-consistent_theta7_short.dat",
    ]
    lines = (tmp_path / "fig4_self-consistent_theta7_short.dat").read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[2] == "1 0.5 NaN NaN NaN"
    assert lines[3] == "16 0.8 NaN NaN NaN"


# ---------------------------------------------------------------------- #
# Figures                                                                 #
# ---------------------------------------------------------------------- #

def test_figure_base():
    with pytest.raises(ValidationError):
        figure_base(3, Scenario(), SELF_CONSISTENT)
    fig5 = figure_base(5, Scenario(), SELF_CONSISTENT)
    assert fig5.uav_radio.tx_power == 16.0
    assert figure_base(5, Scenario(), SELF_CONSISTENT, fig5_uav_power=25.0).uav_radio.tx_power == 25.0
    assert figure_base(6, Scenario(), SELF_CONSISTENT).uav_radio.tx_power == 25.0
    literal = figure_base(5, Scenario(), PAPER_LITERAL)
    assert literal.lambda_pdf.value == 30.0


def test_figure_sweeps():
    (spec,) = figure_sweeps(5, SELF_CONSISTENT, engine=Engine.ANALYTIC)
    assert spec.figure == "fig5"
    assert FIG5_UAV_POWER_NOTE in spec.notes
    bucket_spec, nearest_spec = figure_sweeps(4, PAPER_LITERAL)
    assert bucket_spec.protocol.kind is ProtocolKind.POPULATION
    assert nearest_spec.protocol.kind is ProtocolKind.NEAREST
    assert nearest_spec.engine is Engine.ANALYTIC


def test_replication_report_scores_anchors():
    rows = [
        _row(1.0, 7.0, 0.50), _row(16.0, 7.0, 0.85), _row(30.0, 7.0, 0.88), _row(70.0, 7.0, 0.90),
        _row(16.0, 11.0, 0.70),
    ]
    report = replication_report(rows, 4, SELF_CONSISTENT)
    anchors = {(a["series_value"], a["bucket"]): a for a in report["anchors"]}
    assert anchors[(7.0, "short")]["delta_pp"] == pytest.approx(0.23)
    assert anchors[(7.0, "short")]["within_tolerance"]
    assert anchors[(11.0, "short")]["within_tolerance"]
    # No long-bucket row was produced.
    assert anchors[(7.0, "long")]["produced"] is None
    assert not anchors[(7.0, "long")]["within_tolerance"]
    assert report["anchors_within_tolerance"] == 2
    assert report["shapes_reproduced"]


def test_replication_report_flags_missing_saturation():
    rows = [_row(1.0, 7.0, 0.50), _row(30.0, 7.0, 0.60), _row(70.0, 7.0, 0.99)]
    report = replication_report(rows, 4, SELF_CONSISTENT)
    assert not report["shapes_reproduced"]


def test_paper_literal_report_scores_nearest_rows():
    rows = [
        _row(16.0, 7.0, 0.85), _row(16.0, 11.0, 0.70),
        _row(16.0, 7.0, 0.60, bucket="nearest"), _row(16.0, 11.0, 0.68, bucket="nearest"),
    ]
    literal = replication_report(rows, 4, PAPER_LITERAL)
    consistent = replication_report(rows, 4, SELF_CONSISTENT)
    assert literal["anchors"] != consistent["anchors"]
    assert "anchors_within_tolerance_nearest" not in consistent

    anchors = {(a["series_value"], a["bucket"]): a for a in literal["anchors"]}
    assert anchors[(7.0, "short")]["produced_nearest"] == 0.60
    assert anchors[(7.0, "short")]["delta_pp_nearest"] == pytest.approx(-24.77)
    assert not anchors[(7.0, "short")]["within_tolerance_nearest"]
    assert anchors[(11.0, "short")]["delta_pp_nearest"] == pytest.approx(-0.63)
    assert anchors[(11.0, "short")]["within_tolerance_nearest"]
    # The bucket verdicts are unchanged by the extra scoring.
    assert anchors[(7.0, "short")]["within_tolerance"]
    assert literal["anchors_within_tolerance"] == consistent["anchors_within_tolerance"] == 2
    assert literal["anchors_within_tolerance_nearest"] == 1
