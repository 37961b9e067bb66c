import json

import pytest

from src.analytic.quadrature import QuadratureSettings
from src.errors import ConfigError
from src.harness.properties import PROPERTIES, run_property_suite

CHEAP = [
    "wilson_formula", "range_classification", "population_bounds", "sinr_kernels_agree", "success_threshold",
    "noise_negligible",
]


def test_cheap_properties_pass(tmp_path):
    report = run_property_suite(tmp_path, only=CHEAP)
    assert report.passed
    assert [r.name for r in report.results] == CHEAP
    saved = json.loads(report.path.read_text())
    assert saved["passed"] is True
    assert saved["fault"] is None
    assert all(p["seconds"] >= 0 for p in saved["properties"])


def test_flipped_success_is_caught(tmp_path):
    report = run_property_suite(tmp_path, only=["success_threshold"], fault="flipped-success")
    assert not report.passed
    assert json.loads(report.path.read_text())["fault"] == "flipped-success"


def test_skewed_fading_is_caught(tmp_path):
    report = run_property_suite(tmp_path, only=["fading_moments"], fault="skewed-fading")
    assert not report.passed


def test_fault_is_removed_afterwards(tmp_path):
    run_property_suite(tmp_path, only=["success_threshold"], fault="flipped-success")
    assert run_property_suite(tmp_path, only=["success_threshold"]).passed


def test_reported_property_never_fails():
    for name in ("nearest_agreement", "noise_ratios"):
        _, asserted = PROPERTIES[name]
        assert not asserted


def test_noise_ratios_are_recorded(tmp_path):
    report = run_property_suite(tmp_path, only=["noise_ratios"])
    assert report.passed
    (result,) = report.results
    assert not result.asserted
    assert all(f"alpha={a}" in result.detail for a in (3, 4, 5))


def test_engines_agree_across_figures(tmp_path):
    report = run_property_suite(
        tmp_path, only=["figure_agreement"], quad=QuadratureSettings(placements_log2=14)
    )
    assert report.passed, report.results[0].detail
    assert all(f"fig{i}" in report.results[0].detail for i in (5, 6, 7))


def test_unknown_names_rejected(tmp_path):
    with pytest.raises(ConfigError):
        run_property_suite(tmp_path, only=["no_such_property"])
    with pytest.raises(ConfigError):
        run_property_suite(tmp_path, only=["success_threshold"], fault="no-such-fault")
