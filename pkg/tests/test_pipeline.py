import numpy as np
import pytest

from overdet.errors import InvalidParameters
from overdet.pipeline import (
    BranchReport,
    PipelineConfig,
    convergence_sweep,
    kernel_convergence,
    observed_order,
    run_pipeline,
    summary_rows,
)

import oracles


@pytest.fixture(scope="module")
def default_reports():
    return run_pipeline(PipelineConfig())


def test_default_run_passes_all_checks(default_reports):
    assert [r.m for r in default_reports] == [1, 2]
    for r in default_reports:
        assert r.passed, (r.checks, r.errors)
        assert set(r.checks) == {"negative_ground_state", "closed_form", "identity",
                                 "kernel_simplicity", "backend_agreement", "kernel",
                                 "transversality", "residual_scaling"}


def test_branch_constants_ordered(default_reports):
    mus = [r.datum.mu_m for r in default_reports]
    assert mus[0] < mus[1]
    for r in default_reports:
        assert r.datum.lambda_m > 0 and r.kernel_simple


def test_linear_limit_pipeline():
    reports = run_pipeline(PipelineConfig(p=2.0, oracle_mode=True))
    mus = [r.datum.mu_m for r in reports]
    assert mus == pytest.approx([oracles.tan_root(1), oracles.tan_root(2)], abs=1e-8)
    assert mus == pytest.approx([4.49340946, 7.72525184], abs=1e-8)
    for r in reports:
        assert r.checks["kernel_simplicity"] and r.checks["closed_form"]


def test_single_branch_run():
    (r,) = run_pipeline(PipelineConfig(k=3))
    assert r.m == 1 and r.passed


def test_short_horizon_gives_error_records():
    reports = run_pipeline(PipelineConfig(R_max=3.0))
    assert [r.m for r in reports] == [1, 2]
    for r in reports:
        assert not r.passed and r.checks == {"ode": False}
        assert "HorizonTooShort" in r.errors[0]
        assert r.summary_row()[1] is None


def test_failed_band_is_reported_not_raised():
    (r,) = run_pipeline(PipelineConfig(k=3, slope_min=2.1))
    assert r.checks["residual_scaling"] is False
    assert r.checks["kernel"] and not r.passed


@pytest.mark.parametrize("kw", [{"k": 2}, {"n_radial": 16}, {"s_sweep": (1e-2, 1e-1)},
                                {"s_sweep": (1e-2,)}, {"backends": ("spectral",)},
                                {"n_x": 8}, {"p": 7.0}, {"p": 2.0}])
def test_config_validation(kw):
    with pytest.raises(InvalidParameters):
        PipelineConfig(**kw)


def test_config_branches_and_round_trip():
    c = PipelineConfig(k=6, s_sweep=[1e-2, 1e-3])
    assert c.branches == [1, 2, 3, 4]
    assert PipelineConfig.from_dict(c.to_dict()) == c


def test_report_round_trip(default_reports):
    for r in default_reports:
        assert BranchReport.from_dict(r.to_dict()) == r
    err = BranchReport(1, errors=["x"], checks={"ode": False})
    assert BranchReport.from_dict(err.to_dict()) == err


def test_summary_rows(default_reports):
    rows = summary_rows(default_reports)
    assert all(len(row) == len(BranchReport.SUMMARY_FIELDS) for row in rows)
    assert "residual_scaling=pass" in rows[0][-1]


def test_kernel_convergence_floor_rule(datum1):
    rep = kernel_convergence(datum1, [256, 512], ratio=100.0, floor=1.0)
    assert rep["passed"]
    rep = kernel_convergence(datum1, [256, 512], ratio=100.0, floor=1e-10)
    assert not rep["passed"]


def test_observed_order():
    n = np.array([100, 200, 400])
    assert observed_order(n, 3.0 / n**2) == pytest.approx(2.0)
    assert observed_order(n, [1e-3, 0.0, 1e-5]) is None


def test_fd_convergence_sweep():
    out = convergence_sweep(PipelineConfig(), [256, 512, 1024])
    assert out["orders"]["lambda_m"] >= 2.0
    assert out["orders"]["kernel_residual"] >= 1.8
    errs = [row["lambda_m_error"] for row in out["rows"]]
    assert errs[0] > errs[1] > errs[2]
    assert abs(out["limits"]["lambda_m"] - out["reference"]["lambda_m"]) < errs[-1]


def test_collocation_sweep_is_resolved():
    out = convergence_sweep(PipelineConfig(), [129, 257, 385], backend="collocation")
    assert max(row["lambda_m_error"] for row in out["rows"]) < 1e-8
    assert out["limits"] == {}


def test_convergence_sweep_needs_three_resolutions():
    with pytest.raises(InvalidParameters):
        convergence_sweep(PipelineConfig(), [256, 512])


def test_pipeline_is_deterministic(default_reports):
    again = run_pipeline(PipelineConfig())
    assert [r.to_dict() for r in again] == [r.to_dict() for r in default_reports]
