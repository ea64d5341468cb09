import math
from dataclasses import replace

import numpy as np
import pytest

import leqlab.policy as policy
import leqlab.riccati as riccati
from leqlab.oracles import risk_neutral_value
from leqlab.verify import (
    AcceptanceConfig,
    benchmark_config,
    build_spec_from_constants,
    export_report_csv,
    report_text,
    risk_neutral_limit,
    run_acceptance_suite,
    scalar_benchmark_spec,
    verify_optimality,
)
from leqlab.model import build_problem


# ---------------------------------------------------------------------------
# optimality verification


def test_zero_perturbations_self_consistency(bench_spec):
    report = verify_optimality(bench_spec, n_perturbations=0, seed=1)
    assert [c.name for c in report.checks] == ["ce-selfconsistency"]
    assert report.overall
    assert report.checks[0].measured <= report.checks[0].tolerance


def test_benchmark_perturbation_gaps(bench_spec):
    report = verify_optimality(bench_spec, n_perturbations=10, seed=3)
    gaps = [c for c in report.checks if c.name.startswith("ce-gap-")]
    assert len(gaps) == 11  # ten sampled plus the fixed gain-scale probe
    for c in gaps:
        assert c.status == "pass"
        assert c.measured >= -1e-9
    probe = next(c for c in report.checks if c.name == "ce-gap-gain-1.2")
    assert probe.measured >= 1e-4
    assert report.overall


def test_decoupled_control_offset_gap_is_exact_quadrature():
    # control neither enters the dynamics nor cross-couples in the cost, so
    # an offset policy pays exactly the control weight of its own offset
    spec = build_spec_from_constants(
        T=1.0, x0=1.0, theta=0.5, A1=-0.3, sigma=0.4, R11=1.0, R44=1.0, S1=0.5
    )
    sol = riccati.solve(spec, 512)
    pol = policy.optimal_feedback(spec, sol)
    np.testing.assert_array_equal(pol.Kx.values, np.zeros_like(pol.Kx.values))
    np.testing.assert_array_equal(pol.k0.values, np.zeros_like(pol.k0.values))
    _, ce_opt = policy.evaluate_linear_policy(spec, pol, 512)
    for c in (-0.7, 0.4, 1.0):
        _, ce = policy.evaluate_linear_policy(spec, pol.perturbed(1.0, c), 512)
        assert ce - ce_opt == pytest.approx(0.5 * c * c, abs=1e-10)


def test_reports_render(tmp_path, bench_spec):
    report = verify_optimality(bench_spec, n_perturbations=2, seed=5)
    text = report_text(report)
    assert "ce-selfconsistency" in text and text.endswith("overall: pass")
    out = tmp_path / "report.csv"
    export_report_csv(report, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "name,status,measured,tolerance,detail"
    assert len(lines) == len(report.checks) + 1


# ---------------------------------------------------------------------------
# risk-neutral limit


def test_risk_neutral_limit_benchmark(bench_spec):
    report = risk_neutral_limit(bench_spec, (1e-2, 1e-3, 1e-4))
    assert report.overall
    lq = next(c for c in report.checks if c.name == "risk-neutral-lq-match")
    assert lq.tolerance == pytest.approx(1e-3)
    assert lq.measured <= 1e-3
    cauchy = next(c for c in report.checks if c.name == "risk-neutral-cauchy")
    assert cauchy.status == "pass"


def test_risk_neutral_limit_no_noise_is_theta_free():
    spec = build_spec_from_constants(T=1.0, x0=1.0, theta=0.5, A1=-0.4, D1=1.0,
                                     R11=1.0, R44=1.0, S1=0.3)
    ce = {}
    for th in (1e-1, 1e-2, 1e-3):
        sol = riccati.solve(replace(spec, theta=th), 512)
        _, ce[th] = policy.closed_form_optimal_cost(sol, spec.x0, th)
    vals = list(ce.values())
    assert max(vals) - min(vals) <= 1e-12


def test_risk_neutral_limit_single_theta(bench_spec):
    report = risk_neutral_limit(bench_spec, (1e-3,))
    assert [c.name for c in report.checks] == ["risk-neutral-lq-match"]


def test_risk_neutral_limit_rejects_bad_sequence(bench_spec):
    with pytest.raises(ValueError):
        risk_neutral_limit(bench_spec, (1e-4, 1e-3))
    with pytest.raises(ValueError):
        risk_neutral_limit(bench_spec, ())
    with pytest.raises(ValueError):
        risk_neutral_limit(bench_spec, (1e-2, -1e-3))


def test_risk_neutral_reference_close_to_small_theta_value(bench_spec):
    lq = risk_neutral_value(bench_spec)
    sol = riccati.solve(replace(bench_spec, theta=1e-4), 2048)
    _, ce = policy.closed_form_optimal_cost(sol, bench_spec.x0, 1e-4)
    assert abs(ce - lq) <= 1e-3


# ---------------------------------------------------------------------------
# acceptance suite plumbing


def test_empty_check_list_is_vacuous_pass(bench_spec):
    report = run_acceptance_suite(AcceptanceConfig(spec=bench_spec, checks=[]))
    assert report.overall
    assert len(report.checks) == 1
    assert report.checks[0].status == "skip"
    assert "vacuous" in report.checks[0].detail


def test_unknown_check_name_rejected(bench_spec):
    with pytest.raises(ValueError, match="unknown check"):
        run_acceptance_suite(AcceptanceConfig(spec=bench_spec, checks=["nope"]))


def test_single_deterministic_check(bench_spec):
    report = run_acceptance_suite(
        AcceptanceConfig(spec=bench_spec, checks=["blowup-eta"], seed=0)
    )
    assert [c.name for c in report.checks] == ["blowup-eta"]
    assert report.overall


def test_report_reproducible(bench_spec):
    cfg = AcceptanceConfig(spec=bench_spec, checks=["rk4-order", "blowup-eta"], seed=9)
    a = report_text(run_acceptance_suite(cfg))
    b = report_text(run_acceptance_suite(cfg))
    assert a == b


def test_coarse_dt_fails_mc_identity(bench_spec):
    # a deliberately coarse grid biases the Euler estimate far beyond its
    # statistical resolution; the check must fail and report the distance
    cfg = AcceptanceConfig(
        spec=bench_spec, checks=["cost-identity-mc"],
        n_paths=20_000, dt=bench_spec.T / 4, seed=11,
    )
    report = run_acceptance_suite(cfg)
    rec = report.checks[0]
    assert rec.name == "cost-identity-mc"
    assert rec.status == "fail"
    assert rec.measured > 3.0
    assert not report.overall


def test_benchmark_config_builds():
    spec = build_problem(benchmark_config())
    bench = scalar_benchmark_spec()
    assert spec.theta == bench.theta
    assert spec.sigma(0.5) == bench.sigma(0.5)
    assert spec.R44(0.1) == bench.R44(0.1)
