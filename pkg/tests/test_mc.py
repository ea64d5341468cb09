import numpy as np
import pytest
from scipy.integrate import solve_ivp

import leqlab.mc as mc
import leqlab.policy as policy
import leqlab.riccati as riccati
from leqlab.errors import AllPathsOverflowed, GridMismatch, MissingPrerequisite
from leqlab.model import CoefficientFunction
from leqlab.verify import build_spec_from_constants

from conftest import N_STEPS


def zero_policy(T=1.0):
    return policy.LinearPolicy(
        Kx=CoefficientFunction.constant(0.0, T),
        k0=CoefficientFunction.constant(0.0, T),
    )


def manual_ensemble(log_cost, log_gir=None):
    log_cost = np.asarray(log_cost, dtype=float)
    n = log_cost.size
    return mc.PathEnsemble(
        n_paths=n,
        dt=0.25,
        seed=0,
        grid=np.linspace(0.0, 1.0, 5),
        log_cost=log_cost,
        overflow=~np.isfinite(log_cost),
        x_final=np.zeros(n),
        x_mean=np.zeros(5),
        log_girsanov=None if log_gir is None else np.asarray(log_gir, dtype=float),
    )


# ---------------------------------------------------------------------------
# simulation


def test_degenerate_deterministic_diffusion():
    # no noise, no drift: X stays at 0 and the cost is the deterministic
    # initial-backward-value weight alone
    spec = build_spec_from_constants(T=1.0, x0=0.0, theta=0.5, G=1.0, g=0.3, S2=2.0)
    pol = zero_policy()
    fields = policy.policy_fbsde_fields(spec, pol, 1024)
    ens = mc.simulate(spec, pol, fields, 50, 1.0 / 256, 3)
    np.testing.assert_array_equal(ens.x_final, np.zeros(50))
    y0 = fields.y0(0.0)
    assert y0 != 0.0
    np.testing.assert_allclose(ens.log_cost, 0.5 * 0.5 * 2.0 * y0 * y0, rtol=0, atol=0)


def test_bitwise_determinism_same_seed(bench_spec, bench_policy, bench_fields, bench_sol):
    a = mc.simulate(bench_spec, bench_policy, bench_fields, 1, 1.0 / 1024, 7, sol=bench_sol)
    b = mc.simulate(bench_spec, bench_policy, bench_fields, 1, 1.0 / 1024, 7, sol=bench_sol)
    np.testing.assert_array_equal(a.log_cost, b.log_cost)
    np.testing.assert_array_equal(a.log_girsanov, b.log_girsanov)
    np.testing.assert_array_equal(a.x_final, b.x_final)


def test_path_noise_independent_of_ensemble_size(bench_spec, bench_policy, bench_fields):
    small = mc.simulate(bench_spec, bench_policy, bench_fields, 50, 1.0 / 256, 11)
    large = mc.simulate(bench_spec, bench_policy, bench_fields, 200, 1.0 / 256, 11)
    np.testing.assert_array_equal(small.log_cost, large.log_cost[:50])
    np.testing.assert_array_equal(small.x_final, large.x_final[:50])


def test_worker_count_does_not_change_results(bench_spec, bench_policy, bench_fields, bench_sol):
    one = mc.simulate(bench_spec, bench_policy, bench_fields, 10_000, 1.0 / 256, 5,
                      sol=bench_sol, workers=1)
    four = mc.simulate(bench_spec, bench_policy, bench_fields, 10_000, 1.0 / 256, 5,
                       sol=bench_sol, workers=4)
    np.testing.assert_array_equal(one.log_cost, four.log_cost)
    np.testing.assert_array_equal(one.x_mean, four.x_mean)
    e1 = mc.estimate_cost(one, bench_spec.theta)
    e4 = mc.estimate_cost(four, bench_spec.theta)
    assert e1 == e4


def test_terminal_mean_matches_moment_ode(bench_spec, bench_policy, bench_fields):
    ens = mc.simulate(bench_spec, bench_policy, bench_fields, 20_000, 1.0 / 1024, 17)

    def mean_rhs(t, m):
        return [(bench_spec.A1(t) + bench_spec.D1(t) * bench_policy.Kx(t)) * m[0]]

    ref = solve_ivp(mean_rhs, (0.0, 1.0), [bench_spec.x0], method="DOP853",
                    rtol=1e-10, atol=1e-12)
    m_ref = ref.y[0, -1]
    stderr = ens.x_final.std(ddof=1) / np.sqrt(ens.n_paths)
    assert abs(ens.x_final.mean() - m_ref) <= 3.0 * stderr


def test_grid_mismatch_rejected(bench_spec, bench_policy, bench_fields, bench_sol):
    with pytest.raises(GridMismatch):
        mc.simulate(bench_spec, bench_policy, bench_fields, 10, 0.3, 0)
    with pytest.raises(GridMismatch):
        # 2048-step backward grid cannot be striped onto 600 SDE steps
        mc.simulate(bench_spec, bench_policy, bench_fields, 10, 1.0 / 600, 0, sol=bench_sol)


# ---------------------------------------------------------------------------
# cost estimation


def test_estimate_unit_cost():
    est = mc.estimate_cost(manual_ensemble(np.zeros(8)), theta=0.5)
    assert est.J_hat == 1.0
    assert est.stderr_J == 0.0
    assert est.CE_hat == 0.0
    assert est.n_effective == 8 and est.overflow_count == 0


def test_estimate_two_path_mean():
    est = mc.estimate_cost(manual_ensemble([np.log(2.0), np.log(4.0)]), theta=1.0)
    assert est.J_hat == pytest.approx(3.0, rel=1e-15)


def test_estimate_excludes_overflowed_paths():
    est = mc.estimate_cost(manual_ensemble([0.0, np.inf, 0.0, np.nan]), theta=1.0)
    assert est.n_effective == 2
    assert est.overflow_count == 2
    assert est.n_effective + est.overflow_count == 4
    assert est.J_hat == 1.0


def test_estimate_all_overflowed():
    with pytest.raises(AllPathsOverflowed):
        mc.estimate_cost(manual_ensemble([np.inf, np.inf]), theta=1.0)


def test_estimate_invariant_under_reordering():
    rng = np.random.default_rng(23)
    lc = rng.normal(size=1001)
    a = mc.estimate_cost(manual_ensemble(lc), theta=0.7)
    b = mc.estimate_cost(manual_ensemble(lc[::-1].copy()), theta=0.7)
    c = mc.estimate_cost(manual_ensemble(rng.permutation(lc)), theta=0.7)
    assert a == b == c


def test_max_weight_share_diagnostic():
    est = mc.estimate_cost(manual_ensemble([0.0, 0.0, np.log(98.0)]), theta=1.0)
    # heaviest path carries 98 of the total 100
    assert est.max_weight_share == pytest.approx(0.98, rel=1e-12)


# ---------------------------------------------------------------------------
# change-of-measure weights


def test_girsanov_requires_reference(bench_spec, bench_policy, bench_fields):
    ens = mc.simulate(bench_spec, bench_policy, bench_fields, 10, 1.0 / 256, 1)
    with pytest.raises(MissingPrerequisite):
        mc.girsanov_check(ens)


def test_girsanov_weights_unit_without_risk_or_noise(bench_sol, bench_spec, bench_policy, bench_fields):
    from dataclasses import replace

    # theta = 0 zeroes the exponent exactly
    spec0 = replace(bench_spec, theta=0.0)
    ens = mc.simulate(spec0, bench_policy, bench_fields, 20, 1.0 / 256, 2, sol=bench_sol)
    mean_w, se = mc.girsanov_check(ens)
    assert mean_w == 1.0 and se == 0.0

    # sigma = 0 kills the stochastic integral
    spec_nn = build_spec_from_constants(T=1.0, x0=1.0, theta=0.5, A1=-0.3, R11=1.0)
    sol_nn = riccati.solve(spec_nn, 1024)
    pol_nn = policy.optimal_feedback(spec_nn, sol_nn)
    f_nn = policy.policy_fbsde_fields(spec_nn, pol_nn, 1024)
    ens_nn = mc.simulate(spec_nn, pol_nn, f_nn, 20, 1.0 / 256, 2, sol=sol_nn)
    mean_w, se = mc.girsanov_check(ens_nn)
    assert mean_w == 1.0 and se == 0.0


def test_girsanov_unit_mean_stochastic(bench_spec, bench_policy, bench_fields, bench_sol):
    ens = mc.simulate(bench_spec, bench_policy, bench_fields, 20_000, 1.0 / 1024, 29,
                      sol=bench_sol)
    mean_w, se = mc.girsanov_check(ens)
    assert abs(mean_w - 1.0) <= 3.0 * se


# ---------------------------------------------------------------------------
# one-step residuals


def test_residuals_require_reference(bench_spec, bench_policy, bench_fields):
    ens = mc.simulate(bench_spec, bench_policy, bench_fields, 10, 1.0 / 256, 1)
    with pytest.raises(MissingPrerequisite):
        mc.bsde_residuals(ens, bench_spec, None)


def test_residuals_zero_instance():
    spec = build_spec_from_constants(T=1.0, x0=0.0, theta=0.5)
    sol = riccati.solve(spec, 1024)
    pol = zero_policy()
    fields = policy.policy_fbsde_fields(spec, pol, 1024)
    ens = mc.simulate(spec, pol, fields, 30, 1.0 / 256, 4, sol=sol)
    stats = mc.bsde_residuals(ens, spec, sol)
    assert stats.rms_backward == 0.0
    assert stats.rms_value == 0.0


def test_residual_step_halving(coupled_spec, coupled_sol, coupled_policy, coupled_fields):
    rms_b, rms_v = [], []
    for k in (7, 8):
        ens = mc.simulate(coupled_spec, coupled_policy, coupled_fields, 8_000,
                          1.0 / 2**k, 31 + k, sol=coupled_sol)
        st = mc.bsde_residuals(ens, coupled_spec, coupled_sol)
        rms_b.append(st.rms_backward)
        rms_v.append(st.rms_value)
    assert 1.3 <= rms_b[0] / rms_b[1] <= 3.0
    assert 1.3 <= rms_v[0] / rms_v[1] <= 3.0


def test_residuals_pure_ode_defect_without_noise():
    # deterministic closed loop: the backward residual has no cross-path
    # scatter and shrinks first-order with the step
    spec = build_spec_from_constants(
        T=1.0, x0=1.0, theta=0.5, A1=-0.4, B1=0.2, D1=1.0, b=0.1,
        A2=0.3, B2=-0.2, D2=0.1, g=0.2, G=0.5, S1=0.4,
        R11=1.0, R22=0.3, R44=1.0,
    )
    sol = riccati.solve(spec, 2048)
    pol = policy.optimal_feedback(spec, sol)
    fields = policy.policy_fbsde_fields(spec, pol, 2048)
    out = {}
    for k in (7, 8):
        ens = mc.simulate(spec, pol, fields, 5, 1.0 / 2**k, 1, sol=sol)
        st = mc.bsde_residuals(ens, spec, sol)
        np.testing.assert_allclose(np.abs(st.step_mean_backward), st.step_rms_backward,
                                   rtol=0, atol=1e-15)
        out[k] = st.rms_backward
    assert out[7] <= 10.0 * (1.0 / 2**7)  # within the first-order defect bound
    assert out[7] / out[8] >= 3.0  # without noise the defect is higher order


# ---------------------------------------------------------------------------
# output


def test_mc_summary_csv(tmp_path, bench_spec, bench_policy, bench_fields, bench_sol):
    ens = mc.simulate(bench_spec, bench_policy, bench_fields, 100, 1.0 / 256, 13, sol=bench_sol)
    est = mc.estimate_cost(ens, bench_spec.theta)
    gir = mc.girsanov_check(ens)
    out = tmp_path / "mc_summary.csv"
    mc.export_mc_summary_csv(out, est, ens, gir)
    lines = out.read_text().strip().splitlines()
    header = lines[0].split(",")
    assert header == ["estimator", "J_hat", "stderr", "CE_hat", "n_paths",
                      "n_effective", "overflow_count", "dt", "seed"]
    cost_row = lines[1].split(",")
    assert cost_row[0] == "cost"
    assert int(cost_row[4]) == 100
    assert lines[2].split(",")[0] == "girsanov"

    dump = tmp_path / "paths.csv"
    mc.export_path_dump_csv(dump, ens)
    dump_lines = dump.read_text().strip().splitlines()
    assert dump_lines[0] == "path_index,log_cost,log_girsanov"
    assert len(dump_lines) == 101
