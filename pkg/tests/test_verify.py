import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from mfg_lambda.equilibrium import solve_mfg_finite_horizon
from mfg_lambda.fokker_planck import heat_flow
from mfg_lambda.grid import Trajectory, wrapped_gaussian
from mfg_lambda.model import CouplingSpec, HamiltonianSpec, ProblemSpec
from mfg_lambda.verify import (
    NOT_APPLICABLE,
    check_d1_time_regularity,
    check_duhamel_u,
    check_rep_lambda_du,
    contraction_ratio,
    convergence_rate_experiment,
    discounted_future_integral,
    discounted_lag_weights,
    duhamel_reconstruction,
    exp_trapezoid_weights,
    fit_loglog_slope,
    fit_stability,
    grid_lipschitz,
    groplus_iterate,
    groplus_rhs,
    groplus_selftest,
    heat_kernel_column,
    limit_consistency_experiment,
    max_variation,
    rep_lambda_du_table,
    limit_gap_bound,
    uniqueness_probe,
)


def small_model(n=32, beta=0.0, alpha=0.0, kappa=0.0, c=0.0, lam=20.0, horizon=1.0):
    return ProblemSpec(HamiltonianSpec(beta), CouplingSpec(alpha, kappa, c), lam=lam, grid_points=n,
                       m0=wrapped_gaussian(n, 0.3, 0.1), dt=1e-3, horizon=horizon)


# --- heat kernel and quadrature ---------------------------------------------


def continuous_kernel_symbol(n, variance, n_alias=60):
    """DFT of w_d = (G * hat)(x_d): aliased product of Gaussian and hat transforms."""
    k = np.arange(n // 2 + 1)[:, None] + n * np.arange(-n_alias, n_alias + 1)[None, :]
    q = k / n
    return np.sum(np.exp(-2 * np.pi**2 * k**2 * variance) * np.sinc(q) ** 2, axis=1)


@pytest.mark.parametrize("variance", [0.0, 1e-5, 2e-3, 0.02, 0.5, 3.0])
def test_heat_kernel_column_has_unit_mass(variance):
    col = heat_kernel_column(128, variance)
    assert abs(col.sum() - 1.0) <= 1e-13
    assert col.min() >= 0.0


@pytest.mark.parametrize("n,variance", [(64, 2e-3), (128, 2e-3), (128, 0.04), (256, 1e-4), (128, 1.0)])
def test_heat_kernel_column_matches_fourier_oracle(n, variance):
    got = np.fft.rfft(heat_kernel_column(n, variance)).real
    assert np.max(np.abs(got - continuous_kernel_symbol(n, variance))) <= 1e-12


def test_heat_kernel_column_is_symmetric():
    col = heat_kernel_column(64, 0.01)
    assert np.allclose(col[1:], col[1:][::-1], atol=1e-16)


@given(st.floats(0.0, 500.0), st.floats(1e-4, 0.1))
def test_exp_trapezoid_weights_integrate_hats(rate, dt):
    a, b = exp_trapezoid_weights(rate, dt)
    qa = quad(lambda s: math.exp(-rate * s) * (1 - s / dt), 0, dt, epsabs=1e-15, epsrel=1e-12)[0]
    qb = quad(lambda s: math.exp(-rate * s) * s / dt, 0, dt, epsabs=1e-15, epsrel=1e-12)[0]
    assert a == pytest.approx(qa, rel=1e-9, abs=1e-15)
    assert b == pytest.approx(qb, rel=1e-9, abs=1e-15)


def test_exp_trapezoid_branches_join_continuously():
    dt = 1.0
    lo = exp_trapezoid_weights(0.5 - 1e-12, dt)
    hi = exp_trapezoid_weights(0.5 + 1e-12, dt)
    assert np.allclose(lo, hi, rtol=1e-9)


def test_discounted_integral_of_constant():
    rate, dt = 7.0, 1e-3
    f = np.ones(1001)
    t = np.arange(1001) * dt
    got = discounted_future_integral(f, rate, dt)
    assert np.allclose(got, -np.expm1(-rate * (1.0 - t)) / rate, atol=1e-14)


def test_discounted_integral_is_exact_for_piecewise_linear(rng):
    rate, dt = 3.0, 0.1
    f = rng.standard_normal(11)
    t = np.arange(11) * dt
    got = discounted_future_integral(f, rate, dt)
    for i in (0, 4, 9):
        want = quad(lambda r: np.interp(r, t, f) * math.exp(-rate * (r - t[i])), t[i], t[-1],
                    points=t[i:], limit=200, epsabs=1e-14)[0]
        assert got[i] == pytest.approx(want, abs=1e-12)
    W = discounted_lag_weights(rate, dt, 10)
    assert W @ f == pytest.approx(got[0], abs=1e-14)


# --- representation formulas -------------------------------------------------


def test_duhamel_constant_source_closed_form():
    spec = small_model(c=1.3, lam=40.0)
    sol = solve_mfg_finite_horizon(spec)
    times, rec = duhamel_reconstruction(sol, spec)
    exact = (1.3 / 40.0) * -np.expm1(-40.0 * (spec.horizon - times))
    assert np.max(np.abs(rec - exact[:, None])) <= 1e-4
    assert check_duhamel_u(sol, spec) <= 1e-4


def test_duhamel_terminal_sample_is_exact(ref_solution, ref_spec):
    assert check_duhamel_u(ref_solution, ref_spec, sample_ts=[ref_spec.horizon]) == 0.0


def test_rep_lambda_du_zero_model():
    spec = small_model(lam=10.0, horizon=0.5)
    sol = solve_mfg_finite_horizon(spec)
    table = rep_lambda_du_table(sol, spec)
    assert len(table) == 16
    assert all(p.lhs == 0.0 and p.rhs == 0.0 for p in table)


def test_rep_lambda_du_near_terminal_time(ref_solution, ref_spec):
    T = ref_spec.horizon
    ts = [T - 0.1, T - 0.02, T - 0.005]
    table = rep_lambda_du_table(ref_solution, ref_spec, sample_xs=[16, 80], sample_ts=ts)
    assert max(p.error for p in table) <= 1e-2
    # the representation shrinks with the remaining horizon
    near = [abs(p.rhs) for p in table if p.t == ts[-1]]
    far = [abs(p.rhs) for p in table if p.t == ts[0]]
    assert max(near) < max(far)


def test_rep_lambda_du_sample_cap(ref_solution, ref_spec):
    with pytest.raises(ValueError):
        check_rep_lambda_du(ref_solution, ref_spec, sample_xs=range(9), sample_ts=[0.0] * 8)


# --- sweeps ------------------------------------------------------------------


def test_rate_experiment_vanishes_on_zero_model():
    table = convergence_rate_experiment(small_model(horizon=0.5), [10, 20, 40, 80], 0.25)
    assert table.errors == [0.0, 0.0, 0.0, 0.0]
    assert table.failures == {}


def test_rate_experiment_needs_four_lambdas():
    with pytest.raises(ValueError):
        convergence_rate_experiment(small_model(), [10, 20, 40], 0.25)
    with pytest.raises(ValueError):
        convergence_rate_experiment(small_model(), [5, 10, 20, 40], 0.25)


def test_consistency_trivial_when_drifts_vanish():
    spec = small_model(c=0.4, horizon=0.5)
    table = limit_consistency_experiment(spec, [10, 20, 40, 80], 0.25)
    assert max(table.gaps) <= 1e-8


@given(st.floats(-3.0, 3.0), st.floats(0.01, 100.0))
def test_loglog_slope_of_power_law(p, c):
    xs = np.array([10.0, 20.0, 40.0, 80.0, 160.0])
    assert fit_loglog_slope(xs, c * xs**p) == pytest.approx(p, abs=1e-9)


def test_loglog_slope_undefined_for_nonpositive():
    assert math.isnan(fit_loglog_slope([1, 2], [1.0, 0.0]))


def test_max_variation():
    assert max_variation([2.0, 1.0, 4.0]) == 4.0


# --- stability inequalities ---------------------------------------------------


def test_limit_gap_bound_closed_form():
    dt = 0.01
    forcing = np.full(101, 0.5)
    got = limit_gap_bound(0.1, forcing, dt, 2.0, 0.3)
    s = np.arange(101) * dt
    assert np.allclose(got, (0.1 + 2.0 * 0.5 * s) * np.exp(0.3 * s), atol=1e-13)


def test_grid_lipschitz_of_sine():
    x = np.arange(256) / 256
    assert grid_lipschitz(np.sin(2 * np.pi * x)[None]) == pytest.approx(2 * np.pi, rel=1e-3)


def test_time_regularity_reports_violation_for_teleporting_mass():
    frames = np.stack([wrapped_gaussian(64, 0.2, 0.03), wrapped_gaussian(64, 0.7, 0.03)])
    violation = check_d1_time_regularity(Trajectory(0.0, 1e-3, frames), 0.0, 1e-3)
    assert violation > 0.4


def test_fit_stability_on_identical_pairs():
    m = np.tile(wrapped_gaussian(32, 0.5, 0.1), (11, 1))
    l = np.zeros((11, 32))
    fit = fit_stability([(m, m, l, l)], 40.0, 0.01)
    assert fit.K_emp == 0.0 and fit.eta_emp == 0.0 and fit.max_violation <= 0.0


def test_fit_stability_holds_by_construction(rng):
    n_frames, lam, dt = 21, 20.0, 0.01
    pairs = []
    for _ in range(3):
        m1 = np.stack([wrapped_gaussian(32, 0.3 + 0.01 * k, 0.1) for k in range(n_frames)])
        m2 = np.stack([wrapped_gaussian(32, 0.35 + 0.01 * k, 0.1) for k in range(n_frames)])
        l1 = rng.standard_normal((n_frames, 32))
        pairs.append((m1, m2, l1, l1 + 0.1 * rng.standard_normal((n_frames, 32))))
    fit = fit_stability(pairs, lam, dt)
    assert math.isfinite(fit.K_emp) and fit.eta_emp < lam
    assert fit.max_violation <= 1e-12


# --- non-local Gronwall lemma ---------------------------------------------------


def test_groplus_zero_function_passes():
    assert groplus_selftest(0.5, 0.5, 4.0, 1.0, np.zeros(201), 0.01) == "pass"


def test_groplus_exponential_is_not_applicable():
    a, b, dt = 0.5, 0.25, 0.01
    t = np.arange(301) * dt
    f = np.exp(4 * a * t)
    rhs = groplus_rhs(f, dt, a, b, 4 * a + 4 * b)
    assert np.all(rhs < f)
    assert groplus_selftest(a, b, 4 * a + 4 * b, 1.0, f, dt) == NOT_APPLICABLE


@settings(max_examples=20)
@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(0.0, 2.0), st.floats(0.1, 10.0))
def test_groplus_iterated_map_vanishes(a, b, extra, M):
    delta = 4 * a + 4 * b + extra
    dt = 0.01
    f = groplus_iterate(a, b, delta, M, 2.0, dt, n_iter=50)
    assert np.max(f) <= 1e-6 * M
    assert groplus_selftest(a, b, delta, M, f, dt) == "pass"


def test_groplus_rejects_small_discount_and_growth():
    f = np.zeros(11)
    assert groplus_selftest(1.0, 1.0, 7.9, 1.0, f, 0.1) == NOT_APPLICABLE
    t = np.arange(11) * 0.1
    assert groplus_selftest(0.1, 0.1, 1.0, 1.0, 2.0 * np.exp(0.4 * t), 0.1) == NOT_APPLICABLE
    assert groplus_selftest(0.1, 0.1, 1.0, 1.0, -np.ones(11), 0.1) == NOT_APPLICABLE


# --- uniqueness probe ---------------------------------------------------------


def test_probe_on_decoupled_model_is_trivial():
    spec = small_model(beta=0.5, alpha=1.0, horizon=0.5)
    report = uniqueness_probe(spec, 20.0, n_inits=3, seed=4)
    assert report.all_converged
    assert report.max_d1 <= 1e-8
    assert report.max_du <= 1e-6


def test_probe_needs_two_inits():
    with pytest.raises(ValueError):
        uniqueness_probe(small_model(), 20.0, n_inits=1)


def test_contraction_ratio_of_geometric_sequence():
    assert contraction_ratio(0.3 ** np.arange(10)) == pytest.approx(0.3)
    assert contraction_ratio([1.0]) == 0.0


def test_probe_report_serializes(probe80):
    d = probe80.to_dict()
    assert d["lambda"] == 80.0 and len(d["runs"]) == 3
    assert set(d["pairwise_d1"]) == {"frozen_m0|heat_flow", "frozen_m0|perturbed_0", "heat_flow|perturbed_0"}
    assert heat_flow is not None
