import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mfg_lambda.equilibrium import solve_mfg_finite_horizon
from mfg_lambda.fokker_planck import (
    SchemeError,
    check_conservation,
    drift_from_u,
    heat_flow,
    solve_adjoint_rho,
    solve_fp_forward,
    solve_limit_mckean_vlasov,
)
from mfg_lambda.grid import Trajectory, grid_delta, integrate, uniform_density, wrapped_gaussian
from mfg_lambda.model import CFLViolation, CouplingSpec, HamiltonianSpec, ProblemSpec, reference_spec
from mfg_lambda.verify import check_d1_time_regularity


def fourier_heat(m0, nu, t):
    """Continuous heat flow of the trigonometric interpolant of m0."""
    n = m0.size
    k = np.fft.rfftfreq(n, 1.0 / n)
    return np.fft.irfft(np.fft.rfft(m0) * np.exp(-4 * np.pi**2 * k**2 * nu * t), n)


def bare_spec(n=128, nu=1.0, m0=None, dt=1e-3, horizon=0.5, **kw):
    m0 = wrapped_gaussian(n, 0.4, 0.08) if m0 is None else m0
    return ProblemSpec(lam=10.0, nu=nu, grid_points=n, m0=m0, dt=dt, horizon=horizon, **kw)


def assert_density_frames(frames):
    assert np.max(np.abs(integrate(frames) - 1.0)) <= 1e-10
    assert frames.min() >= -1e-12


def test_uniform_is_stationary_under_heat_flow():
    spec = bare_spec(m0=uniform_density(128))
    m = heat_flow(spec.m0, spec)
    assert np.max(np.abs(m.frames - 1.0)) <= 1e-13


def test_uniform_is_stationary_under_constant_drift():
    spec = bare_spec(m0=uniform_density(128))
    drift = Trajectory(0.0, spec.dt, np.full((spec.n_steps + 1, 128), 3.0))
    m = solve_fp_forward(drift, spec.m0, spec)
    assert np.max(np.abs(m.frames - 1.0)) <= 1e-12


def test_heat_flow_matches_fourier_oracle():
    spec = bare_spec()
    m = heat_flow(spec.m0, spec)
    for t in (0.1, 0.2, 0.5):
        assert np.max(np.abs(m.at(t) - fourier_heat(spec.m0, spec.nu, t))) <= 1e-4


def test_fp_solve_conserves_mass_on_reference_equilibrium(ref_solution):
    assert_density_frames(ref_solution.m_traj.frames)


@settings(max_examples=25)
@given(arrays(float, 32, elements=st.floats(0.0, 5.0)), arrays(float, (4, 32), elements=st.floats(-30.0, 30.0)),
       st.floats(0.01, 2.0))
def test_mass_and_positivity_for_arbitrary_drifts(weights, coarse_drift, nu):
    m0 = weights + 1e-3
    m0 = m0 / integrate(m0)
    spec = ProblemSpec(lam=10.0, nu=nu, grid_points=32, m0=m0, dt=1e-3, horizon=0.05)
    # piecewise-constant in time, held over blocks of steps
    frames = np.repeat(coarse_drift, [13, 13, 13, 12], axis=0)
    m = solve_fp_forward(Trajectory(0.0, spec.dt, frames), m0, spec)
    assert_density_frames(m.frames)


def test_cfl_violation_is_rejected():
    spec = bare_spec()
    drift = Trajectory(0.0, spec.dt, np.full((spec.n_steps + 1, 128), 1.5 * spec.h / spec.dt))
    with pytest.raises(CFLViolation):
        solve_fp_forward(drift, spec.m0, spec)


def test_conservation_guard_raises():
    with pytest.raises(SchemeError):
        check_conservation(np.full((2, 16), 1.01), "test")
    bad = np.ones((2, 16))
    bad[1, 0], bad[1, 1] = -1e-9, 2.0 + 1e-9
    with pytest.raises(SchemeError):
        check_conservation(bad, "test")


def test_adjoint_at_its_start_time_is_the_delta(ref_solution, ref_spec):
    rho = solve_adjoint_rho(17, 0.5, ref_solution.u_traj, ref_spec, t1=0.5)
    assert rho.n_frames == 1
    assert np.array_equal(rho.frames[0], grid_delta(128, 17))


def test_adjoint_spreads_symmetrically_without_drift():
    spec = bare_spec(horizon=0.2)
    u = Trajectory(0.0, spec.dt, np.zeros((spec.n_steps + 1, 128)))
    x0 = 40
    rho = solve_adjoint_rho(x0, 0.0, u, spec, t1=0.05)
    angle = 2 * np.pi * spec.x
    for frame in rho.frames:
        mean = np.angle(np.sum(frame * np.exp(1j * angle))) / (2 * np.pi)
        assert abs(mean - x0 / 128) <= 1e-10
        assert np.max(np.abs(frame - np.roll(frame[::-1], 2 * x0 + 1))) <= 1e-12


def test_adjoint_with_full_model_drift_conserves_mass(ref_solution, ref_spec):
    rho = solve_adjoint_rho(90, 1.0, ref_solution.u_traj, ref_spec, t1=1.5)
    assert rho.n_frames == 501
    assert_density_frames(rho.frames)


def test_drift_sign_convention(ref_spec):
    u = 0.01 * np.sin(2 * np.pi * ref_spec.x)
    b = drift_from_u(u, ref_spec)
    p = ref_spec.lam * (np.roll(u, -1) - np.roll(u, 1)) * ref_spec.grid_points / 2
    assert np.allclose(b, -(p + 0.5 * np.cos(2 * np.pi * ref_spec.x)))


def test_time_regularity_trivial_for_stationary_uniform():
    spec = bare_spec(m0=uniform_density(64), n=64, horizon=0.1)
    m = heat_flow(spec.m0, spec)
    assert check_d1_time_regularity(m, 0.0, 1.0) <= 0.0


def test_time_regularity_heat_flow_from_bump():
    spec = bare_spec(horizon=0.5)
    m = heat_flow(spec.m0, spec)
    assert check_d1_time_regularity(m, 0.0, spec.nu, stride=2) <= 1e-3


def test_time_regularity_at_small_viscosity():
    spec = reference_spec(40.0, nu=0.01, horizon=0.5)
    sol = solve_mfg_finite_horizon(spec)
    drift_sup = float(np.max(np.abs(drift_from_u(sol.u_traj.frames, spec))))
    assert check_d1_time_regularity(sol.m_traj, drift_sup, spec.nu, stride=2) <= 1e-3


def test_mckean_vlasov_without_interaction_is_heat_flow():
    spec = bare_spec(horizon=0.5)
    m = solve_limit_mckean_vlasov(spec, 0.5)
    for t in (0.1, 0.3, 0.5):
        assert np.max(np.abs(m.at(t) - fourier_heat(spec.m0, spec.nu, t))) <= 1e-4


@pytest.mark.parametrize("m0_kind", ["uniform", "bump"])
def test_mckean_vlasov_preserves_reflection_symmetry(m0_kind):
    # sin(2 pi x) and the cosine kernel are both even about x = 1/4 (node 32 of 128)
    n = 128
    m0 = uniform_density(n) if m0_kind == "uniform" else wrapped_gaussian(n, 0.25, 0.1)
    spec = ProblemSpec(HamiltonianSpec(0.0), CouplingSpec(0.5, 0.5), lam=10.0, grid_points=n, m0=m0,
                       dt=1e-3, horizon=0.5)
    m = solve_limit_mckean_vlasov(spec, 0.5)
    reflected = np.roll(m.frames[:, ::-1], 2 * 32 + 1, axis=-1)
    assert np.max(np.abs(m.frames - reflected)) <= 1e-10
    assert np.max(np.abs(m.frames[-1] - m0)) > 1e-2
    assert_density_frames(m.frames)


def test_mckean_vlasov_reference_conserves_mass(limit_traj):
    assert_density_frames(limit_traj.frames)
