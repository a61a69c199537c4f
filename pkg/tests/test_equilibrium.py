import numpy as np
import pytest

from mfg_lambda.equilibrium import (
    EquilibriumSolution,
    MaxDoublings,
    MaxIterationsExceeded,
    SolverConfig,
    extend_horizon,
    fp_residual,
    frozen_m0,
    picard_map,
    solve_mfg_finite_horizon,
)
from mfg_lambda.fokker_planck import heat_flow
from mfg_lambda.grid import integrate, wrapped_gaussian
from mfg_lambda.hjb import hjb_residual
from mfg_lambda.metrics import wasserstein1_grid
from mfg_lambda.model import ConfigError, CouplingSpec, HamiltonianSpec, ProblemSpec, reference_spec


def decoupled_spec(n=64, lam=20.0, horizon=1.0, c=0.0, alpha=1.0):
    return ProblemSpec(HamiltonianSpec(0.5), CouplingSpec(alpha, 0.0, c), lam=lam, grid_points=n,
                       m0=wrapped_gaussian(n, 0.3, 0.1), dt=1e-3, horizon=horizon)


def test_decoupled_model_converges_immediately_from_its_best_response():
    spec = decoupled_spec()
    _, m_hat = picard_map(heat_flow(spec.m0, spec), spec)
    sol = solve_mfg_finite_horizon(spec, init_m_traj=m_hat)
    assert sol.iterations <= 2
    assert sol.final_residual < SolverConfig().tol_fp


def test_reference_fixed_point_residuals(ref_solution, ref_spec):
    tol = SolverConfig().tol_fp
    assert ref_solution.final_residual < tol
    assert hjb_residual(ref_solution.u_traj, ref_solution.m_traj, ref_spec) <= 10 * tol
    assert fp_residual(ref_solution, ref_spec) <= 10 * tol
    assert ref_solution.u_traj.n_frames == ref_spec.n_steps + 1
    assert np.array_equal(ref_solution.m_traj.frames[0], ref_spec.m0)


def test_picard_iterates_stay_densities():
    spec = reference_spec(40.0, horizon=0.5)
    seen = []

    def check(k, m, u, m_hat):
        for frames in (m.frames, m_hat.frames):
            seen.append((np.max(np.abs(integrate(frames) - 1.0)), frames.min()))

    solve_mfg_finite_horizon(spec, callback=check)
    mass_err, low = np.max(seen, axis=0)[0], np.min(seen, axis=0)[1]
    assert mass_err <= 1e-10 and low >= -1e-12


def test_heat_flow_and_frozen_starts_agree_at_lambda_80(probe80):
    run = probe80.pairwise_d1[("frozen_m0", "heat_flow")]
    assert run <= 1e-6


def test_max_iterations_carries_history():
    spec = reference_spec(40.0, horizon=0.5)
    with pytest.raises(MaxIterationsExceeded) as info:
        solve_mfg_finite_horizon(spec, config=SolverConfig(max_iter=3))
    assert len(info.value.residuals) == 3
    assert info.value.residuals[-1] < info.value.residuals[0]


def test_contraction_is_faster_at_large_lambda(capsys):
    ratios = {}
    for lam in (20.0, 160.0):
        sol = solve_mfg_finite_horizon(reference_spec(lam))
        r = np.asarray(sol.residuals)
        ratios[lam] = float(np.exp(np.mean(np.diff(np.log(r[-5:])))))
    with capsys.disabled():
        print(f"\nPicard residual ratio: lambda=20 {ratios[20.0]:.3f}, lambda=160 {ratios[160.0]:.3f}")
    assert all(0 < v < 1 for v in ratios.values())


def test_extend_horizon_stabilizes_by_four(sweep):
    sol = sweep.solutions[40.0]
    assert sol.horizon_used == 4.0
    assert sol.m_traj.t1 == pytest.approx(1.0)


def test_extend_horizon_decoupled_closed_form():
    c, lam, tau = 0.7, 20.0, 1.0
    spec = ProblemSpec(HamiltonianSpec(0.0), CouplingSpec(0.0, 0.0, c), lam=lam, grid_points=64,
                       m0=wrapped_gaussian(64, 0.3, 0.1), dt=1e-3, horizon=2.0)
    sol = extend_horizon(spec, tau, tol_T=1e-5)
    exact = (c / lam) * -np.expm1(-lam * (sol.horizon_used - sol.u_traj.times))
    assert np.max(np.abs(sol.u_traj.frames - exact[:, None])) <= 1e-4
    assert np.max(np.abs(sol.u_traj.frames - c / lam)) <= 1e-4


def test_extend_horizon_infinite_tolerance_returns_first_horizon():
    spec = decoupled_spec(horizon=1.0)
    sol = extend_horizon(spec, 0.25, tol_T=np.inf)
    direct = solve_mfg_finite_horizon(spec).restrict(0.25)
    assert sol.horizon_used == 1.0
    assert np.array_equal(sol.u_traj.frames, direct.u_traj.frames)


def test_extend_horizon_doubling_cap():
    spec = decoupled_spec(horizon=0.5)
    with pytest.raises(MaxDoublings):
        extend_horizon(spec, 0.25, tol_T=1e-5, config=SolverConfig(max_doublings=0))


def test_solution_save_load_round_trip(tmp_path, ref_solution):
    ref_solution.save(tmp_path)
    back = EquilibriumSolution.load(tmp_path)
    assert np.array_equal(back.u_traj.frames, ref_solution.u_traj.frames)
    assert np.array_equal(back.m_traj.frames, ref_solution.m_traj.frames)
    assert back.iterations == ref_solution.iterations
    assert back.residuals == ref_solution.residuals


def test_frozen_m0_trajectory(ref_spec):
    traj = frozen_m0(ref_spec)
    assert traj.n_frames == ref_spec.n_steps + 1
    assert np.all(traj.frames == ref_spec.m0)


def test_uniform_model_stays_uniform():
    spec = ProblemSpec(HamiltonianSpec(0.0), CouplingSpec(0.0, 0.5), lam=10.0, grid_points=32,
                       m0=np.ones(32), dt=1e-3, horizon=0.5)
    sol = solve_mfg_finite_horizon(spec)
    assert np.max(np.abs(sol.m_traj.frames - 1.0)) <= 1e-12
    assert np.max(wasserstein1_grid(sol.m_traj.frames, np.ones_like(sol.m_traj.frames))) <= 1e-12


def test_solver_config_rejects_unknown_keys():
    assert SolverConfig.from_dict({"theta": 0.3}).theta == 0.3
    with pytest.raises(ConfigError):
        SolverConfig.from_dict({"damping": 0.3})
