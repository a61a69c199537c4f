"""MFG fixed point on a finite horizon, horizon extension and the limit dynamics."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fokker_planck import drift_from_u, heat_flow, solve_fp_forward, solve_limit_mckean_vlasov
from .grid import Trajectory, format_float
from .hjb import solve_hjb_backward
from .metrics import sup_norm_diff, wasserstein1_grid
from .model import ProblemSpec

__all__ = [
    "EquilibriumSolution", "MaxDoublings", "MaxIterationsExceeded", "SolverConfig",
    "extend_horizon", "fp_residual", "frozen_m0", "picard_map", "solve_limit_mckean_vlasov",
    "solve_mfg_finite_horizon",
]

log = logging.getLogger(__name__)


class MaxIterationsExceeded(RuntimeError):
    def __init__(self, msg, residuals):
        super().__init__(msg)
        self.residuals = list(residuals)


class MaxDoublings(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    theta: float = 0.5
    tol_fp: float = 1e-8
    max_iter: int = 300
    tol_T: float = 1e-5
    max_doublings: int = 5

    @classmethod
    def from_dict(cls, d: dict | None) -> "SolverConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            from .model import ConfigError

            raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EquilibriumSolution:
    u_traj: Trajectory
    m_traj: Trajectory
    iterations: int
    final_residual: float
    horizon_used: float
    residuals: list = field(default_factory=list)

    def restrict(self, tau: float) -> "EquilibriumSolution":
        return EquilibriumSolution(
            self.u_traj.window(0.0, tau), self.m_traj.window(0.0, tau),
            self.iterations, self.final_residual, self.horizon_used, list(self.residuals),
        )

    def diagnostics(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "horizon_used": self.horizon_used,
            "residual_history": list(self.residuals),
        }

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.u_traj.to_csv(directory / "u.csv")
        self.m_traj.to_csv(directory / "m.csv")
        text = json.dumps(self.diagnostics(), indent=2, sort_keys=True, default=format_float)
        (directory / "diagnostics.json").write_text(text + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "EquilibriumSolution":
        directory = Path(directory)
        diag = json.loads((directory / "diagnostics.json").read_text())
        return cls(
            Trajectory.from_csv(directory / "u.csv"), Trajectory.from_csv(directory / "m.csv"),
            diag["iterations"], diag["final_residual"], diag["horizon_used"], diag["residual_history"],
        )


def frozen_m0(spec: ProblemSpec) -> Trajectory:
    return Trajectory(0.0, spec.dt, np.tile(spec.m0, (spec.n_steps + 1, 1)))


def _extend(traj: Trajectory, n_frames: int) -> Trajectory:
    """Pad (holding the last frame) or truncate to ``n_frames``."""
    f = traj.frames
    if f.shape[0] >= n_frames:
        return Trajectory(traj.t0, traj.dt, f[:n_frames].copy())
    pad = np.repeat(f[-1:], n_frames - f.shape[0], axis=0)
    return Trajectory(traj.t0, traj.dt, np.vstack([f, pad]))


def picard_map(m_traj: Trajectory, spec: ProblemSpec) -> tuple[Trajectory, Trajectory]:
    """One best-response sweep: u = HJB(m), m_hat = FP(drift(u))."""
    u = solve_hjb_backward(m_traj, spec)
    drift = Trajectory(0.0, spec.dt, drift_from_u(u.frames, spec))
    return u, solve_fp_forward(drift, spec.m0, spec)


def solve_mfg_finite_horizon(spec: ProblemSpec, init_m_traj: Trajectory | None = None,
                             config: SolverConfig = SolverConfig(), callback=None) -> EquilibriumSolution:
    """Damped Picard iteration on [0, spec.horizon] with u(T) = 0.

    ``callback(k, m, u, m_hat)`` is invoked after every best response, with
    ``m`` the density that produced ``u``.
    The returned pair is (u^k, FP(u^k)), so the FP equation holds exactly and
    the HJB equation up to the last fixed-point increment.
    """
    n_frames = spec.n_steps + 1
    m = heat_flow(spec.m0, spec) if init_m_traj is None else _extend(init_m_traj, n_frames)
    theta = config.theta
    residuals = []
    for k in range(1, config.max_iter + 1):
        u, m_hat = picard_map(m, spec)
        if callback is not None:
            callback(k, m, u, m_hat)
        new = (1.0 - theta) * m.frames + theta * m_hat.frames
        res = float(np.max(wasserstein1_grid(new, m.frames)))
        residuals.append(res)
        log.debug("picard %d residual %.3e", k, res)
        if res < config.tol_fp:
            return EquilibriumSolution(u, m_hat, k, res, spec.horizon, residuals)
        if not np.isfinite(res):
            break
        m = Trajectory(0.0, spec.dt, new)
    raise MaxIterationsExceeded(
        f"Picard did not reach {config.tol_fp:g} in {len(residuals)} iterations "
        f"(lambda={spec.lam}, last residual {residuals[-1]:.3e})", residuals)


def extend_horizon(spec: ProblemSpec, tau: float, tol_T: float | None = None,
                   config: SolverConfig = SolverConfig()) -> EquilibriumSolution:
    """Solve at T, 2T, 4T, ... until the solution on [0, tau] stops changing."""
    tol_T = config.tol_T if tol_T is None else tol_T
    T = max(2.0 * tau, spec.horizon)
    sol = solve_mfg_finite_horizon(spec.replace(horizon=T), config=config)
    if not np.isfinite(tol_T):
        return sol.restrict(tau)
    for _ in range(config.max_doublings):
        T2 = 2.0 * T
        spec2 = spec.replace(horizon=T2)
        sol2 = solve_mfg_finite_horizon(spec2, init_m_traj=sol.m_traj, config=config)
        a, b = sol.restrict(tau), sol2.restrict(tau)
        dm = float(np.max(wasserstein1_grid(a.m_traj.frames, b.m_traj.frames)))
        du = sup_norm_diff(a.u_traj, b.u_traj)
        log.info("horizon %g -> %g: d1 %.3e, sup u %.3e", T, T2, dm, du)
        if dm < tol_T and du < tol_T:
            return b
        sol, T = sol2, T2
    raise MaxDoublings(f"solution on [0,{tau}] not stable at T={T} (tol {tol_T:g})")


def fp_residual(sol: EquilibriumSolution, spec: ProblemSpec) -> float:
    """sup_t d1(m, FP(drift(u))) on the solution's horizon."""
    drift = Trajectory(sol.m_traj.t0, spec.dt, drift_from_u(sol.u_traj.frames, spec))
    m_again = solve_fp_forward(drift, sol.m_traj.frames[0], spec)
    return float(np.max(wasserstein1_grid(m_again.frames, sol.m_traj.frames)))
