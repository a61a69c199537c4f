"""Backward solver for the discounted HJB equation on the circle.

    -u_t - nu u_xx + lambda u + H(lambda u_x, x) / lambda = F(x, m(t)),   u(T) = g

The stiff linear part (lambda - nu * discrete Laplacian) is circulant, so it is
diagonalized by the real FFT and integrated exactly; the Hamiltonian and the
coupling are explicit (exponential Runge-Kutta of order 2, Cox-Matthews).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .grid import Trajectory, gradient_central, laplacian
from .model import CFLViolation, ProblemSpec

GROWTH_LIMIT = 10.0


@dataclass(frozen=True)
class HjbDiagnostics:
    sup_u: float
    sup_Du: float
    sup_D2u: float
    lam: float

    def scaled(self) -> dict:
        return {"lam_sup_u": self.lam * self.sup_u, "lam_sup_Du": self.lam * self.sup_Du,
                "lam_sup_D2u": self.lam * self.sup_D2u}


def linear_symbol(spec: ProblemSpec) -> np.ndarray:
    """Eigenvalues of lambda - nu * laplacian on the rfft modes."""
    n = spec.grid_points
    k = np.arange(n // 2 + 1)
    return spec.lam + spec.nu * (4.0 / spec.h**2) * np.sin(np.pi * k / n) ** 2


def _phi_weights(a: np.ndarray, dt: float):
    z = a * dt
    e = np.exp(-z)
    phi1 = -np.expm1(-z) / a
    small = z < 1e-3
    phi2 = np.where(small, dt * (0.5 - z / 6.0 + z * z / 24.0),
                    (np.expm1(-z) + z) / np.where(small, 1.0, a * z))
    return e, phi1, phi2


def coupling_frames(m_traj: Trajectory, spec: ProblemSpec) -> np.ndarray:
    return spec.coupling.value(spec.x, m_traj.frames)


def hamiltonian_term(u: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """H(lambda Du, x) / lambda for a frame or a stack of frames."""
    p = spec.lam * gradient_central(u)
    return spec.hamiltonian.value(p, spec.x) / spec.lam


def circulant_operator(symbol: np.ndarray, n: int) -> np.ndarray:
    """Dense matrix of the circulant operator with the given rfft eigenvalues."""
    col = np.fft.irfft(symbol, n)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return np.ascontiguousarray(col[idx])


@njit(cache=True)
def _etdrk2_backward(u, F, E, P1, P2, lam, beta_cos, h, growth_limit, scale):
    n_frames, n = u.shape
    prev_sup = max(np.max(np.abs(u[n_frames - 1])), scale)
    src = np.empty(n)
    src_a = np.empty(n)
    for k in range(n_frames - 1, 0, -1):
        uk = u[k]
        for j in range(n):
            p = lam * (uk[(j + 1) % n] - uk[(j - 1) % n]) / (2.0 * h)
            src[j] = F[k, j] - (0.5 * p * p + beta_cos[j] * p) / lam
        a = E @ uk + P1 @ src
        for j in range(n):
            p = lam * (a[(j + 1) % n] - a[(j - 1) % n]) / (2.0 * h)
            src_a[j] = F[k - 1, j] - (0.5 * p * p + beta_cos[j] * p) / lam
        u[k - 1] = a + P2 @ (src_a - src)
        cur = np.max(np.abs(u[k - 1]))
        if not np.isfinite(cur) or cur > growth_limit * prev_sup:
            return k - 1
        prev_sup = max(prev_sup, cur)
    return -1


def solve_hjb_backward(m_traj: Trajectory, spec: ProblemSpec,
                       terminal_u: np.ndarray | None = None) -> Trajectory:
    """Integrate from t = m_traj.t1 down to m_traj.t0; returns u on every node."""
    if abs(m_traj.dt - spec.dt) > 1e-12 * spec.dt:
        raise ValueError("density trajectory time step differs from spec.dt")
    n = spec.grid_points
    F = np.ascontiguousarray(coupling_frames(m_traj, spec))
    u = np.empty((m_traj.n_frames, n))
    u[-1] = 0.0 if terminal_u is None else terminal_u

    e, phi1, phi2 = _phi_weights(linear_symbol(spec), spec.dt)
    E, P1, P2 = (circulant_operator(w, n) for w in (e, phi1, phi2))
    scale = (np.max(np.abs(F)) + spec.hamiltonian.beta**2 / 2.0) / spec.lam
    beta_cos = spec.hamiltonian.beta * np.cos(2.0 * np.pi * spec.x)
    bad = _etdrk2_backward(u, F, E, P1, P2, float(spec.lam), beta_cos, spec.h, GROWTH_LIMIT, scale)
    if bad >= 0:
        raise CFLViolation(
            f"HJB blow-up at t={m_traj.t0 + bad * spec.dt:.4g}: sup|u| grew more than "
            f"{GROWTH_LIMIT:g}x in one step; dt={spec.dt} is too large for the explicit Hamiltonian term"
        )
    return Trajectory(m_traj.t0, spec.dt, u)


def hjb_diagnostics(u_traj: Trajectory, lam: float) -> HjbDiagnostics:
    u = u_traj.frames
    return HjbDiagnostics(
        sup_u=float(np.max(np.abs(u))),
        sup_Du=float(np.max(np.abs(gradient_central(u)))),
        sup_D2u=float(np.max(np.abs(laplacian(u)))),
        lam=lam,
    )


def hjb_residual(u_traj: Trajectory, m_traj: Trajectory, spec: ProblemSpec) -> float:
    """Re-substitution residual: sup |u - HJB(m)| with the same terminal data."""
    u_again = solve_hjb_backward(m_traj, spec, terminal_u=u_traj.frames[-1])
    return float(np.max(np.abs(u_again.frames - u_traj.frames)))
