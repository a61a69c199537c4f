"""Cross-checks and experiments relating the numerical solutions to the theory.

Representation formulas, the 1/sqrt(lambda) rate, the limit consistency sweep,
the Wasserstein stability inequalities, the non-local Gronwall lemma and the
uniqueness probe. All constants in inequalities are fitted from the data.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit
from scipy.special import ndtr, ndtri

from .equilibrium import (
    EquilibriumSolution,
    MaxDoublings,
    MaxIterationsExceeded,
    SolverConfig,
    extend_horizon,
    frozen_m0,
    solve_mfg_finite_horizon,
)
from .fokker_planck import heat_flow, solve_adjoint_rho, solve_limit_mckean_vlasov
from .grid import Trajectory, gradient_central
from .hjb import hjb_diagnostics
from .metrics import wasserstein1_grid
from .model import CFLViolation, ProblemSpec

log = logging.getLogger(__name__)

KERNEL_TAIL = 1e-14


# --- quadrature helpers ------------------------------------------------------


def exp_trapezoid_weights(rate: float, dt: float) -> tuple[float, float]:
    """(a, b) with int_0^dt e^{-rate s} [f0 (1 - s/dt) + f1 s/dt] ds = a f0 + b f1."""
    z = rate * dt
    total = dt if z == 0.0 else dt * -math.expm1(-z) / z
    if abs(z) < 0.5:
        # (1 - e^{-z}(1 + z)) / z^2 = sum_k (-z)^k (k + 1) / (k + 2)!, cancellation-free
        b, term = 0.0, 0.5
        for k in range(25):
            b += (k + 1) * term
            term *= -z / (k + 3)
        b *= dt
    else:
        b = dt * (1.0 - math.exp(-z) * (1.0 + z)) / (z * z)
    return total - b, b


def discounted_lag_weights(rate: float, dt: float, n_lags: int) -> np.ndarray:
    """Weights W_l with int_0^{n dt} e^{-rate r} phi(r) dr ~ sum_l W_l phi(l dt), phi piecewise linear."""
    W = np.zeros(n_lags + 1)
    if n_lags == 0:
        return W
    a, b = exp_trapezoid_weights(rate, dt)
    decay = np.exp(-rate * dt * np.arange(n_lags))
    W[:-1] += a * decay
    W[1:] += b * decay
    return W


def discounted_future_integral(f: np.ndarray, rate: float, dt: float) -> np.ndarray:
    """I_i = int_{t_i}^{t_n} f(r) e^{-rate (r - t_i)} dr for piecewise-linear f on a uniform grid."""
    return _future_integral(np.ascontiguousarray(f, dtype=float), rate, dt, *exp_trapezoid_weights(rate, dt))


@njit(cache=True)
def _future_integral(f, rate, dt, a, b):
    n = f.size
    out = np.zeros(n)
    decay = np.exp(-rate * dt)
    for i in range(n - 2, -1, -1):
        out[i] = decay * out[i + 1] + a * f[i] + b * f[i + 1]
    return out


# --- periodic heat kernel ----------------------------------------------------


def _psi_tail(x: np.ndarray, sigma: float) -> np.ndarray:
    """Psi(-|x|) with Psi'' the centred Gaussian density of std sigma."""
    y = -np.abs(x)
    g = np.exp(-0.5 * (y / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))
    return y * ndtr(y / sigma) + sigma * sigma * g


def heat_kernel_column(n: int, variance: float) -> np.ndarray:
    """Weights w_d = int G(x_d - y) hat_0(y) dy for the wrapped Gaussian G.

    Applied as a circulant, they convolve the periodic heat kernel with the
    piecewise-linear interpolant of a grid function exactly (up to the
    truncation of the image sum, whose tail is below 1e-14).
    """
    h = 1.0 / n
    if variance <= 0.0:
        col = np.zeros(n)
        col[0] = 1.0
        return col
    sigma = math.sqrt(variance)
    # images farther than z_tail standard deviations carry mass below KERNEL_TAIL
    reach = -ndtri(KERNEL_TAIL) * sigma + h
    n_img = int(math.ceil(reach)) + 1
    d = np.arange(n) * h
    d = np.where(d > 0.5, d - 1.0, d)
    k = np.arange(-n_img, n_img + 1)
    z = d[:, None] + k[None, :]
    # Psi(x) = max(x, 0) + Psi(-|x|); the ramp part contributes only to the hat at 0
    sec = (_psi_tail(z + h, sigma) - 2.0 * _psi_tail(z, sigma) + _psi_tail(z - h, sigma)) / h
    ramp = (np.maximum(z + h, 0) - 2.0 * np.maximum(z, 0) + np.maximum(z - h, 0)) / h
    return (sec + ramp).sum(axis=1)


def heat_kernel_symbols(n: int, nu: float, dt: float, n_lags: int) -> np.ndarray:
    """Real rfft symbols of the heat-kernel circulants at lags 0..n_lags (time l*dt)."""
    return np.stack([np.fft.rfft(heat_kernel_column(n, 2.0 * nu * l * dt)).real for l in range(n_lags + 1)])


# --- representation of u -----------------------------------------------------


def duhamel_source(u_traj: Trajectory, m_traj: Trajectory, spec: ProblemSpec) -> np.ndarray:
    """g(x, s) = F(x, m(s)) - H(lambda Du(x, s), x) / lambda."""
    p = spec.lam * gradient_central(u_traj.frames)
    return spec.coupling.value(spec.x, m_traj.frames) - spec.hamiltonian.value(p, spec.x) / spec.lam


def duhamel_reconstruction(sol: EquilibriumSolution, spec: ProblemSpec,
                           sample_ts=None) -> tuple[np.ndarray, np.ndarray]:
    """Rebuild u(., t) from the discounted heat-kernel representation.

    Returns (times, frames). The time integral uses exponentially weighted
    trapezoids (the discount is integrated exactly, the kernel-smoothed source
    linearly); the terminal term is the discounted heat flow of u(T).
    """
    u_traj, m_traj = sol.u_traj, sol.m_traj
    n_last = u_traj.n_frames - 1
    if sample_ts is None:
        sample_ts = [u_traj.t0 + q * (u_traj.t1 - u_traj.t0) for q in (0.0, 0.25, 0.5, 0.75, 1.0)]
    idx = [u_traj.index_of(t) for t in sample_ts]
    max_lag = n_last - min(idx)
    symbols = heat_kernel_symbols(spec.grid_points, spec.nu, spec.dt, max_lag)
    g_hat = np.fft.rfft(duhamel_source(u_traj, m_traj, spec), axis=-1)
    uT = u_traj.frames[-1]
    uT_hat = np.fft.rfft(uT)
    out = np.empty((len(idx), spec.grid_points))
    for row, i in enumerate(idx):
        lags = n_last - i
        if lags == 0:
            out[row] = uT
            continue
        W = discounted_lag_weights(spec.lam, spec.dt, lags)
        acc = np.einsum("l,lk,lk->k", W, symbols[: lags + 1], g_hat[i:])
        acc += math.exp(-spec.lam * lags * spec.dt) * symbols[lags] * uT_hat
        out[row] = np.fft.irfft(acc, spec.grid_points)
    return u_traj.t0 + np.asarray(idx) * spec.dt, out


def check_duhamel_u(sol: EquilibriumSolution, spec: ProblemSpec, sample_ts=None) -> float:
    """Max |u_reconstructed - u_solver| over the sampled times and all nodes."""
    times, rec = duhamel_reconstruction(sol, spec, sample_ts)
    solver = np.stack([sol.u_traj.at(t) for t in times])
    return float(np.max(np.abs(rec - solver)))


# --- representation of lambda Du ---------------------------------------------


@dataclass(frozen=True)
class RepresentationPoint:
    x_index: int
    t: float
    lhs: float
    rhs: float

    @property
    def error(self) -> float:
        return abs(self.lhs - self.rhs)


def default_sample_xs(n: int) -> list[int]:
    return [int(round(q * n)) % n for q in (0.125, 0.375, 0.625, 0.875)]


def default_sample_ts(sol: EquilibriumSolution) -> list[float]:
    t0, t1 = sol.u_traj.t0, sol.u_traj.t1
    dt = sol.u_traj.dt
    return [t0 + round(q * (t1 - t0) / dt) * dt for q in (0.0, 0.25, 0.5, 0.75)]


def rep_lambda_du_point(sol: EquilibriumSolution, spec: ProblemSpec, x_index: int, t: float) -> RepresentationPoint:
    u_traj, m_traj = sol.u_traj, sol.m_traj
    i = u_traj.index_of(t)
    rho = solve_adjoint_rho(x_index, t, u_traj, spec).frames
    u = u_traj.frames[i:]
    x = spec.x
    dxF = spec.coupling.dx(x, m_traj.frames[i:])
    dxH = spec.hamiltonian.dx(spec.lam * gradient_central(u), x)
    h = spec.h
    psi = h * np.sum((spec.lam * dxF - dxH) * rho, axis=-1)
    W = discounted_lag_weights(spec.lam, spec.dt, psi.size - 1)
    T_minus_t = (psi.size - 1) * spec.dt
    terminal = spec.lam * math.exp(-spec.lam * T_minus_t) * h * float(np.dot(gradient_central(u[-1]), rho[-1]))
    rhs = float(W @ psi) + terminal
    lhs = float(spec.lam * gradient_central(u_traj.frames[i])[x_index])
    return RepresentationPoint(x_index, float(t), lhs, rhs)


def rep_lambda_du_table(sol, spec, sample_xs=None, sample_ts=None) -> list[RepresentationPoint]:
    sample_xs = default_sample_xs(spec.grid_points) if sample_xs is None else list(sample_xs)
    sample_ts = default_sample_ts(sol) if sample_ts is None else list(sample_ts)
    if len(sample_xs) * len(sample_ts) > 64:
        raise ValueError("at most 64 sample points (one adjoint solve each)")
    return [rep_lambda_du_point(sol, spec, xi, t) for t in sample_ts for xi in sample_xs]


def check_rep_lambda_du(sol: EquilibriumSolution, spec: ProblemSpec, sample_xs=None, sample_ts=None) -> float:
    """Max |lambda D_h u(x, t) - adjoint representation| over the sample lattice."""
    return max(p.error for p in rep_lambda_du_table(sol, spec, sample_xs, sample_ts))


# --- lambda sweeps -----------------------------------------------------------


@dataclass
class LambdaSweep:
    """Horizon-extended solutions on [0, tau] for a list of lambdas."""

    base_spec: ProblemSpec
    tau: float
    solutions: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def spec_for(self, lam: float) -> ProblemSpec:
        return self.base_spec.replace(lam=lam)


def solve_sweep(base_spec: ProblemSpec, lambdas, tau: float, config: SolverConfig = SolverConfig(),
                tol_T: float | None = None) -> LambdaSweep:
    sweep = LambdaSweep(base_spec, tau)
    for lam in lambdas:
        spec = base_spec.replace(lam=float(lam))
        try:
            sweep.solutions[float(lam)] = extend_horizon(spec, tau, tol_T=tol_T, config=config)
        except (MaxIterationsExceeded, MaxDoublings, CFLViolation) as exc:
            log.warning("lambda=%g failed: %s", lam, exc)
            sweep.failures[float(lam)] = str(exc)
    return sweep


def drift_limit_error(sol: EquilibriumSolution, spec: ProblemSpec) -> float:
    """e(lambda) = sup_{t, x} |lambda D_h u - D_xF(x, m(t))|."""
    ldu = spec.lam * gradient_central(sol.u_traj.frames)
    return float(np.max(np.abs(ldu - spec.coupling.dx(spec.x, sol.m_traj.frames))))


@dataclass
class RateTable:
    lambdas: list
    errors: list
    fitted_slope: float
    failures: dict = field(default_factory=dict)
    floor: float | None = None

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.lambdas, self.lambdas[1:])):
            raise ValueError("lambdas must be strictly increasing")

    @property
    def strictly_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.errors, self.errors[1:]))

    def rows(self):
        return list(zip(self.lambdas, self.errors))


def fit_loglog_slope(xs, ys) -> float:
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.size < 2 or np.any(ys <= 0):
        return float("nan")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def convergence_rate_experiment(base_spec: ProblemSpec, lambdas, tau: float,
                                config: SolverConfig = SolverConfig(), sweep: LambdaSweep | None = None,
                                floor_spec: ProblemSpec | None = None) -> RateTable:
    """Sweep lambda, measure e(lambda) on [0, tau] and fit the log-log slope.

    With ``floor_spec`` (a refined copy of the base model), the largest lambda is
    re-solved there and |e - e_refined| is reported as the discretization floor.
    """
    lambdas = sorted(float(l) for l in lambdas)
    if len(lambdas) < 4 or lambdas[0] < 10:
        raise ValueError("need at least 4 lambdas, all >= 10")
    sweep = sweep or solve_sweep(base_spec, lambdas, tau, config)
    ok = [l for l in lambdas if l in sweep.solutions]
    errors = [drift_limit_error(sweep.solutions[l], sweep.spec_for(l)) for l in ok]
    floor = None
    if floor_spec is not None and ok:
        lam = ok[-1]
        fine = extend_horizon(floor_spec.replace(lam=lam), tau, config=config)
        floor = abs(errors[-1] - drift_limit_error(fine, floor_spec.replace(lam=lam)))
    return RateTable(ok, errors, fit_loglog_slope(ok, errors), dict(sweep.failures), floor)


@dataclass
class ConsistencyTable:
    lambdas: list
    gaps: list
    failures: dict = field(default_factory=dict)

    @property
    def strictly_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.gaps, self.gaps[1:]))

    def rows(self):
        return list(zip(self.lambdas, self.gaps))


def limit_consistency_experiment(base_spec: ProblemSpec, lambdas, tau: float,
                                 config: SolverConfig = SolverConfig(), sweep: LambdaSweep | None = None,
                                 m_limit: Trajectory | None = None) -> ConsistencyTable:
    """sup_{t <= tau} d1(m_lambda(t), m_inf(t)) per lambda."""
    lambdas = sorted(float(l) for l in lambdas)
    sweep = sweep or solve_sweep(base_spec, lambdas, tau, config)
    m_limit = m_limit or solve_limit_mckean_vlasov(base_spec, tau)
    ok = [l for l in lambdas if l in sweep.solutions]
    gaps = [float(np.max(wasserstein1_grid(sweep.solutions[l].m_traj.frames, m_limit.frames))) for l in ok]
    return ConsistencyTable(ok, gaps, dict(sweep.failures))


def scaled_estimates(sweep: LambdaSweep) -> dict:
    """lambda * (sup|u|, sup|Du|, sup|D2u|) per lambda."""
    return {lam: hjb_diagnostics(sol.u_traj, lam).scaled() for lam, sol in sorted(sweep.solutions.items())}


def max_variation(values) -> float:
    """max / min of a list of positive numbers."""
    values = np.asarray(list(values), dtype=float)
    return float(values.max() / values.min())


# --- stability inequalities --------------------------------------------------


def limit_gap_bound(d1_start: float, forcing: np.ndarray, dt: float, lip_p: float, growth: float) -> np.ndarray:
    """(d1(r) + lip_p * int_r^s forcing) * e^{growth (s - r)} at every frame s of ``forcing``."""
    forcing = np.asarray(forcing, dtype=float)
    integral = np.concatenate([[0.0], np.cumsum(forcing[:-1])]) * dt
    s = np.arange(forcing.size) * dt
    return (d1_start + lip_p * integral) * np.exp(growth * s)


def grid_lipschitz(frames: np.ndarray) -> float:
    """Lipschitz constant of the piecewise-linear interpolants, max over frames."""
    n = frames.shape[-1]
    return float(np.max(np.abs(np.roll(frames, -1, axis=-1) - frames)) * n)


@dataclass(frozen=True)
class ChainedBound:
    lam: float
    gap: float
    predicted: float
    e_lambda: float
    growth: float


def chained_limit_bound(sol: EquilibriumSolution, m_limit: Trajectory, spec: ProblemSpec,
                        e_lambda: float) -> ChainedBound:
    """Predicted sup_t d1(m_lambda, m_inf) from the coupling estimate and e(lambda).

    The limit density is the reference process; its drift has Lipschitz
    constant ``a`` in x. The forcing |lambda Du - D_xF(m_inf)| is at most
    e(lambda) + L_F d1 with L_F = 4 pi^2 |kappa| the Lipschitz constant of D_xF in
    d1, and D_pH is 1-Lipschitz in p; Gronwall then gives
    d1(s) <= e(lambda) (e^{(a + L_F) s} - 1) / (a + L_F).
    """
    x = spec.x
    b_inf = -spec.hamiltonian.dp(spec.coupling.dx(x, m_limit.frames), x)
    a = grid_lipschitz(b_inf)
    growth = a + 4.0 * np.pi**2 * abs(spec.coupling.kappa)
    s = m_limit.times - m_limit.t0
    predicted = float(np.max(e_lambda * np.expm1(growth * s) / growth))
    n = min(sol.m_traj.n_frames, m_limit.n_frames)
    gap = float(np.max(wasserstein1_grid(sol.m_traj.frames[:n], m_limit.frames[:n])))
    return ChainedBound(spec.lam, gap, predicted, e_lambda, growth)


@njit(cache=True)
def _time_regularity(P, h, dt, drift_sup, nu):
    n_frames, n = P.shape
    worst = -np.inf
    D = np.empty(n)
    for r in range(n_frames):
        for s in range(r + 1, n_frames):
            for j in range(n):
                D[j] = P[s, j] - P[r, j]
            c = np.median(D)
            lhs = 0.0
            for j in range(n):
                lhs += abs(D[j] - c)
            lhs *= h
            tau = (s - r) * dt
            v = lhs - (drift_sup * tau + np.sqrt(2.0 * nu * tau))
            if v > worst:
                worst = v
    return worst


def check_d1_time_regularity(m_traj: Trajectory, drift_sup: float, nu: float, stride: int = 1) -> float:
    """max over frame pairs r < s of d1(m(s), m(r)) - [drift_sup (s - r) + sqrt(2 nu (s - r))].

    A value <= slack (1e-3 in the checks) means the time-regularity bound holds.
    """
    frames = m_traj.frames[::stride]
    n = frames.shape[-1]
    P = np.ascontiguousarray(np.cumsum(frames, axis=-1) / n)
    if P.shape[0] < 2:
        return 0.0
    return float(_time_regularity(P, 1.0 / n, m_traj.dt * stride, float(drift_sup), float(nu)))


@dataclass(frozen=True)
class StabilityFit:
    K_emp: float
    eta_emp: float
    max_violation: float
    n_pairs: int = 0


def _stability_terms(m1, m2, ldu1, ldu2, lam, eta, dt):
    d = wasserstein1_grid(m1, m2)
    gap = np.max(np.abs(ldu1 - ldu2), axis=-1)
    tail = discounted_future_integral(d, lam - eta, dt)
    return gap, d + tail


def fit_stability(pairs, lam: float, dt: float, n_eta: int = 21, knee: float = 1.1,
                  noise: float = 1e-12) -> StabilityFit:
    """Fit (K, eta) so that |lambda Du1 - lambda Du2|(t) <= K [d1(t) + int_t^T d1 e^{-(lambda-eta)(r-t)} dr].

    ``pairs`` holds (m1, m2, lambda Du1, lambda Du2) frame stacks on a common
    time grid. For each eta on a grid of [0, lambda/2] the smallest K is exact;
    eta_emp is the smallest eta whose K is within ``knee`` of K(lambda/2).
    Frames where both sides are below ``noise`` are skipped.
    """
    pairs = list(pairs)
    etas = np.linspace(0.0, 0.5 * lam, n_eta)

    def k_of(eta):
        worst = 0.0
        for m1, m2, l1, l2 in pairs:
            gap, den = _stability_terms(m1, m2, l1, l2, lam, eta, dt)
            live = (gap > noise) | (den > noise)
            if np.any(live & (den <= 0)):
                return np.inf
            if np.any(live):
                worst = max(worst, float(np.max(gap[live] / den[live])))
        return worst

    Ks = np.array([k_of(e) for e in etas])
    target = knee * Ks[-1]
    j = int(np.argmax(Ks <= target))
    K, eta = float(Ks[j]), float(etas[j])
    violation = -np.inf
    for m1, m2, l1, l2 in pairs:
        gap, den = _stability_terms(m1, m2, l1, l2, lam, eta, dt)
        violation = max(violation, float(np.max(gap - K * den)))
    return StabilityFit(K, eta, violation, len(pairs))


def coupled_gap_bound(du_gap: np.ndarray, dt: float, lip_x: float, lip_p: float = 1.0, gap0: float = 0.0) -> np.ndarray:
    """Right-hand side of the synchronous-coupling estimate at every frame.

    The forcing integral is the left Riemann sum, which is what an
    Euler-Maruyama step sees, so the bound is exact for the discrete paths.
    """
    return limit_gap_bound(gap0, du_gap, dt, lip_p, lip_x)


# --- uniqueness probe --------------------------------------------------------


def perturbed_heat_flow(spec: ProblemSpec, rng: np.random.Generator, amplitude: float = 0.5,
                        n_modes: int = 4) -> Trajectory:
    """Heat flow of m0 multiplied by exp of a random smooth space-time field, renormalized."""
    base = heat_flow(spec.m0, spec)
    x = spec.x
    t = base.times[:, None] / max(spec.horizon, 1e-12)
    field_ = np.zeros_like(base.frames)
    for k in range(1, n_modes + 1):
        a, b, c = rng.standard_normal(3) / k
        field_ += (a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)) * (1.0 + c * t)
    frames = base.frames * np.exp(amplitude * field_)
    frames /= frames.sum(axis=-1, keepdims=True) / spec.grid_points
    return Trajectory(0.0, spec.dt, frames)


@dataclass
class ProbeRun:
    label: str
    converged: bool
    iterations: int
    residuals: list
    contraction_ratio: float
    message: str = ""


@dataclass
class UniquenessReport:
    lam: float
    runs: list
    pairwise_d1: dict
    pairwise_du: dict
    stability: StabilityFit | None
    seed: int

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.runs)

    @property
    def max_d1(self) -> float:
        return max(self.pairwise_d1.values(), default=0.0)

    @property
    def max_du(self) -> float:
        return max(self.pairwise_du.values(), default=0.0)

    @property
    def contracting(self) -> bool:
        return self.all_converged and all(r.contraction_ratio < 1.0 for r in self.runs)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "seed": self.seed,
            "all_converged": self.all_converged,
            "contracting": self.contracting,
            "runs": [asdict(r) for r in self.runs],
            "pairwise_d1": {f"{a}|{b}": v for (a, b), v in sorted(self.pairwise_d1.items())},
            "pairwise_lambda_du": {f"{a}|{b}": v for (a, b), v in sorted(self.pairwise_du.items())},
            "max_d1": self.max_d1,
            "max_lambda_du": self.max_du,
            "stability_fit": None if self.stability is None else asdict(self.stability),
        }


def contraction_ratio(residuals, tail: int = 5) -> float:
    """Geometric-mean ratio of successive residuals over the last ``tail`` steps."""
    r = np.asarray(residuals, dtype=float)
    r = r[r > 0]
    if r.size < 2:
        return 0.0
    r = r[-(tail + 1):]
    return float(np.exp(np.mean(np.diff(np.log(r)))))


def probe_initializations(spec: ProblemSpec, n_inits: int, seed: int) -> list[tuple[str, Trajectory]]:
    inits = [("heat_flow", heat_flow(spec.m0, spec)), ("frozen_m0", frozen_m0(spec))]
    rng = np.random.default_rng(seed)
    for k in range(max(0, n_inits - 2)):
        inits.append((f"perturbed_{k}", perturbed_heat_flow(spec, rng)))
    return inits[:n_inits]


def uniqueness_probe(base_spec: ProblemSpec, lam: float, n_inits: int = 3, seed: int = 0,
                     config: SolverConfig = SolverConfig(), fit_iterations: int = 3) -> UniquenessReport:
    """Solve from several initial density trajectories and compare the results.

    Iterates from the first ``fit_iterations`` best responses of each run feed
    the fit of (K, eta) in the Du-stability estimate.
    """
    if n_inits < 2:
        raise ValueError("n_inits must be >= 2")
    spec = base_spec.replace(lam=float(lam))
    runs, finals, history = [], {}, {}
    for label, init in probe_initializations(spec, n_inits, seed):
        kept = []

        def grab(k, m, u, m_hat, kept=kept):
            if k <= fit_iterations:
                kept.append((m.frames.copy(), spec.lam * gradient_central(u.frames)))

        try:
            sol = solve_mfg_finite_horizon(spec, init, config, callback=grab)
            runs.append(ProbeRun(label, True, sol.iterations, sol.residuals, contraction_ratio(sol.residuals)))
            finals[label] = sol
        except MaxIterationsExceeded as exc:
            runs.append(ProbeRun(label, False, len(exc.residuals), exc.residuals,
                                 contraction_ratio(exc.residuals), str(exc)))
        history[label] = kept

    pairwise_d1, pairwise_du = {}, {}
    for a, b in itertools.combinations(sorted(finals), 2):
        sa, sb = finals[a], finals[b]
        pairwise_d1[(a, b)] = float(np.max(wasserstein1_grid(sa.m_traj.frames, sb.m_traj.frames)))
        pairwise_du[(a, b)] = spec.lam * float(np.max(np.abs(gradient_central(sa.u_traj.frames - sb.u_traj.frames))))

    pairs = []
    labels = sorted(history)
    for a, b in itertools.combinations(labels, 2):
        for (m1, l1), (m2, l2) in zip(history[a], history[b]):
            pairs.append((m1, m2, l1, l2))
    for a in labels:
        for (m1, l1), (m2, l2) in zip(history[a], history[a][1:]):
            pairs.append((m1, m2, l1, l2))
    stability = fit_stability(pairs, spec.lam, spec.dt) if pairs else None
    return UniquenessReport(spec.lam, runs, pairwise_d1, pairwise_du, stability, seed)


# --- non-local Gronwall lemma ------------------------------------------------

NOT_APPLICABLE = "not applicable"


def _tail_rate(f: np.ndarray, dt: float) -> float:
    if f[-1] <= 0.0:
        return 0.0
    if f[-2] <= 0.0:
        return np.inf
    return math.log(f[-1] / f[-2]) / dt


def groplus_rhs(f: np.ndarray, dt: float, a: float, b: float, delta: float) -> np.ndarray:
    """a int_0^t f + b int_t^inf f(s) e^{-delta (s - t)} ds on a uniform grid from 0.

    Beyond the last node f is continued as f(T) e^{g (s - T)} with g the
    growth rate of the last two samples, capped at 4a: the lemma only admits
    f <= M e^{4at}, and an uncapped local rate feeds back into ever steeper tails.
    """
    f = np.asarray(f, dtype=float)
    past = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]))]) * dt
    future = discounted_future_integral(f, delta, dt)
    g = min(_tail_rate(f, dt), 4.0 * a)
    t = np.arange(f.size) * dt
    if f[-1] > 0.0:
        if g >= delta:
            return np.full(f.size, np.inf)
        future = future + f[-1] * np.exp(-delta * (t[-1] - t)) / (delta - g)
    return a * past + b * future


def groplus_iterate(a: float, b: float, delta: float, M: float, t_max: float, dt: float,
                    n_iter: int = 50) -> np.ndarray:
    """Apply the right-hand-side map ``n_iter`` times starting from M e^{4at}."""
    t = np.arange(int(round(t_max / dt)) + 1) * dt
    f = M * np.exp(4.0 * a * t)
    for _ in range(n_iter):
        f = groplus_rhs(f, dt, a, b, delta)
    return f


def groplus_selftest(a: float, b: float, delta: float, M: float, f: np.ndarray, dt: float,
                     rel_tol: float = 1e-9) -> str:
    """'pass' if the lemma applies to the sampled f and f vanishes (max f <= 1e-6 M).

    'not applicable' when a hypothesis fails (checked with absolute tolerance
    rel_tol * M), 'fail' when the hypotheses hold but f is not negligible.
    """
    f = np.asarray(f, dtype=float)
    atol = rel_tol * M
    t = np.arange(f.size) * dt
    if min(a, b, delta, M) <= 0 or np.any(f < -atol):
        return NOT_APPLICABLE
    if delta < 4.0 * a + 4.0 * b:
        return NOT_APPLICABLE
    if np.any(f > M * np.exp(4.0 * a * t) + atol):
        return NOT_APPLICABLE
    if np.any(f > groplus_rhs(f, dt, a, b, delta) + atol):
        return NOT_APPLICABLE
    return "pass" if float(np.max(f)) <= 1e-6 * M else "fail"
