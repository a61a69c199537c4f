"""Concrete Hamiltonian / coupling families and the problem specification.

H(p, x) = p^2/2 + beta cos(2 pi x) p
F(x, m) = c + alpha sin(2 pi x) + kappa * int cos(2 pi (x - y)) m(dy)

The convolution with the cosine kernel is evaluated on the grid with the
rectangle rule; because the kernel is a single Fourier mode this reduces to
the first trigonometric moments of ``m``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .grid import (
    PeriodicGrid,
    check_density,
    circle_distance,
    integrate,
    uniform_density,
    wrapped_gaussian,
)

TWO_PI = 2.0 * np.pi
COUPLING_MASS_TOL = 1e-8


class ConfigError(ValueError):
    """Invalid problem data (bad JSON, unknown keys, violated invariants)."""


class CFLViolation(ConfigError):
    pass


@dataclass(frozen=True)
class HamiltonianSpec:
    advection_amplitude: float = 0.0

    @property
    def beta(self) -> float:
        return self.advection_amplitude

    def value(self, p, x):
        return 0.5 * p * p + self.beta * np.cos(TWO_PI * x) * p

    def dp(self, p, x):
        return p + self.beta * np.cos(TWO_PI * x)

    def dx(self, p, x):
        return -TWO_PI * self.beta * np.sin(TWO_PI * x) * p

    def dpp(self, p, x):
        return np.ones_like(np.asarray(p, dtype=float) + np.asarray(x, dtype=float))

    def dpx(self, p, x):
        return -TWO_PI * self.beta * np.sin(TWO_PI * x) + 0.0 * p

    def dxx(self, p, x):
        return -(TWO_PI**2) * self.beta * np.cos(TWO_PI * x) * p


@dataclass(frozen=True)
class CouplingSpec:
    f_amplitude: float = 0.0
    kernel_amplitude: float = 0.0
    f_offset: float = 0.0

    @property
    def alpha(self) -> float:
        return self.f_amplitude

    @property
    def kappa(self) -> float:
        return self.kernel_amplitude

    def kernel(self, z):
        return self.kappa * np.cos(TWO_PI * z)

    def kernel_dx(self, z):
        return -TWO_PI * self.kappa * np.sin(TWO_PI * z)

    @staticmethod
    def moments(m: np.ndarray):
        """Trigonometric moments (int cos(2 pi y) m, int sin(2 pi y) m), frame-wise."""
        y = PeriodicGrid(np.shape(m)[-1]).nodes
        return integrate(m * np.cos(TWO_PI * y)), integrate(m * np.sin(TWO_PI * y))

    def _checked_moments(self, m):
        m = np.asarray(m, dtype=float)
        mass = integrate(m)
        if np.any(np.abs(mass - 1.0) > COUPLING_MASS_TOL):
            raise ValueError(f"coupling needs a unit-mass density, got mass {mass}")
        c, s = self.moments(m)
        return np.asarray(c)[..., None], np.asarray(s)[..., None]

    def value(self, x, m):
        """F(x, m); ``m`` may be a single frame or a stack of frames."""
        c, s = self._checked_moments(m)
        x = np.asarray(x, dtype=float)
        conv = np.cos(TWO_PI * x) * c + np.sin(TWO_PI * x) * s
        out = self.f_offset + self.alpha * np.sin(TWO_PI * x) + self.kappa * conv
        return out[..., 0] if out.shape[-1] == 1 and x.ndim == 0 else out

    def dx(self, x, m):
        c, s = self._checked_moments(m)
        x = np.asarray(x, dtype=float)
        conv = -np.sin(TWO_PI * x) * c + np.cos(TWO_PI * x) * s
        out = TWO_PI * (self.alpha * np.cos(TWO_PI * x) + self.kappa * conv)
        return out[..., 0] if out.shape[-1] == 1 and x.ndim == 0 else out

    def dxx(self, x, m):
        c, s = self._checked_moments(m)
        x = np.asarray(x, dtype=float)
        conv = np.cos(TWO_PI * x) * c + np.sin(TWO_PI * x) * s
        out = -(TWO_PI**2) * (self.alpha * np.sin(TWO_PI * x) + self.kappa * conv)
        return out[..., 0] if out.shape[-1] == 1 and x.ndim == 0 else out

    # closed-form constants
    @property
    def sup_bound(self) -> float:
        return abs(self.f_offset) + abs(self.alpha) + abs(self.kappa)

    @property
    def lipschitz_bound(self) -> float:
        """Joint (x, d1) Lipschitz bound shared by F and D_xF."""
        a = abs(self.alpha) + abs(self.kappa)
        return TWO_PI * a + TWO_PI**2 * a


def eval_hamiltonian(p, x, spec: HamiltonianSpec):
    return spec.value(p, x)


def eval_coupling(x, m, spec: CouplingSpec):
    return spec.value(x, m)


def _density_from_json(value, n_points: int) -> np.ndarray:
    if value is None:
        return default_m0(n_points)
    if isinstance(value, dict):
        kind = value.get("kind")
        extra = set(value) - {"kind", "center", "width"}
        if extra:
            raise ConfigError(f"unknown m0 keys: {sorted(extra)}")
        if kind == "uniform":
            return uniform_density(n_points)
        if kind == "wrapped_gaussian":
            return wrapped_gaussian(n_points, float(value.get("center", 0.5)), float(value.get("width", 0.1)))
        raise ConfigError(f"unknown m0 kind {kind!r}")
    arr = np.asarray(value, dtype=float)
    if arr.shape != (n_points,):
        raise ConfigError(f"m0 has {arr.size} values, grid has {n_points}")
    return arr


M0_CENTER = 0.75
M0_WIDTH = 0.1


def default_m0(n_points: int) -> np.ndarray:
    return wrapped_gaussian(n_points, M0_CENTER, M0_WIDTH)


@dataclass(frozen=True)
class ProblemSpec:
    hamiltonian: HamiltonianSpec = field(default_factory=HamiltonianSpec)
    coupling: CouplingSpec = field(default_factory=CouplingSpec)
    lam: float = 10.0
    nu: float = 1.0
    m0: np.ndarray | None = None
    grid_points: int = 128
    dt: float = 1e-3
    horizon: float = 2.0

    def __post_init__(self):
        try:
            PeriodicGrid(self.grid_points)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.m0 is None:
            object.__setattr__(self, "m0", default_m0(self.grid_points))
        m0 = np.asarray(self.m0, dtype=float)
        m0.setflags(write=False)
        object.__setattr__(self, "m0", m0)
        if not self.lam >= 1.0:
            raise ConfigError(f"lambda must be >= 1, got {self.lam}")
        if not self.nu > 0.0:
            raise ConfigError(f"nu must be > 0, got {self.nu}")
        if not (self.dt > 0.0 and self.horizon > 0.0):
            raise ConfigError("dt and horizon must be positive")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-8 * steps:
            raise ConfigError(f"horizon {self.horizon} is not a multiple of dt {self.dt}")
        if m0.shape != (self.grid_points,):
            raise ConfigError("m0 length does not match grid_points")
        try:
            check_density(m0, "m0")
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def __eq__(self, other):
        if not isinstance(other, ProblemSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None

    @property
    def h(self) -> float:
        return 1.0 / self.grid_points

    @property
    def x(self) -> np.ndarray:
        return PeriodicGrid(self.grid_points).nodes

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def replace(self, **changes) -> "ProblemSpec":
        d = {
            "hamiltonian": self.hamiltonian,
            "coupling": self.coupling,
            "lam": self.lam,
            "nu": self.nu,
            "m0": self.m0,
            "grid_points": self.grid_points,
            "dt": self.dt,
            "horizon": self.horizon,
        }
        if "grid_points" in changes and "m0" not in changes:
            raise ConfigError("changing grid_points requires a new m0")
        d.update(changes)
        return ProblemSpec(**d)

    def refined(self, m0: np.ndarray | None = None) -> "ProblemSpec":
        """Same model with h and dt halved (m0 re-sampled by the caller or defaulted)."""
        return self.replace(grid_points=2 * self.grid_points, dt=self.dt / 2, m0=m0)

    # --- CFL ---------------------------------------------------------------

    def drift_estimate(self) -> float:
        """Limit-dynamics drift sup_x |D_pH(D_xF(x, m), x)| over m in {m0, uniform}."""
        x = self.x
        best = 0.0
        for m in (self.m0, uniform_density(self.grid_points)):
            b = self.hamiltonian.dp(self.coupling.dx(x, m), x)
            best = max(best, float(np.max(np.abs(b))))
        return best

    def courant_number(self, drift_sup: float | None = None) -> float:
        if drift_sup is None:
            drift_sup = self.drift_estimate()
        return self.dt * drift_sup / self.h

    def check_cfl(self) -> None:
        c = self.courant_number()
        if c > 1.0:
            raise CFLViolation(
                f"CFL violated: dt*sup|drift|/h = {c:.3f} > 1 "
                f"(dt={self.dt}, h={self.h}, drift estimate={self.drift_estimate():.3f})"
            )

    # --- JSON ---------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "hamiltonian": asdict(self.hamiltonian),
            "coupling": asdict(self.coupling),
            "lambda": float(self.lam),
            "nu": float(self.nu),
            "m0": [float(v) for v in self.m0],
            "grid_points": int(self.grid_points),
            "dt": float(self.dt),
            "horizon": float(self.horizon),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        if not isinstance(d, dict):
            raise ConfigError("problem spec must be a JSON object")
        allowed = {"hamiltonian", "coupling", "lambda", "nu", "m0", "grid_points", "dt", "horizon"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown keys in problem spec: {sorted(unknown)}")
        missing = {"lambda", "grid_points", "dt", "horizon"} - set(d)
        if missing:
            raise ConfigError(f"missing keys in problem spec: {sorted(missing)}")
        try:
            ham = HamiltonianSpec(**d.get("hamiltonian", {}))
            coup = CouplingSpec(**d.get("coupling", {}))
        except TypeError as exc:
            raise ConfigError(f"bad model block: {exc}") from None
        n = int(d["grid_points"])
        return cls(
            hamiltonian=ham,
            coupling=coup,
            lam=float(d["lambda"]),
            nu=float(d.get("nu", 1.0)),
            m0=_density_from_json(d.get("m0"), n),
            grid_points=n,
            dt=float(d["dt"]),
            horizon=float(d["horizon"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "ProblemSpec":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(d)

    @classmethod
    def load(cls, path: str | Path) -> "ProblemSpec":
        return cls.from_json(Path(path).read_text())


def reference_spec(lam: float = 40.0, **changes) -> ProblemSpec:
    """The reference model used throughout the experiments."""
    base = ProblemSpec(
        hamiltonian=HamiltonianSpec(0.5),
        coupling=CouplingSpec(1.0, 0.5),
        lam=lam,
        nu=1.0,
        grid_points=128,
        dt=1e-3,
        horizon=2.0,
    )
    return base.replace(**changes) if changes else base


# --- assumption checks ------------------------------------------------------


@dataclass
class AssumptionReport:
    empirical: dict
    analytic: dict
    violations: list
    cfl_number: float
    sample_count: int

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def c_o(self) -> float:
        return max(self.analytic["C_o_H"], self.analytic["C_o_F"])

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": list(self.violations),
            "cfl_number": self.cfl_number,
            "sample_count": self.sample_count,
            "empirical": dict(self.empirical),
            "analytic": dict(self.analytic),
            "C_o": self.c_o,
        }


def _random_density(rng, n, n_bumps=3):
    x = PeriodicGrid(n).nodes
    vals = np.full(n, rng.uniform(0.0, 0.5))
    for _ in range(n_bumps):
        c, w, a = rng.uniform(), rng.uniform(0.03, 0.3), rng.uniform(0.1, 1.0)
        k = np.arange(-3, 4)[:, None]
        vals += a * np.exp(-0.5 * ((x - c + k) / w) ** 2).sum(axis=0)
    return vals / integrate(vals)


def validate_assumptions(spec: ProblemSpec, sample_count: int = 1000, seed: int = 0,
                         p_max: float | None = None) -> AssumptionReport:
    """Sample the model and compare empirical constants with the closed-form bounds.

    The H-side bounds on D_xx H only hold on a bounded momentum range; ``p_max``
    defaults to twice the sup of |D_xF|, which dominates |lambda Du| in practice.
    """
    from .metrics import wasserstein1_grid

    if sample_count < 100:
        raise ValueError("sample_count must be >= 100")
    rng = np.random.default_rng(seed)
    H, F = spec.hamiltonian, spec.coupling
    beta, a_sum = abs(H.beta), abs(F.alpha) + abs(F.kappa)
    if p_max is None:
        p_max = max(1.0, 2.0 * TWO_PI * a_sum)
    n = spec.grid_points

    p = rng.uniform(-p_max, p_max, sample_count)
    x = rng.uniform(0.0, 1.0, sample_count)
    y = rng.uniform(0.0, 1.0, sample_count)
    ms = [_random_density(rng, n) for _ in range(min(sample_count, 200))]
    i1 = rng.integers(0, len(ms), sample_count)
    i2 = rng.integers(0, len(ms), sample_count)

    emp = {}
    emp["dpp_deviation"] = float(np.max(np.abs(H.dpp(p, x) - 1.0)))
    emp["H_lower"] = float(max(0.0, -np.min(H.value(p, x))))
    emp["H_upper_ratio"] = float(np.max(H.value(p, x) / (1.0 + p**2)))
    emp["Hx_Hpx_ratio"] = float(np.max((np.abs(H.dx(p, x)) + np.abs(H.dpx(p, x))) / (1.0 + np.abs(p))))
    emp["Hxx_sup"] = float(np.max(np.abs(H.dxx(p, x))))

    fx = np.array([F.value(x[k], ms[i1[k]]) for k in range(sample_count)])
    fy = np.array([F.value(y[k], ms[i2[k]]) for k in range(sample_count)])
    dfx = np.array([F.dx(x[k], ms[i1[k]]) for k in range(sample_count)])
    dfy = np.array([F.dx(y[k], ms[i2[k]]) for k in range(sample_count)])
    d1 = np.array([wasserstein1_grid(ms[i1[k]], ms[i2[k]]) for k in range(sample_count)])
    dist = circle_distance(x, y) + d1
    ok = dist > 1e-12
    emp["F_sup"] = float(np.max(np.abs(fx)))
    emp["Lip_F"] = float(np.max(np.abs(fx - fy)[ok] / dist[ok])) if ok.any() else 0.0
    emp["Lip_DxF"] = float(np.max(np.abs(dfx - dfy)[ok] / dist[ok])) if ok.any() else 0.0
    emp["DxxF_sup"] = float(max(np.max(np.abs(F.dxx(x[k], ms[i1[k]]))) for k in range(min(sample_count, 200))))
    # F(x, .) against d1 at fixed x: Kantorovich bound with Lip(K) = 2 pi |kappa|
    same = np.abs(np.array([F.value(x[k], ms[i1[k]]) - F.value(x[k], ms[i2[k]]) for k in range(sample_count)]))
    okm = d1 > 1e-12
    emp["Lip_F_in_m"] = float(np.max(same[okm] / d1[okm])) if okm.any() else 0.0

    ana = {
        "dpp_deviation": 0.0,
        "H_lower": beta**2 / 2.0,
        "H_upper_ratio": 0.5 + beta / 2.0,
        "Hx_Hpx_ratio": TWO_PI * beta,
        "Hxx_sup": TWO_PI**2 * beta * p_max,
        "F_sup": F.sup_bound,
        "Lip_F": TWO_PI * a_sum,
        "Lip_DxF": TWO_PI**2 * a_sum,
        "DxxF_sup": TWO_PI**2 * a_sum,
        "Lip_F_in_m": TWO_PI * abs(F.kappa),
        "L": F.lipschitz_bound,
        "p_max": p_max,
    }
    ana["C_o_H"] = max(1.0, ana["H_lower"], ana["H_upper_ratio"], ana["Hx_Hpx_ratio"], ana["Hxx_sup"])
    ana["C_o_F"] = max(ana["F_sup"], ana["DxxF_sup"])

    violations = []
    for key, val in emp.items():
        bound = ana[key]
        if val > bound * 1.01 + 1e-12:
            violations.append(f"{key}: empirical {val:.6g} exceeds bound {bound:.6g}")
    cfl = spec.courant_number()
    if cfl > 1.0:
        violations.append(f"CFL: dt*sup|drift|/h = {cfl:.3f} > 1")
    return AssumptionReport(emp, ana, violations, cfl, sample_count)
