"""Periodic grid on the unit circle, finite-difference operators and trajectories.

Densities are stored as nodal values ``m_j`` with the mass convention
``sum(m_j) * h == 1``; value fields are plain arrays of length ``N``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MASS_TOL = 1e-10
POSITIVITY_TOL = -1e-12


@dataclass(frozen=True)
class PeriodicGrid:
    n_points: int

    def __post_init__(self):
        if self.n_points < 16 or self.n_points % 2:
            raise ValueError(f"grid needs an even number of points >= 16, got {self.n_points}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.n_points

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_points) * self.spacing


def spacing_of(f: np.ndarray) -> float:
    return 1.0 / np.shape(f)[-1]


def gradient_central(f: np.ndarray) -> np.ndarray:
    """Second-order central difference, periodic; works on the last axis."""
    h = spacing_of(f)
    return (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2.0 * h)


def laplacian(f: np.ndarray) -> np.ndarray:
    h = spacing_of(f)
    return (np.roll(f, -1, axis=-1) - 2.0 * f + np.roll(f, 1, axis=-1)) / h**2


def divergence_upwind(m: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Conservative first-order upwind approximation of d/dx (m b).

    The interface velocity is the average of the two adjacent nodal values;
    the flux takes ``m`` from the upwind side. Output sums to zero exactly
    up to round-off since it is a difference of the same flux array.
    """
    h = spacing_of(m)
    b_half = 0.5 * (b + np.roll(b, -1, axis=-1))
    m_right = np.roll(m, -1, axis=-1)
    flux = np.where(b_half > 0.0, b_half * m, b_half * m_right)
    return (flux - np.roll(flux, 1, axis=-1)) / h


def integrate(f: np.ndarray) -> np.ndarray | float:
    return np.sum(f, axis=-1) * spacing_of(f)


# --- densities -------------------------------------------------------------


def circle_distance(x, y):
    d = np.abs(np.asarray(x) - np.asarray(y)) % 1.0
    return np.minimum(d, 1.0 - d)


def normalize_density(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return values / integrate(values)


def uniform_density(n_points: int) -> np.ndarray:
    return np.ones(n_points)


def wrapped_gaussian(n_points: int, center: float, width: float, n_images: int = 6) -> np.ndarray:
    """Wrapped normal density sampled at the nodes and renormalized on the grid."""
    x = PeriodicGrid(n_points).nodes
    k = np.arange(-n_images, n_images + 1)[:, None]
    vals = np.exp(-0.5 * ((x[None, :] - center + k) / width) ** 2).sum(axis=0)
    return normalize_density(vals)


def grid_delta(n_points: int, index: int) -> np.ndarray:
    m = np.zeros(n_points)
    m[index % n_points] = float(n_points)
    return m


def check_density(m: np.ndarray, what: str = "density", mass_tol: float = MASS_TOL) -> None:
    mass = integrate(m)
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{what} has non-finite entries")
    if abs(mass - 1.0) > mass_tol:
        raise ValueError(f"{what} has mass {mass!r}, expected 1 within {mass_tol:g}")
    if m.min() < POSITIVITY_TOL:
        raise ValueError(f"{what} has negative entry {m.min()!r}")


# --- trajectories ----------------------------------------------------------


@dataclass
class Trajectory:
    """Uniformly spaced sequence of grid functions; ``frames[k]`` lives at ``t0 + k*dt``."""

    t0: float
    dt: float
    frames: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.frames = np.atleast_2d(np.asarray(self.frames, dtype=float))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_points(self) -> int:
        return self.frames.shape[1]

    @property
    def t1(self) -> float:
        return self.t0 + (self.n_frames - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_frames)

    def index_of(self, t: float) -> int:
        k = int(round((t - self.t0) / self.dt))
        if k < 0 or k >= self.n_frames or abs(self.t0 + k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not a node of trajectory on [{self.t0}, {self.t1}]")
        return k

    def at(self, t: float) -> np.ndarray:
        return self.frames[self.index_of(t)]

    def window(self, t_start: float, t_end: float) -> "Trajectory":
        i, j = self.index_of(t_start), self.index_of(t_end)
        return Trajectory(self.t0 + i * self.dt, self.dt, self.frames[i : j + 1].copy())

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(["t"] + [f"x{j}" for j in range(self.n_points)])
        for t, row in zip(self.times, self.frames):
            writer.writerow([format_float(t)] + [format_float(v) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, newline="")
        return text

    @classmethod
    def from_csv(cls, path: str | Path) -> "Trajectory":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        data = np.array([[float(v) for v in row] for row in rows])
        times = data[:, 0]
        dt = times[1] - times[0] if len(times) > 1 else 0.0
        return cls(times[0], dt, data[:, 1:])


def format_float(v: float) -> str:
    return format(float(v), ".17g")
