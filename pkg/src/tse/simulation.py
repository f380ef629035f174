"""Synthetic ground-truth generation: Godunov finite-volume solver for the
LWR conservation law with Greenshields flux and zero-flux boundaries.

Density is the solved (conserved) quantity; velocity fields are derived
cell-wise through the fundamental diagram afterwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import physics
from .errors import ConfigError, ContractError, DomainError
from .physics import FdParams


@dataclass(frozen=True)
class Grid:
    """Cell-centered space-time discretization."""

    x_min: float
    x_max: float
    n_x: int
    t_min: float
    t_max: float
    n_t: int

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.t_max > self.t_min):
            raise ConfigError("grid extents must be increasing")
        if self.n_x < 2 or self.n_t < 2:
            raise ConfigError("grid needs at least 2 bins per axis")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_x

    @property
    def dt_out(self) -> float:
        return (self.t_max - self.t_min) / self.n_t

    @property
    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_x) + 0.5) * self.dx

    @property
    def times(self) -> np.ndarray:
        """Output instants, one per stored column; column 0 is t_min."""
        return self.t_min + np.arange(self.n_t) * self.dt_out


@dataclass(frozen=True)
class DensityField:
    grid: Grid
    values: np.ndarray  # (n_x, n_t), veh/m

    def total_vehicles(self) -> np.ndarray:
        """Vehicle count per stored column."""
        return self.values.sum(axis=0) * self.grid.dx


@dataclass(frozen=True)
class VelocityField:
    grid: Grid
    values: np.ndarray  # (n_x, n_t), m/s


@dataclass(frozen=True)
class InitialCondition:
    """Initial density profile.

    kinds: "uniform" (density), "jam_block" (block_lo/block_hi extents with
    block_density inside and background_density outside), "wave_train"
    (sinusoid wave_mean + wave_amplitude*sin(2*pi*x/wave_length), clipped to
    the admissible range, applied for x >= wave_start with background_density
    upstream of it), "custom_profile" (explicit per-cell densities).
    """

    kind: str = "jam_block"
    density: float = 0.02
    block_lo: float = 3000.0
    block_hi: float = 4000.0
    block_density: float | None = None   # defaults to rho_max
    background_density: float | None = None  # defaults to 0.2 * rho_max
    wave_mean: float = 0.04
    wave_amplitude: float = 0.01
    wave_length: float = 450.0
    wave_start: float = 0.0
    profile: np.ndarray | None = None

    def densities(self, grid: Grid, p: FdParams) -> np.ndarray:
        if self.kind == "uniform":
            rho = np.full(grid.n_x, self.density)
        elif self.kind == "jam_block":
            inside = self.block_density if self.block_density is not None else p.rho_max
            outside = (self.background_density if self.background_density is not None
                       else 0.2 * p.rho_max)
            x = grid.x_centers
            rho = np.where((x >= self.block_lo) & (x <= self.block_hi), inside, outside)
        elif self.kind == "wave_train":
            if self.wave_length <= 0:
                raise ConfigError("wave_length must be positive")
            x = grid.x_centers
            rho = self.wave_mean + self.wave_amplitude * np.sin(
                2.0 * np.pi * x / self.wave_length)
            rho = np.clip(rho, 0.0, p.rho_max)
            if self.wave_start > grid.x_min:
                upstream = (self.background_density if self.background_density is not None
                            else 0.2 * p.rho_max)
                rho = np.where(x < self.wave_start, upstream, rho)
        elif self.kind == "custom_profile":
            rho = np.asarray(self.profile, dtype=np.float64)
            if rho.shape != (grid.n_x,):
                raise ConfigError(f"custom profile must have {grid.n_x} cells, got {rho.shape}")
        else:
            raise ConfigError(f"unknown initial condition kind {self.kind!r}")
        rho = rho.astype(np.float64)
        if np.any(rho < 0) or np.any(rho > p.rho_max):
            raise DomainError("initial densities must lie in [0, rho_max]")
        return rho


def godunov_flux(rho_left, rho_right, p: FdParams):
    """Interface flux min(demand(left), supply(right)) for the concave flux.

    demand(rho) = q(min(rho, rho_c)), supply(rho) = q(max(rho, rho_c)).
    """
    rho_left = np.asarray(rho_left, dtype=np.float64)
    rho_right = np.asarray(rho_right, dtype=np.float64)
    for name, arr in (("rho_left", rho_left), ("rho_right", rho_right)):
        if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > p.rho_max):
            raise DomainError(f"{name} must lie in [0, rho_max]")
    rho_c = p.rho_critical
    demand = physics.flow_of_density(np.minimum(rho_left, rho_c), p)
    supply = physics.flow_of_density(np.maximum(rho_right, rho_c), p)
    out = np.minimum(demand, supply)
    return out if np.ndim(out) else float(out)


def step(rho: np.ndarray, dx: float, dt_sub: float, p: FdParams) -> np.ndarray:
    """One conservative Godunov update with zero-flux boundaries.

    Refuses CFL violations outright; substepping is the caller's job.
    """
    if dt_sub > dx / p.v_free + 1e-15:
        raise ConfigError(f"CFL violation: dt_sub={dt_sub} > dx/v_free={dx / p.v_free}")
    rho = np.asarray(rho, dtype=np.float64)
    interior = godunov_flux(rho[:-1], rho[1:], p)
    flux = np.concatenate([[0.0], np.atleast_1d(interior), [0.0]])
    out = rho - (dt_sub / dx) * (flux[1:] - flux[:-1])
    # Godunov under CFL keeps values in the invariant region; clip only the
    # last-ulp rounding spill so downstream domain checks stay strict.
    return np.clip(out, 0.0, p.rho_max)


def simulate(ic: InitialCondition, grid: Grid, p: FdParams) -> tuple[DensityField, VelocityField]:
    """Solve the conservation law and record every output instant.

    Substeps internally at dt_sub = dt_out / ceil(dt_out * v_free / dx) so the
    CFL condition always holds; column j holds the state at grid.times[j],
    with column 0 equal to the initial condition.
    """
    rho = ic.densities(grid, p)
    n_sub = max(1, math.ceil(grid.dt_out * p.v_free / grid.dx))
    dt_sub = grid.dt_out / n_sub
    values = np.empty((grid.n_x, grid.n_t))
    values[:, 0] = rho
    for j in range(1, grid.n_t):
        for _ in range(n_sub):
            rho = step(rho, grid.dx, dt_sub, p)
        values[:, j] = rho
    density = DensityField(grid, values)
    velocity = VelocityField(grid, physics.velocity_of_density(values, p))
    return density, velocity


# -- exports ---------------------------------------------------------------

def field_to_csv(field, path, value_name: str = "v"):
    """CSV with header x,t,<name>, row-major with t outermost, full precision."""
    grid = field.grid
    x = grid.x_centers
    t = grid.times
    lines = [f"x,t,{value_name}"]
    for j in range(grid.n_t):
        for i in range(grid.n_x):
            lines.append(f"{x[i]:.17g},{t[j]:.17g},{field.values[i, j]:.17g}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def field_from_csv(path, grid: Grid) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.shape[0] != grid.n_x * grid.n_t:
        raise ContractError(f"CSV has {data.shape[0]} rows, expected {grid.n_x * grid.n_t}")
    return data[:, 2].reshape(grid.n_t, grid.n_x).T


def velocity_to_pgm(field: VelocityField, path, v_free: float):
    """Plain-text 8-bit PGM heatmap, value = round(255 * v / v_free).

    Rows are spatial cells (x down the page), columns are time.
    """
    scaled = np.rint(255.0 * np.clip(field.values, 0.0, v_free) / v_free).astype(int)
    grid = field.grid
    lines = ["P2", f"{grid.n_t} {grid.n_x}", "255"]
    for i in range(grid.n_x):
        lines.append(" ".join(str(v) for v in scaled[i]))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
