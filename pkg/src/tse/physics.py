"""Greenshields fundamental-diagram algebra and the velocity-form LWR residual.

All quantities are SI: meters, seconds, vehicles. Every physics formula used
anywhere else in the package lives here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class FdParams:
    """Fundamental-diagram constants.

    v_free: free-flow (maximum) speed, m/s.
    rho_max: jam (maximum) density, veh/m.
    """

    v_free: float
    rho_max: float

    def __post_init__(self):
        if not (self.v_free > 0 and np.isfinite(self.v_free)):
            raise DomainError(f"v_free must be positive and finite, got {self.v_free}")
        if not (self.rho_max > 0 and np.isfinite(self.rho_max)):
            raise DomainError(f"rho_max must be positive and finite, got {self.rho_max}")

    @property
    def rho_critical(self) -> float:
        """Density maximizing flow (parabola vertex)."""
        return self.rho_max / 2.0

    @property
    def q_max(self) -> float:
        """Maximum flow, attained at the critical density."""
        return self.v_free * self.rho_max / 4.0


@dataclass(frozen=True)
class ResidualInput:
    """Point values fed to the conservation-law residual.

    v: speed, m/s; dv_dx: 1/s; dv_dt: m/s^2.
    """

    v: float
    dv_dx: float
    dv_dt: float

    def __post_init__(self):
        for name in ("v", "dv_dx", "dv_dt"):
            if not np.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite, got {getattr(self, name)}")


def _check_range(value, lo, hi, name):
    arr = np.asarray(value, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < lo) or np.any(arr > hi):
        raise DomainError(f"{name} must lie in [{lo}, {hi}]")


def velocity_of_density(rho, p: FdParams):
    """Speed under the Greenshields relation v = v_free*(1 - rho/rho_max).

    Accepts scalars or arrays; rho must lie in [0, rho_max].
    """
    _check_range(rho, 0.0, p.rho_max, "rho")
    rho = np.asarray(rho, dtype=np.float64)
    out = p.v_free * (1.0 - rho / p.rho_max)
    return out if out.ndim else float(out)


def flow_of_density(rho, p: FdParams):
    """Flow q = v(rho)*rho, veh/s. Zero at rho=0 and rho=rho_max."""
    _check_range(rho, 0.0, p.rho_max, "rho")
    rho = np.asarray(rho, dtype=np.float64)
    out = p.v_free * (1.0 - rho / p.rho_max) * rho
    return out if out.ndim else float(out)


def density_of_velocity(v, p: FdParams):
    """Exact inverse of velocity_of_density on [0, v_free]."""
    _check_range(v, 0.0, p.v_free, "v")
    v = np.asarray(v, dtype=np.float64)
    out = p.rho_max * (1.0 - v / p.v_free)
    return out if out.ndim else float(out)


def lwr_residual(v, dv_dx, dv_dt, p: FdParams):
    """Velocity-form conservation-law residual, veh/m/s.

    rho_max*(1 - 2v/v_free)*dv_dx - (rho_max/v_free)*dv_dt. Identically zero
    for any constant field, and equal to dq/dx + drho/dt chain-ruled through
    the Greenshields relation.

    Accepts scalars or arrays (broadcast together), or a ResidualInput via
    ``lwr_residual_point``.
    """
    v = np.asarray(v, dtype=np.float64)
    dv_dx = np.asarray(dv_dx, dtype=np.float64)
    dv_dt = np.asarray(dv_dt, dtype=np.float64)
    for name, arr in (("v", v), ("dv_dx", dv_dx), ("dv_dt", dv_dt)):
        if np.any(~np.isfinite(arr)):
            raise DomainError(f"{name} must be finite")
    out = p.rho_max * (1.0 - 2.0 * v / p.v_free) * dv_dx - (p.rho_max / p.v_free) * dv_dt
    return out if out.ndim else float(out)


def lwr_residual_point(point: ResidualInput, p: FdParams) -> float:
    """Residual at a single point given as a ResidualInput."""
    return lwr_residual(point.v, point.dv_dx, point.dv_dt, p)
