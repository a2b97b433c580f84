"""Constitutive laws of the stiff approximate system.

For stiffness exponent gamma the offset, potential and singular viscosity are

    p(rho)      = rho^gamma
    pi(rho)     = gamma/(gamma+1) rho^(gamma+1)      (pi' = rho p')
    lambda(rho) = gamma rho^(gamma+1)                (= rho^2 p'(rho))

so that lambda = (gamma+1) pi identically.  Powers are evaluated in log space:
gamma up to ~80 makes naive powering lose precision, and rho = 0 gets an
explicit branch.  All operations are pure functions of immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DomainError, GridField, centered_diff, same_grid


@dataclass(frozen=True)
class Params:
    """Physical and numerical parameters of a run.

    gamma   stiffness exponent of the offset, >= 1
    rho_bar background density in (0, 1], the far-field state
    L       domain half-width; the grid covers [-L, L]
    N       cell count
    cfl     advective CFL number in (0, 1]
    T       time horizon
    C_mom   admissibility constant C of the momentum/velocity bounds
    r0      declared initial density floor, 0 < r0 <= rho_bar
    M0      declared initial sup of d_x w0 / rho0 (enters the density floor)
    """

    gamma: float
    rho_bar: float
    L: float
    N: int
    cfl: float = 0.45
    T: float = 1.0
    C_mom: float = 8.0
    r0: float | None = None
    M0: float = 0.0

    def __post_init__(self):
        if self.r0 is None:
            object.__setattr__(self, "r0", self.rho_bar)
        if self.gamma < 1:
            raise DomainError(f"gamma must be >= 1, got {self.gamma}")
        if not 0 < self.rho_bar <= 1:
            raise DomainError(f"rho_bar must lie in (0, 1], got {self.rho_bar}")
        if not 0 < self.r0 <= self.rho_bar:
            raise DomainError(f"r0 must lie in (0, rho_bar], got {self.r0}")
        if self.N < 8:
            raise DomainError(f"N must be >= 8, got {self.N}")
        if not 0 < self.cfl <= 1:
            raise DomainError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.L <= 0 or self.T < 0:
            raise DomainError("L must be positive and T nonnegative")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def rho_cap(self) -> float:
        """Admissible upper bound (1 + C)^(1/(gamma+1)) on the initial density."""
        return float((1.0 + self.C_mom) ** (1.0 / (self.gamma + 1.0)))


def _check_nonnegative(rho: GridField, what: str) -> None:
    bad = np.flatnonzero(rho.values < 0)
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"{what}: negative density {rho.values[i]} at cell {i}")


def _pow(rho: np.ndarray, exponent: float) -> np.ndarray:
    """rho^exponent via exp(exponent * log rho), with rho = 0 mapped to 0."""
    out = np.zeros_like(rho)
    pos = rho > 0
    out[pos] = np.exp(exponent * np.log(rho[pos]))
    return out


def offset(rho: GridField, gamma: float) -> GridField:
    """Offset p(rho) = rho^gamma."""
    _check_nonnegative(rho, "offset")
    return rho.with_values(_pow(rho.values, gamma))


def potential(rho: GridField, gamma: float) -> GridField:
    """Potential pi(rho) = gamma/(gamma+1) rho^(gamma+1)."""
    _check_nonnegative(rho, "potential")
    return rho.with_values(gamma / (gamma + 1.0) * _pow(rho.values, gamma + 1.0))


def viscosity(rho: GridField, gamma: float) -> GridField:
    """Singular viscosity lambda(rho) = gamma rho^(gamma+1)."""
    _check_nonnegative(rho, "viscosity")
    return rho.with_values(gamma * _pow(rho.values, gamma + 1.0))


def offset_slope(rho: GridField, gamma: float) -> GridField:
    """p'(rho) = gamma rho^(gamma-1), the diffusion coefficient rho p' / rho."""
    _check_nonnegative(rho, "offset_slope")
    return rho.with_values(gamma * _pow(rho.values, gamma - 1.0))


def desired_velocity(rho: GridField, u: GridField, gamma: float) -> GridField:
    """Desired velocity w = u + D_c p(rho)."""
    same_grid(rho, u)
    return u.with_values(u.values + centered_diff(offset(rho, gamma)).values)


def actual_velocity(rho: GridField, w: GridField, gamma: float) -> GridField:
    """Invert the offset relation: u = w - D_c p(rho)."""
    same_grid(rho, w)
    return w.with_values(w.values - centered_diff(offset(rho, gamma)).values)


def generalized_momentum(rho: GridField, u: GridField, pi: GridField) -> GridField:
    """Generalized momentum m = rho u + D_c pi."""
    same_grid(rho, u, pi)
    return u.with_values(rho.values * u.values + centered_diff(pi).values)


def active_potential(rho: GridField, u: GridField, gamma: float) -> GridField:
    """Active potential V = lambda(rho) D_c u, the quantity with a one-sided
    maximum principle."""
    same_grid(rho, u)
    return u.with_values(viscosity(rho, gamma).values * centered_diff(u).values)


def transported_potential(rho: GridField, w: GridField) -> GridField:
    """Transported potential W = D_c w / rho; conserved along characteristics."""
    same_grid(rho, w)
    if np.any(rho.values <= 0):
        i = int(np.flatnonzero(rho.values <= 0)[0])
        raise DomainError(
            f"transported_potential: density {rho.values[i]} at cell {i} not positive"
        )
    return w.with_values(centered_diff(w).values / rho.values)
