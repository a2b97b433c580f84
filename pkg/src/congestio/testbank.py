"""Fixed, versioned banks of test functions used by the weak-form checks.

Three banks are shipped:

* space_time_bank — tensor products of cubic B-spline bumps, 3 space widths
  x 5 centers x 3 time widths, with the time support strictly inside (0, T)
  so weak residuals carry no initial/final boundary terms.  Used for the
  entropy inequality and the distributional continuity check.

* hat_bank — 15 one-Lipschitz hat profiles (3 widths x 5 centers), compactly
  supported inside the domain.  Used as reversible-solution final data and
  for the dual-Lipschitz distance.

* polynomial_bank — 9 products (t/T)^j (1 - (x/X)^2)^2 (x/X)^k, j,k in
  {0,1,2}.  Polynomial in both variables, so tensor Gauss-Legendre quadrature
  is exact up to the analytic solution factors; used by the counterexample
  weak residuals where a 1e-8 tolerance is required.

Everything here is deterministic; BANK_VERSION stamps reports that quote
bank-dependent quantities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BANK_VERSION = "1"


def bspline_bump(s: np.ndarray) -> np.ndarray:
    """Cubic B-spline kernel on [-2, 2], rescaled to peak value 1."""
    s = np.abs(np.asarray(s, dtype=float))
    out = np.zeros_like(s)
    inner = s <= 1.0
    outer = (s > 1.0) & (s <= 2.0)
    out[inner] = (4.0 - 6.0 * s[inner] ** 2 + 3.0 * s[inner] ** 3) / 4.0
    out[outer] = (2.0 - s[outer]) ** 3 / 4.0
    return out


def bspline_bump_deriv(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    out = np.zeros_like(a)
    inner = a <= 1.0
    outer = (a > 1.0) & (a <= 2.0)
    out[inner] = (-12.0 * a[inner] + 9.0 * a[inner] ** 2) / 4.0
    out[outer] = -3.0 * (2.0 - a[outer]) ** 2 / 4.0
    return out * np.sign(s)


@dataclass(frozen=True)
class SeparableBump:
    """phi(t, x) = B((t-ct)/wt) B((x-cx)/wx) with cubic B-spline factors."""

    ct: float
    wt: float
    cx: float
    wx: float

    def time_part(self, t: np.ndarray) -> np.ndarray:
        return bspline_bump((np.asarray(t) - self.ct) / self.wt)

    def time_deriv(self, t: np.ndarray) -> np.ndarray:
        return bspline_bump_deriv((np.asarray(t) - self.ct) / self.wt) / self.wt

    def space_part(self, x: np.ndarray) -> np.ndarray:
        return bspline_bump((np.asarray(x) - self.cx) / self.wx)

    def space_deriv(self, x: np.ndarray) -> np.ndarray:
        return bspline_bump_deriv((np.asarray(x) - self.cx) / self.wx) / self.wx


def space_time_bank(T: float, x_half: float) -> list[SeparableBump]:
    """3 space widths x 5 centers x 3 time widths, supports inside
    (0, T) x (-x_half, x_half)."""
    centers = np.linspace(-0.5 * x_half, 0.5 * x_half, 5)
    space_widths = [0.25 * x_half, 0.15 * x_half, 0.08 * x_half]
    time_widths = [0.2 * T, 0.15 * T, 0.1 * T]
    return [SeparableBump(0.5 * T, wt, cx, wx)
            for wx in space_widths for cx in centers for wt in time_widths]


@dataclass(frozen=True)
class HatProfile:
    """One-Lipschitz hat: peak value = half-width, so |p'| = 1 on the support."""

    center: float
    width: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(0.0, self.width - np.abs(np.asarray(x, dtype=float) - self.center))

    @property
    def breakpoints(self) -> tuple[float, float, float]:
        return (self.center - self.width, self.center, self.center + self.width)

    @property
    def total_variation(self) -> float:
        return 2.0 * self.width


def hat_bank(x_half: float) -> list[HatProfile]:
    """15 one-Lipschitz hats (3 widths x 5 centers) inside (-x_half, x_half)."""
    centers = np.linspace(-0.5 * x_half, 0.5 * x_half, 5)
    widths = [0.35 * x_half, 0.2 * x_half, 0.1 * x_half]
    return [HatProfile(float(c), w) for w in widths for c in centers]


@dataclass(frozen=True)
class PolynomialTest:
    """phi(t, x) = (t/T)^j (1 - (x/X)^2)^2 (x/X)^k on [0, T] x [-X, X]."""

    j: int
    k: int
    T: float
    X: float

    def value(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        th, xh = np.asarray(t) / self.T, np.asarray(x) / self.X
        return th**self.j * (1.0 - xh**2) ** 2 * xh**self.k

    def dt(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        th, xh = np.asarray(t) / self.T, np.asarray(x) / self.X
        if self.j == 0:
            return np.zeros(np.broadcast(th, xh).shape)
        return (self.j / self.T) * th ** (self.j - 1) * (1.0 - xh**2) ** 2 * xh**self.k

    def dx(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        th, xh = np.asarray(t) / self.T, np.asarray(x) / self.X
        poly = -4.0 * xh * (1.0 - xh**2) * xh**self.k
        if self.k > 0:
            poly = poly + (1.0 - xh**2) ** 2 * self.k * xh ** (self.k - 1)
        return th**self.j * poly / self.X


def polynomial_bank(T: float, x_half: float) -> list[PolynomialTest]:
    return [PolynomialTest(j, k, T, x_half) for j in range(3) for k in range(3)]


def weak_residuals(times: np.ndarray, xs: np.ndarray, h: float,
                   density_frames: np.ndarray, flux_frames: np.ndarray,
                   bank: list[SeparableBump]) -> np.ndarray:
    """Discrete weak residuals R(phi) = -∫∫ (v d_t phi + f d_x phi) dx dt.

    density_frames/flux_frames have shape (n_times, n_cells); time integration
    is trapezoidal over the given snapshot times, space is the cell sum.
    For compactly-in-time supported phi, R(phi) = 0 characterizes weak
    solutions of d_t v + d_x f = 0, and R(phi) <= 0 for phi >= 0 the
    entropy inequality.
    """
    times = np.asarray(times, dtype=float)
    wt = np.zeros_like(times)
    wt[1:] += 0.5 * np.diff(times)
    wt[:-1] += 0.5 * np.diff(times)
    out = np.empty(len(bank))
    for n, phi in enumerate(bank):
        bx = phi.space_part(xs)
        dbx = phi.space_deriv(xs)
        at = phi.time_part(times)
        dat = phi.time_deriv(times)
        inner = (density_frames @ bx) * dat + (flux_frames @ dbx) * at
        out[n] = -float(np.sum(wt * inner) * h)
    return out
