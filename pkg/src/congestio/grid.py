"""Uniform cell-centered grid on [-L, L] and the discrete fields living on it.

Cells are indexed i = 0..N-1 with centers x_i = -L + (i + 1/2) h and spacing
h = 2L/N.  Every derived quantity (w, pi, m, V, W) is colocated with rho at
cell centers; there is no staggering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Two fields that should share a grid do not."""


class DomainError(ValueError):
    """A field value is outside the operation's admissible domain."""


@dataclass(frozen=True)
class GridField:
    """Real samples at the N cell centers of a uniform grid with spacing h."""

    values: np.ndarray
    h: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1:
            raise ShapeError(f"grid field must be 1-d, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("grid field contains non-finite values")
        if self.h <= 0:
            raise DomainError(f"grid spacing must be positive, got {self.h}")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def half_width(self) -> float:
        """Half-width L of the domain implied by N and h."""
        return 0.5 * len(self.values) * self.h

    def centers(self) -> np.ndarray:
        L = self.half_width
        return -L + (np.arange(len(self.values)) + 0.5) * self.h

    def with_values(self, values: np.ndarray) -> "GridField":
        return GridField(values, self.h)


def same_grid(*fields: GridField) -> None:
    """Raise ShapeError unless all fields share length and spacing."""
    first = fields[0]
    for f in fields[1:]:
        if len(f) != len(first) or f.h != first.h:
            raise ShapeError(
                f"mismatched grids: ({len(first)}, h={first.h}) vs ({len(f)}, h={f.h})"
            )


def centered_diff(f: GridField) -> GridField:
    """Spatial derivative D_c: centered in the interior, one-sided at the two
    boundary cells."""
    v = f.values
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2.0 * f.h)
    d[0] = (v[1] - v[0]) / f.h
    d[-1] = (v[-1] - v[-2]) / f.h
    return f.with_values(d)


def l1_norm(f: GridField) -> float:
    """Discrete L1 norm  sum |f_i| h."""
    return float(np.sum(np.abs(f.values)) * f.h)


def window_mask(f: GridField, half_width: float) -> np.ndarray:
    """Boolean mask of cells whose centers lie in [-half_width, half_width]."""
    x = f.centers()
    return np.abs(x) <= half_width


def l1_norm_window(f: GridField, half_width: float) -> float:
    """Discrete L1 norm restricted to the observation window."""
    m = window_mask(f, half_width)
    return float(np.sum(np.abs(f.values[m])) * f.h)
