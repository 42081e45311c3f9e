"""Uniform periodic 2-D grids and complex fields sampled on them."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class Grid:
    """Periodic box [-L, L)^2 with N nodes per axis (N a power of two, N >= 8)."""

    N: int
    L: float
    d: int = 2

    def __post_init__(self):
        if self.d != 2:
            raise ValueError("only d = 2 grids are supported")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return 2 * self.L / self.N

    @cached_property
    def x(self) -> np.ndarray:
        """Node coordinates -L + j h, j = 0..N-1."""
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in FFT order."""
        return 2 * np.pi * sfft.fftfreq(self.N, self.h)

    @property
    def k_max(self) -> float:
        return np.pi / self.h

    def mesh(self):
        """Coordinate arrays (X1, X2) with 'ij' indexing: axis 0 is x1."""
        return np.meshgrid(self.x, self.x, indexing="ij")

    def points(self) -> np.ndarray:
        """All nodes as an (N, N, 2) array."""
        X1, X2 = self.mesh()
        return np.stack([X1, X2], axis=-1)

    def contains(self, point, margin: float = 0.0) -> bool:
        point = np.asarray(point, dtype=float)
        return bool(np.all(point - margin >= -self.L) and np.all(point + margin < self.L))


@dataclass
class ComplexField:
    """Complex values on a grid; ``values[i, j]`` is the value at (x_i, x_j)."""

    grid: Grid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        shape = (self.grid.N, self.grid.N)
        if self.values.shape != shape:
            raise ValueError(f"values must have shape {shape}, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def norm(self) -> float:
        """Discrete L^2 norm with h^d quadrature weight."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)) * self.grid.h)

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.values.copy(), self.t)

    def with_values(self, values, t=None) -> "ComplexField":
        return ComplexField(self.grid, values, self.t if t is None else t)

    @classmethod
    def from_function(cls, grid: Grid, func, t: float = 0.0) -> "ComplexField":
        """Sample ``func`` (vectorised over (..., 2) points) on the grid nodes."""
        return cls(grid, func(grid.points()), t)


def l2_distance(f: ComplexField, g: ComplexField) -> float:
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: {f.grid} vs {g.grid}")
    return float(np.sqrt(np.sum(np.abs(f.values - g.values) ** 2)) * f.grid.h)


def _interp_matrix(grid: Grid, pts: np.ndarray, outside: str) -> np.ndarray:
    k = grid.k
    s = pts[:, None] + grid.L
    E = np.exp(1j * s * k[None, :])
    # symmetric (cosine) treatment of the Nyquist mode
    E[:, grid.N // 2] = np.cos(s[:, 0] * k[grid.N // 2])
    E /= grid.N
    if outside == "zero":
        E[(pts < -grid.L) | (pts >= grid.L)] = 0.0
    elif outside != "periodic":
        raise ValueError(f"outside must be 'zero' or 'periodic', got {outside!r}")
    return E


def trig_interpolate(field: ComplexField, x1, x2, outside: str = "zero") -> np.ndarray:
    """Trigonometric interpolant of ``field`` on the tensor product x1 x x2.

    Returns an array of shape (len(x1), len(x2)). Points outside the box are
    set to zero (``outside='zero'``) or wrapped periodically.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    F = sfft.fft2(field.values)
    E1 = _interp_matrix(field.grid, x1, outside)
    E2 = _interp_matrix(field.grid, x2, outside)
    return E1 @ F @ E2.T
