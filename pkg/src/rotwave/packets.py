"""
Semiclassical wave-packet ansatz

    psi(x) = eps^{-d/4} u((x - q)/sqrt(eps)) exp(i (S + p.(x - q)) / eps)

mapping amplitude-scale fields (y-grid) to physical wave functions (x-grid)
and back. Fields are moved between grids by trigonometric interpolation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .hagedorn import PacketMatrices, gaussian_function
from .spectral.grid import ComplexField, Grid, trig_interpolate
from .spectral.norms import spectral_tail_fraction

logger = logging.getLogger(__name__)

D = 2
TAIL_TOL = 1e-6


@dataclass(frozen=True)
class WavePacketFrame:
    eps: float
    q: tuple
    p: tuple
    S: float = 0.0

    def __post_init__(self):
        q = tuple(float(v) for v in np.ravel(self.q))
        p = tuple(float(v) for v in np.ravel(self.p))
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        if not 0 < self.eps <= 1:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if len(q) != D or len(p) != D:
            raise ValueError("frame vectors must be two-dimensional")
        if not np.all(np.isfinite(q + p + (self.S,))):
            raise ValueError("frame entries must be finite")


def _check_resolution(x_grid: Grid, y_grid: Grid, eps: float):
    if x_grid.h > np.sqrt(eps) * y_grid.h * (1 + 1e-12):
        raise ValueError(
            f"x-grid spacing {x_grid.h:g} exceeds sqrt(eps) * y-grid spacing "
            f"{np.sqrt(eps) * y_grid.h:g}; refine the x-grid"
        )


def _check_margin(x_grid: Grid, q, radius: float):
    q = np.asarray(q)
    lo, hi = q - radius, q + radius
    if np.any(lo < -x_grid.L - 1e-12) or np.any(hi > x_grid.L + 1e-12):
        raise ValueError(
            f"packet support q +/- {radius:g} = [{lo.tolist()}, {hi.tolist()}] leaves the "
            f"x-box [-{x_grid.L:g}, {x_grid.L:g}); enlarge L or move q"
        )


def _check_oscillation(x_grid: Grid, frame: WavePacketFrame):
    kmax = np.max(np.abs(frame.p)) / frame.eps
    if kmax > 0.8 * x_grid.k_max:
        logger.warning(
            "carrier wavenumber |p|/eps = %.1f is close to the grid cutoff %.1f", kmax, x_grid.k_max
        )


def _carrier(x_grid: Grid, frame: WavePacketFrame, sign: int = 1):
    x = x_grid.x
    q, p, eps = frame.q, frame.p, frame.eps
    e1 = np.exp(sign * 1j * p[0] * (x - q[0]) / eps)
    e2 = np.exp(sign * 1j * p[1] * (x - q[1]) / eps)
    return np.exp(sign * 1j * frame.S / eps) * np.outer(e1, e2)


def assemble(amplitude: ComplexField, frame: WavePacketFrame, x_grid: Grid, t: float | None = None) -> ComplexField:
    """Physical wave function on ``x_grid`` from an amplitude on its own y-grid."""
    eps = frame.eps
    se = np.sqrt(eps)
    _check_resolution(x_grid, amplitude.grid, eps)
    _check_margin(x_grid, frame.q, se * amplitude.grid.L)
    _check_oscillation(x_grid, frame)
    tail = spectral_tail_fraction(amplitude)
    if tail > TAIL_TOL:
        logger.warning("amplitude spectral tail %.2e: interpolation may be inaccurate", tail)
    y1 = (x_grid.x - frame.q[0]) / se
    y2 = (x_grid.x - frame.q[1]) / se
    v = trig_interpolate(amplitude, y1, y2, outside="zero")
    values = eps ** (-D / 4) * v * _carrier(x_grid, frame)
    return ComplexField(x_grid, values, amplitude.t if t is None else t)


def assemble_function(func, frame: WavePacketFrame, x_grid: Grid, t: float = 0.0, radius: float = 8.0) -> ComplexField:
    """Like :func:`assemble` for an amplitude given in closed form.

    ``func`` maps (..., 2) arrays of y-points to complex values; ``radius`` is
    the y-distance beyond which it is treated as negligible (margin check).
    """
    eps = frame.eps
    se = np.sqrt(eps)
    _check_margin(x_grid, frame.q, se * radius)
    _check_oscillation(x_grid, frame)
    y = (x_grid.points() - np.asarray(frame.q)) / se
    values = eps ** (-D / 4) * func(y) * _carrier(x_grid, frame)
    return ComplexField(x_grid, values, t)


def disassemble(psi: ComplexField, frame: WavePacketFrame, y_grid: Grid) -> ComplexField:
    """Inverse of :func:`assemble`: amplitude u on ``y_grid`` from psi on its x-grid."""
    eps = frame.eps
    se = np.sqrt(eps)
    x_grid = psi.grid
    _check_resolution(x_grid, y_grid, eps)
    _check_margin(x_grid, frame.q, se * y_grid.L)
    x1 = frame.q[0] + se * y_grid.x
    x2 = frame.q[1] + se * y_grid.x
    vals = trig_interpolate(psi, x1, x2, outside="zero")
    y = y_grid.x
    d1 = np.exp(-1j * frame.p[0] * y / se)
    d2 = np.exp(-1j * frame.p[1] * y / se)
    values = eps ** (D / 4) * np.exp(-1j * frame.S / eps) * vals * np.outer(d1, d2)
    return ComplexField(y_grid, values, psi.t)


def initial_data(v0, q0, p0, eps: float, x_grid: Grid) -> ComplexField:
    """Localised initial wave function with S = 0.

    ``v0`` is a :class:`PacketMatrices` (Gaussian amplitude), a
    :class:`ComplexField` on a y-grid, or a callable of y-points.
    """
    frame = WavePacketFrame(eps, q0, p0, 0.0)
    if isinstance(v0, PacketMatrices):
        return assemble_function(gaussian_function(v0), frame, x_grid)
    if isinstance(v0, ComplexField):
        return assemble(v0, frame, x_grid, t=0.0)
    if callable(v0):
        return assemble_function(v0, frame, x_grid)
    raise TypeError(f"unsupported initial amplitude {type(v0).__name__}")
