"""
Split-step Fourier solver with an angular-momentum term on periodic 2-D grids.

Solves, with Omega = (0, 0, omega) and L_z = -i (x1 d_2 - x2 d_1),

    i u_t = -kappa/2 Lap u + W(t, x) u + g |u|^2 u + omega L_z u

where (kappa, W, g) is (1, y.Q(t)y/2, lam) for the amplitude equations and
(eps, V(x)/eps, lam eps^{d/2}) for the full equation divided through by eps.

One step is the symmetric composition

    P(dt/2) X(dt/2) Y(dt) X(dt/2) P(dt/2)

with P the pointwise potential/nonlinear phase, X the exact x1-flow of
-kappa/2 d_11 + i omega x2 d_1 (diagonal in the x1-Fourier variable for each
fixed x2 row) and Y the exact x2-flow of -kappa/2 d_22 - i omega x1 d_2.
Every factor is unitary.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.fft as sfft

from ..classical import Trajectory
from ..potentials import PotentialModel
from .grid import ComplexField, Grid
from .norms import spectral_tail_fraction

logger = logging.getLogger(__name__)

FRAME_CELLS = 4
BOUNDARY_TOL = 1e-8
INITIAL_BOUNDARY_TOL = 1e-12


class Mode(str, enum.Enum):
    AMPLITUDE_LINEAR = "amplitude_linear"
    AMPLITUDE_CUBIC = "amplitude_cubic"
    FULL_LINEAR = "full_linear"
    FULL_CUBIC = "full_cubic"

    @property
    def full(self) -> bool:
        return self in (Mode.FULL_LINEAR, Mode.FULL_CUBIC)

    @property
    def cubic(self) -> bool:
        return self in (Mode.AMPLITUDE_CUBIC, Mode.FULL_CUBIC)


class SolverError(RuntimeError):
    def __init__(self, message: str, t_last_good: float):
        self.t_last_good = t_last_good
        super().__init__(f"{message} (last good time t={t_last_good:g})")


class BlowUpError(SolverError):
    """Non-finite values appeared: blow-up or an unresolved solution."""


class BoundaryMassError(SolverError):
    """Mass reached the edge of the periodic box; enlarge L."""


@dataclass
class SolverSpec:
    """Equation, coefficients and time stepping for one solve.

    Amplitude modes take the Hessian path from ``trajectory`` (linear
    interpolation between its nodes) or from ``hessian``, which may be a
    constant matrix or a callable of t. Full modes need ``potential``.
    """

    mode: Mode
    dt: float
    T: float
    eps: float = 1.0
    lam: float = 0.0
    omega: float = 0.0
    potential: PotentialModel | None = None
    trajectory: Trajectory | None = None
    hessian: np.ndarray | Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("dt and T must be positive")
        if self.mode.full:
            if not self.eps > 0:
                raise ValueError("full-equation modes need eps > 0")
            if self.potential is None:
                raise ValueError("full-equation modes need a potential")
            if self.potential.dim != 2:
                raise ValueError("the grid solver is two-dimensional")
        elif self.trajectory is None and self.hessian is None:
            raise ValueError("amplitude modes need a trajectory or a hessian")
        if not self.mode.cubic and self.lam != 0:
            logger.warning("lam=%g ignored in linear mode %s", self.lam, self.mode.value)

    @property
    def kinetic_scale(self) -> float:
        return self.eps if self.mode.full else 1.0

    @property
    def coupling(self) -> float:
        """Effective cubic coefficient (critical exponent 1 + d/2 for d = 2)."""
        if not self.mode.cubic:
            return 0.0
        return self.lam * self.eps if self.mode.full else self.lam

    @property
    def steps(self) -> int:
        n = int(round(self.T / self.dt))
        if not math.isclose(n * self.dt, self.T, rel_tol=1e-9):
            raise ValueError(f"T/dt = {self.T / self.dt} must be integral")
        return n

    def hessian_at(self, t: float) -> np.ndarray:
        if self.trajectory is not None:
            return self.trajectory.hessian_at(t)
        if callable(self.hessian):
            return np.asarray(self.hessian(t), dtype=float)
        return np.asarray(self.hessian, dtype=float)

    @property
    def static_potential(self) -> bool:
        return self.mode.full or (self.trajectory is None and not callable(self.hessian))


class SplitStepSolver:
    """Precomputed propagator for one (grid, spec) pair."""

    def __init__(self, grid: Grid, spec: SolverSpec):
        self.grid = grid
        self.spec = spec
        dt = spec.dt
        kap = spec.kinetic_scale
        om = spec.omega
        x = grid.x
        k = grid.k
        # X flow: axis 0 carries xi_1 after the transform, axis 1 the x2 coordinate
        self._x_half = np.exp(-0.5j * dt * (0.5 * kap * k[:, None] ** 2 - om * x[None, :] * k[:, None]))
        # Y flow: axis 0 carries x1, axis 1 the xi_2 variable
        self._y_full = np.exp(-1j * dt * (0.5 * kap * k[None, :] ** 2 + om * x[:, None] * k[None, :]))
        self._coupling = spec.coupling
        X1, X2 = grid.mesh()
        self._quad = (X1 * X1, X1 * X2, X2 * X2)
        self._pot_half = None
        if spec.mode.full:
            W = spec.potential.value(grid.points()) / spec.eps
            self._pot_half = np.exp(-0.5j * dt * W)
        elif spec.static_potential:
            self._pot_half = np.exp(-0.5j * dt * self._amplitude_potential(spec.hessian_at(0.0)))

    def _amplitude_potential(self, Q):
        Q = np.asarray(Q)
        xx, xy, yy = self._quad
        return 0.5 * (Q[0, 0] * xx + (Q[0, 1] + Q[1, 0]) * xy + Q[1, 1] * yy)

    def _half_phase(self, t):
        if self._pot_half is not None:
            return self._pot_half
        Q = self.spec.hessian_at(t + 0.5 * self.spec.dt)
        return np.exp(-0.5j * self.spec.dt * self._amplitude_potential(Q))

    def _pointwise(self, u, phase):
        u *= phase
        if self._coupling:
            u *= np.exp(-0.5j * self.spec.dt * self._coupling * (u.real**2 + u.imag**2))
        return u

    def advance(self, u: np.ndarray, t: float) -> np.ndarray:
        """One step from time t on a raw value array (modified in place when possible)."""
        phase = self._half_phase(t)
        u = self._pointwise(u, phase)
        u = sfft.fft(u, axis=0, overwrite_x=True)
        u *= self._x_half
        u = sfft.ifft(u, axis=0, overwrite_x=True)
        u = sfft.fft(u, axis=1, overwrite_x=True)
        u *= self._y_full
        u = sfft.ifft(u, axis=1, overwrite_x=True)
        u = sfft.fft(u, axis=0, overwrite_x=True)
        u *= self._x_half
        u = sfft.ifft(u, axis=0, overwrite_x=True)
        return self._pointwise(u, phase)


def step(field: ComplexField, spec: SolverSpec, t: float | None = None) -> ComplexField:
    """Advance ``field`` by one step dt (convenience wrapper; builds a solver)."""
    t = field.t if t is None else t
    u = SplitStepSolver(field.grid, spec).advance(field.values.copy(), t)
    if not np.all(np.isfinite(u)):
        raise BlowUpError("non-finite values after step", t)
    return ComplexField(field.grid, u, t + spec.dt)


def frame_max(values: np.ndarray, cells: int = FRAME_CELLS) -> float:
    """Largest modulus on the outermost ``cells``-wide frame of the box."""
    parts = (values[:cells], values[-cells:], values[:, :cells], values[:, -cells:])
    return float(max(np.abs(p).max() for p in parts))


def _snapshot_steps(times, dt, n):
    out = []
    for ts in times:
        m = int(round(ts / dt))
        if not math.isclose(m * dt, ts, rel_tol=1e-9, abs_tol=1e-12) or not 0 <= m <= n:
            raise ValueError(f"snapshot time {ts} is not a step of dt={dt} within [0, T]")
        out.append(m)
    return out


def solve(
    v0: ComplexField,
    spec: SolverSpec,
    snapshot_times=None,
    *,
    monitor_boundary: bool = True,
    tail_tol: float = 1e-6,
) -> list[ComplexField]:
    """Repeatedly ``step`` from v0 over [0, T]; return fields at ``snapshot_times``.

    Snapshot times default to (0, T) and must be multiples of dt.
    """
    n = spec.steps
    times = [0.0, spec.T] if snapshot_times is None else list(snapshot_times)
    steps = _snapshot_steps(times, spec.dt, n)
    grid = v0.grid
    norm0 = v0.norm()
    if monitor_boundary and norm0 > 0:
        edge = frame_max(v0.values)
        if edge > INITIAL_BOUNDARY_TOL * max(norm0, np.abs(v0.values).max()):
            raise BoundaryMassError(
                f"initial data not decayed at the box boundary (|v|={edge:.2e}); enlarge L", 0.0
            )

    solver = SplitStepSolver(grid, spec)
    wanted = {}
    for i, m in enumerate(steps):
        wanted.setdefault(m, []).append(i)
    out: list[ComplexField | None] = [None] * len(times)

    u = v0.values.copy()
    t0 = v0.t
    for m in range(n + 1):
        t = t0 + m * spec.dt
        if m in wanted:
            snap = ComplexField(grid, u.copy(), t)
            tail = spectral_tail_fraction(snap, band=0.8)
            if tail > tail_tol:
                logger.warning("spectral tail fraction %.2e at t=%g: solution under-resolved", tail, t)
            for i in wanted[m]:
                out[i] = snap
        if m == n:
            break
        u = solver.advance(u, t)
        edge = frame_max(u)
        # NaN anywhere reaches the frame through the transforms within one step
        if not math.isfinite(edge):
            raise BlowUpError("non-finite values (blow-up or loss of resolution)", t)
        if monitor_boundary and edge > BOUNDARY_TOL * norm0:
            raise BoundaryMassError(
                f"boundary modulus {edge:.2e} exceeds {BOUNDARY_TOL:g} x mass; enlarge L", t
            )
    return out
