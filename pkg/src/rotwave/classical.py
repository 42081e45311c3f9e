"""
Rotating-frame Hamiltonian trajectories with co-integrated classical action.

The phase-space flow is

    q' = p + Omega x q,    p' = -grad V(q) + Omega x p,    S' = |p|^2/2 - V(q)

integrated with fixed-step classical RK4. Planar problems (d = 2) are embedded
in R^3 with a vanishing third component and Omega = (0, 0, omega).
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .potentials import PotentialModel


class FlowError(RuntimeError):
    """Integration produced a non-finite state or left the overflow guard."""


class RotationAxis:
    """Rotation vector Omega together with the skew matrix R_Omega.

    R_Omega has rows [0, O3, -O2], [-O3, 0, O1], [O2, -O1, 0], which means
    R_Omega y = -(Omega x y).
    """

    def __init__(self, omega):
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        if omega.size == 1:
            omega = np.array([0.0, 0.0, omega[0]])
        if omega.shape != (3,) or not np.all(np.isfinite(omega)):
            raise ValueError(f"rotation must be a scalar or a finite 3-vector, got {omega!r}")
        self.omega = omega
        o1, o2, o3 = omega
        self.matrix = np.array([[0.0, o3, -o2], [-o3, 0.0, o1], [o2, -o1, 0.0]])

    @property
    def planar(self) -> bool:
        """True if the axis is perpendicular to the (x1, x2) plane."""
        return self.omega[0] == 0.0 and self.omega[1] == 0.0

    def block(self, d: int) -> np.ndarray:
        """R_Omega restricted to the first d coordinates."""
        if d == 2 and not self.planar:
            raise ValueError("a planar problem needs Omega along the third axis")
        return self.matrix[:d, :d]

    def cross(self, v):
        """Omega x v for 3-vectors (vectorised over leading axes)."""
        return cross(self.omega, v)

    def propagator(self, t):
        """exp(t R_Omega) as a closed-form rotation, vectorised over t.

        Returns shape ``t.shape + (3, 3)``.
        """
        t = np.asarray(t, dtype=float)
        w = np.linalg.norm(self.omega)
        eye = np.broadcast_to(np.eye(3), t.shape + (3, 3))
        if w == 0.0:
            return eye.copy()
        K = self.matrix / w
        th = (t * w)[..., None, None]
        return eye + np.sin(th) * K + (1 - np.cos(th)) * (K @ K)

    def __repr__(self):
        return f"RotationAxis({self.omega.tolist()})"


@dataclass(frozen=True)
class ClassicalState:
    t: float
    q: np.ndarray
    p: np.ndarray
    S: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))


def cross(a, b):
    """3-vector cross product; cheaper than np.cross on single vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def _embed(v, d):
    out = np.zeros(3)
    out[:d] = v
    return out


def flow_rhs(state: ClassicalState, V: PotentialModel, rot: RotationAxis):
    """Time derivative (q', p', S') at ``state``; vectors keep the state's dimension."""
    d = len(state.q)
    q3, p3 = _embed(state.q, d), _embed(state.p, d)
    dq, dp, dS = _rhs3(q3, p3, V, rot, d)
    return dq[:d], dp[:d], dS


def _rhs3(q3, p3, V, rot, d):
    grad = _embed(V.gradient(q3[:d]), d)
    dq = p3 + rot.cross(q3)
    dp = -grad + rot.cross(p3)
    dS = 0.5 * (p3 @ p3) - V.value(q3[:d])
    return dq, dp, dS


def energy(state: ClassicalState, V: PotentialModel, rot: RotationAxis) -> float:
    """H(q, p) = |p|^2/2 + V(q) + Omega.(q x p)."""
    d = len(state.q)
    q3, p3 = _embed(state.q, d), _embed(state.p, d)
    return float(0.5 * p3 @ p3 + V.value(q3[:d]) + rot.omega @ cross(q3, p3))


def rotating_energy(state: ClassicalState, V: PotentialModel, rot: RotationAxis) -> float:
    """|q'|^2/2 - |Omega x q|^2/2 + V(q) with q' = p + Omega x q."""
    d = len(state.q)
    q3, p3 = _embed(state.q, d), _embed(state.p, d)
    qdot = p3 + rot.cross(q3)
    oq = rot.cross(q3)
    return float(0.5 * qdot @ qdot - 0.5 * oq @ oq + V.value(q3[:d]))


def canonical_momentum(state: ClassicalState, rot: RotationAxis) -> np.ndarray:
    """pi = p + Omega x q."""
    d = len(state.q)
    q3, p3 = _embed(state.q, d), _embed(state.p, d)
    return (p3 + rot.cross(q3))[:d]


@dataclass
class Trajectory:
    """Uniformly sampled solution of the rotating Hamiltonian flow."""

    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    S: np.ndarray
    hessians: np.ndarray
    potential: PotentialModel
    rotation: RotationAxis
    dt: float

    @property
    def dim(self) -> int:
        return self.q.shape[1]

    def __len__(self):
        return len(self.t)

    def state(self, n: int) -> ClassicalState:
        return ClassicalState(float(self.t[n]), self.q[n].copy(), self.p[n].copy(), float(self.S[n]))

    def energies(self) -> np.ndarray:
        return np.array([energy(self.state(n), self.potential, self.rotation) for n in range(len(self))])

    def rotating_energies(self) -> np.ndarray:
        return np.array(
            [rotating_energy(self.state(n), self.potential, self.rotation) for n in range(len(self))]
        )

    def hessian_at(self, t: float) -> np.ndarray:
        """Q_V(t) by linear interpolation between stored nodes."""
        s = (t - self.t[0]) / (self.t[1] - self.t[0])
        n = int(np.clip(np.floor(s + 1e-9), 0, len(self.t) - 2))
        w = s - n
        if abs(w) < 1e-9:
            return self.hessians[n]
        if abs(w - 1) < 1e-9:
            return self.hessians[n + 1]
        return (1 - w) * self.hessians[n] + w * self.hessians[n + 1]

    def frame_at(self, t: float):
        """(q, p, S) at time t; t must be a stored node."""
        n = self.index_of(t)
        return self.q[n], self.p[n], float(self.S[n])

    def index_of(self, t: float) -> int:
        s = (t - self.t[0]) / (self.t[1] - self.t[0])
        n = int(round(s))
        if abs(s - n) > 1e-6 or not 0 <= n < len(self.t):
            raise ValueError(f"t={t} is not a node of the trajectory")
        return n

    def to_csv(self, path):
        d = self.dim
        H = self.energies()
        Hr = self.rotating_energies()
        header = ["t"] + [f"q{i + 1}" for i in range(d)] + [f"p{i + 1}" for i in range(d)]
        header += ["S", "H", "H_rot"]
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for n in range(len(self)):
                w.writerow(
                    [repr(float(self.t[n]))]
                    + [repr(float(v)) for v in self.q[n]]
                    + [repr(float(v)) for v in self.p[n]]
                    + [repr(float(self.S[n])), repr(float(H[n])), repr(float(Hr[n]))]
                )


def step_count(T: float, dt: float) -> tuple[int, float]:
    """Number of steps for [0, T] and the (possibly adjusted) step size."""
    if dt <= 0 or T <= 0:
        raise ValueError("T and dt must be positive")
    n = max(1, int(round(T / dt)))
    if not math.isclose(n * dt, T, rel_tol=1e-9, abs_tol=1e-12):
        warnings.warn(f"T/dt = {T / dt} is not integral; using {n} steps of {T / n}", stacklevel=3)
        dt = T / n
    return n, dt


def integrate_trajectory(
    q0,
    p0,
    V: PotentialModel,
    rot: RotationAxis,
    T: float,
    dt: float,
    *,
    overflow: float = 1e6,
    reverse: bool = False,
    t0: float = 0.0,
) -> Trajectory:
    """Classical RK4 on the augmented state (q, p, S), starting with S = 0.

    With ``reverse=True`` the flow is integrated from ``t0`` down to ``t0 - T``.
    """
    q0 = np.asarray(q0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    d = V.dim
    if q0.shape != (d,) or p0.shape != (d,):
        raise ValueError(f"q0 and p0 must have shape ({d},)")
    if d == 2 and not rot.planar:
        raise ValueError("planar problem needs Omega = (0, 0, omega)")
    n, dt = step_count(T, dt)
    h = -dt if reverse else dt

    q = np.zeros((n + 1, 3))
    p = np.zeros((n + 1, 3))
    S = np.zeros(n + 1)
    q[0, :d], p[0, :d] = q0, p0
    for k in range(n):
        q[k + 1], p[k + 1], S[k + 1] = rk4_flow_step(q[k], p[k], S[k], h, V, rot, d)
        if not (np.all(np.isfinite(q[k + 1])) and np.all(np.isfinite(p[k + 1]))):
            raise FlowError(f"non-finite state at t={t0 + (k + 1) * h}")
        if np.linalg.norm(q[k + 1]) > overflow:
            raise FlowError(
                f"|q| exceeded overflow guard {overflow:g} at t={t0 + (k + 1) * h}"
            )
    if d == 2 and (np.any(q[:, 2] != 0.0) or np.any(p[:, 2] != 0.0)):
        raise FlowError("planar trajectory left the plane")

    t = t0 + h * np.arange(n + 1)
    qd, pd = q[:, :d].copy(), p[:, :d].copy()
    return Trajectory(t, qd, pd, S, V.hessian(qd), V, rot, h)


def rk4_flow_step(q3, p3, S, h, V, rot, d, stages=False):
    """One RK4 step of the augmented flow.

    With ``stages=True`` also returns the four stage positions, used to
    evaluate the Hessian when matrices are co-integrated.
    """
    k1 = _rhs3(q3, p3, V, rot, d)
    q2 = q3 + 0.5 * h * k1[0]
    k2 = _rhs3(q2, p3 + 0.5 * h * k1[1], V, rot, d)
    q3_ = q3 + 0.5 * h * k2[0]
    k3 = _rhs3(q3_, p3 + 0.5 * h * k2[1], V, rot, d)
    q4 = q3 + h * k3[0]
    k4 = _rhs3(q4, p3 + h * k3[1], V, rot, d)
    out = (
        q3 + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        p3 + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        S + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
    )
    if stages:
        return out, (q3, q2, q3_, q4)
    return out


def growth_envelope(traj: Trajectory) -> tuple[float, float]:
    """Fit log(1 + |q(t)|) <= c0 t + c1.

    c0 is the least-squares slope; c1 is the smallest intercept making the
    line an upper envelope of the sampled data.
    """
    t = np.abs(traj.t - traj.t[0])
    y = np.log1p(np.linalg.norm(traj.q, axis=1))
    c0 = float(np.polyfit(t, y, 1)[0])
    c1 = float(np.max(y - c0 * t))
    return c0, c1
