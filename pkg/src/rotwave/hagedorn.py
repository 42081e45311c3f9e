"""
Gaussian wave-packet matrices (A, B) under the rotation-corrected flow

    A' = i B - [R, A],    B' = i Q_V(t) A - [R, B]

and the Gaussian amplitude (det A)^{-1/2} exp(-y.(B A^{-1}) y / 2).

Arrays may carry leading batch axes; everything is vectorised over them.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classical import RotationAxis, Trajectory, _embed, rk4_flow_step

logger = logging.getLogger(__name__)

WARN_TOL = 1e-8
ABORT_TOL = 1e-6
SINGULAR_TOL = 1e-10


class InvariantError(ValueError):
    """A pair (A, B) violates one of the structural conditions."""

    def __init__(self, condition: str, residual: float, message: str = ""):
        self.condition = condition
        self.residual = residual
        super().__init__(message or f"{condition} violated (residual {residual:.3e})")


def _herm(X):
    return np.conj(np.swapaxes(X, -1, -2))


def _T(X):
    return np.swapaxes(X, -1, -2)


def _fro(X):
    return np.linalg.norm(X, axis=(-2, -1))


def invariant_residuals(A, B, sqrt_det=None) -> dict:
    """Residuals of the structural conditions, vectorised over leading axes.

    Keys: ``min_singular`` (smallest singular value of A and B),
    ``symmetry`` (|BA^-1 - (BA^-1)^T|), ``F`` (|A*B + B*A - 2I|),
    ``G`` (|A^T B - B^T A|), ``real_part`` (|Re BA^-1 - (AA*)^-1|),
    ``min_eig`` (smallest eigenvalue of Re BA^-1) and, if given,
    ``sqrt_det`` (relative error of sqrt_det**2 against det A).
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    d = A.shape[-1]
    eye = np.eye(d)
    sv = np.minimum(
        np.linalg.svd(A, compute_uv=False)[..., -1], np.linalg.svd(B, compute_uv=False)[..., -1]
    )
    # BA^-1 = (A^-T B^T)^T
    gamma = _T(np.linalg.solve(_T(A), _T(B)))
    re = gamma.real
    out = {
        "min_singular": sv,
        "symmetry": _fro(gamma - _T(gamma)),
        "F": _fro(_herm(A) @ B + _herm(B) @ A - 2 * eye),
        "G": _fro(_T(A) @ B - _T(B) @ A),
        "real_part": _fro(re - np.linalg.inv(A @ _herm(A)).real),
        "min_eig": np.linalg.eigvalsh(0.5 * (re + _T(re)))[..., 0],
    }
    if sqrt_det is not None:
        det = np.linalg.det(A)
        out["sqrt_det"] = np.abs(np.asarray(sqrt_det) ** 2 - det) / np.abs(det)
    return out


def residual_failures(res: dict, tol: float) -> list[tuple[str, float]]:
    """List (condition, worst value) for every condition failing at ``tol``."""
    bad = []
    if np.min(res["min_singular"]) <= SINGULAR_TOL:
        bad.append(("invertible", float(np.min(res["min_singular"]))))
    for key in ("symmetry", "F", "G", "real_part"):
        worst = float(np.max(res[key]))
        if not worst <= tol:
            bad.append((key, worst))
    if np.min(res["min_eig"]) <= 0:
        bad.append(("positive_definite", float(np.min(res["min_eig"]))))
    if "sqrt_det" in res and not np.max(res["sqrt_det"]) <= 1e-10:
        bad.append(("sqrt_det", float(np.max(res["sqrt_det"]))))
    return bad


@dataclass
class PacketMatrices:
    """Complex pair (A, B) with a continuously tracked branch of sqrt(det A)."""

    A: np.ndarray
    B: np.ndarray
    sqrt_det_A: complex | np.ndarray

    @classmethod
    def from_arrays(cls, A, B, sqrt_det_A=None, tol: float = WARN_TOL) -> "PacketMatrices":
        """Validate (A, B) and attach the principal sqrt(det A) unless given."""
        A = np.array(A, dtype=complex)
        B = np.array(B, dtype=complex)
        if A.shape != B.shape or A.shape[-1] != A.shape[-2]:
            raise ValueError(f"A and B must be square and equally shaped, got {A.shape}, {B.shape}")
        if sqrt_det_A is None:
            sqrt_det_A = np.sqrt(np.linalg.det(A).astype(complex))
        m = cls(A, B, sqrt_det_A)
        m.validate(tol)
        return m

    @property
    def dim(self) -> int:
        return self.A.shape[-1]

    @property
    def width(self) -> np.ndarray:
        """Complex symmetric width matrix B A^{-1}."""
        return _T(np.linalg.solve(_T(self.A), _T(self.B)))

    @property
    def M1(self) -> np.ndarray:
        return self.width.real

    @property
    def M2(self) -> np.ndarray:
        return self.width.imag

    def residuals(self) -> dict:
        return invariant_residuals(self.A, self.B, self.sqrt_det_A)

    def validate(self, tol: float = WARN_TOL):
        for name, X in (("A", self.A), ("B", self.B)):
            smin = float(np.min(np.linalg.svd(X, compute_uv=False)[..., -1]))
            if smin <= SINGULAR_TOL:
                raise InvariantError("invertible", smin, f"{name} is singular (smallest singular value {smin:.2e})")
        bad = residual_failures(self.residuals(), tol)
        if bad:
            cond, val = bad[0]
            raise InvariantError(cond, val)
        return self


def make_initial_matrices(kind: str = "identity", d: int = 2, *, D=None, C=None) -> PacketMatrices:
    """Initial pairs satisfying the structural conditions by construction.

    ``identity``: A = B = I.  ``diag_width``: A = D, B = D^-1 for a positive
    diagonal D.  ``perturbed``: A = I, B = I + iC for a real symmetric C.
    """
    eye = np.eye(d)
    if kind == "identity":
        return PacketMatrices.from_arrays(eye, eye)
    if kind == "diag_width":
        D = np.asarray(D, dtype=float)
        if D.ndim == 1:
            D = np.diag(D)
        if D.shape != (d, d) or np.any(D != np.diag(np.diag(D))):
            raise ValueError("diag_width needs a real diagonal matrix")
        if np.any(np.diag(D) <= 0):
            raise InvariantError("positive_definite", float(np.min(np.diag(D))), "diagonal widths must be positive")
        return PacketMatrices.from_arrays(D, np.diag(1 / np.diag(D)))
    if kind == "perturbed":
        C = np.asarray(C, dtype=float)
        if C.shape != (d, d):
            raise ValueError(f"C must be {d}x{d}")
        asym = float(np.abs(C - C.T).max())
        if asym > 0:
            raise InvariantError("symmetry", asym, "perturbation C must be symmetric")
        return PacketMatrices.from_arrays(eye, eye + 1j * C)
    raise ValueError(f"unknown initial matrix kind {kind!r}")


def random_perturbations(n: int, d: int, seed: int) -> np.ndarray:
    """n symmetrised matrices with entries drawn uniformly from [-1, 1]."""
    rng = np.random.default_rng(seed)
    C = rng.uniform(-1.0, 1.0, size=(n, d, d))
    return 0.5 * (C + _T(C))


def matrix_rhs(A, B, Q, R):
    """(A', B') = (iB - [R, A], iQA - [R, B])."""
    return 1j * B - (R @ A - A @ R), 1j * (Q @ A) - (R @ B - B @ R)


def track_sqrt(det, previous):
    """Square root of ``det`` on the branch closest to ``previous``."""
    r = np.sqrt(np.asarray(det, dtype=complex))
    flip = np.abs(r - previous) > np.abs(r + previous)
    return np.where(flip, -r, r)


@dataclass
class MatrixPath:
    """Sampled solution of the matrix flow; time is the first array axis."""

    t: np.ndarray
    A: np.ndarray
    B: np.ndarray
    sqrt_det: np.ndarray

    def __len__(self):
        return len(self.t)

    def __getitem__(self, n) -> PacketMatrices:
        return PacketMatrices(self.A[n], self.B[n], self.sqrt_det[n])

    def residuals(self) -> dict:
        return invariant_residuals(self.A, self.B, self.sqrt_det)

    def at(self, t: float) -> PacketMatrices:
        n = int(round((t - self.t[0]) / (self.t[1] - self.t[0])))
        if not 0 <= n < len(self.t) or abs(self.t[n] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a stored time")
        return self[n]

    def to_csv(self, path):
        """One row per (time, batch member): Re/Im of A and B, residuals, sqrt det."""
        res = self.residuals()
        d = self.A.shape[-1]
        batch = self.A.shape[1:-2]
        idx = [(i, j) for i in range(d) for j in range(d)]
        header = ["t", "member"]
        for name in ("A", "B"):
            header += [f"{part}_{name}{i + 1}{j + 1}" for part in ("re", "im") for i, j in idx]
        header += ["min_singular", "symmetry", "F", "G", "real_part", "min_eig", "sqrt_det_re", "sqrt_det_im"]
        members = list(np.ndindex(*batch)) if batch else [()]
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for n in range(len(self.t)):
                for m, b in enumerate(members):
                    key = (n,) + b
                    row = [repr(float(self.t[n])), m]
                    for X in (self.A[key], self.B[key]):
                        row += [repr(float(X[i, j].real)) for i, j in idx]
                        row += [repr(float(X[i, j].imag)) for i, j in idx]
                    row += [repr(float(res[k][key])) for k in ("min_singular", "symmetry", "F", "G", "real_part", "min_eig")]
                    s = complex(self.sqrt_det[key])
                    row += [repr(s.real), repr(s.imag)]
                    w.writerow(row)


def propagate_matrices(
    M0: PacketMatrices,
    traj: Trajectory,
    *,
    warn_tol: float = WARN_TOL,
    abort_tol: float = ABORT_TOL,
    check_every: int = 100,
) -> MatrixPath:
    """Co-integrate (A, B) along ``traj`` with RK4.

    The Hessian is evaluated at the RK4 stage positions of q, recomputed from
    the trajectory's potential, so the joint system stays fourth order.
    ``M0`` may carry batch axes (all members share the trajectory).
    """
    V, rot = traj.potential, traj.rotation
    d = traj.dim
    if M0.dim != d:
        raise ValueError(f"matrices are {M0.dim}x{M0.dim} but trajectory has d={d}")
    R = rot.block(d)
    h = traj.dt
    n = len(traj) - 1

    A = np.empty((n + 1,) + M0.A.shape, dtype=complex)
    B = np.empty_like(A)
    sq = np.empty((n + 1,) + np.shape(M0.sqrt_det_A), dtype=complex)
    A[0], B[0], sq[0] = M0.A, M0.B, M0.sqrt_det_A
    eye = np.eye(d)

    for k in range(n):
        _, stages = rk4_flow_step(
            _embed(traj.q[k], d), _embed(traj.p[k], d), traj.S[k], h, V, rot, d, stages=True
        )
        Q1, Q2, Q3, Q4 = (V.hessian(s[:d]) for s in stages)
        a, b = A[k], B[k]
        ka1, kb1 = matrix_rhs(a, b, Q1, R)
        ka2, kb2 = matrix_rhs(a + 0.5 * h * ka1, b + 0.5 * h * kb1, Q2, R)
        ka3, kb3 = matrix_rhs(a + 0.5 * h * ka2, b + 0.5 * h * kb2, Q3, R)
        ka4, kb4 = matrix_rhs(a + h * ka3, b + h * kb3, Q4, R)
        A[k + 1] = a + h / 6 * (ka1 + 2 * ka2 + 2 * ka3 + ka4)
        B[k + 1] = b + h / 6 * (kb1 + 2 * kb2 + 2 * kb3 + kb4)
        sq[k + 1] = track_sqrt(np.linalg.det(A[k + 1]), sq[k])

        if (k + 1) % check_every == 0 or k + 1 == n:
            a1, b1 = A[k + 1], B[k + 1]
            if not (np.all(np.isfinite(a1)) and np.all(np.isfinite(b1))):
                raise InvariantError("finite", float("nan"), f"non-finite matrices at t={traj.t[k + 1]}")
            f_res = float(np.max(_fro(_herm(a1) @ b1 + _herm(b1) @ a1 - 2 * eye)))
            g_res = float(np.max(_fro(_T(a1) @ b1 - _T(b1) @ a1)))
            if max(f_res, g_res) > abort_tol:
                cond = "F" if f_res >= g_res else "G"
                raise InvariantError(
                    cond, max(f_res, g_res), f"{cond} invariant drifted to {max(f_res, g_res):.3e} at t={traj.t[k + 1]}"
                )

    path = MatrixPath(traj.t.copy(), A, B, sq)
    bad = residual_failures(path.residuals(), abort_tol)
    if bad:
        cond, val = bad[0]
        raise InvariantError(cond, val, f"{cond} residual {val:.3e} exceeds abort tolerance {abort_tol:g}")
    warn = residual_failures(path.residuals(), warn_tol)
    if warn:
        logger.warning("matrix invariants above %g: %s", warn_tol, warn)
    return path


def gaussian_eval(M: PacketMatrices, y) -> np.ndarray:
    """(det A)^{-1/2} exp(-y.(BA^{-1})y / 2) on the tracked branch; y has shape (..., d)."""
    y = np.asarray(y, dtype=float)
    gamma = M.width
    quad = np.einsum("...i,ij,...j->...", y, gamma, y)
    return np.exp(-0.5 * quad) / M.sqrt_det_A


def gaussian_function(M: PacketMatrices):
    """Callable y -> gaussian_eval(M, y)."""
    return lambda y: gaussian_eval(M, y)


def conjugate_frame(path: MatrixPath, rot: RotationAxis, times=None):
    """(A_Om, B_Om) = (e^{tR} A e^{-tR}, e^{tR} B e^{-tR}) at each stored time."""
    t = path.t if times is None else np.asarray(times, dtype=float)
    if times is not None:
        idx = np.rint((t - path.t[0]) / (path.t[1] - path.t[0])).astype(int)
        A, B = path.A[idx], path.B[idx]
    else:
        A, B = path.A, path.B
    d = A.shape[-1]
    E = rot.propagator(t)[..., :d, :d]
    extra = A.ndim - 3
    E = E.reshape(E.shape[:1] + (1,) * extra + E.shape[1:])
    Et = _T(E)
    return E @ A @ Et, E @ B @ Et


def central_derivative(values, dt: float) -> np.ndarray:
    """Fourth-order central difference along axis 0 (interior points only)."""
    v = np.asarray(values)
    return (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * dt)


def hode_residual(A_om, B_om, Q, dt: float) -> float:
    """max over interior times of |A_om' - iB_om| and |B_om' - iQ A_om|.

    ``Q`` is the Hessian in the conjugated frame, shape (n, d, d) or (d, d).
    """
    dA = central_derivative(A_om, dt)
    dB = central_derivative(B_om, dt)
    Q = np.asarray(Q)
    if Q.ndim == 2:
        Qi = Q
    else:
        Qi = Q[2:-2]
        Qi = Qi.reshape(Qi.shape[:1] + (1,) * (A_om.ndim - 3) + Qi.shape[1:])
    rA = _fro(dA - 1j * B_om[2:-2])
    rB = _fro(dB - 1j * (Qi @ A_om[2:-2]))
    return float(max(rA.max(), rB.max()))
