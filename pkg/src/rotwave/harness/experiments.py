"""
Experiment runners behind the command line.

Each ``run_*`` function takes a validated :class:`ExperimentConfig`, returns
an in-memory result and, when given an output directory, writes CSV tables
plus ``manifest.txt`` there. Nothing depends on wall-clock time or global
random state, so identical config and seed give identical files.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..classical import FlowError, Trajectory, growth_envelope, integrate_trajectory
from ..hagedorn import (
    SINGULAR_TOL,
    WARN_TOL,
    InvariantError,
    MatrixPath,
    PacketMatrices,
    gaussian_function,
    propagate_matrices,
    random_perturbations,
)
from ..packets import WavePacketFrame, assemble, assemble_function, initial_data
from ..spectral import ComplexField, SolverError, SolverSpec, l2_distance, sigma_norm, solve, write_snapshot
from .config import ExperimentConfig
from .fitting import EnvelopeFit, LineFit, ehrenfest_window, fit_envelope, fit_rate

logger = logging.getLogger(__name__)

GAUSSIAN_RADIUS = 8.0  # Gaussian amplitudes are below 1e-13 beyond 8 widths
SIGMA_ORDERS = (0, 1, 2)


class ExperimentError(RuntimeError):
    """A solver or flow failure, annotated with the run it came from."""


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_manifest(out: Path, cfg: ExperimentConfig, kind: str, seed: int, summary: dict, files) -> Path:
    lines = [
        f"rotwave {__version__}",
        f"experiment: {kind}",
        f"seed: {seed}",
        "outputs: " + " ".join(sorted(files)),
        "",
        "[summary]",
    ]
    lines += [f"{k}: {v}" for k, v in summary.items()]
    lines += ["", "[config]", cfg.echo().rstrip(), ""]
    path = out / "manifest.txt"
    path.write_text("\n".join(lines))
    return path


def _prepare_out(out) -> Path | None:
    if out is None:
        return None
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_planar(cfg: ExperimentConfig):
    if cfg.dim != 2:
        raise ValueError("grid experiments are two-dimensional; use trajectory/gaussian/audit for d = 3")


def _trajectory(cfg: ExperimentConfig, dt: float | None = None, potential=None, rotation=None) -> Trajectory:
    V = potential if potential is not None else cfg.build_potential()
    rot = rotation if rotation is not None else cfg.rotation()
    try:
        return integrate_trajectory(cfg.initial.q0, cfg.initial.p0, V, rot, cfg.T, dt or cfg.dt)
    except FlowError as exc:
        raise ExperimentError(f"classical flow failed: {exc}") from exc


# ---------------------------------------------------------------- trajectory


@dataclass
class TrajectoryResult:
    trajectory: Trajectory
    energy_drift: float
    growth: tuple[float, float]


def run_trajectory(cfg: ExperimentConfig, out=None, seed: int | None = None) -> TrajectoryResult:
    traj = _trajectory(cfg)
    H = traj.energies()
    res = TrajectoryResult(traj, float(np.max(np.abs(H - H[0]))), growth_envelope(traj))
    out = _prepare_out(out)
    if out is not None:
        traj.to_csv(out / "trajectory.csv")
        summary = {
            "energy_drift": _fmt(res.energy_drift),
            "growth_c0": _fmt(res.growth[0]),
            "growth_c1": _fmt(res.growth[1]),
        }
        write_manifest(out, cfg, "trajectory", _seed(cfg, seed), summary, ["trajectory.csv"])
    return res


# ---------------------------------------------------------------- gaussian


@dataclass
class GaussianResult:
    trajectory: Trajectory
    path: MatrixPath
    residuals: dict


def _max_residuals(res: dict) -> dict:
    out = {"min_singular": float(np.min(res["min_singular"])), "min_eig": float(np.min(res["min_eig"]))}
    for key in ("symmetry", "F", "G", "real_part", "sqrt_det"):
        if key in res:
            out[key] = float(np.max(res[key]))
    return out


def run_gaussian(cfg: ExperimentConfig, out=None, seed: int | None = None) -> GaussianResult:
    traj = _trajectory(cfg)
    M0 = cfg.initial.matrices.build(cfg.dim)
    path = propagate_matrices(M0, traj)
    res = GaussianResult(traj, path, _max_residuals(path.residuals()))
    out = _prepare_out(out)
    if out is not None:
        path.to_csv(out / "matrices.csv")
        summary = {f"max_{k}": _fmt(v) for k, v in res.residuals.items()}
        write_manifest(out, cfg, "gaussian", _seed(cfg, seed), summary, ["matrices.csv"])
    return res


# ---------------------------------------------------------------- amplitude


@dataclass
class AmplitudeResult:
    times: np.ndarray
    fields: list[ComplexField]
    mass: np.ndarray
    sigma: dict  # order -> array over times
    growth: dict  # order -> EnvelopeFit | None
    gaussian_error: np.ndarray | None


def _amplitude_fields(cfg: ExperimentConfig, traj: Trajectory, times) -> list[ComplexField]:
    """Spectral amplitude solve from the Gaussian initial amplitude.

    ``traj`` must be sampled at dt/2 so that the Strang midpoints are nodes.
    """
    yg = cfg.amplitude_grid.build()
    M0 = cfg.initial.matrices.build(cfg.dim)
    v0 = ComplexField.from_function(yg, gaussian_function(M0))
    mode = "amplitude_cubic" if cfg.mode == "cubic" else "amplitude_linear"
    spec = SolverSpec(mode, cfg.dt, cfg.T, lam=cfg.lam, omega=cfg.omega_z, trajectory=traj)
    try:
        return solve(v0, spec, times)
    except SolverError as exc:
        raise ExperimentError(f"amplitude solve: {exc}") from exc


def _try_envelope(t, e) -> EnvelopeFit | None:
    try:
        return fit_envelope(t, e)
    except ValueError:
        return None


def run_amplitude(cfg: ExperimentConfig, out=None, seed: int | None = None) -> AmplitudeResult:
    _require_planar(cfg)
    times = cfg.times()
    traj = _trajectory(cfg, cfg.dt / 2)
    fields = _amplitude_fields(cfg, traj, times)
    mass = np.array([f.norm() for f in fields])
    sigma = {k: np.array([sigma_norm(f, k) for f in fields]) for k in SIGMA_ORDERS}
    growth = {k: _try_envelope(np.asarray(times), s) for k, s in sigma.items()}
    gerr = None
    if cfg.mode == "linear":
        path = propagate_matrices(cfg.initial.matrices.build(cfg.dim), traj)
        yg = fields[0].grid
        gerr = np.array(
            [l2_distance(f, ComplexField.from_function(yg, gaussian_function(path.at(f.t)))) for f in fields]
        )
    res = AmplitudeResult(np.asarray(times), fields, mass, sigma, growth, gerr)

    out = _prepare_out(out)
    if out is not None:
        header = ["t", "mass"] + [f"sigma{k}" for k in SIGMA_ORDERS] + ["gaussian_error"]
        rows = []
        for i, t in enumerate(times):
            g = "" if gerr is None else _fmt(gerr[i])
            rows.append([_fmt(t), _fmt(mass[i])] + [_fmt(sigma[k][i]) for k in SIGMA_ORDERS] + [g])
        _write_csv(out / "amplitude.csv", header, rows)
        files = ["amplitude.csv"]
        if cfg.save_fields:
            for f in fields:
                name = f"amplitude_t{f.t:.6g}.rpk"
                write_snapshot(out / name, f)
                files.append(name)
        summary = {"mass_drift": _fmt(np.max(np.abs(mass - mass[0])) / mass[0])}
        for k, fit in growth.items():
            summary[f"sigma{k}_growth_rate"] = "n/a" if fit is None else f"{fit.rate!r} +/- {fit.half_width!r}"
        if gerr is not None:
            summary["max_gaussian_error"] = _fmt(gerr.max())
        write_manifest(out, cfg, "amplitude", _seed(cfg, seed), summary, files)
    return res


# ---------------------------------------------------------------- compare


@dataclass
class CompareResult:
    eps: float
    times: np.ndarray
    errors: np.ndarray
    mass_psi: np.ndarray
    mass_phi: np.ndarray
    psi_final: ComplexField | None = field(default=None, repr=False)
    phi_final: ComplexField | None = field(default=None, repr=False)


@dataclass
class _Amplitude:
    """eps-independent ingredients shared by all members of a sweep."""

    trajectory: Trajectory
    path: MatrixPath | None
    fields: list[ComplexField] | None


def _prepare_amplitude(cfg: ExperimentConfig, force_spectral: bool) -> _Amplitude:
    _require_planar(cfg)
    traj = _trajectory(cfg, cfg.dt / 2)
    if cfg.mode == "linear" and not force_spectral:
        path = propagate_matrices(cfg.initial.matrices.build(cfg.dim), traj)
        return _Amplitude(traj, path, None)
    return _Amplitude(traj, None, _amplitude_fields(cfg, traj, cfg.times()))


def check_resolution(cfg: ExperimentConfig, eps: float, amp: _Amplitude):
    """Grid preconditions for a full-equation solve at ``eps``."""
    xg = cfg.grid.build()
    if xg.h > np.sqrt(eps) / 4:
        raise ValueError(f"eps={eps}: x-grid spacing {xg.h:g} exceeds sqrt(eps)/4 = {np.sqrt(eps) / 4:g}")
    if amp.path is not None:
        width = float(np.max(np.linalg.norm(amp.path.A, ord=2, axis=(-2, -1))))
        radius = GAUSSIAN_RADIUS * width
    else:
        radius = amp.fields[0].grid.L
    reach = float(np.max(np.abs(amp.trajectory.q))) + np.sqrt(eps) * radius
    if reach > xg.L:
        raise ValueError(f"eps={eps}: packet reaches |x| = {reach:.3g} beyond the box half-width {xg.L:g}")
    return radius


def run_compare(cfg: ExperimentConfig, eps: float, *, force_spectral: bool = False, amplitude=None) -> CompareResult:
    """Full solution against the assembled wave packet at one eps."""
    amp = amplitude if amplitude is not None else _prepare_amplitude(cfg, force_spectral)
    radius = check_resolution(cfg, eps, amp)
    xg = cfg.grid.build()
    times = cfg.times()
    q0, p0 = cfg.initial.q0, cfg.initial.p0
    mode = "full_cubic" if cfg.mode == "cubic" else "full_linear"
    spec = SolverSpec(mode, cfg.dt, cfg.T, eps=eps, lam=cfg.lam, omega=cfg.omega_z, potential=cfg.build_potential())
    if amp.path is not None:
        psi0 = initial_data(amp.path[0], q0, p0, eps, xg)
    else:
        psi0 = initial_data(amp.fields[0], q0, p0, eps, xg)
    try:
        psis = solve(psi0, spec, times)
    except SolverError as exc:
        raise ExperimentError(f"eps={eps}: full solve failed at t={exc.t_last_good:g}: {exc}") from exc

    errors, m_psi, m_phi = [], [], []
    phi = None
    for i, psi in enumerate(psis):
        q, p, S = amp.trajectory.frame_at(psi.t)
        frame = WavePacketFrame(eps, q, p, S)
        if amp.path is not None:
            phi = assemble_function(gaussian_function(amp.path.at(psi.t)), frame, xg, t=psi.t, radius=radius)
        else:
            phi = assemble(amp.fields[i], frame, xg, t=psi.t)
        errors.append(l2_distance(psi, phi))
        m_psi.append(psi.norm())
        m_phi.append(phi.norm())
    return CompareResult(
        eps, np.asarray(times), np.array(errors), np.array(m_psi), np.array(m_phi), psis[-1], phi
    )


# ---------------------------------------------------------------- converge


@dataclass
class ConvergenceReport:
    entries: list[CompareResult]
    rate: LineFit | None
    envelopes: dict  # eps -> EnvelopeFit | None
    windows: dict  # eps -> float
    threshold: float

    def final_errors(self) -> list[tuple[float, float]]:
        return [(r.eps, float(r.errors[-1])) for r in self.entries]


def _compare_job(args):
    cfg, eps, force = args
    return run_compare(cfg, eps, force_spectral=force)


def sweep(cfg: ExperimentConfig, *, force_spectral: bool = False, jobs: int | None = None) -> list[CompareResult]:
    """run_compare over every eps in the config, optionally in parallel processes."""
    jobs = cfg.jobs if jobs is None else jobs
    if jobs > 1 and len(cfg.eps) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(cfg.eps))) as pool:
            return list(pool.map(_compare_job, [(cfg, e, force_spectral) for e in cfg.eps]))
    amp = _prepare_amplitude(cfg, force_spectral)
    return [run_compare(cfg, e, force_spectral=force_spectral, amplitude=amp) for e in cfg.eps]


def build_report(cfg: ExperimentConfig, entries: list[CompareResult]) -> ConvergenceReport:
    finals = [(r.eps, float(r.errors[-1])) for r in entries]
    rate = None
    if len(finals) >= 3 and all(e > 0 for _, e in finals):
        rate = fit_rate(finals)
    envelopes = {r.eps: _try_envelope(r.times, r.errors) for r in entries}
    windows = {r.eps: ehrenfest_window(r.times, r.errors, cfg.error_threshold) for r in entries}
    return ConvergenceReport(entries, rate, envelopes, windows, cfg.error_threshold)


def _write_errors(out: Path, entries, cfg: ExperimentConfig, force_spectral: bool) -> list[str]:
    rows = []
    for r in entries:
        for i, t in enumerate(r.times):
            rows.append([_fmt(r.eps), _fmt(t), _fmt(r.errors[i]), _fmt(r.mass_psi[i]), _fmt(r.mass_phi[i])])
    _write_csv(out / "errors.csv", ["eps", "t", "error", "mass_psi", "mass_phi"], rows)
    files = ["errors.csv"]
    if cfg.save_fields:
        for r in entries:
            for tag, f in (("psi", r.psi_final), ("phi", r.phi_final)):
                name = f"{tag}_eps{r.eps:g}_T.rpk"
                write_snapshot(out / name, f)
                files.append(name)
    return files


def _compare_summary(entries, force_spectral) -> dict:
    s = {"amplitude_source": "spectral" if force_spectral else "auto"}
    for r in entries:
        s[f"error_T[eps={r.eps:g}]"] = _fmt(r.errors[-1])
        s[f"mass_drift[eps={r.eps:g}]"] = _fmt(np.max(np.abs(r.mass_psi - r.mass_psi[0])) / r.mass_psi[0])
    return s


def run_compare_all(cfg: ExperimentConfig, out=None, seed=None, *, force_spectral=False, jobs=None):
    entries = sweep(cfg, force_spectral=force_spectral, jobs=jobs)
    out = _prepare_out(out)
    if out is not None:
        files = _write_errors(out, entries, cfg, force_spectral)
        write_manifest(out, cfg, "compare", _seed(cfg, seed), _compare_summary(entries, force_spectral), files)
    return entries


def run_converge(cfg: ExperimentConfig, out=None, seed=None, *, force_spectral=False, jobs=None) -> ConvergenceReport:
    entries = sweep(cfg, force_spectral=force_spectral, jobs=jobs)
    report = build_report(cfg, entries)
    out = _prepare_out(out)
    if out is not None:
        files = _write_errors(out, entries, cfg, force_spectral)
        _write_csv(out / "rate.csv", ["eps", "error_T"], [[_fmt(e), _fmt(v)] for e, v in report.final_errors()])
        rows = []
        for r in entries:
            fit = report.envelopes[r.eps]
            vals = ["", "", "", "", ""] if fit is None else [
                _fmt(fit.rate), _fmt(fit.half_width), _fmt(fit.r2), _fmt(fit.t_start), str(fit.n)
            ]
            rows.append([_fmt(r.eps)] + vals + [_fmt(report.windows[r.eps])])
        _write_csv(
            out / "envelope.csv", ["eps", "C", "C_half_width", "r2", "t_start", "n", "ehrenfest_window"], rows
        )
        files += ["rate.csv", "envelope.csv"]
        summary = _compare_summary(entries, force_spectral)
        if report.rate is not None:
            lo, hi = report.rate.interval
            summary.update(
                slope=_fmt(report.rate.slope),
                slope_ci95=f"[{lo!r}, {hi!r}]",
                intercept=_fmt(report.rate.intercept),
                slope_r2=_fmt(report.rate.r2),
            )
        summary["error_threshold"] = _fmt(cfg.error_threshold)
        write_manifest(out, cfg, "converge", _seed(cfg, seed), summary, files)
    return report


# ---------------------------------------------------------------- audit

AUDIT_KEYS = ("invertible", "symmetry", "F", "G", "real_part", "positive_definite", "sqrt_det")


@dataclass
class AuditRow:
    case: str
    invariant: str
    value: float
    tolerance: float
    passed: bool


def _batch_matrices(d: int, n_random: int, seed: int) -> PacketMatrices:
    eye = np.eye(d)
    C = np.concatenate([np.zeros((1, d, d)), random_perturbations(n_random, d, seed)])
    A = np.broadcast_to(eye, C.shape).astype(complex)
    return PacketMatrices.from_arrays(A, eye + 1j * C)


def _audit_rows(case: str, res: dict) -> list[AuditRow]:
    worst = _max_residuals(res)
    rows = [AuditRow(case, "invertible", worst["min_singular"], SINGULAR_TOL, worst["min_singular"] > SINGULAR_TOL)]
    for key in ("symmetry", "F", "G", "real_part"):
        rows.append(AuditRow(case, key, worst[key], WARN_TOL, worst[key] <= WARN_TOL))
    rows.append(AuditRow(case, "positive_definite", worst["min_eig"], 0.0, worst["min_eig"] > 0))
    rows.append(AuditRow(case, "sqrt_det", worst["sqrt_det"], 1e-10, worst["sqrt_det"] <= 1e-10))
    return rows


def _corrupted_row(d: int) -> AuditRow:
    C = np.zeros((d, d))
    C[0, 1] = 0.5  # non-symmetric: BA^-1 = I + iC is not symmetric
    try:
        PacketMatrices.from_arrays(np.eye(d), np.eye(d) + 1j * C)
    except InvariantError as exc:
        return AuditRow("corrupted_B0", f"rejected:{exc.condition}", exc.residual, WARN_TOL, True)
    return AuditRow("corrupted_B0", "rejected", 0.0, WARN_TOL, False)


def audit_invariants(cfg: ExperimentConfig, out=None, seed: int | None = None) -> list[AuditRow]:
    """Propagate identity plus seeded perturbed(C) pairs over every case; one row per invariant."""
    seed = _seed(cfg, seed)
    pots = cfg.audit.potentials or [cfg.potential]
    if cfg.audit.omegas is not None:
        omegas = cfg.audit.omegas
    elif cfg.omega_z == 0.0 and not isinstance(cfg.omega, list):
        omegas = [0.0]
    else:
        omegas = [0.0, cfg.omega]
    M0 = _batch_matrices(cfg.dim, cfg.audit.n_random, seed)
    rows = []
    for pc in pots:
        V = pc.build(cfg.dim)
        for om in omegas:
            cfg_om = cfg.model_copy(update={"omega": om})
            case = f"{V.name}/omega={om}"
            try:
                traj = _trajectory(cfg_om, potential=V)
                path = propagate_matrices(M0, traj, abort_tol=np.inf)
            except (InvariantError, ExperimentError) as exc:
                rows.append(AuditRow(case, getattr(exc, "condition", "flow"), float("nan"), WARN_TOL, False))
                continue
            rows.extend(_audit_rows(case, path.residuals()))
    rows.append(_corrupted_row(cfg.dim))

    out = _prepare_out(out)
    if out is not None:
        _write_csv(
            out / "audit.csv",
            ["case", "invariant", "value", "tolerance", "pass"],
            [[r.case, r.invariant, _fmt(r.value), _fmt(r.tolerance), "PASS" if r.passed else "FAIL"] for r in rows],
        )
        summary = {
            "members": 1 + cfg.audit.n_random,
            "rows": len(rows),
            "failures": sum(not r.passed for r in rows),
        }
        write_manifest(out, cfg, "audit", seed, summary, ["audit.csv"])
    return rows


def _seed(cfg: ExperimentConfig, seed: int | None) -> int:
    return cfg.seed if seed is None else seed
