"""
Experiment configuration files (YAML) and their schema.

Unknown keys anywhere in the tree are rejected, so a typo such as ``esp:``
fails loudly instead of silently running with defaults.

Example::

    potential: {kind: harmonic_plus_cosine, a: 0.1, k: [1, 0]}
    omega: 0.5
    lam: 0.0
    mode: linear
    eps: [0.2, 0.1, 0.05, 0.025]
    T: 1.0
    dt: 1.0e-3
    grid: {N: 512, L: 8.0}
    amplitude_grid: {N: 64, L: 10.0}
    initial: {q0: [1, 0], p0: [0, 1], matrices: {kind: identity}}
    snapshot_every: 0.05
"""
from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..classical import RotationAxis
from ..hagedorn import PacketMatrices, make_initial_matrices
from ..potentials import PotentialModel, builtin_potential
from ..spectral import Grid

EXPERIMENTS = ("trajectory", "gaussian", "amplitude", "compare", "converge", "audit")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PotentialConfig(_Strict):
    kind: Literal["zero", "harmonic_isotropic", "harmonic_anisotropic", "harmonic_plus_cosine"]
    gammas: Optional[list[float]] = None
    a: Optional[float] = None
    k: Optional[list[float]] = None

    def build(self, dim: int) -> PotentialModel:
        params = {}
        if self.kind == "harmonic_anisotropic":
            if self.gammas is None:
                raise ValueError("harmonic_anisotropic needs gammas")
            if len(self.gammas) != dim:
                raise ValueError(f"gammas must have {dim} entries")
            params["gammas"] = self.gammas
        elif self.gammas is not None:
            raise ValueError(f"gammas is not a parameter of {self.kind}")
        if self.kind == "harmonic_plus_cosine":
            if self.a is None:
                raise ValueError("harmonic_plus_cosine needs a")
            params["a"] = self.a
            if self.k is not None:
                if len(self.k) != dim:
                    raise ValueError(f"k must have {dim} entries")
                params["k"] = self.k
        elif self.a is not None or self.k is not None:
            raise ValueError(f"a/k are not parameters of {self.kind}")
        return builtin_potential(self.kind, dim=dim, **params)


class GridConfig(_Strict):
    N: int = 512
    L: float = 8.0

    def build(self) -> Grid:
        return Grid(self.N, self.L)


class MatricesConfig(_Strict):
    kind: Literal["identity", "diag_width", "perturbed"] = "identity"
    D: Optional[list[float]] = None
    C: Optional[list[list[float]]] = None

    def build(self, dim: int) -> PacketMatrices:
        return make_initial_matrices(self.kind, dim, D=self.D, C=self.C)


class InitialConfig(_Strict):
    q0: list[float]
    p0: list[float]
    matrices: MatricesConfig = MatricesConfig()

    @model_validator(mode="after")
    def _dims(self):
        if len(self.q0) != len(self.p0) or len(self.q0) not in (2, 3):
            raise ValueError("q0 and p0 must both have 2 or 3 entries")
        return self


class AuditConfig(_Strict):
    n_random: int = Field(20, ge=0)
    potentials: Optional[list[PotentialConfig]] = None
    omegas: Optional[list[Union[float, list[float]]]] = None


class ExperimentConfig(_Strict):
    experiment: Optional[Literal[EXPERIMENTS]] = None
    potential: PotentialConfig
    omega: Union[float, list[float]] = 0.0
    lam: float = 0.0
    mode: Literal["linear", "cubic"] = "linear"
    alpha: Optional[float] = None
    eps: list[float] = [1.0]
    T: float = Field(gt=0)
    dt: float = Field(gt=0)
    grid: GridConfig = GridConfig()
    amplitude_grid: GridConfig = GridConfig(N=64, L=10.0)
    initial: InitialConfig
    snapshot_times: Optional[list[float]] = None
    snapshot_every: Optional[float] = Field(None, gt=0)
    save_fields: bool = False
    error_threshold: float = Field(0.1, gt=0)
    audit: AuditConfig = AuditConfig()
    seed: int = Field(0, ge=0)
    jobs: int = Field(1, ge=1)

    @field_validator("eps")
    @classmethod
    def _eps_positive(cls, v):
        if not v or any(not e > 0 for e in v):
            raise ValueError("eps list must be non-empty and strictly positive")
        return v

    @model_validator(mode="after")
    def _critical(self):
        if self.alpha is not None and self.alpha != self.critical_alpha:
            raise ValueError(
                f"alpha is fixed to the critical value 1 + d/2 = {self.critical_alpha}, got {self.alpha}"
            )
        if isinstance(self.omega, list) and len(self.omega) != 3:
            raise ValueError("vector omega must have three entries")
        if self.dim == 2 and isinstance(self.omega, list) and (self.omega[0] or self.omega[1]):
            raise ValueError("planar runs need omega along the third axis")
        return self

    @property
    def dim(self) -> int:
        return len(self.initial.q0)

    @property
    def critical_alpha(self) -> float:
        return 1 + self.dim / 2

    def rotation(self) -> RotationAxis:
        return RotationAxis(self.omega)

    @property
    def omega_z(self) -> float:
        """Scalar rotation rate for planar grid solves."""
        return float(self.rotation().omega[2])

    def build_potential(self) -> PotentialModel:
        return self.potential.build(self.dim)

    def times(self) -> list[float]:
        """Snapshot times (always including 0 and T), rounded onto the dt lattice."""
        if self.snapshot_times is not None:
            ts = sorted(set([0.0, self.T] + list(self.snapshot_times)))
        elif self.snapshot_every is not None:
            n = int(round(self.T / self.snapshot_every))
            ts = [self.snapshot_every * i for i in range(n + 1)]
            ts[-1] = self.T
        else:
            ts = [0.0, self.T]
        out = []
        for t in ts:
            m = int(round(t / self.dt))
            if abs(m * self.dt - t) > 1e-9 * max(1.0, t) or t > self.T * (1 + 1e-12):
                raise ValueError(f"snapshot time {t} is not a multiple of dt={self.dt} within [0, T]")
            out.append(m * self.dt)
        return out

    def echo(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json", exclude_none=True), sort_keys=True)


def load_config(path) -> ExperimentConfig:
    data = yaml.safe_load(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    return ExperimentConfig.model_validate(data)


def as_array(v) -> np.ndarray:
    return np.asarray(v, dtype=float)
