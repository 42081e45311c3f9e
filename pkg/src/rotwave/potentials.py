"""
External potentials and the rescaled effective potential seen by the amplitude.

All evaluators are vectorised over leading axes: ``value`` maps ``(..., d)``
to ``(...)``, ``gradient`` to ``(..., d)`` and ``hessian`` to ``(..., d, d)``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np


class PotentialModel:
    """Smooth sub-quadratic potential with analytic derivatives.

    Subclasses set ``hessian_bound`` (sup of the spectral norm of the Hessian)
    and ``third_bound`` (sup of the norm of the third derivative tensor).
    """

    name = "potential"
    quadratic = False
    hessian_bound: float = 0.0
    third_bound: float = 0.0

    def __init__(self, dim: int):
        if dim not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {dim}")
        self.dim = dim

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}(dim={self.dim}{', ' if args else ''}{args})"

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected trailing dimension {self.dim}, got shape {x.shape}")
        return x


class ZeroPotential(PotentialModel):
    name = "zero"
    quadratic = True

    def value(self, x):
        x = self._check(x)
        return np.zeros(x.shape[:-1])

    def gradient(self, x):
        return np.zeros_like(self._check(x))

    def hessian(self, x):
        x = self._check(x)
        return np.zeros(x.shape[:-1] + (self.dim, self.dim))


class HarmonicPotential(PotentialModel):
    """V(x) = sum_j gamma_j x_j**2 (isotropic case: gamma_j = 1/2)."""

    name = "harmonic"
    quadratic = True

    def __init__(self, gammas: Sequence[float]):
        gammas = np.asarray(gammas, dtype=float)
        super().__init__(gammas.size)
        if np.any(gammas <= 0) or not np.all(np.isfinite(gammas)):
            raise ValueError(f"anisotropy coefficients must be positive, got {gammas.tolist()}")
        self.gammas = gammas
        self.hessian_bound = float(2 * gammas.max())
        self.third_bound = 0.0

    def params(self):
        return {"gammas": self.gammas.tolist()}

    def value(self, x):
        x = self._check(x)
        return np.sum(self.gammas * x**2, axis=-1)

    def gradient(self, x):
        x = self._check(x)
        return 2 * self.gammas * x

    def hessian(self, x):
        x = self._check(x)
        return np.broadcast_to(np.diag(2 * self.gammas), x.shape[:-1] + (self.dim, self.dim)).copy()


class HarmonicCosinePotential(PotentialModel):
    """V(x) = |x|**2 / 2 + a cos(k.x).

    Non-quadratic with bounded Hessian, so the cubic Taylor remainder is
    nonzero wherever sin(k.q) != 0.
    """

    name = "harmonic_plus_cosine"

    def __init__(self, a: float, k: Sequence[float]):
        k = np.asarray(k, dtype=float)
        super().__init__(k.size)
        if not np.isfinite(a):
            raise ValueError("cosine amplitude must be finite")
        self.a = float(a)
        self.k = k
        k2 = float(k @ k)
        self.hessian_bound = 1.0 + abs(self.a) * k2
        self.third_bound = abs(self.a) * k2**1.5

    def params(self):
        return {"a": self.a, "k": self.k.tolist()}

    def value(self, x):
        x = self._check(x)
        return 0.5 * np.sum(x**2, axis=-1) + self.a * np.cos(x @ self.k)

    def gradient(self, x):
        x = self._check(x)
        s = np.sin(x @ self.k)[..., None]
        return x - self.a * s * self.k

    def hessian(self, x):
        x = self._check(x)
        c = np.cos(x @ self.k)[..., None, None]
        return np.eye(self.dim) - self.a * c * np.outer(self.k, self.k)


def builtin_potential(kind: str, dim: int = 2, **params) -> PotentialModel:
    """Construct one of the builtin potentials by name.

    ``kind`` is one of ``zero``, ``harmonic_isotropic``,
    ``harmonic_anisotropic`` (needs ``gammas``) or ``harmonic_plus_cosine``
    (needs ``a``; ``k`` defaults to the first unit vector).
    """
    if kind == "zero":
        _no_extra(kind, params)
        return ZeroPotential(dim)
    if kind == "harmonic_isotropic":
        _no_extra(kind, params)
        return HarmonicPotential([0.5] * dim)
    if kind == "harmonic_anisotropic":
        gammas = params.pop("gammas")
        _no_extra(kind, params)
        return HarmonicPotential(gammas)
    if kind == "harmonic_plus_cosine":
        a = params.pop("a")
        k = params.pop("k", None)
        if k is None:
            k = np.eye(dim)[0]
        _no_extra(kind, params)
        return HarmonicCosinePotential(a, k)
    raise ValueError(f"unknown potential kind {kind!r}")


def _no_extra(kind, params):
    if params:
        raise ValueError(f"unexpected parameters for {kind!r}: {sorted(params)}")


def effective_potential(V: PotentialModel, q, eps: float, y):
    """Rescaled potential (V(q + sqrt(eps) y) - V(q) - sqrt(eps) y.grad V(q)) / eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    q = np.asarray(q, dtype=float)
    y = np.asarray(y, dtype=float)
    se = np.sqrt(eps)
    return (V.value(q + se * y) - V.value(q) - se * (y @ V.gradient(q))) / eps


def hessian_form(V: PotentialModel, q, y):
    """Quadratic limit y.Q y / 2 with Q the Hessian of V at q."""
    y = np.asarray(y, dtype=float)
    Q = V.hessian(np.asarray(q, dtype=float))
    return 0.5 * np.einsum("...i,ij,...j->...", y, Q, y)


def taylor_remainder(V: PotentialModel, q, eps: float, y):
    """Difference between the effective potential and its quadratic limit."""
    if V.quadratic:
        if eps <= 0:
            raise ValueError("eps must be positive")
        return np.zeros(np.shape(y)[:-1])
    return effective_potential(V, q, eps, y) - hessian_form(V, q, y)


def remainder_constant(V: PotentialModel) -> float:
    """C_V with |remainder| <= C_V sqrt(eps) |y|**3."""
    return V.third_bound / 6.0
