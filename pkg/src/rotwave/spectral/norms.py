"""Spectral derivatives, weighted Sigma^k norms and resolution diagnostics."""
from __future__ import annotations

import itertools
import warnings

import numpy as np
import scipy.fft as sfft

from .grid import ComplexField


def spectral_tail_fraction(field: ComplexField, band: float = 0.5) -> float:
    """Fraction of spectral energy with max(|xi_1|, |xi_2|) > band * k_max."""
    F = np.abs(sfft.fft2(field.values)) ** 2
    total = F.sum()
    if total == 0:
        return 0.0
    k = np.abs(field.grid.k)
    cut = band * field.grid.k_max
    mask = (k[:, None] > cut) | (k[None, :] > cut)
    return float(F[mask].sum() / total)


def derivative(field: ComplexField, beta) -> np.ndarray:
    """Spectral partial derivative d^beta (Nyquist mode dropped for odd orders)."""
    b1, b2 = beta
    if b1 == b2 == 0:
        return field.values.copy()
    g = field.grid
    k = g.k.copy()
    ks = []
    for b in (b1, b2):
        kk = k.copy()
        if b % 2:
            kk[g.N // 2] = 0.0
        ks.append((1j * kk) ** b)
    F = sfft.fft2(field.values)
    return sfft.ifft2(F * ks[0][:, None] * ks[1][None, :])


def _multi_indices(order):
    return [(a, order - a) for a in range(order + 1)]


def sigma_terms(field: ComplexField, k: int) -> dict:
    """All terms |x^alpha d^beta f| with |alpha| + |beta| <= k, keyed by (alpha, beta)."""
    if not 0 <= k <= 3:
        raise ValueError("Sigma^k norms are implemented for k <= 3")
    g = field.grid
    X1, X2 = g.mesh()
    out = {}
    for total in range(k + 1):
        for na in range(total + 1):
            for alpha, beta in itertools.product(_multi_indices(na), _multi_indices(total - na)):
                dv = derivative(field, beta)
                w = X1 ** alpha[0] * X2 ** alpha[1]
                out[(alpha, beta)] = float(np.sqrt(np.sum(np.abs(w * dv) ** 2)) * g.h)
    return out


def sigma_norm(field: ComplexField, k: int, tail_tol: float = 1e-6) -> float:
    """Sum over |alpha| + |beta| <= k of the discrete L^2 norms of x^alpha d^beta f."""
    if k > 0:
        tail = spectral_tail_fraction(field)
        if tail > tail_tol:
            warnings.warn(
                f"spectral tail fraction {tail:.2e} exceeds {tail_tol:g}; derivative norms unreliable",
                stacklevel=2,
            )
    return float(sum(sigma_terms(field, k).values()))
