"""Exact-on-the-grid rotations: quarter-turn permutations plus three FFT shears."""
from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .grid import ComplexField


def _quarter_turn(values: np.ndarray, turns: int) -> np.ndarray:
    # g(x1, x2) = f(x2, -x1); node -x_i is index (N - i) mod N on the periodic grid
    N = values.shape[0]
    neg = (-np.arange(N)) % N
    out = values
    for _ in range(turns % 4):
        out = out[:, neg].T
    return out


def _shear_axis0(values, grid, a):
    # f(x1 + a x2, x2): shift along axis 0 by -a x2 per column
    F = sfft.fft(values, axis=0)
    F *= np.exp(1j * grid.k[:, None] * a * grid.x[None, :])
    return sfft.ifft(F, axis=0)


def _shear_axis1(values, grid, b):
    # f(x1, x2 + b x1)
    F = sfft.fft(values, axis=1)
    F *= np.exp(1j * grid.k[None, :] * b * grid.x[:, None])
    return sfft.ifft(F, axis=1)


def rotate_field(field: ComplexField, theta: float) -> ComplexField:
    """Rotate the field counter-clockwise by ``theta``: g(x) = f(Rot(-theta) x).

    The angle is split into whole quarter turns (node permutations) and a
    residual |r| <= pi/4 applied as shear-shear-shear with Fourier shifts.
    """
    turns = int(np.round(theta / (np.pi / 2)))
    r = theta - turns * np.pi / 2
    g = field.grid
    v = _quarter_turn(field.values, turns)
    if r != 0.0:
        a = np.tan(0.5 * r)
        b = -np.sin(r)
        v = _shear_axis0(v, g, a)
        v = _shear_axis1(v, g, b)
        v = _shear_axis0(v, g, a)
    out = ComplexField(g, np.array(v), field.t)
    return out
