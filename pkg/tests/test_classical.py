import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from rotwave.classical import (
    ClassicalState,
    FlowError,
    RotationAxis,
    canonical_momentum,
    cross,
    energy,
    flow_rhs,
    growth_envelope,
    integrate_trajectory,
    rotating_energy,
)
from rotwave.hagedorn import central_derivative
from rotwave.potentials import builtin_potential

vec3 = st.tuples(*[st.floats(-5, 5, allow_nan=False)] * 3).map(np.array)


@settings(max_examples=50, deadline=None)
@given(vec3, vec3)
def test_cross_matches_numpy(a, b):
    np.testing.assert_allclose(cross(a, b), np.cross(a, b), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(vec3, vec3)
def test_rotation_matrix_acts_as_minus_cross(w, y):
    rot = RotationAxis(w)
    np.testing.assert_allclose(rot.matrix @ y, -np.cross(w, y), atol=1e-12)
    np.testing.assert_allclose(rot.matrix, -rot.matrix.T)


@settings(max_examples=30, deadline=None)
@given(vec3, st.floats(-3, 3))
def test_propagator_matches_expm(w, t):
    rot = RotationAxis(w)
    np.testing.assert_allclose(rot.propagator(t), expm(t * rot.matrix), atol=1e-11)


def test_planar_axis():
    rot = RotationAxis(0.7)
    np.testing.assert_array_equal(rot.omega, [0, 0, 0.7])
    assert rot.planar
    np.testing.assert_allclose(rot.block(2), [[0, 0.7], [-0.7, 0]])
    assert not RotationAxis([1.0, 0, 0]).planar


def test_rhs_free_motion():
    V = builtin_potential("zero")
    dq, dp, dS = flow_rhs(ClassicalState(0, [1, 0], [0, 1]), V, RotationAxis(0))
    np.testing.assert_array_equal(dq, [0, 1])
    np.testing.assert_array_equal(dp, [0, 0])
    assert dS == 0.5


def test_rhs_harmonic():
    V = builtin_potential("harmonic_isotropic")
    dq, dp, dS = flow_rhs(ClassicalState(0, [1, 0], [0, 0]), V, RotationAxis(0))
    np.testing.assert_array_equal(dq, [0, 0])
    np.testing.assert_array_equal(dp, [-1, 0])
    assert dS == -0.5


def test_rhs_rotation_hand_cross_product():
    V = builtin_potential("zero", dim=3)
    dq, dp, _ = flow_rhs(ClassicalState(0, [1, 0, 0], [0, 1, 0]), V, RotationAxis([0, 0, 1]))
    np.testing.assert_array_equal(dq, [0, 2, 0])
    np.testing.assert_array_equal(dp, [-1, 0, 0])


def test_energy_examples():
    Z3 = builtin_potential("zero", dim=3)
    H = builtin_potential("harmonic_isotropic")
    assert energy(ClassicalState(0, [0, 0], [0, 0]), H, RotationAxis(0)) == 0.0
    assert energy(ClassicalState(0, [1, 0], [0, 1]), H, RotationAxis(0)) == 1.0
    s = ClassicalState(0, [1, 0, 0], [0, 1, 0])
    assert energy(s, Z3, RotationAxis([0, 0, 1])) == 1.5
    assert rotating_energy(s, Z3, RotationAxis([0, 0, 1])) == 1.5


@settings(max_examples=40, deadline=None)
@given(vec3, vec3, vec3)
def test_energies_agree_identically(q, p, w):
    V = builtin_potential("harmonic_anisotropic", dim=3, gammas=[0.5, 1.0, 2.0])
    s = ClassicalState(0, q, p)
    rot = RotationAxis(w)
    scale = 1 + np.abs(q).max() ** 2 + np.abs(p).max() ** 2 + np.abs(w).max() ** 2 * np.abs(q).max() ** 2
    assert rotating_energy(s, V, rot) == pytest.approx(energy(s, V, rot), abs=1e-12 * scale)


def test_canonical_momentum_examples():
    assert np.array_equal(canonical_momentum(ClassicalState(0, [1, 2], [3, 4]), RotationAxis(0)), [3, 4])
    pi = canonical_momentum(ClassicalState(0, [1, 0, 0], [0, 0, 0]), RotationAxis([0, 0, 1]))
    np.testing.assert_array_equal(pi, [0, 1, 0])


def test_free_flow_exact():
    V = builtin_potential("zero")
    tr = integrate_trajectory([1, -1], [0.5, 2.0], V, RotationAxis(0), 2.0, 0.1)
    np.testing.assert_allclose(tr.q[-1], [2.0, 3.0], atol=1e-13)
    np.testing.assert_allclose(tr.p[-1], [0.5, 2.0], atol=1e-14)
    assert tr.S[-1] == pytest.approx(0.5 * (0.25 + 4.0) * 2.0, abs=1e-13)


def test_closed_harmonic_orbit():
    V = builtin_potential("harmonic_isotropic")
    # T/dt is not integral; the integrator adjusts dt to 2 pi / 6283
    with pytest.warns(UserWarning):
        tr = integrate_trajectory([1, 0], [0, 0], V, RotationAxis(0), 2 * np.pi, 1e-3)
    assert np.linalg.norm(tr.q[-1] - [1, 0]) <= 1e-10


def test_free_rotation_preserves_momentum_norm():
    V = builtin_potential("zero", dim=3)
    w = np.array([0.3, -0.4, 1.1])
    rot = RotationAxis(w)
    p0 = np.array([1.0, 2.0, -0.5])
    tr = integrate_trajectory([0, 0, 0], p0, V, rot, 3.0, 1e-3)
    assert abs(np.linalg.norm(tr.p[-1]) - np.linalg.norm(p0)) <= 1e-10
    # p' = Omega x p = -R p, hence p(T) = exp(-T R) p0
    np.testing.assert_allclose(tr.p[-1], expm(-3.0 * rot.matrix) @ p0, atol=1e-10)


def test_energy_drift_harmonic_rotation():
    V = builtin_potential("harmonic_plus_cosine", a=0.1, k=[1, 0])
    tr = integrate_trajectory([1, 0], [0, 1], V, RotationAxis(0.5), 10.0, 1e-3)
    H = tr.energies()
    assert np.max(np.abs(H - H[0])) <= 1e-10


def test_time_reversal():
    V = builtin_potential("harmonic_plus_cosine", a=0.1, k=[1, 0])
    rot = RotationAxis(0.5)
    fwd = integrate_trajectory([1, 0], [0, 1], V, rot, 1.0, 1e-3)
    back = integrate_trajectory(fwd.q[-1], fwd.p[-1], V, rot, 1.0, 1e-3, reverse=True, t0=1.0)
    assert np.linalg.norm(back.q[-1] - [1, 0]) <= 1e-9
    assert np.linalg.norm(back.p[-1] - [0, 1]) <= 1e-9
    assert back.t[-1] == pytest.approx(0.0, abs=1e-12)


def test_action_matches_trapezoid_quadrature():
    V = builtin_potential("harmonic_plus_cosine", a=0.1, k=[1, 0])
    errs = []
    for dt in (2e-2, 1e-2):
        tr = integrate_trajectory([1, 0], [0, 1], V, RotationAxis(0.5), 1.0, dt)
        lag = 0.5 * np.sum(tr.p**2, axis=1) - V.value(tr.q)
        errs.append(abs(tr.S[-1] - np.trapezoid(lag, tr.t)))
    assert errs[1] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_canonical_momentum_second_order_residual():
    V = builtin_potential("harmonic_isotropic")
    rot = RotationAxis(0.7)
    dt = 1e-3
    tr = integrate_trajectory([1, 0], [0.2, 1], V, rot, 2.0, dt)
    pi = np.array([canonical_momentum(tr.state(n), rot) for n in range(len(tr))])
    dq = central_derivative(tr.q, dt)
    dpi = central_derivative(pi, dt)
    q, pi_i = tr.q[2:-2], pi[2:-2]
    w = rot.omega
    q3 = np.pad(q, ((0, 0), (0, 1)))
    pi3 = np.pad(pi_i, ((0, 0), (0, 1)))
    rhs = -V.gradient(q) + (2 * np.cross(w, pi3) - np.cross(w, np.cross(w, q3)))[:, :2]
    assert np.abs(dq - pi_i).max() <= 1e-8
    assert np.abs(dpi - rhs).max() <= 1e-8


def test_growth_envelope_anisotropic_rotation():
    V = builtin_potential("harmonic_anisotropic", gammas=[0.5, 2.0])
    tr = integrate_trajectory([1, 0], [0, 1], V, RotationAxis(1.5), 10.0, 1e-3)
    c0, c1 = growth_envelope(tr)
    y = np.log1p(np.linalg.norm(tr.q, axis=1))
    assert np.all(y <= c0 * tr.t + c1 + 1e-12)
    assert 0.1 < c0 < 1.0
    assert np.linalg.norm(tr.q[-1]) > 10


def test_overflow_guard():
    V = builtin_potential("harmonic_anisotropic", gammas=[0.5, 2.0])
    with pytest.raises(FlowError, match="overflow"):
        integrate_trajectory([1, 0], [0, 1], V, RotationAxis(1.5), 10.0, 1e-3, overflow=5.0)


def test_planar_requires_axis_along_z():
    V = builtin_potential("harmonic_isotropic")
    with pytest.raises(ValueError):
        integrate_trajectory([1, 0], [0, 1], V, RotationAxis([1, 0, 0]), 1.0, 0.1)


def test_non_integral_step_count_warns():
    V = builtin_potential("harmonic_isotropic")
    with pytest.warns(UserWarning):
        tr = integrate_trajectory([1, 0], [0, 1], V, RotationAxis(0), 1.0, 0.3)
    assert tr.t[-1] == pytest.approx(1.0)


def test_trajectory_csv(tmp_path):
    V = builtin_potential("harmonic_isotropic")
    tr = integrate_trajectory([1, 0], [0, 1], V, RotationAxis(0.2), 0.5, 0.1)
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,q1,q2,p1,p2,S,H,H_rot"
    assert len(lines) == len(tr) + 1
