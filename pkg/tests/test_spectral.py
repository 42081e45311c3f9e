import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotwave.classical import RotationAxis, integrate_trajectory
from rotwave.hagedorn import gaussian_function, make_initial_matrices, propagate_matrices
from rotwave.potentials import builtin_potential
from rotwave.spectral import (
    BoundaryMassError,
    ComplexField,
    Grid,
    SolverSpec,
    derivative,
    l2_distance,
    read_snapshot,
    rotate_field,
    sigma_norm,
    sigma_terms,
    solve,
    spectral_tail_fraction,
    step,
    trig_interpolate,
    write_snapshot,
)
from rotwave.spectral.snapshot import parse_snapshot, snapshot_bytes


def gaussian(grid, center=(0.0, 0.0), widths=(1.0, 1.0), kick=(0.0, 0.0)):
    def f(y):
        z1 = (y[..., 0] - center[0]) / widths[0]
        z2 = (y[..., 1] - center[1]) / widths[1]
        return np.exp(-0.5 * (z1**2 + z2**2) + 1j * (kick[0] * y[..., 0] + kick[1] * y[..., 1]))

    return ComplexField.from_function(grid, f)


def generic(grid):
    """Non-radial, complex, rapidly decaying test field."""

    def f(y):
        y1, y2 = y[..., 0], y[..., 1]
        return (1 + 0.5 * y1 + 0.3j * y2 * y1) * np.exp(-0.5 * (y1**2 + (y2 / 0.7) ** 2) - 0.3 * y1 * y2 + 0.4j * y2)

    return ComplexField.from_function(grid, f)


# ---------------------------------------------------------------- grid


def test_grid_layout():
    g = Grid(16, 4.0)
    assert g.h == 0.5
    assert g.x[0] == -4.0 and g.x[-1] == 3.5
    assert g.k[1] == pytest.approx(2 * np.pi / 8.0)
    X1, X2 = g.mesh()
    assert X1[3, 0] == g.x[3] and X2[0, 5] == g.x[5]
    assert g.points().shape == (16, 16, 2)


@pytest.mark.parametrize("N, L", [(12, 1.0), (4, 1.0), (16, 0.0)])
def test_grid_rejects_bad_parameters(N, L):
    with pytest.raises(ValueError):
        Grid(N, L)


def test_field_rejects_bad_values():
    g = Grid(8, 1.0)
    with pytest.raises(ValueError):
        ComplexField(g, np.zeros((8, 4)))
    bad = np.zeros((8, 8), complex)
    bad[1, 1] = np.nan
    with pytest.raises(ValueError):
        ComplexField(g, bad)


def test_l2_distance_spike():
    g = Grid(16, 2.0)
    f = gaussian(g)
    v = f.values.copy()
    v[3, 7] += 0.25 - 0.5j
    assert l2_distance(f, f) == 0.0
    assert l2_distance(f, f.with_values(v)) == pytest.approx(abs(0.25 - 0.5j) * g.h, rel=1e-12)
    with pytest.raises(ValueError):
        l2_distance(f, gaussian(Grid(32, 2.0)))


def test_trig_interpolate_reproduces_nodes_and_band_limited_functions():
    g = Grid(32, np.pi)
    f = ComplexField.from_function(g, lambda y: np.exp(1j * (3 * y[..., 0] - 2 * y[..., 1])) + np.cos(y[..., 1]))
    np.testing.assert_allclose(trig_interpolate(f, g.x, g.x), f.values, atol=1e-12)
    x1 = np.linspace(-3, 3, 7)
    x2 = np.linspace(-2.5, 3.1, 5)
    exact = np.exp(1j * (3 * x1[:, None] - 2 * x2[None, :])) + np.cos(x2)[None, :]
    np.testing.assert_allclose(trig_interpolate(f, x1, x2), exact, atol=1e-12)
    out = trig_interpolate(f, [10.0], [0.0], outside="zero")
    assert out[0, 0] == 0


# ---------------------------------------------------------------- solver


def test_plane_wave_phase():
    g = Grid(32, np.pi)
    k = (3, -2)
    f = ComplexField.from_function(g, lambda y: np.exp(1j * (k[0] * y[..., 0] + k[1] * y[..., 1])))
    dt = 0.01
    spec = SolverSpec("amplitude_linear", dt, dt, hessian=np.zeros((2, 2)))
    out = step(f, spec)
    np.testing.assert_allclose(out.values, f.values * np.exp(-0.5j * (k[0] ** 2 + k[1] ** 2) * dt), atol=1e-13)


def test_zero_field_stays_zero():
    g = Grid(16, 4.0)
    spec = SolverSpec("full_cubic", 0.01, 0.1, eps=0.5, lam=1.0, omega=0.3, potential=builtin_potential("zero"))
    out = solve(ComplexField(g, np.zeros((16, 16))), spec)
    assert np.all(out[-1].values == 0)


@settings(max_examples=15, deadline=None)
@given(
    st.sampled_from(["amplitude_linear", "amplitude_cubic", "full_linear", "full_cubic"]),
    st.floats(-2, 2),
    st.floats(-3, 3),
    st.floats(0.05, 1.0),
)
def test_single_step_is_unitary(mode, omega, lam, eps):
    g = Grid(32, 8.0)
    f = generic(g)
    V = builtin_potential("harmonic_plus_cosine", a=0.2, k=[1, 0.5])
    spec = SolverSpec(
        mode, 0.01, 0.01, eps=eps, lam=lam, omega=omega, potential=V, hessian=np.array([[1.0, 0.2], [0.2, 0.5]])
    )
    assert step(f, spec).norm() == pytest.approx(f.norm(), rel=1e-13)


def test_amplitude_matches_gaussian_closed_form():
    g = Grid(256, 8.0)
    V = builtin_potential("harmonic_isotropic")
    T, dt = 0.5, 1e-3
    tr = integrate_trajectory([1, 0], [0, 1], V, RotationAxis(0.0), T, dt / 2)
    M0 = make_initial_matrices()
    path = propagate_matrices(M0, tr)
    v0 = ComplexField.from_function(g, gaussian_function(M0))
    out = solve(v0, SolverSpec("amplitude_linear", dt, T, trajectory=tr))[-1]
    exact = ComplexField.from_function(g, gaussian_function(path.at(T)))
    assert l2_distance(out, exact) <= 1e-6


def test_time_dependent_hessian_gaussian_with_rotation():
    g = Grid(64, 10.0)
    V = builtin_potential("harmonic_plus_cosine", a=0.3, k=[1, 1])
    T, dt = 1.0, 1e-3
    rot = RotationAxis(0.6)
    tr = integrate_trajectory([1, 0], [0, 1], V, rot, T, dt / 2)
    M0 = make_initial_matrices("perturbed", C=[[0.3, 0.1], [0.1, -0.2]])
    path = propagate_matrices(M0, tr)
    v0 = ComplexField.from_function(g, gaussian_function(M0))
    out = solve(v0, SolverSpec("amplitude_linear", dt, T, omega=0.6, trajectory=tr))[-1]
    exact = ComplexField.from_function(g, gaussian_function(path.at(T)))
    assert l2_distance(out, exact) <= 1e-6


def test_cubic_amplitude_conserves_mass():
    g = Grid(128, 14.0)
    V = builtin_potential("harmonic_plus_cosine", a=0.1, k=[1, 0])
    tr = integrate_trajectory([1, 0], [0, 1], V, RotationAxis(0.5), 1.0, 5e-4)
    v0 = ComplexField.from_function(g, gaussian_function(make_initial_matrices()))
    out = solve(v0, SolverSpec("amplitude_cubic", 1e-3, 1.0, lam=2.0, omega=0.5, trajectory=tr))
    assert abs(out[-1].norm() - out[0].norm()) <= 1e-12 * out[0].norm()


def test_strang_order_two_with_rotation():
    g = Grid(128, 10.0)
    f = generic(g)
    V = builtin_potential("harmonic_plus_cosine", a=0.3, k=[1, 0])

    def run(dt):
        spec = SolverSpec("full_cubic", dt, 0.4, eps=1.0, lam=1.0, omega=0.8, potential=V)
        return solve(f, spec)[-1]

    ref = run(0.4 / 512)
    errs = [l2_distance(run(0.4 / n), ref) for n in (16, 32, 64)]
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.1)


def test_rotation_frame_equivalence():
    # radial Hessian: the rotating solution is the non-rotating one turned by omega t
    g = Grid(128, 10.0)
    v0 = generic(g)
    T, dt, omega = 1.0, 1e-3, 0.8
    Q = np.eye(2)
    plain = solve(v0, SolverSpec("amplitude_linear", dt, T, hessian=Q))[-1]
    rotating = solve(v0, SolverSpec("amplitude_linear", dt, T, omega=omega, hessian=Q))[-1]
    assert l2_distance(rotating, rotate_field(plain, omega * T)) <= 1e-5
    assert l2_distance(rotating, plain) > 1e-2


def test_snapshot_times_and_validation():
    g = Grid(32, 10.0)
    spec = SolverSpec("amplitude_linear", 0.01, 0.1, hessian=np.eye(2))
    out = solve(gaussian(g), spec, [0.0, 0.05, 0.1])
    assert [f.t for f in out] == pytest.approx([0.0, 0.05, 0.1])
    with pytest.raises(ValueError):
        solve(gaussian(g), spec, [0.033])
    with pytest.raises(ValueError):
        SolverSpec("amplitude_linear", 0.03, 0.1, hessian=np.eye(2)).steps


def test_boundary_mass_abort():
    g = Grid(128, 10.0)
    moving = gaussian(g, kick=(8.0, 0.0))
    spec = SolverSpec("amplitude_linear", 1e-2, 2.0, hessian=np.zeros((2, 2)))
    with pytest.raises(BoundaryMassError) as info:
        solve(moving, spec)
    assert 0 < info.value.t_last_good < 2.0
    with pytest.raises(BoundaryMassError):
        solve(gaussian(g, center=(9.0, 0.0)), spec)


def test_spec_requires_ingredients():
    with pytest.raises(ValueError):
        SolverSpec("full_linear", 0.1, 1.0)
    with pytest.raises(ValueError):
        SolverSpec("amplitude_linear", 0.1, 1.0)
    with pytest.raises(ValueError):
        SolverSpec("sideways", 0.1, 1.0, hessian=np.eye(2))


def test_critical_coupling():
    V = builtin_potential("zero")
    assert SolverSpec("full_cubic", 0.1, 1.0, eps=0.05, lam=2.0, potential=V).coupling == pytest.approx(0.1)
    assert SolverSpec("amplitude_cubic", 0.1, 1.0, lam=2.0, hessian=np.eye(2)).coupling == 2.0
    assert SolverSpec("full_linear", 0.1, 1.0, eps=0.05, potential=V).coupling == 0.0


# ---------------------------------------------------------------- norms


def test_sigma_norms_of_standard_gaussian():
    g = Grid(128, 10.0)
    f = gaussian(g)
    assert sigma_norm(f, 0) == pytest.approx(np.sqrt(np.pi), rel=1e-12)
    terms = sigma_terms(f, 1)
    moment = np.sqrt(np.pi / 2)
    assert terms[((0, 0), (0, 0))] == pytest.approx(np.sqrt(np.pi), rel=1e-10)
    for key in (((1, 0), (0, 0)), ((0, 1), (0, 0)), ((0, 0), (1, 0)), ((0, 0), (0, 1))):
        assert terms[key] == pytest.approx(moment, abs=1e-8)
    assert sigma_norm(f, 1) == pytest.approx(np.sqrt(np.pi) + 4 * moment, abs=1e-8)
    # second moments: |y1^2 f| = sqrt(3 pi) / 2, |y1 d1 f| = |y1^2 f|
    t2 = sigma_terms(f, 2)
    assert t2[((2, 0), (0, 0))] == pytest.approx(np.sqrt(3 * np.pi) / 2, abs=1e-8)
    assert t2[((1, 0), (1, 0))] == pytest.approx(np.sqrt(3 * np.pi) / 2, abs=1e-8)


def test_spectral_derivative():
    g = Grid(64, np.pi)
    f = ComplexField.from_function(g, lambda y: np.sin(2 * y[..., 0]) * np.cos(3 * y[..., 1]))
    X1, X2 = g.mesh()
    np.testing.assert_allclose(derivative(f, (1, 0)), 2 * np.cos(2 * X1) * np.cos(3 * X2), atol=1e-12)
    np.testing.assert_allclose(derivative(f, (0, 2)), -9 * f.values, atol=1e-11)


def test_tail_fraction_and_warning():
    g = Grid(64, 8.0)
    assert spectral_tail_fraction(gaussian(g)) < 1e-12
    rough = ComplexField(g, np.random.default_rng(0).normal(size=(64, 64)))
    assert spectral_tail_fraction(rough) > 0.1
    with pytest.warns(UserWarning):
        sigma_norm(rough, 1)


# ---------------------------------------------------------------- rotation


def test_rotation_identity_and_quarter_turn():
    g = Grid(32, 6.0)
    f = generic(g)
    np.testing.assert_array_equal(rotate_field(f, 0.0).values, f.values)
    r = rotate_field(f, np.pi / 2).values
    N = g.N
    for i, j in [(3, 5), (10, 20), (16, 1)]:
        # g(x_i, x_j) = f(x_j, -x_i) and -x_i sits at index (N - i) mod N
        assert r[i, j] == f.values[j, (N - i) % N]


def test_rotation_of_radial_gaussian():
    g = Grid(64, 8.0)
    f = gaussian(g)
    for theta in (0.3, -0.7, 2.0, 3.5):
        assert l2_distance(rotate_field(f, theta), f) <= 1e-9


@settings(max_examples=20, deadline=None)
@given(st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi))
def test_rotations_compose_and_preserve_norm(a, b):
    g = Grid(64, 8.0)
    f = gaussian(g, center=(1.0, -0.5), widths=(1.0, 0.7))
    ab = rotate_field(rotate_field(f, a), b)
    assert ab.norm() == pytest.approx(f.norm(), rel=1e-12)
    assert l2_distance(ab, rotate_field(f, a + b)) <= 1e-9


def test_rotation_direction_counter_clockwise():
    g = Grid(64, 8.0)
    f = gaussian(g, center=(2.0, 0.0), widths=(0.8, 0.8))
    expect = gaussian(g, center=(2.0 * np.cos(0.5), 2.0 * np.sin(0.5)), widths=(0.8, 0.8))
    assert l2_distance(rotate_field(f, 0.5), expect) <= 1e-9


# ---------------------------------------------------------------- snapshots


def test_snapshot_roundtrip(tmp_path):
    g = Grid(16, 3.25)
    f = generic(g)
    f.t = 0.123456789
    path = write_snapshot(tmp_path / "f.rpk", f)
    back = read_snapshot(path)
    assert back.grid == g and back.t == f.t
    np.testing.assert_array_equal(back.values, f.values)
    data = path.read_bytes()
    assert data.startswith(b"RPK1 d=2 N=16 L=3.25 t=0.123456789\n")
    assert len(data) == len(data.split(b"\n", 1)[0]) + 1 + 16 * 16 * 16


def test_snapshot_rejects_corrupt_data():
    f = generic(Grid(8, 1.0))
    data = snapshot_bytes(f)
    with pytest.raises(ValueError):
        parse_snapshot(data[:-8])
    with pytest.raises(ValueError):
        parse_snapshot(b"RPK2" + data[4:])
