import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dispersion_lab.errors import DomainError, ShapeError, ValidationError
from dispersion_lab.fields import FieldGrid
from dispersion_lab.semiclassical import defect_tensor
from dispersion_lab.wigner import (
    WignerTensor,
    decompose_reynolds,
    defect_spectrum,
    gaussian_theta,
    isotropic_spectrum,
    prop1_report,
    strain_basis,
    tracefree_decompose,
    wigner_pair,
    wigner_space,
    wigner_time,
)

L = 2 * math.pi


def periodic(values):
    n = np.shape(values)[0]
    return FieldGrid(np.asarray(values), (L / n,), (0.0,))


def grid_x(n):
    return L / n * np.arange(n)


# ---------------------------------------------------------------------------
# space transform


def test_plane_wave():
    x = grid_x(64)
    w = wigner_space(periodic(np.exp(3j * x)))
    np.testing.assert_allclose(w.reconstruct(), 1.0, atol=1e-12)
    avg = w.base_average()
    k = avg.dual_axes[0]
    assert k[np.argmax(np.abs(avg.values))] == pytest.approx(3.0)
    off = np.abs(k - 3.0) > 1e-9
    assert np.max(np.abs(avg.values[off])) < 1e-10 * np.max(np.abs(avg.values))


def test_zero_field():
    w = wigner_space(periodic(np.zeros(32)))
    assert np.all(w.values == 0)


def test_two_modes_interference_line():
    x = grid_x(128)
    u = np.exp(3j * x) + np.exp(7j * x)
    w = wigner_space(periodic(u))
    np.testing.assert_allclose(w.reconstruct(), np.abs(u) ** 2, atol=1e-11)
    k = w.dual_axes[0]
    strength = np.max(np.abs(w.values), axis=0)
    peaks = set(np.round(k[strength > 0.1 * strength.max()], 9))
    assert peaks == {3.0, 5.0, 7.0}


def test_two_modes_direct_sum():
    # direct double sum oracle at one base point
    n = 128
    x = grid_x(n)
    u = np.exp(2j * x) + 0.5 * np.exp(-5j * x)
    w = wigner_space(periodic(u))
    dx = L / n
    j = 17
    m = np.arange(-(n // 2) + 1, n // 2 + 1)
    m = np.where(m < n - n // 2, m, m)
    for kval in (2.0, -5.0, -1.5):
        direct = 2 * dx * np.sum(u[(j + m) % n] * np.conj(u[(j - m) % n]) * np.exp(-1j * kval * 2 * m * dx))
        i = int(np.argmin(np.abs(w.dual_axes[0] - kval)))
        assert w.values[j, i] == pytest.approx(direct, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_reconstruction_random(seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(128) + 1j * rng.standard_normal(128)
    w = wigner_space(periodic(u))
    np.testing.assert_allclose(w.reconstruct(), np.abs(u) ** 2, atol=1e-10)


def test_real_input_and_window():
    rng = np.random.default_rng(1)
    u = rng.standard_normal(64)
    w = wigner_space(periodic(u), window_width=0.5)
    assert not np.iscomplexobj(w.values)
    np.testing.assert_allclose(w.reconstruct(), u**2, atol=1e-12)
    with pytest.raises(DomainError):
        wigner_space(periodic(u), window_width=100.0)
    with pytest.raises(DomainError):
        wigner_space(periodic(u), window_width=0.0)


def test_vector_field_blocks():
    n = 32
    f = FieldGrid.from_function(lambda x, y: np.stack([np.sin(x + 2 * y), np.cos(3 * x)], axis=-1),
                                (n, n), L, origin=(0.0, 0.0))
    w = wigner_space(f)
    assert w.values.shape == (n, n, n, n, 2, 2)
    np.testing.assert_allclose(w.values, np.swapaxes(w.values, -1, -2), atol=1e-12)
    outer = f.values[..., :, None] * f.values[..., None, :]
    np.testing.assert_allclose(w.reconstruct(), outer, atol=1e-12)


def test_pair_shape_checks():
    a = periodic(np.ones(32))
    with pytest.raises(ShapeError):
        wigner_pair(a, periodic(np.ones(16)))
    t = FieldGrid(np.zeros((8, 8, 2, 2)), (1.0, 1.0))
    with pytest.raises(ShapeError):
        wigner_space(t)
    with pytest.raises(ShapeError):
        WignerTensor(np.zeros((3, 4)), (np.arange(3),), (np.arange(5),))


# ---------------------------------------------------------------------------
# time transform


def test_time_constant_series():
    w = wigner_time(np.full(200, 0.7), 0.05)
    np.testing.assert_allclose(w.reconstruct(), 0.49, rtol=1e-10)
    mid = w.values[100]
    assert w.dual_axes[0][np.argmax(mid)] == pytest.approx(0.0)


def test_time_pure_frequency():
    dt = 0.01
    t = dt * np.arange(1000)
    w = wigner_time(np.exp(2j * t), dt)
    np.testing.assert_allclose(w.reconstruct(), 1.0, atol=1e-10)
    tau = w.dual_axes[0]
    resolution = tau[1] - tau[0]
    assert abs(tau[np.argmax(np.abs(w.values[500]))] - 2.0) <= resolution


def test_time_chirp_ridge():
    dt, a = 0.01, 3.0
    t = dt * np.arange(1200)
    w = wigner_time(np.exp(0.5j * a * t**2), dt, theta=gaussian_theta(1.0))
    tau = w.dual_axes[0]
    resolution = tau[1] - tau[0]
    for i in (300, 600, 900):
        ridge = tau[np.argmax(np.abs(w.values[i]))]
        assert abs(ridge - a * t[i]) <= 2 * resolution


def test_time_window_checks():
    with pytest.raises(DomainError):
        wigner_time(np.ones(10), 0.1, theta=lambda s: 0.5 + 0 * s)
    with pytest.raises(DomainError):
        wigner_time(np.ones(10), 0.1, theta=gaussian_theta(5.0))
    with pytest.raises(DomainError):
        wigner_time(np.ones(10), 0.0)
    with pytest.raises(ShapeError):
        wigner_time(np.ones(1), 0.1)


def test_time_vector_series():
    rng = np.random.default_rng(3)
    u = rng.standard_normal((50, 2))
    w = wigner_time(u, 0.1)
    np.testing.assert_allclose(w.reconstruct(), u[:, :, None] * u[:, None, :], atol=1e-12)


# ---------------------------------------------------------------------------
# defect spectrum


def test_defect_spectrum_matches_defect_tensor():
    n = 256
    x = grid_x(n)
    eps = 1 / 16
    member = periodic(np.sin(x / eps) + 0.2 * np.cos(3 * x))
    other = periodic(np.sin(x / (2 * eps)))
    limit = 0.2 * np.cos(3 * x)
    runs = [(eps, member), (2 * eps, other)]
    window = 4 * 2 * math.pi * eps  # four periods of the oscillation
    spectrum = defect_spectrum(runs, limit, window)
    tensor = defect_tensor(runs, limit, window)
    np.testing.assert_allclose(spectrum.reconstruct(), tensor.values, atol=1e-8)
    np.testing.assert_allclose(tensor.values, 0.5, atol=0.02)
    k = spectrum.dual_axes[0]
    avg = np.abs(spectrum.base_average().values)
    assert abs(abs(k[np.argmax(avg)]) - 1 / eps) < 1e-9


def test_defect_spectrum_vanishes_for_constant_sequence():
    x = grid_x(64)
    member = periodic(np.cos(x))
    spectrum = defect_spectrum([(0.1, member)], np.cos(x), 0.5)
    assert np.max(np.abs(spectrum.values)) < 1e-14
    with pytest.raises(ShapeError):
        defect_spectrum([(0.1, member)], np.zeros(32), 0.5)


def test_defect_spectrum_2d_vector():
    n = 32
    eps = 1 / 4
    member = FieldGrid.from_function(
        lambda x, y: np.stack([np.sin(y / eps), np.cos(x)], axis=-1), (n, n), L)
    limit = np.stack([np.zeros((n, n)), np.cos(member.mesh()[0])], axis=-1)
    spectrum = defect_spectrum([(eps, member)], limit, 1.0)
    tensor = defect_tensor([(eps, member)], limit, 1.0)
    np.testing.assert_allclose(spectrum.reconstruct(), tensor.values, atol=1e-8)


# ---------------------------------------------------------------------------
# isotropic spectrum


def test_single_shell_2d():
    n = 32
    kx = np.fft.fftshift(np.fft.fftfreq(n, d=2 * L / n)) * 2 * math.pi
    kk = np.sqrt(kx[:, None] ** 2 + kx[None, :] ** 2)
    dk = kx[1] - kx[0]
    shell = np.abs(kk - 4 * dk) < 0.5 * dk
    vals = np.where(shell, 1.0, 0.0)
    w = WignerTensor(vals, (), (kx, kx))
    spectrum = isotropic_spectrum(w)
    support = spectrum.k[spectrum.energy > 0]
    assert np.allclose(support, 4 * dk)
    assert spectrum.total == pytest.approx(w.reconstruct(), rel=1e-12)


def test_zero_tensor_spectrum():
    k = np.linspace(-4, 4, 9)
    spectrum = isotropic_spectrum(WignerTensor(np.zeros((9, 9, 2, 2)), (), (k, k)))
    assert np.all(spectrum.energy == 0) and spectrum.residual == 0.0


def test_shear_is_anisotropic():
    n = 32
    f = FieldGrid.from_function(lambda x, y: np.stack([np.sin(y), np.zeros_like(x)], axis=-1), (n, n), L)
    spectrum = isotropic_spectrum(wigner_space(f))
    assert spectrum.total == pytest.approx(0.5, rel=1e-10)
    assert spectrum.residual > 0.5


def test_1d_parseval():
    x = grid_x(128)
    u = np.cos(3 * x) + 0.3 * np.sin(9 * x)
    spectrum = isotropic_spectrum(wigner_space(periodic(u)))
    assert spectrum.total == pytest.approx(np.mean(u**2), rel=1e-10)
    with pytest.raises(DomainError):
        isotropic_spectrum(wigner_space(periodic(u)), d=2)


def test_3d_isotropic_form_inverted():
    k = np.linspace(-3, 3, 13)
    kvec = np.stack(np.meshgrid(k, k, k, indexing="ij"), axis=-1)
    kk = np.sqrt(np.sum(kvec**2, axis=-1))
    safe = np.where(kk > 0, kk, 1.0)
    E = np.exp(-kk)
    proj = np.eye(3) - kvec[..., :, None] * kvec[..., None, :] / safe[..., None, None] ** 2
    vals = (E / (4 * math.pi * safe**2))[..., None, None] * proj
    vals[kk == 0] = 0.0
    spectrum = isotropic_spectrum(WignerTensor(vals, (), (k, k, k)))
    inner = (spectrum.k > 0) & (spectrum.k <= 3)
    np.testing.assert_allclose(spectrum.energy[inner], np.exp(-spectrum.k[inner]), rtol=0.2)
    assert spectrum.residual < 0.1


# ---------------------------------------------------------------------------
# trace-free decomposition


def shear_field(n=16):
    return FieldGrid.from_function(lambda x, y: np.stack([y, np.zeros_like(x)], axis=-1), (n, n), 2.0)


def const_tensor(field, m):
    return field.with_values(np.broadcast_to(np.asarray(m, float), field.shape + (2, 2)).copy())


def test_shear_decomposition():
    u = shear_field()
    out = tracefree_decompose(const_tensor(u, [[0, 1], [1, 0]]), u)
    np.testing.assert_allclose(out.nu_turb.values, 1.0, atol=1e-12)
    np.testing.assert_allclose(out.delta.values, 0.0, atol=1e-12)
    np.testing.assert_allclose(out.residual.values, 0.0, atol=1e-12)
    out = tracefree_decompose(const_tensor(u, [[0.5, 0], [0, -0.5]]), u)
    np.testing.assert_allclose(out.nu_turb.values, 0.0, atol=1e-12)
    np.testing.assert_allclose(out.delta.values, 1.0, atol=1e-12)


def test_rigid_rotation_fully_masked():
    u = FieldGrid.from_function(lambda x, y: np.stack([-y, x], axis=-1), (16, 16), 2.0)
    out = tracefree_decompose(const_tensor(u, [[1, 0], [0, -1]]), u)
    assert out.nu_turb.mask.all() and out.delta.mask.all()


def test_decomposition_validation():
    u = shear_field()
    with pytest.raises(ValidationError):
        tracefree_decompose(const_tensor(u, [[1, 0], [0, 0]]), u)
    with pytest.raises(ValidationError):
        tracefree_decompose(const_tensor(u, [[0, 1], [0, 0]]), u)
    compress = FieldGrid.from_function(lambda x, y: np.stack([x, np.zeros_like(x)], axis=-1), (16, 16), 2.0)
    with pytest.raises(ValidationError):
        tracefree_decompose(const_tensor(u, [[0, 1], [1, 0]]), compress)


def cellular_flow(n=64):
    return FieldGrid.from_function(
        lambda x, y: np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)], axis=-1), (n, n), L)


def test_basis_orthogonality_spectral():
    u = cellular_flow()
    b, phi, div = strain_basis(u, method="spectral")
    assert np.max(np.abs(div)) < 1e-12
    assert np.max(np.abs(np.sum(b * phi, axis=(-2, -1)))) < 1e-12


def test_round_trip_spectral():
    u = cellular_flow()
    b, phi, _ = strain_basis(u, method="spectral")
    x, y = u.mesh()
    nu, delta = 0.3 + 0.1 * np.cos(x), -0.2 + 0.05 * np.sin(y)
    S = u.with_values(nu[..., None, None] * b + delta[..., None, None] * phi)
    out = tracefree_decompose(S, u, method="spectral", eps_basis=1e-6)
    good = ~(out.nu_turb.mask | out.delta.mask)
    assert good.mean() > 0.9
    rebuilt = (np.nan_to_num(out.nu_turb.values)[..., None, None] * b
               + np.nan_to_num(out.delta.values)[..., None, None] * phi)
    np.testing.assert_allclose(rebuilt[good], S.values[good], atol=1e-12)


def test_reynolds_split():
    u = shear_field()
    R = const_tensor(u, [[2.0, 1.0], [1.0, 1.0]])
    out = decompose_reynolds(R, u)
    np.testing.assert_allclose(out.trace.values, 1.5)
    np.testing.assert_allclose(out.nu_turb.values, 1.0, atol=1e-12)
    np.testing.assert_allclose(out.delta.values, 1.0, atol=1e-12)
    with pytest.raises(ValidationError):
        decompose_reynolds(const_tensor(u, [[1.0, 0], [0, -1.0]]), u)


# ---------------------------------------------------------------------------
# strong-convergence diagnostic


def prop1_data(sequence):
    n, nt = 128, 11
    x = grid_x(n)
    times = np.linspace(0, 1, nt)
    u = np.sin(x)[None, :] * np.ones((nt, 1))
    runs = np.stack([sequence(m, x, times) for m in (4, 8, 16)])
    return runs, u, times, L / n


def test_prop1_constant_sequence():
    runs, u, times, dx = prop1_data(lambda m, x, t: np.sin(x)[None, :] * np.ones((t.size, 1)))
    rep = prop1_report(runs, u, np.zeros_like(u), times, dx)
    assert rep.data["gap"] == 0.0 and rep.data["dissipation"] == 0.0
    assert rep.data["verdict"] == "consistent"
    assert rep.passed


def test_prop1_oscillatory_sequence():
    e = 0.5
    runs, u, times, dx = prop1_data(lambda m, x, t: (np.sin(x) + e * np.sin(m * x))[None, :] * np.ones((t.size, 1)))
    rep = prop1_report(runs, u, np.zeros_like(u), times, dx)
    norm_sq = e**2 * L * 1.0
    assert rep.data["gap"] == pytest.approx(norm_sq / 2, rel=0.05)
    assert rep.data["defect_trace_mean"] > 0
    assert rep.data["verdict"] == "inconsistent"
    assert not rep.passed


def test_prop1_horizon_and_shapes():
    runs, u, times, dx = prop1_data(lambda m, x, t: np.sin(x)[None, :] * np.ones((t.size, 1)))
    rep = prop1_report(runs, u, np.zeros_like(u), times, dx, T_horizon=0.5)
    assert rep.data["horizon"] == pytest.approx(0.5)
    with pytest.raises(ShapeError):
        prop1_report(runs, u[:, :10], np.zeros_like(u), times, dx)
    with pytest.raises(ShapeError):
        prop1_report(runs, u, np.zeros((3, 3)), times, dx)
