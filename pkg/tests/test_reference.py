import numpy as np
import pytest
from scipy.linalg import expm

from dirac_fd.core import FREE, Discretization, PotentialSpec, sample_initial
from dirac_fd.fieldio import FieldFormatError, decode_field, encode_field, read_field, sidecar_path
from dirac_fd.linalg import ModeSpectrum, dft_forward
from dirac_fd.observables import density, mass
from dirac_fd.presets import BENCHMARK_INITIAL, BENCHMARK_POTENTIAL, PlaneWave
from dirac_fd.reference import (
    ReferenceCache,
    ReferenceConfig,
    kinetic_half_step,
    kinetic_propagator,
    potential_step,
    reference_solve,
    restrict,
)

from conftest import random_field
from helpers import S1, S3


def test_kinetic_propagator_matches_matrix_exponential(rng):
    eps, dt = 0.3, 0.07
    for mu in rng.uniform(-50, 50, 5):
        want = expm(-1j * dt * (mu * S1 + S3) / eps)
        assert np.abs(kinetic_propagator(np.array([mu]), dt, eps)[0] - want).max() < 1e-13


def test_kinetic_step_identity_zero_mode_and_unitarity(rng):
    d = Discretization(-1, 1, 16, 0.1, 1.0, 0.5)
    spec = dft_forward(random_field(rng, 16), d)
    same = kinetic_half_step(spec, 0.0, d)
    assert np.array_equal(same.coefficients, spec.coefficients)
    moved = kinetic_half_step(spec, 0.3, d)
    c0 = spec.coefficient(0)
    assert np.allclose(moved.coefficient(0), [np.exp(-0.6j) * c0[0], np.exp(0.6j) * c0[1]], atol=1e-14)
    norms_in = np.linalg.norm(spec.coefficients, axis=1)
    norms_out = np.linalg.norm(moved.coefficients, axis=1)
    assert np.abs(norms_in - norms_out).max() < 1e-14 * norms_in.max()


def test_potential_step(rng):
    d = Discretization(-1, 1, 16, 0.1, 1.0)
    u = random_field(rng, 16)
    assert np.allclose(potential_step(u, 0.0, 0.3, FREE, d), u, atol=0)
    vconst = PotentialSpec(V=lambda t, x: 0.7 + 0 * x, v_max=0.7)
    assert np.allclose(potential_step(u, 0.0, 0.3, vconst, d), np.exp(-0.21j) * u, atol=1e-15)
    out = potential_step(u, 0.0, 0.3, BENCHMARK_POTENTIAL, d)
    assert np.abs(density(out) - density(u)).max() < 1e-14 * density(u).max()
    # compare with the pointwise matrix exponential of -i dt (V - A sigma1)
    x = -1 + d.h * np.arange(16)
    v, a = BENCHMARK_POTENTIAL.sample(0.0, x)
    want = np.array([expm(-0.3j * (v[j] * np.eye(2) - a[j] * S1)) @ u[j] for j in range(16)])
    assert np.abs(out - want).max() < 1e-14


@pytest.mark.parametrize("eps", [1.0, 0.25])
def test_plane_wave_solution_is_reproduced(eps):
    pw = PlaneWave(3, -1, 1, eps)
    d = Discretization(-1, 1, 32, 1e-3, 1.0, eps)
    got = reference_solve(pw.initial(), d, FREE)
    assert np.abs(got - pw.exact(1.0, -1 + d.h * np.arange(32))).max() < 1e-10


def test_zero_time_returns_initial_data():
    d = Discretization(-1, 1, 32, 0.1, 0.0)
    assert np.array_equal(reference_solve(BENCHMARK_INITIAL, d, BENCHMARK_POTENTIAL),
                          sample_initial(BENCHMARK_INITIAL, d))


def test_mass_conserved_and_time_dependent_path():
    d = Discretization(-1, 1, 64, 1e-3, 0.5, 0.25)
    u0 = sample_initial(BENCHMARK_INITIAL, d)
    u = reference_solve(BENCHMARK_INITIAL, d, BENCHMARK_POTENTIAL)
    assert abs(mass(u, d) - mass(u0, d)) <= 1e-12 * mass(u0, d)
    tv = PotentialSpec(V=BENCHMARK_POTENTIAL.V, A1=BENCHMARK_POTENTIAL.A1, v_max=1, a1_max=1,
                       time_independent=False)
    assert np.abs(reference_solve(BENCHMARK_INITIAL, d, tv) - u).max() < 1e-12


def test_gauge_shift_leaves_densities_unchanged():
    d = Discretization(-1, 1, 64, 1e-3, 1.0, 0.5)
    shifted = PotentialSpec(V=lambda t, x: BENCHMARK_POTENTIAL.V(t, x) + 2.5,
                            A1=BENCHMARK_POTENTIAL.A1, v_max=3.5, a1_max=1.0)
    u = reference_solve(BENCHMARK_INITIAL, d, BENCHMARK_POTENTIAL)
    w = reference_solve(BENCHMARK_INITIAL, d, shifted)
    assert np.abs(density(u) - density(w)).max() <= 1e-10
    J = lambda f: 2 * np.real(np.conj(f[:, 0]) * f[:, 1])
    assert np.abs(J(u) - J(w)).max() <= 1e-10


def test_reference_config_defaults_and_restriction():
    rc = ReferenceConfig.default_for(1 / 16, [32, 64, 96])
    assert rc.M_ref % 192 == 0 and rc.M_ref >= 1024
    assert rc.tau_ref == pytest.approx(2.5e-5)
    assert rc.check_grid(32) == rc.M_ref // 32
    with pytest.raises(ValueError):
        rc.check_grid(100)
    with pytest.raises(ValueError):
        ReferenceConfig(1023, 1e-4)
    d = rc.discretization(-1, 1, 2.0, 1 / 16)
    assert d.tau <= rc.tau_ref and d.steps * d.tau == pytest.approx(2.0)
    f = np.arange(16, dtype=complex).reshape(8, 2)
    assert np.array_equal(restrict(f, 4), f[::2])


def test_field_file_roundtrip(rng, tmp_path):
    u = random_field(rng, 10)
    data = encode_field(u)
    assert data[:4] == b"DFD1" and int.from_bytes(data[4:12], "little") == 10
    assert np.frombuffer(data[12:20], "<f8")[0] == u[0, 0].real
    assert np.frombuffer(data[20:28], "<f8")[0] == u[0, 0].imag
    assert np.frombuffer(data[28:36], "<f8")[0] == u[0, 1].real
    assert np.array_equal(decode_field(data), u)
    with pytest.raises(FieldFormatError):
        decode_field(b"XXXX" + data[4:])
    with pytest.raises(FieldFormatError):
        decode_field(data[:-8])


def test_reference_cache(tmp_path, rng):
    cache = ReferenceCache(tmp_path)
    key = {"epsilon": 0.25, "T": 2.0, "M_ref": 8}
    calls = []

    def compute():
        calls.append(1)
        return random_field(rng, 8)

    first = cache.get_or_compute(key, compute)
    second = cache.get_or_compute(key, compute)
    assert len(calls) == 1 and np.array_equal(first, second)
    path = cache.path_for(key)
    assert "epsilon=0.25" in sidecar_path(path).read_text()
    path.write_bytes(b"garbage")
    cache.get_or_compute(key, compute)
    assert len(calls) == 2
    off = ReferenceCache(tmp_path / "off", enabled=False)
    off.get_or_compute(key, compute)
    assert not (tmp_path / "off").exists()


def test_cache_directory_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("DIRAC_FD_CACHE", str(tmp_path / "c"))
    assert ReferenceCache().directory == tmp_path / "c"
