import math

import numpy as np
import pytest

from transient_scatter.barrier import (BarrierSpec, ContourSide, NumericalDegeneracyError,
                                       SearchRegion, amplitudes, find_resonance_poles, omega,
                                       omega_derivative, stationary_wavefunction,
                                       structural_poles, transmission, wavenumbers)

from oracles import argument_principle_count, omega_derivative_fd, omega_mpmath, transfer_matrix_T

FIG1 = BarrierSpec(V0=102.5, d=2.5, m=1.558023)
FREE = BarrierSpec(V0=0.0, d=2.5, m=1.558023)
HBAR = 1.0
# |T|^2 at p = 28.48, frozen from the extended-precision transfer-matrix oracle
T2_FIG1_PC = 0.9511099445633064
REGION = SearchRegion(5.0, 60.0, -30.0, -0.01)

rng = np.random.default_rng(7)


@pytest.fixture(scope="module")
def fig1_poles():
    return find_resonance_poles(FIG1, HBAR, REGION)


def test_spec_validation():
    with pytest.raises(ValueError):
        BarrierSpec(V0=-1.0, d=1.0, m=1.0)
    with pytest.raises(ValueError):
        BarrierSpec(V0=1.0, d=0.0, m=1.0)
    with pytest.raises(ValueError):
        BarrierSpec(V0=1.0, d=1.0, m=0.0)


def test_threshold_momentum():
    assert round(FIG1.threshold_momentum, 2) == 17.87
    _, k2 = wavenumbers(FIG1, FIG1.threshold_momentum, HBAR)
    assert abs(k2) < 1e-6


def test_free_wavenumbers_equal():
    p = rng.uniform(0.1, 60, 50)
    k1, k2 = wavenumbers(FREE, p, HBAR)
    assert np.allclose(k1, k2, rtol=1e-15)


def test_branch_sanity():
    above = rng.uniform(18.0, 60.0, 200)
    below = rng.uniform(0.1, 17.8, 200)
    _, ka = wavenumbers(FIG1, above, HBAR)
    _, kb = wavenumbers(FIG1, below, HBAR)
    assert np.all(ka.real > 0) and np.all(ka.imag == 0)
    assert np.all(kb.imag > 0) and np.all(np.abs(kb.real) < 1e-12)


def test_wavenumbers_reject_bad_hbar():
    with pytest.raises(ValueError):
        wavenumbers(FIG1, 1.0, 0.0)


def test_free_omega_and_transmission():
    p = rng.uniform(0.1, 60, 50)
    assert np.allclose(omega(FREE, p, HBAR), np.exp(-1j * p * FREE.d), atol=1e-14)
    assert np.allclose(transmission(FREE, p, HBAR), 1.0, atol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_transmission_resonances(n):
    k2 = n * math.pi / FIG1.d
    p = math.sqrt((HBAR * k2) ** 2 + 2 * FIG1.m * FIG1.V0)
    assert abs(abs(omega(FIG1, p, HBAR)) - 1) < 1e-12
    assert abs(abs(transmission(FIG1, p, HBAR)) - 1) < 1e-12


def test_omega_removable_point():
    p = FIG1.threshold_momentum
    assert omega(FIG1, p, HBAR) == pytest.approx(1 - 0.5j * p * FIG1.d, abs=1e-12)
    for rel in (1e-12, 1e-9, -1e-9, 1e-6):
        near = p * (1 + rel)
        ref = omega_mpmath(FIG1.V0, FIG1.d, FIG1.m, near)
        assert abs(omega(FIG1, near, HBAR) - ref) < 1e-12 * abs(ref)


def test_transmission_against_transfer_matrix():
    ref = transfer_matrix_T(FIG1.V0, FIG1.d, FIG1.m, 28.48)
    assert abs(ref) ** 2 == pytest.approx(T2_FIG1_PC, abs=1e-14)
    amps = amplitudes(FIG1, 28.48, HBAR)
    assert abs(amps.T[0] - ref) < 1e-12
    assert abs(amps.T[0]) ** 2 == pytest.approx(T2_FIG1_PC, rel=1e-12)


@pytest.mark.parametrize("p", [10.0, 3.0, 16.0, 17.8, 17.95, 40.0])
def test_amplitudes_match_transfer_matrix(p):
    ref = transfer_matrix_T(FIG1.V0, FIG1.d, FIG1.m, p)
    amps = amplitudes(FIG1, p, HBAR)
    assert abs(amps.T[0] - ref) <= 1e-10 * max(abs(ref), 1e-300)


def test_free_amplitudes():
    amps = amplitudes(FREE, np.array([5.0, 28.48]), HBAR)
    assert np.allclose(amps.R, 0, atol=1e-14)
    assert np.allclose(amps.T, 1, atol=1e-14)
    assert np.allclose(amps.C, 1, atol=1e-14)
    assert np.allclose(amps.D, 0, atol=1e-14)


def test_unitarity_random_momenta():
    p = rng.uniform(1e-3, 60.0, 1000)
    p = p[np.abs(p - FIG1.threshold_momentum) > 1e-9]
    amps = amplitudes(FIG1, p, HBAR)
    assert np.max(np.abs(np.abs(amps.R) ** 2 + np.abs(amps.T) ** 2 - 1)) < 1e-10


def test_T_times_omega_on_complex_strip():
    z = rng.uniform(0.5, 60.0, 1000) + 1j * rng.uniform(-5.0, 5.0, 1000)
    amps = amplitudes(FIG1, z, HBAR, check_tol=1.0)
    target = np.exp(-1j * z * FIG1.d)
    assert np.max(np.abs(amps.T * amps.Omega - target) / np.abs(target)) < 1e-10


def test_T_times_omega_real_axis_tight():
    p = rng.uniform(0.5, 60.0, 1000)
    amps = amplitudes(FIG1, p, HBAR)
    target = np.exp(-1j * p * FIG1.d)
    assert np.max(np.abs(amps.T * amps.Omega - target)) < 1e-12


def test_zero_momentum_rejected():
    with pytest.raises(NumericalDegeneracyError):
        amplitudes(FIG1, 0.0, HBAR)


def test_threshold_amplitudes_finite():
    amps = amplitudes(FIG1, FIG1.threshold_momentum, HBAR)
    assert np.isfinite(amps.T[0]) and np.isfinite(amps.R[0])
    assert abs(abs(amps.R[0]) ** 2 + abs(amps.T[0]) ** 2 - 1) < 1e-10


def test_omega_derivative_against_mpmath():
    for z in (28.8 - 0.66j, 10.0 + 0.0j, 40.0 - 3.0j, 17.9 - 0.1j, 5.0 + 2.0j):
        ref = omega_derivative_fd(FIG1.V0, FIG1.d, FIG1.m, z)
        assert abs(omega_derivative(FIG1, z, HBAR) - ref) < 1e-10 * max(1.0, abs(ref))


def test_omega_against_mpmath():
    z = rng.uniform(1, 60, 100) + 1j * rng.uniform(-10, 5, 100)
    ref = np.array([omega_mpmath(FIG1.V0, FIG1.d, FIG1.m, v) for v in z])
    assert np.max(np.abs(omega(FIG1, z, HBAR) - ref) / np.abs(ref)) < 1e-11


@pytest.mark.parametrize("p", [5.0, 17.0, 28.48, 45.0])
def test_stationary_wavefunction_continuity(p):
    amps = amplitudes(FIG1, p, HBAR)
    h = FIG1.d / 2
    eps = 1e-12
    for edge in (-h, h):
        x = np.array([edge - eps, edge + eps])
        psi, dpsi = stationary_wavefunction(FIG1, amps, x, HBAR)
        scale = max(abs(psi[0]), 1e-3)
        assert abs(psi[1] - psi[0]) < 1e-10 * scale * 1e2
        assert abs(dpsi[1] - dpsi[0]) < 1e-10 * max(abs(dpsi[0]), 1.0) * 1e2


def test_stationary_wavefunction_continuity_random():
    h = FIG1.d / 2
    for p in rng.uniform(0.5, 60, 50):
        amps = amplitudes(FIG1, p, HBAR)
        psi, dpsi = stationary_wavefunction(FIG1, amps, np.array([-h - 1e-13, -h + 1e-13,
                                                                  h - 1e-13, h + 1e-13]), HBAR)
        assert abs(psi[0] - psi[1]) < 1e-10 and abs(psi[2] - psi[3]) < 1e-10
        assert abs(dpsi[0] - dpsi[1]) < 1e-10 * max(1.0, p) and abs(dpsi[2] - dpsi[3]) < 1e-10 * max(1.0, p)


def test_structural_poles_tagged():
    poles = structural_poles(28.48)
    tags = {sp.label: (sp.value, sp.side) for sp in poles}
    assert tags["I"] == (28.48 + 0j, ContourSide.ABOVE)
    assert tags["R"] == (-28.48 + 0j, ContourSide.BELOW)
    assert tags["T"] == (28.48 + 0j, ContourSide.BELOW)


def test_free_barrier_has_no_resonances():
    assert find_resonance_poles(FREE, HBAR, REGION) == []


def test_resonance_region_must_be_lower():
    with pytest.raises(ValueError):
        find_resonance_poles(FIG1, HBAR, SearchRegion(5, 60, -3, 1))
    with pytest.raises(ValueError):
        SearchRegion(5, 4, -3, -1)


def test_resonance_residuals_and_location(fig1_poles):
    assert fig1_poles
    for pole in fig1_poles:
        assert pole.abs_omega < 1e-8
        assert abs(omega(FIG1, pole.value, HBAR)) < 1e-8
        assert pole.value.imag < 0
        assert REGION.contains(pole.value)


def test_resonances_match_argument_principle(fig1_poles):
    count = argument_principle_count(lambda z: omega(FIG1, z, HBAR), REGION.re_min, REGION.re_max,
                                     REGION.im_min, REGION.im_max, n_side=20000)
    assert len(fig1_poles) == count


def test_resonance_mirror_symmetry(fig1_poles):
    for pole in fig1_poles:
        mirror = -np.conj(pole.value)
        assert abs(omega(FIG1, mirror, HBAR)) < 1e-6
        # the mirror lies in the third quadrant
        assert mirror.real < 0 and mirror.imag < 0


def test_resonances_deduplicated(fig1_poles):
    vals = np.array([p.value for p in fig1_poles])
    gaps = np.abs(vals[:, None] - vals[None, :]) + np.eye(len(vals))
    assert gaps.min() > 1e-6


def test_max_count():
    poles = find_resonance_poles(FIG1, HBAR, REGION, max_count=3)
    assert len(poles) == 3
