import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retrolab import currents as cur
from retrolab import dynamics as dyn
from retrolab import guidance as gd
from retrolab import onshell as osh
from retrolab.exceptions import CausalCharacterError
from retrolab.grid import SpacetimeLattice

G0 = np.array([[1, 0], [0, -1]], dtype=complex)
G1 = np.array([[0, 1], [-1, 0]], dtype=complex)


def test_bracket_arithmetic_example():
    value = osh.particle_lagrangian_density(math.cosh(0.5), math.sinh(0.5), 2.0, 0.0, 2.0)
    assert value == pytest.approx(2 * math.cosh(0.5) - 2, abs=1e-15)
    assert value == pytest.approx(0.255252, abs=1e-6)


def test_bracket_rejects_non_unit_velocity():
    with pytest.raises(ValueError):
        osh.particle_lagrangian_density(2.0, 0.0, 1.0, 0.0, 1.0)


@given(st.floats(0.1, 10.0), st.floats(-0.99, 0.99))
def test_bracket_vanishes_on_shell(j0, ratio):
    j1 = ratio * j0
    rho0 = math.sqrt(j0 * j0 - j1 * j1)
    value = osh.particle_lagrangian_density(j0 / rho0, j1 / rho0, j0, j1, rho0)
    assert abs(value) <= 1e-12 * j0


@settings(max_examples=50)
@given(st.floats(0.1, 10.0), st.floats(-0.95, 0.95))
def test_scan_minimum_is_the_current_direction(j0, ratio):
    j1 = ratio * j0
    etas, values = osh.rapidity_scan(j0, j1, centre=0.0)
    step = etas[1] - etas[0]
    assert np.all(values >= -1e-12 * j0)
    assert abs(etas[np.argmin(values)] - math.atanh(ratio)) <= step
    assert osh.minimizer_gap(j0, j1) < 1e-10 * j0


def test_rhs_zero_on_shell():
    j0, j1 = 3.0, 1.2
    rho0 = math.sqrt(j0**2 - j1**2)
    psi = np.array([0.3 + 0.1j, -0.7j])
    out = osh.generalized_dirac_rhs(psi, j0 / rho0, j1 / rho0, j0, j1, rho0)
    assert np.max(np.abs(out)) < 1e-15
    assert np.all(osh.generalized_dirac_rhs(psi, 1.0, 0.0, 2.0, 0.0, 2.0) == 0)


def test_rhs_explicit_matrices_and_growth():
    psi = np.array([1.0, 0.0], dtype=complex)

    def direct(eta):
        # lower-index components of u - j/rho0 with j = (1, 0)
        d_lower = (math.cosh(eta) - 1.0, -math.sinh(eta))
        return (d_lower[0] * G0 + d_lower[1] * G1) @ psi

    out = osh.generalized_dirac_rhs(psi, math.cosh(0.3), math.sinh(0.3), 1.0, 0.0, 1.0)
    np.testing.assert_allclose(out, direct(0.3), atol=1e-15)
    assert np.linalg.norm(out) == pytest.approx(math.hypot(math.cosh(0.3) - 1, math.sinh(0.3)))
    norms = [np.linalg.norm(osh.generalized_dirac_rhs(psi, math.cosh(e), math.sinh(e), 1.0, 0.0, 1.0)) for e in (0.1, 0.3, 0.6, 1.0)]
    assert np.all(np.diff(norms) > 0)


def test_rhs_rejects_null_current():
    with pytest.raises(CausalCharacterError):
        osh.generalized_dirac_rhs(np.ones(2), 1.0, 0.0, 1.0, 1.0, 0.0)


@pytest.fixture(scope="module")
def small_run():
    lattice = SpacetimeLattice(nx=256, dx=0.1, nt=100, dt=0.01, x_min=-12.8)
    packet = dyn.gaussian_packet(lattice, 1.0, 0.0, 1.0, 1.0)
    history = dyn.evolve_dirac(packet, lattice, 1.0, lattice.nt)
    w = gd.integrate_worldline(0.0, cur.current_history(history), lattice)
    return lattice, history, w


def test_onshell_report_on_bohm_trajectory(small_run):
    lattice, history, w = small_run
    report = osh.onshell_report(history, w, None, lattice, 1.0)
    assert report.particle_lagrangian_value < 1e-10
    assert report.rhs_norm < 1e-10
    assert report.minimizer_gap < 1e-10
    assert report.n_samples == len(w)


def test_perturbed_trajectory_is_off_shell(small_run):
    lattice, history, w = small_run
    report = osh.onshell_report(history, osh.perturb_worldline(w, 1.1), None, lattice, 1.0)
    assert report.particle_lagrangian_min > 0
    assert report.rhs_norm > 1e-6


def test_empty_worldline_rejected(small_run):
    lattice, history, w = small_run
    empty = gd.WorldLine(w.t[:0], w.x[:0], w.u0[:0], w.u1[:0], w.v[:0], w.sample_flags[:0])
    with pytest.raises(ValueError):
        osh.onshell_report(history, empty, None, lattice, 1.0)


def _field_rms(dt, span=0.5):
    n = int(round(span / dt))
    lattice = SpacetimeLattice(nx=256, dx=0.1, nt=n, dt=dt, x_min=-12.8)
    psi_i = dyn.evolve_dirac(dyn.gaussian_packet(lattice, 1.0, 0.0, 1.0, 1.0), lattice, 1.0, n)
    f = dyn.gaussian_packet(lattice, 1.0, 0.5, 1.0, 0.8, time_label=n * dt)
    psi_f = dyn.evolve_dirac(f, lattice, 1.0, n, "backward").reversed()
    psi_f = dyn.FieldHistory(psi_f.values, psi_i.times, lattice)
    return osh.field_term_rms(psi_i, psi_f, 1.0)


def test_field_term_vanishes_at_second_order():
    coarse, fine = _field_rms(0.01), _field_rms(0.005)
    assert coarse < 1e-3
    assert coarse / fine == pytest.approx(4.0, abs=0.5)


def test_field_term_on_plane_wave_solution():
    lattice = SpacetimeLattice(nx=64, dx=0.1, nt=20, dt=0.01, x_min=-3.2)
    wave = dyn.plane_wave(lattice, 1.0, 3)
    history = dyn.evolve_dirac(wave, lattice, 1.0, 20)
    assert osh.field_term_rms(history, history, 1.0) < 1e-3


def test_field_term_large_on_random_field(small_lattice, rng):
    values = rng.normal(size=(5, small_lattice.nx, 2)) + 1j * rng.normal(size=(5, small_lattice.nx, 2))
    history = dyn.FieldHistory(values, small_lattice.dt * np.arange(5), small_lattice)
    # a non-solution gives an order-one field term, not a small one
    assert osh.field_term_rms(history, history, 1.0) > 0.1
