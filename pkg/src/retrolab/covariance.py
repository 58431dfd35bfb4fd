"""Lorentz boosts of currents, spinors and world lines in 1+1 dimensions.

Boosts are passive: rapidity ``eta`` moves to a frame travelling at
``tanh(eta)``, so a particle at rest acquires velocity ``-tanh(eta)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .currents import bilinears, dirac_current
from .dynamics import ALPHA, IDENTITY, SpinorField, dirac_energy, dirac_hamiltonian, positive_energy_spinor
from .guidance import FRAME_ORDER_REVERSAL, SUPERLUMINAL, WorldLine

MAX_RAPIDITY = 5.0


@dataclass(frozen=True)
class BoostParams:
    rapidity: float

    def __post_init__(self):
        if not np.isfinite(self.rapidity) or abs(self.rapidity) > MAX_RAPIDITY:
            raise ValueError(f"rapidity must be finite with |eta| <= {MAX_RAPIDITY}, got {self.rapidity!r}")


def _eta(eta):
    return BoostParams(float(eta.rapidity if isinstance(eta, BoostParams) else eta)).rapidity


def boost_vector(j0, j1, eta):
    ch, sh = np.cosh(_eta(eta)), np.sinh(_eta(eta))
    return ch * j0 - sh * j1, -sh * j0 + ch * j1


def spinor_boost_matrix(eta) -> np.ndarray:
    """``S = exp(-eta alpha / 2) = cosh(eta/2) - sinh(eta/2) alpha``.

    The sign matches :func:`boost_vector`: ``psibar gamma^a psi`` of ``S psi``
    equals the boosted current of ``psi``.
    """
    eta = _eta(eta)
    return np.cosh(eta / 2) * IDENTITY - np.sinh(eta / 2) * ALPHA


def boost_spinor(psi, eta) -> np.ndarray:
    """Apply ``S(eta)`` to a spinor or a stack of spinors (last axis of length 2)."""
    return np.asarray(psi, dtype=complex) @ spinor_boost_matrix(eta).T


def boost_field(field: SpinorField, eta) -> SpinorField:
    return SpinorField(boost_spinor(field.values, eta), field.time_label)


def current_covariance_error(psi, eta) -> float:
    """Max ``|j(S psi) - Lambda j(psi)|`` over a stack of spinors."""
    psi = np.atleast_2d(psi)
    j = dirac_current(SpinorField(psi))
    jb = dirac_current(SpinorField(boost_spinor(psi, eta)))
    l0, l1 = boost_vector(j.j0, j.j1, eta)
    return float(max(np.max(np.abs(jb.j0 - l0)), np.max(np.abs(jb.j1 - l1))))


def weak_covariance_error(psi_i, psi_f, n, eta) -> float:
    """Same as :func:`current_covariance_error` for the two-state bilinear at fixed ``N``."""

    def weak(pi, pf):
        fi0, fi1 = bilinears(pf, pi)
        if0, if1 = bilinears(pi, pf)
        return np.real(fi0 / n + if0 / np.conj(n)), np.real(fi1 / n + if1 / np.conj(n))

    w0, w1 = weak(np.atleast_2d(psi_i), np.atleast_2d(psi_f))
    b0, b1 = weak(boost_spinor(np.atleast_2d(psi_i), eta), boost_spinor(np.atleast_2d(psi_f), eta))
    l0, l1 = boost_vector(w0, w1, eta)
    return float(max(np.max(np.abs(b0 - l0)), np.max(np.abs(b1 - l1))))


def covariance_error_planewave(k, m, eta) -> float:
    """Largest discrepancy among the frame-change identities of a positive-energy plane wave.

    Checks: boosted spinor current vs boosted current; boosted momentum on
    the mass shell; boosted spinor as positive-energy eigenspinor of
    ``h(k')``; invariance of the phase ``E t - k x`` at sample events.
    """
    eta = _eta(eta)
    energy = float(dirac_energy(k, m))
    u = positive_energy_spinor(k, m)
    su = boost_spinor(u, eta)
    e_b, k_b = boost_vector(energy, k, eta)

    errors = [current_covariance_error(u, eta)]
    errors.append(abs(e_b * e_b - k_b * k_b - m * m) / max(1.0, e_b * e_b))
    h = dirac_hamiltonian(k_b, m)[0]
    errors.append(float(np.max(np.abs(h @ su - e_b * su))) / max(1.0, e_b))
    # sample events; the phase is a Lorentz scalar
    t = np.array([0.0, 1.0, -2.5, 3.0])
    x = np.array([0.0, 0.5, 1.5, -4.0])
    t_b, x_b = boost_vector(t, x, eta)
    errors.append(float(np.max(np.abs((energy * t - k * x) - (e_b * t_b - k_b * x_b)))) / 10.0)
    return float(max(errors))


def boosted_wavenumber(k, m, eta) -> float:
    return float(boost_vector(dirac_energy(k, m), k, eta)[1])


def add_velocity(v, eta):
    """Relativistic velocity addition into the boosted frame."""
    b = np.tanh(_eta(eta))
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (v - b) / (1.0 - v * b)


def boost_worldline(worldline: WorldLine, eta) -> WorldLine:
    """Map every sample event into the boosted frame and re-sort by the new time.

    If the new times are not strictly increasing (only possible where the
    original path ran faster than light) the affected samples are flagged
    with ``FRAME_ORDER_REVERSAL``; nothing is raised.
    """
    t_b, x_b = boost_vector(worldline.t, worldline.x, eta)
    u0_b, u1_b = boost_vector(worldline.u0, worldline.u1, eta)
    v_b = add_velocity(worldline.v, eta)
    flags = worldline.sample_flags.copy()
    # superluminal samples can end up moving backwards in the new time
    flags |= np.where(np.abs(v_b) > 1.0, SUPERLUMINAL, 0)
    reversed_step = np.diff(t_b) <= 0
    if reversed_step.any():
        bad = np.zeros(len(t_b), dtype=bool)
        bad[1:] |= reversed_step
        bad[:-1] |= reversed_step
        flags = flags | np.where(bad, FRAME_ORDER_REVERSAL, 0)
    order = np.argsort(t_b, kind="stable")
    return WorldLine(t_b[order], x_b[order], u0_b[order], u1_b[order], v_b[order], flags[order], worldline.truncated)
