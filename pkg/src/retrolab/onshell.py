"""Lagrangian pieces of the particle-plus-field model and their on-shell values.

The particle's rest density is a delta function on its world line; every
quantity here is evaluated at the particle's position with that density
set to one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .currents import EPS_OVERLAP, Overlap, current_history, overlap
from .dynamics import GAMMA0, GAMMA1, FieldHistory, dirac_operator
from .exceptions import CausalCharacterError, DegenerateChannelError, GridError
from .guidance import CurrentInterpolant, WorldLine

UNIT_TOL = 1e-12
SCAN_HALF_WIDTH = 2.0
SCAN_POINTS = 401


@dataclass(frozen=True)
class OnShellReport:
    particle_lagrangian_value: float
    rhs_norm: float
    field_term_rms: float
    minimizer_gap: float
    particle_lagrangian_min: float = 0.0
    n_samples: int = 0


def minkowski_dot(a0, a1, b0, b1):
    return a0 * b0 - a1 * b1


def particle_lagrangian_density(u0, u1, j0, j1, rho0):
    """``u.j - rho0 * sqrt(u.u)`` for a unit timelike ``u``.

    Non-negative for timelike ``j`` (reverse Cauchy-Schwarz), zero exactly
    when ``u = j / rho0``.
    """
    uu = minkowski_dot(u0, u1, u0, u1)
    if np.any(np.abs(uu - 1.0) > UNIT_TOL) or np.any(np.asarray(u0) <= 0):
        raise ValueError("u must be a unit future-pointing timelike vector")
    return minkowski_dot(u0, u1, j0, j1) - rho0 * np.sqrt(uu)


def rapidity_scan(j0, j1, half_width=SCAN_HALF_WIDTH, points=SCAN_POINTS, centre=None):
    """Particle Lagrangian over ``u = (cosh eta, sinh eta)`` on a uniform rapidity grid.

    The grid spans ``centre +/- half_width``; by default it is centred on the
    current's own rapidity, so the on-shell velocity is the middle point.
    Returns ``(etas, values)``.
    """
    rho0 = np.sqrt(j0 * j0 - j1 * j1)
    if centre is None:
        centre = np.arctanh(j1 / j0)
    etas = centre + np.linspace(-half_width, half_width, points)
    values = particle_lagrangian_density(np.cosh(etas), np.sinh(etas), j0, j1, rho0)
    return etas, values


def minimizer_gap(j0, j1) -> float:
    """``|min over the scan - on-shell value|``; zero when the on-shell velocity is the minimizer."""
    rho0 = np.sqrt(j0 * j0 - j1 * j1)
    _, values = rapidity_scan(j0, j1)
    onshell = particle_lagrangian_density(j0 / rho0, j1 / rho0, j0, j1, rho0)
    return float(abs(values.min() - onshell))


def generalized_dirac_rhs(psi, u0, u1, j0, j1, rho0):
    """``(u_a - j_a / rho0) gamma^a psi`` at the particle (lower indices, ``(+, -)`` metric)."""
    if not rho0 > 0:
        raise CausalCharacterError("rho0 must be positive at the particle", "null or spacelike")
    d0 = u0 - j0 / rho0
    d1 = -(u1 - j1 / rho0)
    return (d0 * GAMMA0 + d1 * GAMMA1) @ np.asarray(psi, dtype=complex)


def field_lagrangian_density(psi_i: FieldHistory, n, psi_f, N: Overlap, m) -> np.ndarray:
    """Field term ``Re[(1/N)(-i psibar_f gamma^a d_a psi_i + m psibar_f psi_i)]`` on slice ``n``.

    ``psi_i`` supplies slices ``n - 1, n, n + 1`` for the time derivative.
    ``psi_f`` is the final-state spinor on slice ``n``.
    """
    if not 0 < n < len(psi_i) - 1:
        raise GridError(f"slice {n} has no neighbours on both sides")
    lattice = psi_i.lattice
    values_f = psi_f.values if hasattr(psi_f, "values") else np.asarray(psi_f)
    norm_i = np.sqrt(lattice.dx * np.sum(np.abs(psi_i.values[n]) ** 2))
    norm_f = np.sqrt(lattice.dx * np.sum(np.abs(values_f) ** 2))
    if not abs(N.value) > EPS_OVERLAP * norm_i * norm_f:
        raise DegenerateChannelError(f"|N| = {abs(N.value):.3g} too small")
    window = FieldHistory(psi_i.values[n - 1 : n + 2], psi_i.times[n - 1 : n + 2], lattice)
    r = dirac_operator(window, m)[0]
    bar_f = np.conj(values_f) @ GAMMA0
    density = -np.einsum("xi,xi->x", bar_f, r) / N.value
    return np.real(density)


def field_term_rms(psi_i: FieldHistory, psi_f: FieldHistory, m) -> float:
    """RMS over interior slices of the spatial L2 norm of the field term."""
    lattice = psi_i.lattice
    total = []
    for n in range(1, len(psi_i) - 1):
        f = psi_f[n]
        N = overlap(f, psi_i[n], lattice)
        density = field_lagrangian_density(psi_i, n, f, N, m)
        total.append(lattice.dx * np.sum(density**2))
    return float(np.sqrt(np.mean(total)))


def _spinor_at(history: FieldHistory, n, x):
    lat = history.lattice
    s = (x - lat.x_min) / lat.dx
    base = np.floor(s)
    frac = s - base
    i = int(base) % lat.nx
    return (1 - frac) * history.values[n, i] + frac * history.values[n, (i + 1) % lat.nx]


def perturb_worldline(worldline: WorldLine, factor: float) -> WorldLine:
    """Same positions, coordinate velocity scaled by ``factor`` (an off-shell comparison path)."""
    v = worldline.v * factor
    gamma = 1.0 / np.sqrt(1.0 - v * v)
    return WorldLine(worldline.t, worldline.x, gamma, gamma * v, v, worldline.sample_flags, worldline.truncated)


def onshell_samples(history: FieldHistory, worldline: WorldLine, psi_f: FieldHistory | None = None):
    """Per-sample particle Lagrangian, field-equation RHS norm and scan gap along a world line."""
    if len(worldline) == 0:
        raise ValueError("empty world line")
    lattice = history.lattice
    field = CurrentInterpolant(current_history(history, psi_f=psi_f), lattice)
    index = {round(float(t), 9): n for n, t in enumerate(history.times)}
    brackets, rhs, gaps = [], [], []
    for t, x, u0, u1 in zip(worldline.t, worldline.x, worldline.u0, worldline.u1):
        if not np.isfinite(u0):
            continue
        n = index.get(round(float(t), 9))
        if n is None:
            raise GridError(f"world line sample t={t} is not on a slice of the history")
        j0, j1 = field.spatial(n, x)
        rho0 = np.sqrt(j0 * j0 - j1 * j1)
        brackets.append(particle_lagrangian_density(u0, u1, j0, j1, rho0))
        rhs.append(np.linalg.norm(generalized_dirac_rhs(_spinor_at(history, n, x), u0, u1, j0, j1, rho0)))
        gaps.append(minimizer_gap(j0, j1))
    if not brackets:
        raise ValueError("world line has no timelike samples")
    return np.array(brackets), np.array(rhs), np.array(gaps)


def onshell_report(history: FieldHistory, worldline: WorldLine, psi_f: FieldHistory | None, lattice, m) -> OnShellReport:
    """Aggregate the on-shell checks along ``worldline``.

    Without ``psi_f`` the guiding current is the standard one and the field
    term is evaluated with ``psi_f = psi_i``.
    """
    if history.lattice != lattice:
        raise GridError("history was built on a different lattice")
    brackets, rhs, gaps = onshell_samples(history, worldline, psi_f)
    field_rms = field_term_rms(history, psi_f if psi_f is not None else history, m)
    return OnShellReport(
        particle_lagrangian_value=float(np.max(np.abs(brackets))),
        rhs_norm=float(np.max(rhs)),
        field_term_rms=field_rms,
        minimizer_gap=float(np.max(gaps)),
        particle_lagrangian_min=float(np.min(brackets)),
        n_samples=len(brackets),
    )
