"""Two non-interacting particles with final boundary conditions.

A joint state lives on the ``nx * nx`` configuration grid with a 2x2
spinor block per point, ``values[x1, x2, s1, s2]``. Contracting it with a
final state of one particle leaves an ordinary single-particle field on
the lattice; paired with the other particle's final state, that field
defines a two-state current per particle and per measurement outcome.
Averaging those currents with Born weights gives back the standard
marginal current.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np

from .currents import FourCurrentField, bilinears, overlap_floor, weak_bilinear, weak_current, Overlap
from .dynamics import ALPHA, SpinorField, dirac_propagator
from .exceptions import DegenerateChannelError, GridError, IncompleteEnsembleError, TimeLabelError
from .grid import SpacetimeLattice, wavenumbers

logger = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-14


@dataclass(frozen=True)
class JointField:
    values: np.ndarray
    time_label: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 4 or values.shape[2:] != (2, 2) or values.shape[0] != values.shape[1]:
            raise GridError(f"joint values must have shape (nx, nx, 2, 2), got {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    def norm(self, lattice) -> float:
        return float(lattice.dx**2 * np.sum(np.abs(self.values) ** 2))


@dataclass(frozen=True)
class FinalChannel:
    f1: SpinorField
    f2: SpinorField
    amplitude: complex
    weight: float

    @property
    def negligible(self) -> bool:
        return self.weight < WEIGHT_FLOOR


@dataclass(frozen=True)
class ChannelEnsemble:
    """All product outcomes ``(a, b)`` of a final measurement on both particles.

    ``basis1[a]`` and ``basis2[b]`` are ``(nx, 2)`` single-particle states;
    ``amplitudes[a, b] = <basis1[a] basis2[b] | Psi>``.
    """

    basis1: np.ndarray
    basis2: np.ndarray
    amplitudes: np.ndarray
    time_label: float
    basis: str
    complete: bool
    dropped: frozenset = frozenset()

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __len__(self):
        return self.amplitudes.size - len(self.dropped)

    def channel(self, a, b) -> FinalChannel:
        amp = complex(self.amplitudes[a, b])
        return FinalChannel(
            SpinorField(self.basis1[a], self.time_label),
            SpinorField(self.basis2[b], self.time_label),
            amp,
            abs(amp) ** 2,
        )

    @property
    def channels(self) -> Iterator[FinalChannel]:
        n1, n2 = self.amplitudes.shape
        for a in range(n1):
            for b in range(n2):
                if (a, b) not in self.dropped:
                    yield self.channel(a, b)

    def without(self, a, b) -> "ChannelEnsemble":
        return ChannelEnsemble(
            self.basis1, self.basis2, self.amplitudes, self.time_label, self.basis,
            complete=False, dropped=self.dropped | {(a, b)},
        )


def _check_lattice(nx, lattice):
    if nx != lattice.nx:
        raise GridError(f"field has {nx} points but the lattice has {lattice.nx}")


def product_state(phi: SpinorField, chi: SpinorField) -> np.ndarray:
    return np.einsum("xi,yj->xyij", phi.values, chi.values)


def entangled_joint_state(packet_a1, packet_b1, packet_a2, packet_b2, c1, c2, lattice) -> JointField:
    """Normalized ``c1 A1 (x) A2 + c2 B1 (x) B2``."""
    if c1 == 0 and c2 == 0:
        raise ValueError("c1 and c2 cannot both be zero")
    for p in (packet_a1, packet_b1, packet_a2, packet_b2):
        _check_lattice(p.nx, lattice)
    values = c1 * product_state(packet_a1, packet_a2) + c2 * product_state(packet_b1, packet_b2)
    values = values / np.sqrt(lattice.dx**2 * np.sum(np.abs(values) ** 2))
    return JointField(values, packet_a1.time_label)


def evolve_joint(joint: JointField, lattice, m1, m2, n_steps, direction="forward") -> list[JointField]:
    """Free evolution under ``H1 (x) 1 + 1 (x) H2``, exact per pair of modes."""
    _check_lattice(joint.nx, lattice)
    sign = {"forward": 1.0, "backward": -1.0}[direction]
    k = wavenumbers(lattice)
    u1 = dirac_propagator(k, m1, sign * lattice.dt)
    u2 = dirac_propagator(k, m2, sign * lattice.dt)
    spectrum = np.fft.fft2(joint.values, axes=(0, 1))
    out = [joint]
    for n in range(1, n_steps + 1):
        spectrum = np.einsum("aij,bkl,abjl->abik", u1, u2, spectrum, optimize=True)
        out.append(JointField(np.fft.ifft2(spectrum, axes=(0, 1)), joint.time_label + sign * n * lattice.dt))
    return out


def conditional_field(joint: JointField, f_other: SpinorField, which, lattice) -> SpinorField:
    """Contract the other particle's slot with ``f_other``; unnormalized field of particle ``which``."""
    _check_lattice(joint.nx, lattice)
    if f_other.time_label != joint.time_label:
        raise TimeLabelError(f"final state at t={f_other.time_label} vs joint state at t={joint.time_label}")
    f = np.conj(f_other.values)
    if which == 1:
        values = lattice.dx * np.einsum("yj,xyij->xi", f, joint.values)
    elif which == 2:
        values = lattice.dx * np.einsum("xi,xyij->yj", f, joint.values)
    else:
        raise ValueError(f"which must be 1 or 2, got {which!r}")
    return SpinorField(values, joint.time_label)


def _position_basis(lattice):
    # e_(x, s) = delta_x delta_s / sqrt(dx); index a = 2 * x + s
    basis = np.zeros((2 * lattice.nx, lattice.nx, 2), dtype=complex)
    for x in range(lattice.nx):
        for s in range(2):
            basis[2 * x + s, x, s] = 1.0 / np.sqrt(lattice.dx)
    return basis


def _momentum_basis(lattice):
    # plane wave e^{ikx}/sqrt(L) times a unit spinor; index a = 2 * mode + s
    k = wavenumbers(lattice)
    waves = np.exp(1j * np.outer(k, lattice.x)) / np.sqrt(lattice.length)
    basis = np.zeros((2 * lattice.nx, lattice.nx, 2), dtype=complex)
    for mode in range(lattice.nx):
        for s in range(2):
            basis[2 * mode + s, :, s] = waves[mode]
    return basis


def final_channel_ensemble(joint_at_T: JointField, lattice, basis: Literal["position", "momentum"] = "position") -> ChannelEnsemble:
    """Complete orthonormal product basis of final outcomes with their Born amplitudes."""
    _check_lattice(joint_at_T.nx, lattice)
    if basis == "position":
        b = _position_basis(lattice)
    elif basis == "momentum":
        b = _momentum_basis(lattice)
    else:
        raise ValueError(f"unknown basis {basis!r}")
    amplitudes = lattice.dx**2 * np.einsum("axi,byj,xyij->ab", np.conj(b), np.conj(b), joint_at_T.values, optimize=True)
    ensemble = ChannelEnsemble(b, b, amplitudes, joint_at_T.time_label, basis, complete=True)
    negligible = int(np.count_nonzero(ensemble.weights < WEIGHT_FLOOR))
    logger.debug("%d of %d channels below weight floor", negligible, amplitudes.size)
    return ensemble


def per_particle_weak_current(channel: FinalChannel, joint: JointField, which, lattice) -> FourCurrentField:
    """Two-state current of particle ``which`` for one final outcome.

    Initial field: the joint state contracted with the other particle's
    final state. Final field: this particle's final state. Normalization:
    the channel amplitude.
    """
    f_this, f_other = (channel.f1, channel.f2) if which == 1 else (channel.f2, channel.f1)
    psi_i = conditional_field(joint, f_other, which, lattice)
    return weak_current(psi_i, f_this, Overlap(channel.amplitude, joint.time_label), dx=lattice.dx)


def born_average_current(ensemble: ChannelEnsemble, joint: JointField, which, lattice) -> FourCurrentField:
    """``sum_f weight_f * j_f`` over every channel of a complete ensemble.

    Channels are processed in blocks sharing the other particle's final
    state; each block's two-state currents are formed explicitly and then
    weighted. For channels whose amplitude is below the degeneracy floor
    the current itself is undefined but ``weight * current`` has the finite
    limit ``2 Re[N* f^dagger gamma0 gamma^a psi_i]``, which is used instead.
    """
    if not ensemble.complete or ensemble.dropped:
        raise IncompleteEnsembleError("Born averaging needs a complete channel ensemble")
    if ensemble.time_label != joint.time_label:
        raise TimeLabelError("ensemble and joint state are at different times")
    if which == 1:
        this_basis, other_basis, amps = ensemble.basis1, ensemble.basis2, ensemble.amplitudes
    elif which == 2:
        this_basis, other_basis, amps = ensemble.basis2, ensemble.basis1, ensemble.amplitudes.T
    else:
        raise ValueError(f"which must be 1 or 2, got {which!r}")
    acc0 = np.zeros(lattice.nx)
    acc1 = np.zeros(lattice.nx)
    for b, f_other in enumerate(other_basis):
        psi_i = conditional_field(joint, SpinorField(f_other, joint.time_label), which, lattice).values
        n = amps[:, b]
        weights = np.abs(n) ** 2
        floors = overlap_floor(psi_i, this_basis[0], lattice.dx) * np.sqrt(
            np.sum(np.abs(this_basis) ** 2, axis=(1, 2)) / np.sum(np.abs(this_basis[0]) ** 2)
        )
        ok = np.abs(n) > floors
        block0 = np.zeros((len(n), lattice.nx))
        block1 = np.zeros((len(n), lattice.nx))
        if ok.any():
            j0, j1 = weak_bilinear(psi_i[None], this_basis[ok], n[ok])
            block0[ok] = weights[ok, None] * np.real(j0)
            block1[ok] = weights[ok, None] * np.real(j1)
        if (~ok).any():
            fi0, fi1 = bilinears(this_basis[~ok], psi_i[None])
            block0[~ok] = 2.0 * np.real(np.conj(n[~ok])[:, None] * fi0)
            block1[~ok] = 2.0 * np.real(np.conj(n[~ok])[:, None] * fi1)
        acc0 += np.sum(block0, axis=0)
        acc1 += np.sum(block1, axis=0)
    return FourCurrentField(acc0, acc1, joint.time_label)


def marginal_current(joint: JointField, which, lattice) -> FourCurrentField:
    """Standard current of one particle with the other integrated out."""
    _check_lattice(joint.nx, lattice)
    psi = joint.values
    if which == 1:
        j0 = lattice.dx * np.sum(np.abs(psi) ** 2, axis=(1, 2, 3))
        j1 = lattice.dx * np.real(np.einsum("xyij,ik,xykj->x", np.conj(psi), ALPHA, psi))
    elif which == 2:
        j0 = lattice.dx * np.sum(np.abs(psi) ** 2, axis=(0, 2, 3))
        j1 = lattice.dx * np.real(np.einsum("xyij,jk,xyik->y", np.conj(psi), ALPHA, psi))
    else:
        raise ValueError(f"which must be 1 or 2, got {which!r}")
    return FourCurrentField(j0, j1, joint.time_label)


def reduced_purity(joint: JointField, lattice) -> float:
    """``Tr rho1^2`` of particle 1's reduced density matrix."""
    m = lattice.dx * joint.values.transpose(0, 2, 1, 3).reshape(2 * joint.nx, 2 * joint.nx)
    rho = m @ m.conj().T
    return float(np.real(np.trace(rho @ rho)))


def parity(field: SpinorField) -> SpinorField:
    """``gamma0 psi(-x)`` on a lattice symmetric about the origin."""
    mirrored = np.roll(field.values[::-1], 1, axis=0)
    return SpinorField(mirrored * np.array([1.0, -1.0]), field.time_label)
