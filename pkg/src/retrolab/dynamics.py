"""Free Dirac and Klein-Gordon evolution on the periodic lattice.

Representation: ``gamma0 = diag(1, -1)``, ``alpha = gamma0 gamma1 = sigma_x``,
hence ``gamma1 = [[0, 1], [-1, 0]]``. The free Hamiltonian of mode ``k`` is
``h(k) = alpha k + gamma0 m`` and each step applies ``exp(-i h(k) dt)``
exactly, so evolution is unitary to rounding with no splitting error.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .exceptions import GridError
from .grid import SpacetimeLattice, wavenumbers

GAMMA0 = np.array([[1, 0], [0, -1]], dtype=complex)
GAMMA1 = np.array([[0, 1], [-1, 0]], dtype=complex)
ALPHA = GAMMA0 @ GAMMA1
IDENTITY = np.eye(2, dtype=complex)

Direction = Literal["forward", "backward"]


@dataclass(frozen=True)
class SpinorField:
    """Two-component field on one time slice; ``values`` has shape ``(nx, 2)``."""

    values: np.ndarray
    time_label: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 2 or values.shape[1] != 2:
            raise GridError(f"spinor values must have shape (nx, 2), got {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def nx(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class KGField:
    """Klein-Gordon field ``phi`` and its time derivative ``pi`` on one slice."""

    phi: np.ndarray
    pi: np.ndarray
    time_label: float = 0.0

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=complex)
        pi = np.asarray(self.pi, dtype=complex)
        if phi.ndim != 1 or phi.shape != pi.shape:
            raise GridError(f"phi and pi must be 1-d of equal length, got {phi.shape} and {pi.shape}")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "pi", pi)

    @property
    def nx(self) -> int:
        return self.phi.shape[0]


@dataclass(frozen=True)
class FieldHistory:
    """Uniformly spaced stack of slices.

    For the Dirac backend ``values`` has shape ``(n_slices, nx, 2)``; for
    Klein-Gordon it has shape ``(n_slices, 2, nx)`` holding ``phi`` and ``pi``.
    ``times`` is ascending for forward runs and descending for backward runs.
    """

    values: np.ndarray
    times: np.ndarray
    lattice: SpacetimeLattice
    kind: Literal["dirac", "kg"] = "dirac"

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, n):
        if self.kind == "dirac":
            return SpinorField(self.values[n], float(self.times[n]))
        return KGField(self.values[n, 0], self.values[n, 1], float(self.times[n]))

    def __iter__(self):
        return (self[n] for n in range(len(self)))

    @property
    def dt(self) -> float:
        """Signed slice spacing."""
        if len(self) < 2:
            return 0.0
        return float(self.times[1] - self.times[0])

    def reversed(self) -> "FieldHistory":
        return FieldHistory(self.values[::-1].copy(), self.times[::-1].copy(), self.lattice, self.kind)


def _check_nx(nx, lattice):
    if nx != lattice.nx:
        raise GridError(f"field has {nx} points but the lattice has {lattice.nx}")


def dirac_hamiltonian(k, m):
    """``h(k) = alpha k + gamma0 m`` stacked over ``k``; shape ``(len(k), 2, 2)``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return k[:, None, None] * ALPHA + m * GAMMA0


def dirac_energy(k, m):
    return np.hypot(k, m)


def dirac_propagator(k, m, tau):
    """Exact ``exp(-i h(k) tau)`` per mode, using ``h(k)^2 = E(k)^2``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    energy = dirac_energy(k, m)
    c = np.cos(energy * tau)[:, None, None]
    s = (np.sin(energy * tau) / energy)[:, None, None]
    return c * IDENTITY - 1j * s * dirac_hamiltonian(k, m)


def positive_energy_spinor(k, m):
    """Unit positive-energy eigenspinor ``(E + m, k) / sqrt(2E(E + m))`` of ``h(k)``."""
    k = np.asarray(k, dtype=float)
    energy = dirac_energy(k, m)
    norm = np.sqrt(2.0 * energy * (energy + m))
    return np.stack([(energy + m) / norm, k / norm], axis=-1).astype(complex)


def field_norm(field: SpinorField, lattice: SpacetimeLattice) -> float:
    """Discrete ``integral psi^dagger psi dx``."""
    _check_nx(field.nx, lattice)
    return float(lattice.dx * np.sum(np.abs(field.values) ** 2))


def spectral_derivative(values, lattice, axis=-1):
    """Exact derivative of the band-limited interpolant along ``axis``."""
    k = wavenumbers(lattice)
    shape = [1] * np.ndim(values)
    shape[axis] = lattice.nx
    # Nyquist mode has no well-defined derivative for complex data; drop it
    ik = 1j * k
    ik[lattice.nx // 2] = 0.0
    return np.fft.ifft(ik.reshape(shape) * np.fft.fft(values, axis=axis), axis=axis)


def _check_packet(lattice, width):
    if width < 4 * lattice.dx:
        raise GridError(f"packet width {width:g} is below 4*dx = {4 * lattice.dx:g}")
    if not lattice.length > 10 * width:
        raise GridError(f"packet width {width:g} too large for lattice length {lattice.length:g}")


def _gaussian_spectrum(lattice, x0, width, k0):
    # |g|^2 has standard deviation `width` about x0
    x = lattice.x
    dist = (x - x0 + 0.5 * lattice.length) % lattice.length - 0.5 * lattice.length
    g = np.exp(-(dist**2) / (4.0 * width**2) + 1j * k0 * dist)
    return np.fft.fft(g)


def gaussian_packet(lattice, m, x0, width, k0, time_label=0.0) -> SpinorField:
    """Normalized positive-energy Gaussian wavepacket.

    Each Fourier mode of a scalar Gaussian of width ``width`` (standard
    deviation of the density) and mean momentum ``k0`` is projected onto the
    positive-energy eigenspinor of the free Hamiltonian, so the packet
    carries no Zitterbewegung.
    """
    _check_packet(lattice, width)
    spectrum = _gaussian_spectrum(lattice, x0, width, k0)
    spinors = positive_energy_spinor(wavenumbers(lattice), m)
    values = np.fft.ifft(spectrum[:, None] * spinors, axis=0)
    values /= np.sqrt(lattice.dx * np.sum(np.abs(values) ** 2))
    return SpinorField(values, time_label)


def plane_wave(lattice, m, mode, time_label=0.0) -> SpinorField:
    """Positive-energy plane wave on lattice mode number ``mode``, unit norm."""
    k = 2.0 * np.pi * mode / lattice.length
    values = positive_energy_spinor(k, m)[None, :] * np.exp(1j * k * lattice.x)[:, None]
    values = values * np.exp(-1j * dirac_energy(k, m) * time_label)
    return SpinorField(values / np.sqrt(lattice.length), time_label)


def _step_sign(direction):
    if direction == "forward":
        return 1.0
    if direction == "backward":
        return -1.0
    raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")


def evolve_dirac(field: SpinorField, lattice: SpacetimeLattice, m, n_steps, direction: Direction = "forward") -> FieldHistory:
    """Evolve ``field`` for ``n_steps`` of size ``lattice.dt``.

    The mode amplitudes are propagated in Fourier space, so rounding from the
    transforms does not accumulate from step to step.
    """
    _check_nx(field.nx, lattice)
    sign = _step_sign(direction)
    step = dirac_propagator(wavenumbers(lattice), m, sign * lattice.dt)
    out = np.empty((n_steps + 1, lattice.nx, 2), dtype=complex)
    out[0] = field.values
    spectrum = np.fft.fft(field.values, axis=0)
    for n in range(1, n_steps + 1):
        spectrum = np.einsum("kij,kj->ki", step, spectrum)
        out[n] = np.fft.ifft(spectrum, axis=0)
    times = field.time_label + sign * lattice.dt * np.arange(n_steps + 1)
    return FieldHistory(out, times, lattice, "dirac")


def kg_gaussian_packet(lattice, m, x0, width, k0, time_label=0.0) -> KGField:
    """Positive-frequency Klein-Gordon packet with unit charge."""
    _check_packet(lattice, width)
    spectrum = _gaussian_spectrum(lattice, x0, width, k0)
    omega = dirac_energy(wavenumbers(lattice), m)
    phi = np.fft.ifft(spectrum)
    pi = np.fft.ifft(-1j * omega * spectrum)
    charge = lattice.dx * np.sum(-np.imag(np.conj(phi) * pi)) / m
    scale = 1.0 / np.sqrt(charge)
    return KGField(phi * scale, pi * scale, time_label)


def kg_charge(field: KGField, lattice, m) -> float:
    """Conserved charge ``dx * sum j0`` with ``j0 = -Im(phi* pi) / m``."""
    _check_nx(field.nx, lattice)
    return float(lattice.dx * np.sum(-np.imag(np.conj(field.phi) * field.pi)) / m)


def evolve_kg(field: KGField, lattice: SpacetimeLattice, m, n_steps, direction: Direction = "forward") -> FieldHistory:
    """Exact harmonic rotation of each ``(phi_k, pi_k)`` pair at ``omega = sqrt(k^2 + m^2)``."""
    _check_nx(field.nx, lattice)
    sign = _step_sign(direction)
    omega = dirac_energy(wavenumbers(lattice), m)
    tau = sign * lattice.dt
    c, s = np.cos(omega * tau), np.sin(omega * tau)
    out = np.empty((n_steps + 1, 2, lattice.nx), dtype=complex)
    out[0, 0], out[0, 1] = field.phi, field.pi
    phi_k, pi_k = np.fft.fft(field.phi), np.fft.fft(field.pi)
    for n in range(1, n_steps + 1):
        phi_k, pi_k = c * phi_k + (s / omega) * pi_k, -omega * s * phi_k + c * pi_k
        out[n, 0] = np.fft.ifft(phi_k)
        out[n, 1] = np.fft.ifft(pi_k)
    times = field.time_label + tau * np.arange(n_steps + 1)
    return FieldHistory(out, times, lattice, "kg")


def dirac_operator(history: FieldHistory, m) -> np.ndarray:
    """``(i gamma^a d_a - m) psi`` on interior slices, shape ``(n_slices - 2, nx, 2)``.

    Time derivative by centred differences, space derivative spectral.
    """
    if history.kind != "dirac":
        raise GridError("dirac_operator needs a Dirac history")
    if len(history) < 3:
        raise GridError(f"need at least 3 slices, got {len(history)}")
    psi = history.values
    dpsi_dt = (psi[2:] - psi[:-2]) / (2.0 * history.dt)
    dpsi_dx = spectral_derivative(psi[1:-1], history.lattice, axis=1)
    return (
        1j * np.einsum("ij,snj->sni", GAMMA0, dpsi_dt)
        + 1j * np.einsum("ij,snj->sni", GAMMA1, dpsi_dx)
        - m * psi[1:-1]
    )


def dirac_equation_residual(history: FieldHistory, lattice: SpacetimeLattice, m) -> float:
    """RMS over interior slices of the spatial L2 norm of the Dirac residual."""
    _check_nx(history.values.shape[1], lattice)
    r = dirac_operator(history, m)
    per_slice = lattice.dx * np.sum(np.abs(r) ** 2, axis=(1, 2))
    return float(np.sqrt(np.mean(per_slice)))


def centroid(history: FieldHistory) -> np.ndarray:
    """Mean position per slice, computed with the minimum-image convention about the peak."""
    lattice = history.lattice
    density = np.sum(np.abs(history.values) ** 2, axis=2)
    x = lattice.x
    out = np.empty(len(history))
    for n, rho in enumerate(density):
        ref = x[np.argmax(rho)]
        rel = (x - ref + 0.5 * lattice.length) % lattice.length - 0.5 * lattice.length
        out[n] = ref + np.sum(rel * rho) / np.sum(rho)
    # unwrap jumps across the periodic seam
    return np.unwrap(out, period=lattice.length)


def group_velocity(history: FieldHistory) -> float:
    """Least-squares slope of the centroid trajectory."""
    slope, _ = np.polyfit(history.times, centroid(history), 1)
    return float(slope)
