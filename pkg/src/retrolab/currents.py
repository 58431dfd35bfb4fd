"""Four-currents built from Dirac and Klein-Gordon fields.

Index placement follows the (+, -) metric: ``j_a j^a = j0**2 - j1**2``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dynamics import ALPHA, FieldHistory, KGField, SpinorField, spectral_derivative
from .exceptions import DegenerateChannelError, GridError, TimeLabelError
from .grid import SpacetimeLattice

logger = logging.getLogger(__name__)

EPS_OVERLAP = 1e-8
EPS_NULL = 1e-12

TIMELIKE, NULL, SPACELIKE = "timelike", "null", "spacelike"


@dataclass(frozen=True)
class FourCurrentField:
    j0: np.ndarray
    j1: np.ndarray
    time_label: float = 0.0

    def __post_init__(self):
        j0 = np.asarray(self.j0, dtype=float)
        j1 = np.asarray(self.j1, dtype=float)
        if j0.shape != j1.shape:
            raise GridError(f"j0 and j1 shapes differ: {j0.shape} vs {j1.shape}")
        object.__setattr__(self, "j0", j0)
        object.__setattr__(self, "j1", j1)

    @property
    def interval(self) -> np.ndarray:
        return self.j0**2 - self.j1**2

    def charge(self, lattice) -> float:
        return float(lattice.dx * np.sum(self.j0))

    def __mul__(self, factor):
        return FourCurrentField(self.j0 * factor, self.j1 * factor, self.time_label)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Rho0Field:
    rho0: np.ndarray
    causal_class: np.ndarray
    past_pointing: np.ndarray

    @property
    def n_spacelike(self) -> int:
        return int(np.count_nonzero(self.causal_class == SPACELIKE))

    @property
    def n_null(self) -> int:
        return int(np.count_nonzero(self.causal_class == NULL))


@dataclass(frozen=True)
class Overlap:
    value: complex
    time_label: float = 0.0


def bilinears(left, right):
    """``(left^dagger right, left^dagger alpha right)`` cell by cell.

    These are ``psibar_l gamma^a psi_r`` for ``a = 0, 1``. Leading axes of
    the ``(..., 2)`` inputs broadcast.
    """
    left = np.conj(left)
    b0 = left[..., 0] * right[..., 0] + left[..., 1] * right[..., 1]
    b1 = np.einsum("...i,ij,...j->...", left, ALPHA, right)
    return b0, b1


def dirac_current(field: SpinorField) -> FourCurrentField:
    """``j^a = psibar gamma^a psi``: ``j0 = |psi1|^2 + |psi2|^2``, ``j1 = 2 Re(psi1* psi2)``."""
    psi = field.values
    j0 = np.abs(psi[:, 0]) ** 2 + np.abs(psi[:, 1]) ** 2
    j1 = 2.0 * np.real(np.conj(psi[:, 0]) * psi[:, 1])
    return FourCurrentField(j0, j1, field.time_label)


def kg_current(field: KGField, lattice: SpacetimeLattice, m) -> FourCurrentField:
    """Klein-Gordon current ``(i/2m)(phi* d^a phi - phi d^a phi*)``."""
    if field.nx != lattice.nx:
        raise GridError(f"field has {field.nx} points but the lattice has {lattice.nx}")
    phi = field.phi
    j0 = -np.imag(np.conj(phi) * field.pi) / m
    j1 = np.imag(np.conj(phi) * spectral_derivative(phi, lattice)) / m
    return FourCurrentField(j0, j1, field.time_label)


def overlap(psi_f: SpinorField, psi_i: SpinorField, lattice: SpacetimeLattice) -> Overlap:
    """``N = <f|i> = dx * sum psi_f^dagger psi_i``."""
    if psi_f.time_label != psi_i.time_label:
        raise TimeLabelError(f"slices at t={psi_f.time_label} and t={psi_i.time_label} cannot be overlapped")
    if psi_f.nx != lattice.nx or psi_i.nx != lattice.nx:
        raise GridError("field length does not match lattice")
    value = lattice.dx * np.sum(np.conj(psi_f.values) * psi_i.values)
    return Overlap(complex(value), psi_i.time_label)


def overlap_floor(psi_i_values, psi_f_values, dx) -> float:
    norm_i = np.sqrt(dx * np.sum(np.abs(psi_i_values) ** 2))
    norm_f = np.sqrt(dx * np.sum(np.abs(psi_f_values) ** 2))
    return EPS_OVERLAP * norm_i * norm_f


def weak_bilinear(psi_i, psi_f, n):
    """Both terms of the two-state current, summed; complex with zero imaginary part.

    ``(1/N) psibar_f gamma^a psi_i + (1/N*) psibar_i gamma^a psi_f``.
    ``n`` broadcasts against the leading axes of ``psi_i`` and ``psi_f``.
    """
    n = np.asarray(n, dtype=complex)[..., None]
    fi0, fi1 = bilinears(psi_f, psi_i)
    if_0, if_1 = bilinears(psi_i, psi_f)
    return fi0 / n + if_0 / np.conj(n), fi1 / n + if_1 / np.conj(n)


def weak_current(psi_i: SpinorField, psi_f: SpinorField, N: Overlap, dx: float | None = None) -> FourCurrentField:
    """Two-state current normalized by the overlap ``N``.

    Without ``dx`` the degeneracy test uses the cell-sum norms, which only
    differ from the lattice norms by the factor ``dx``.
    """
    scale = 1.0 if dx is None else dx
    floor = overlap_floor(psi_i.values, psi_f.values, scale)
    if not abs(N.value) > floor:
        raise DegenerateChannelError(f"|N| = {abs(N.value):.3g} is below the degeneracy floor {floor:.3g}")
    j0, j1 = weak_bilinear(psi_i.values, psi_f.values, N.value)
    return FourCurrentField(np.real(j0), np.real(j1), psi_i.time_label)


def classify(j0, j1):
    """Causal class of each cell, with a relative null band."""
    j0 = np.asarray(j0, dtype=float)
    j1 = np.asarray(j1, dtype=float)
    s = j0**2 - j1**2
    band = EPS_NULL * j0**2
    return np.where(np.abs(s) <= band, NULL, np.where(s > 0, TIMELIKE, SPACELIKE))


def current_magnitude(j: FourCurrentField) -> Rho0Field:
    """``rho0 = sqrt(|j_a j^a|)`` with an explicit timelike/null/spacelike label per cell.

    Spacelike cells get the modulus rather than an imaginary magnitude and
    are reported through the log.
    """
    s = j.interval
    causal = classify(j.j0, j.j1)
    rho0 = np.where(causal == NULL, 0.0, np.sqrt(np.abs(s)))
    result = Rho0Field(rho0, causal, j.j0 < 0)
    if result.n_spacelike:
        logger.info("current at t=%g has %d spacelike cells", j.time_label, result.n_spacelike)
    return result


def current_history(history: FieldHistory, m=None, psi_f: FieldHistory | None = None) -> list[FourCurrentField]:
    """Currents for every slice of ``history``.

    With ``psi_f`` the two-state current is built slice by slice, each
    normalized by its own overlap.
    """
    lattice = history.lattice
    if history.kind == "kg":
        if m is None:
            raise ValueError("Klein-Gordon currents need the mass")
        return [kg_current(f, lattice, m) for f in history]
    if psi_f is None:
        return [dirac_current(f) for f in history]
    if len(psi_f) != len(history):
        raise GridError("initial and final histories have different lengths")
    out = []
    for fi, ff in zip(history, psi_f):
        out.append(weak_current(fi, ff, overlap(ff, fi, lattice), dx=lattice.dx))
    return out


def continuity_residual(currents: list[FourCurrentField], lattice: SpacetimeLattice) -> float:
    """RMS of ``d_t j0 + d_x j1`` over interior slices and all cells.

    Slice spacing is taken from the time labels, which must be uniform.
    """
    if len(currents) < 3:
        raise GridError(f"need at least 3 slices, got {len(currents)}")
    times = np.array([c.time_label for c in currents])
    steps = np.diff(times)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0) or steps[0] == 0:
        raise GridError("current slices must be uniformly spaced in time")
    j0 = np.stack([c.j0 for c in currents])
    j1 = np.stack([c.j1 for c in currents])
    dj0_dt = (j0[2:] - j0[:-2]) / (2.0 * steps[0])
    dj1_dx = np.real(spectral_derivative(j1[1:-1], lattice, axis=1))
    return float(np.sqrt(np.mean((dj0_dt + dj1_dx) ** 2)))
