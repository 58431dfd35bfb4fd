"""Periodic 1+1 dimensional lattice.

Units are natural (hbar = c = 1); the single spatial index runs over
``nx`` points, time advances in uniform steps ``dt``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpacetimeLattice:
    nx: int
    dx: float
    nt: int
    dt: float
    x_min: float
    periodic: bool = True

    def __post_init__(self):
        if not isinstance(self.nx, (int, np.integer)) or not _is_power_of_two(int(self.nx)):
            raise ConfigError(f"nx must be a positive power of two, got {self.nx!r}", key="nx")
        if not self.dx > 0:
            raise ConfigError(f"dx must be positive, got {self.dx!r}", key="dx")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt!r}", key="dt")
        if int(self.nt) < 0:
            raise ConfigError(f"n_steps must be non-negative, got {self.nt!r}", key="n_steps")
        if not self.periodic:
            raise ConfigError("only periodic lattices are supported", key="periodic")

    @property
    def length(self) -> float:
        return self.nx * self.dx

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.nx)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.nt + 1)

    def wrap(self, x):
        """Map positions into the cell-centred window ``[x_min - dx/2, x_min - dx/2 + L)``."""
        lo = self.x_min - 0.5 * self.dx
        return lo + np.mod(np.asarray(x, dtype=float) - lo, self.length)

    def check_width(self, width: float) -> None:
        if not self.length > 10.0 * width:
            raise ConfigError(
                f"lattice length {self.length:g} must exceed 10x the packet width {width:g}",
                key="packet.width",
            )

    def with_steps(self, nt=None, dt=None) -> "SpacetimeLattice":
        return SpacetimeLattice(
            nx=self.nx,
            dx=self.dx,
            nt=self.nt if nt is None else nt,
            dt=self.dt if dt is None else dt,
            x_min=self.x_min,
        )


def build_lattice(config) -> SpacetimeLattice:
    """Build the lattice described by a :class:`~retrolab.config.SimConfig`."""
    x_min = config.x_min if config.x_min is not None else -0.5 * config.nx * config.dx
    return SpacetimeLattice(nx=config.nx, dx=config.dx, nt=config.n_steps, dt=config.dt, x_min=x_min)


def wavenumbers(lattice: SpacetimeLattice) -> np.ndarray:
    """Angular wavenumbers in discrete Fourier transform order.

    The Nyquist entry carries the negative sign, as in :func:`numpy.fft.fftfreq`.
    """
    return 2.0 * np.pi * np.fft.fftfreq(lattice.nx, d=lattice.dx)
