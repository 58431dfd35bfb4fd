"""Guidance of particles by a four-current: ``u^a = j^a / rho0``.

Positions are advanced with ``dx/dt = j1/j0`` (the normalization by
``rho0`` cancels), which stays defined where the current is null or
spacelike. The four-velocity is recorded only where the current is
timelike; elsewhere the sample is flagged.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .currents import NULL, SPACELIKE, FourCurrentField, classify
from .exceptions import CausalCharacterError, GridError, StagnationError
from .grid import SpacetimeLattice

EPS_J0 = 1e-10

# per-sample flag bits
SUPERLUMINAL = 1
NULL_SPEED = 2
SPACELIKE_CELL = 4
STAGNATION = 8
FRAME_ORDER_REVERSAL = 16

FLAG_NAMES = {
    SUPERLUMINAL: "superluminal",
    NULL_SPEED: "null_speed",
    SPACELIKE_CELL: "spacelike",
    STAGNATION: "stagnation",
    FRAME_ORDER_REVERSAL: "frame_order_reversal",
}


def flag_names(bits: int) -> list[str]:
    return [name for bit, name in FLAG_NAMES.items() if bits & bit]


def four_velocity(j0, j1):
    """Unit future-pointing four-velocity along a timelike current."""
    s = j0 * j0 - j1 * j1
    if not j0 > 0:
        raise CausalCharacterError("four-velocity needs a future-pointing current", "past-pointing")
    causal = str(classify(j0, j1))
    if causal != "timelike":
        raise CausalCharacterError("four-velocity needs a timelike current", causal)
    rho0 = math.sqrt(s)
    return j0 / rho0, j1 / rho0


def coordinate_velocity(j0, j1, eps=0.0):
    """``dx/dt = j1/j0``; returns ``(v, superluminal)``.

    ``eps`` is the stagnation threshold on ``|j0|``, normally
    ``EPS_J0 * max(j0)`` over the field in use.
    """
    if not abs(j0) > eps:
        raise StagnationError(f"|j0| = {abs(j0):.3g} is at or below the stagnation threshold {eps:.3g}")
    v = j1 / j0
    return v, abs(v) > 1.0


@dataclass
class WorldLine:
    """One trajectory sampled on the slice times of its guiding current.

    ``u0``/``u1`` are NaN where the local current is not timelike.
    ``x`` is not wrapped back into the box, so it stays continuous.
    """

    t: np.ndarray
    x: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    v: np.ndarray
    sample_flags: np.ndarray
    truncated: bool = False

    def __len__(self):
        return len(self.t)

    @property
    def events(self) -> list[tuple[float, str]]:
        out = []
        for t, bits in zip(self.t, self.sample_flags):
            out.extend((float(t), name) for name in flag_names(int(bits)))
        return out

    @property
    def flags(self) -> list[tuple[float, str]]:
        return self.events


@dataclass
class Ensemble:
    """Trajectories sharing a guiding current, stored as ``(n_traj, n_samples)`` arrays."""

    t: np.ndarray
    x: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    v: np.ndarray
    sample_flags: np.ndarray
    n_valid: np.ndarray
    seed: int | None = None
    x_start: np.ndarray = field(default=None)

    def __len__(self):
        return self.x.shape[0]

    def worldline(self, i) -> WorldLine:
        n = int(self.n_valid[i])
        return WorldLine(
            self.t[:n].copy(),
            self.x[i, :n].copy(),
            self.u0[i, :n].copy(),
            self.u1[i, :n].copy(),
            self.v[i, :n].copy(),
            self.sample_flags[i, :n].copy(),
            truncated=n < len(self.t),
        )

    @property
    def worldlines(self) -> list[WorldLine]:
        return [self.worldline(i) for i in range(len(self))]

    def positions(self, n) -> np.ndarray:
        """Positions at sample ``n`` of the trajectories still running there."""
        alive = self.n_valid > n
        return self.x[alive, n]


class CurrentInterpolant:
    """Bilinear (space, time) interpolation of a current history.

    Linear weights keep interpolated values inside the convex hull of the
    neighbouring grid values, so a future-timelike field stays
    future-timelike between grid points.
    """

    def __init__(self, currents: list[FourCurrentField], lattice: SpacetimeLattice):
        if len(currents) < 1:
            raise GridError("need at least one current slice")
        self.lattice = lattice
        self.times = np.array([c.time_label for c in currents], dtype=float)
        self.j0 = np.stack([c.j0 for c in currents])
        self.j1 = np.stack([c.j1 for c in currents])
        if self.j0.shape[1] != lattice.nx:
            raise GridError("current length does not match lattice")
        self.dt = float(self.times[1] - self.times[0]) if len(currents) > 1 else 0.0
        self.eps = EPS_J0 * float(np.max(np.abs(self.j0)))

    def spatial(self, slice_index, x):
        lat = self.lattice
        s = (np.asarray(x) - lat.x_min) / lat.dx
        base = np.floor(s)
        frac = s - base
        i = base.astype(np.int64) % lat.nx
        ip = (i + 1) % lat.nx
        a0, a1 = self.j0[slice_index], self.j1[slice_index]
        return (1 - frac) * a0[i] + frac * a0[ip], (1 - frac) * a1[i] + frac * a1[ip]

    def __call__(self, interval, tau, x):
        """Current at fraction ``tau`` of slice interval ``interval``."""
        a0, a1 = self.spatial(interval, x)
        if tau == 0.0:
            return a0, a1
        b0, b1 = self.spatial(interval + 1, x)
        return (1 - tau) * a0 + tau * b0, (1 - tau) * a1 + tau * b1


def _sample_record(j0, j1):
    causal = classify(j0, j1)
    timelike = (causal == "timelike") & (j0 > 0)
    rho0 = np.sqrt(np.where(timelike, j0 * j0 - j1 * j1, 1.0))
    u0 = np.where(timelike, j0 / rho0, np.nan)
    u1 = np.where(timelike, j1 / rho0, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = j1 / j0
    bits = np.zeros(j0.shape, dtype=np.int64)
    bits |= np.where(np.abs(v) > 1.0, SUPERLUMINAL, 0)
    bits |= np.where(causal == NULL, NULL_SPEED, 0)
    bits |= np.where(causal == SPACELIKE, SPACELIKE_CELL, 0)
    return u0, u1, v, bits


def _integrate_block(field: CurrentInterpolant, x_start, substeps):
    n_slices = len(field.times)
    n = len(x_start)
    shape = (n, n_slices)
    xs = np.full(shape, np.nan)
    u0s, u1s, vs = np.full(shape, np.nan), np.full(shape, np.nan), np.full(shape, np.nan)
    flags = np.zeros(shape, dtype=np.int64)
    n_valid = np.full(n, n_slices, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    x = np.array(x_start, dtype=float)
    h = field.dt / substeps
    eps = field.eps

    def record(k, j0, j1):
        u0, u1, v, bits = _sample_record(j0, j1)
        xs[alive, k] = x[alive]
        u0s[alive, k], u1s[alive, k], vs[alive, k] = u0[alive], u1[alive], v[alive]
        flags[alive, k] = bits[alive]

    j0, j1 = field(0, 0.0, x)
    stalled = np.abs(j0) <= eps
    if np.any(stalled):
        n_valid[stalled] = 0
        alive &= ~stalled
    record(0, j0, j1)

    def velocity(interval, tau, pos):
        a0, a1 = field(interval, tau, pos)
        bad = np.abs(a0) <= eps
        return np.where(bad, 0.0, a1 / np.where(bad, 1.0, a0)), bad

    for interval in range(n_slices - 1):
        if not alive.any():
            break
        for sub in range(substeps):
            tau0 = sub / substeps
            tau_mid = (sub + 0.5) / substeps
            tau1 = (sub + 1) / substeps
            k1, b1 = velocity(interval, tau0, x)
            k2, b2 = velocity(interval, tau_mid, x + 0.5 * h * k1)
            k3, b3 = velocity(interval, tau_mid, x + 0.5 * h * k2)
            k4, b4 = velocity(interval, tau1, x + h * k3)
            stalled = alive & (b1 | b2 | b3 | b4)
            if np.any(stalled):
                # halt before the step that would need an undefined velocity
                n_valid[stalled] = interval + 1
                flags[stalled, interval] |= STAGNATION
                alive &= ~stalled
            x = np.where(alive, x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), x)
        j0, j1 = field(interval + 1, 0.0, x)
        record(interval + 1, j0, j1)
    return xs, u0s, u1s, vs, flags, n_valid


def integrate_ensemble(x_start, currents, lattice, substeps=4, workers=1, seed=None) -> Ensemble:
    """Integrate many world lines through one current history with classical RK4.

    Trajectories are independent, so splitting them across ``workers``
    threads gives bit-identical results for any worker count.
    """
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    field = CurrentInterpolant(currents, lattice)
    x_start = np.asarray(x_start, dtype=float).ravel()
    if workers > 1 and len(x_start) > 1:
        chunks = np.array_split(x_start, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda c: _integrate_block(field, c, substeps), chunks))
    else:
        blocks = [_integrate_block(field, x_start, substeps)]
    xs, u0s, u1s, vs, flags, n_valid = (np.concatenate(parts) for parts in zip(*blocks))
    return Ensemble(field.times.copy(), xs, u0s, u1s, vs, flags, n_valid, seed, x_start)


def integrate_worldline(x_start, currents, lattice, substeps=4) -> WorldLine:
    """Single world line; see :func:`integrate_ensemble`."""
    return integrate_ensemble([x_start], currents, lattice, substeps).worldline(0)


def _cell_cdf(j0_slice, lattice):
    j0 = np.asarray(j0_slice, dtype=float)
    if j0.shape != (lattice.nx,):
        raise GridError("density slice does not match lattice")
    # negatives at rounding level in the far tails count as empty cells
    floor = EPS_J0 * max(float(np.max(j0)), 0.0)
    negative = j0 < -floor
    if np.any(negative):
        raise ValueError(f"density has {np.count_nonzero(negative)} negative cells; refuse to sample")
    j0 = np.maximum(j0, 0.0)
    edges = lattice.x_min - 0.5 * lattice.dx + lattice.dx * np.arange(lattice.nx + 1)
    cumulative = np.concatenate([[0.0], np.cumsum(j0)])
    total = cumulative[-1]
    if not total > 0:
        raise ValueError("density is identically zero")
    return edges, cumulative / total


def sample_positions(j0_slice, lattice, n, seed) -> np.ndarray:
    """Inverse-CDF draws from ``j0`` taken as constant over each cell centred on a grid point."""
    if n < 0:
        raise ValueError("n must be non-negative")
    edges, cdf = _cell_cdf(j0_slice, lattice)
    if n == 0:
        return np.empty(0)
    u = np.random.default_rng(seed).random(n)
    # np.interp on the inverted CDF is exact for piecewise-linear CDFs,
    # but flat segments (empty cells) need searchsorted
    cell = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, lattice.nx - 1)
    width = cdf[cell + 1] - cdf[cell]
    frac = (u - cdf[cell]) / width
    return edges[cell] + frac * lattice.dx


def density_cdf(j0_slice, lattice):
    """Callable CDF of the cell-wise constant density, over the wrapped window."""
    edges, cdf = _cell_cdf(j0_slice, lattice)

    def cdf_fn(x):
        return np.interp(lattice.wrap(x), edges, cdf)

    return cdf_fn


def equivariance_stat(positions, j0_slice, lattice) -> float:
    """Kolmogorov-Smirnov distance between positions and the density ``j0``."""
    positions = np.asarray(positions, dtype=float)
    if positions.size == 0:
        raise ValueError("no positions given")
    return float(stats.kstest(lattice.wrap(positions), density_cdf(j0_slice, lattice)).statistic)


def order_preserved(ensemble: Ensemble) -> bool:
    """True when the x-ordering of all trajectories is the same at every sample."""
    full = ensemble.n_valid == len(ensemble.t)
    x = ensemble.x[full]
    if len(x) < 2:
        return True
    order = np.argsort(x[:, 0], kind="stable")
    return bool(np.all(np.diff(x[order], axis=0) > 0))


def max_turning(ensemble: Ensemble) -> float:
    """Largest ``|x[n+1] - 2 x[n] + x[n-1]| / dt^2`` over all world lines.

    A corner in a world line shows up as a second difference of order
    ``dv * dt`` rather than ``a * dt^2``, so this blows up as ``1/dt``.
    """
    if len(ensemble.t) < 3:
        return 0.0
    dt = float(ensemble.t[1] - ensemble.t[0])
    second = ensemble.x[:, 2:] - 2 * ensemble.x[:, 1:-1] + ensemble.x[:, :-2]
    return float(np.nanmax(np.abs(second))) / dt**2 if np.isfinite(second).any() else 0.0


def field_acceleration_bound(currents, lattice, floor=1e-8) -> float:
    """``max |d_t v + v d_x v|`` of the velocity field over cells where ``j0 > floor * max j0``."""
    j0 = np.stack([c.j0 for c in currents])
    j1 = np.stack([c.j1 for c in currents])
    dt = currents[1].time_label - currents[0].time_label
    mask = j0 > floor * j0.max()
    v = np.where(mask, j1 / np.where(mask, j0, 1.0), 0.0)
    dv_dt = (v[2:] - v[:-2]) / (2 * dt)
    dv_dx = (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1))[1:-1] / (2 * lattice.dx)
    acc = dv_dt + v[1:-1] * dv_dx
    inner = mask[2:] & mask[:-2] & mask[1:-1] & np.roll(mask, 1, axis=1)[1:-1] & np.roll(mask, -1, axis=1)[1:-1]
    return float(np.max(np.abs(acc[inner]))) if inner.any() else 0.0
