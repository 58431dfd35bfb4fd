"""Simulation configuration and its flat ``key = value`` file format.

Example::

    # free packet, default run
    nx = 1024
    dx = 0.1
    dt = 0.01
    n_steps = 1000
    mass = 1.0
    packet.center = -20.0
    packet.width = 10.0
    packet.momentum = 1.0
    seed = 20240601
    n_traj = 10000
    backend = dirac
    potential = none
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

from .exceptions import ConfigError

REQUIRED_KEYS = (
    "nx",
    "dx",
    "dt",
    "n_steps",
    "mass",
    "packet.center",
    "packet.width",
    "packet.momentum",
    "seed",
    "n_traj",
    "backend",
    "potential",
)

BACKENDS = ("dirac", "klein_gordon")


@dataclass(frozen=True)
class SimConfig:
    nx: int
    dx: float
    dt: float
    n_steps: int
    mass: float
    packet_center: float
    packet_width: float
    packet_momentum: float
    seed: int
    n_traj: int
    backend: str = "dirac"
    potential: str = "none"
    x_min: float | None = None
    substeps: int = 4
    output_dir: str = "out"
    output_every: int = 10
    workers: int = 1
    # final (post-selected) packet for the two-state run, defined at t = T
    final_center: float | None = None
    final_width: float | None = None
    final_momentum: float | None = None
    # two-particle study on its own, smaller lattice
    joint_nx: int = 64
    joint_dx: float = 0.25
    joint_n_steps: int = 20
    joint_width: float = 1.0
    joint_separation: float = 4.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigError(f"must be positive, got {self.mass!r}", key="mass")
        if not self.packet_width > 0:
            raise ConfigError(f"must be positive, got {self.packet_width!r}", key="packet.width")
        if self.n_traj < 0:
            raise ConfigError(f"must be non-negative, got {self.n_traj!r}", key="n_traj")
        if self.n_steps < 0:
            raise ConfigError(f"must be non-negative, got {self.n_steps!r}", key="n_steps")
        if self.backend not in BACKENDS:
            raise ConfigError(f"must be one of {BACKENDS}, got {self.backend!r}", key="backend")
        if self.potential != "none":
            raise ConfigError("only 'none' is supported", key="potential")
        if self.substeps < 1:
            raise ConfigError("must be at least 1", key="substeps")
        if self.output_every < 1:
            raise ConfigError("must be at least 1", key="output.every")
        if self.workers < 1:
            raise ConfigError("must be at least 1", key="workers")
        if not -(2**63) <= self.seed < 2**64:
            raise ConfigError("must fit in 64 bits", key="seed")

    @property
    def span(self) -> float:
        return self.n_steps * self.dt

    def final_packet(self):
        """(center, width, momentum) of the final packet at ``t = T``.

        Defaults to the initial packet advanced ballistically, shifted by
        0.3 widths and with 0.9x the momentum, so the two states overlap
        substantially without coinciding.
        """
        m, k = self.mass, self.packet_momentum
        drift = k / math.hypot(k, m) * self.span
        center = self.final_center if self.final_center is not None else self.packet_center + drift + 0.3 * self.packet_width
        width = self.final_width if self.final_width is not None else self.packet_width
        momentum = self.final_momentum if self.final_momentum is not None else 0.9 * k
        return center, width, momentum

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


def _parse_int(text):
    return int(text, 0)


def _parse_float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("not finite")
    return value


def _parse_optional_float(text):
    return None if text.lower() == "none" else _parse_float(text)


def _parse_str(text):
    return text


# file key -> (dataclass field, parser)
_SCHEMA = {
    "nx": ("nx", _parse_int),
    "dx": ("dx", _parse_float),
    "dt": ("dt", _parse_float),
    "n_steps": ("n_steps", _parse_int),
    "mass": ("mass", _parse_float),
    "packet.center": ("packet_center", _parse_float),
    "packet.width": ("packet_width", _parse_float),
    "packet.momentum": ("packet_momentum", _parse_float),
    "seed": ("seed", _parse_int),
    "n_traj": ("n_traj", _parse_int),
    "backend": ("backend", _parse_str),
    "potential": ("potential", _parse_str),
    "x_min": ("x_min", _parse_optional_float),
    "substeps": ("substeps", _parse_int),
    "output.dir": ("output_dir", _parse_str),
    "output.every": ("output_every", _parse_int),
    "workers": ("workers", _parse_int),
    "final.center": ("final_center", _parse_optional_float),
    "final.width": ("final_width", _parse_optional_float),
    "final.momentum": ("final_momentum", _parse_optional_float),
    "joint.nx": ("joint_nx", _parse_int),
    "joint.dx": ("joint_dx", _parse_float),
    "joint.n_steps": ("joint_n_steps", _parse_int),
    "joint.width": ("joint_width", _parse_float),
    "joint.separation": ("joint_separation", _parse_float),
}


def parse_config(text: str) -> SimConfig:
    """Parse flat ``key = value`` text into a validated :class:`SimConfig`.

    Blank lines and ``#`` comments are ignored. Unknown, duplicate and
    missing keys are errors, as is any value that fails to parse. Lattice
    invariants (power-of-two ``nx``, positive steps, the 10x width rule)
    are checked here too so bad files fail before any work starts.
    """
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _SCHEMA:
            raise ConfigError("unknown key", key=key, line=lineno)
        if key in values:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", key=key, line=lineno)
        if not value:
            raise ConfigError("empty value", key=key, line=lineno)
        field, parser = _SCHEMA[key]
        try:
            values[field] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"cannot parse value {value!r}: {exc}", key=key, line=lineno) from None
        lines[key] = lineno

    missing = [key for key in REQUIRED_KEYS if key not in lines]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}", key=missing[0])

    try:
        config = SimConfig(**values)
    except ConfigError as exc:
        if exc.key is not None and exc.line is None and exc.key in lines:
            raise ConfigError(exc.reason, key=exc.key, line=lines[exc.key]) from None
        raise

    # fail fast on lattice invariants
    from .grid import build_lattice

    try:
        lattice = build_lattice(config)
        lattice.check_width(config.packet_width)
    except ConfigError as exc:
        raise ConfigError(exc.reason, key=exc.key, line=lines.get(exc.key)) from None
    return config


def load_config(path) -> SimConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def format_config(config: SimConfig) -> str:
    """Inverse of :func:`parse_config` (round-trips exactly)."""
    out = []
    for key, (field, _) in _SCHEMA.items():
        value = getattr(config, field)
        if value is None:
            continue
        if isinstance(value, float):
            value = repr(value)
        out.append(f"{key} = {value}")
    return "\n".join(out) + "\n"
