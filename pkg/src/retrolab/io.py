"""CSV and flat-report serialization.

Reals are written with 17 significant digits, enough to round-trip any
double exactly.
"""
from __future__ import annotations

import csv
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .currents import classify
from .guidance import Ensemble, flag_names


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    relation: str = "<"
    target: float | None = None


def below(name, value, tolerance) -> Check:
    value = float(value)
    return Check(name, value, tolerance, bool(value < tolerance), "<")


def above(name, value, threshold) -> Check:
    value = float(value)
    return Check(name, value, threshold, bool(value > threshold), ">")


def near(name, value, target, tolerance) -> Check:
    value = float(value)
    return Check(name, value, tolerance, bool(abs(value - target) <= tolerance), "~", target)


def holds(name, condition) -> Check:
    return Check(name, 1.0 if condition else 0.0, 1.0, bool(condition), "==")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    checks: list[Check] = field(default_factory=list)
    versions: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    def add(self, *checks: Check):
        for check in checks:
            if any(c.name == check.name for c in self.checks):
                raise ValueError(f"duplicate check {check.name!r}")
            self.checks.append(check)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        """Flat ``key = value`` lines. Wall-clock time is left out so reruns are byte-identical."""
        out = [
            f"command = {self.command}",
            f"status = {'pass' if self.passed else 'fail'}",
            f"seed = {self.seed}",
            f"checks.total = {len(self.checks)}",
            f"checks.failed = {sum(not c.passed for c in self.checks)}",
        ]
        out += [f"version.{k} = {v}" for k, v in sorted(self.versions.items())]
        out += [f"config.{k} = {fmt(v)}" for k, v in self.config.items() if v is not None]
        for c in self.checks:
            out.append(f"check.{c.name}.value = {fmt(c.value)}")
            out.append(f"check.{c.name}.relation = {c.relation}")
            if c.target is not None:
                out.append(f"check.{c.name}.target = {fmt(c.target)}")
            out.append(f"check.{c.name}.tolerance = {fmt(c.tolerance)}")
            out.append(f"check.{c.name}.passed = {fmt(c.passed)}")
        return out


def software_versions() -> dict:
    import scipy

    from . import __version__

    return {
        "retrolab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def write_report(path, items) -> Path:
    """Write ``key = value`` pairs (an iterable of pairs or preformatted lines)."""
    path = Path(path)
    lines = [item if isinstance(item, str) else f"{item[0]} = {fmt(item[1])}" for item in items]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            key, _, value = line.partition(" = ")
            out[key] = value
    return out


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


TRAJECTORY_HEADER = ["traj_id", "t", "x", "u0", "u1", "flags"]
FIELD_HEADER = ["t", "x", "re_psi1", "im_psi1", "re_psi2", "im_psi2"]
KG_FIELD_HEADER = ["t", "x", "re_phi", "im_phi", "re_pi", "im_pi"]
CURRENT_HEADER = ["t", "x", "j0", "j1", "causal_class"]


def write_trajectories(path, ensemble: Ensemble | None, every=1) -> Path:
    def rows():
        if ensemble is None:
            return
        for i in range(len(ensemble)):
            for n in range(0, int(ensemble.n_valid[i]), every):
                names = "|".join(flag_names(int(ensemble.sample_flags[i, n])))
                yield (i, ensemble.t[n], ensemble.x[i, n], ensemble.u0[i, n], ensemble.u1[i, n], names)

    return write_csv(path, TRAJECTORY_HEADER, rows())


def write_fields(path, history, every=1) -> Path:
    x = history.lattice.x
    header = FIELD_HEADER if history.kind == "dirac" else KG_FIELD_HEADER

    def rows():
        for n in range(0, len(history), every):
            a, b = (history.values[n, :, 0], history.values[n, :, 1]) if history.kind == "dirac" else history.values[n]
            t = history.times[n]
            for k in range(len(x)):
                yield (t, x[k], a[k].real, a[k].imag, b[k].real, b[k].imag)

    return write_csv(path, header, rows())


def write_currents(path, currents, lattice, every=1) -> Path:
    x = lattice.x

    def rows():
        for c in currents[::every]:
            causal = classify(c.j0, c.j1)
            for k in range(len(x)):
                yield (c.time_label, x[k], c.j0[k], c.j1[k], causal[k])

    return write_csv(path, CURRENT_HEADER, rows())
