"""Command-line entry point: ``retrolab <subcommand> --config FILE``.

Exit status is 0 when every check of the run passes, 1 when a check fails
and 2 for configuration or usage errors. ``RETROLAB_OUTPUT_DIR`` and
``RETROLAB_WORKERS`` override the corresponding config keys.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import currents as cur
from . import dynamics as dyn
from . import guidance as gd
from . import io
from . import onshell as osh
from . import retro
from . import suite
from .config import load_config
from .exceptions import ConfigError
from .grid import build_lattice

logger = logging.getLogger("retrolab")


def _apply_env(config, out=None):
    changes = {}
    if os.environ.get("RETROLAB_OUTPUT_DIR"):
        changes["output_dir"] = os.environ["RETROLAB_OUTPUT_DIR"]
    if os.environ.get("RETROLAB_WORKERS"):
        try:
            changes["workers"] = int(os.environ["RETROLAB_WORKERS"])
        except ValueError:
            raise ConfigError("RETROLAB_WORKERS must be an integer", key="workers") from None
    if out is not None:
        changes["output_dir"] = str(out)
    return config.replace(**changes) if changes else config


def _manifest(command, config):
    return io.RunManifest(
        command=command,
        config={f.name: getattr(config, f.name) for f in dataclasses.fields(config) if f.name not in ("output_dir", "workers")},
        seed=config.seed,
        versions=io.software_versions(),
    )


def cmd_evolve(config, outdir, manifest):
    lattice = build_lattice(config)
    m = config.mass
    if config.backend == "dirac":
        field = suite.initial_packet(config, lattice)
        history = dyn.evolve_dirac(field, lattice, m, lattice.nt)
        norms = np.array([dyn.field_norm(f, lattice) for f in history])
        manifest.add(io.below("dynamics.norm_drift", np.max(np.abs(norms - norms[0])), suite.NORM_DRIFT))
    else:
        field = dyn.kg_gaussian_packet(lattice, m, config.packet_center, config.packet_width, config.packet_momentum)
        history = dyn.evolve_kg(field, lattice, m, lattice.nt)
        charge = np.array([dyn.kg_charge(f, lattice, m) for f in history])
        manifest.add(io.below("dynamics.kg_charge_drift", np.max(np.abs(charge - charge[0])), suite.KG_CHARGE))
    currents = cur.current_history(history, m)
    charges = np.array([c.charge(lattice) for c in currents])
    manifest.add(io.below("currents.charge_drift", np.max(np.abs(charges - charges[0])), suite.CHARGE_DRIFT))
    io.write_fields(outdir / "fields.csv", history, config.output_every)
    io.write_currents(outdir / "currents.csv", currents, lattice, config.output_every)


def cmd_guide(config, outdir, manifest):
    checks, art = suite.guidance_checks(config)
    manifest.add(*checks)
    io.write_trajectories(outdir / "trajectories.csv", art["ensemble"], config.output_every)


def cmd_weak(config, outdir, manifest):
    lattice = build_lattice(config)
    m = config.mass
    history = suite._standard_history(config, lattice)
    psi_f = suite.final_history(config, lattice, lattice.nt)
    standard = cur.current_history(history)
    weak = cur.current_history(history, psi_f=psi_f)
    bohm = gd.integrate_worldline(config.packet_center, standard, lattice, config.substeps)
    two_state = gd.integrate_worldline(config.packet_center, weak, lattice, config.substeps)
    report = osh.onshell_report(history, bohm, None, lattice, m)
    weak_report = osh.onshell_report(history, two_state, psi_f, lattice, m)
    n0 = cur.overlap(psi_f[0], history[0], lattice).value
    n1 = cur.overlap(psi_f[-1], history[-1], lattice).value
    spacelike = sum(cur.current_magnitude(c).n_spacelike for c in weak)
    manifest.add(
        io.below("weak.overlap_drift", abs(n1 - n0), 1e-12),
        io.below("onshell.particle_lagrangian", report.particle_lagrangian_value, suite.ONSHELL),
        io.below("onshell.rhs_norm", report.rhs_norm, suite.ONSHELL),
        io.below("onshell.minimizer_gap", report.minimizer_gap, suite.ONSHELL),
        io.below("onshell.field_term_rms", report.field_term_rms, suite.FIELD_TERM),
        io.below("weak.onshell_particle_lagrangian", weak_report.particle_lagrangian_value, suite.ONSHELL),
        io.below("weak.onshell_rhs_norm", weak_report.rhs_norm, suite.ONSHELL),
    )
    io.write_report(
        outdir / "onshell.txt",
        [(f"standard.{k}", v) for k, v in dataclasses.asdict(report).items()]
        + [(f"weak.{k}", v) for k, v in dataclasses.asdict(weak_report).items()]
        + [("weak.overlap.re", n0.real), ("weak.overlap.im", n0.imag), ("weak.spacelike_cells", spacelike)],
    )
    io.write_currents(outdir / "weak_currents.csv", weak, lattice, config.output_every)
    ensemble = gd.Ensemble(
        bohm.t,
        np.vstack([bohm.x, two_state.x]),
        np.vstack([bohm.u0, two_state.u0]),
        np.vstack([bohm.u1, two_state.u1]),
        np.vstack([bohm.v, two_state.v]),
        np.vstack([bohm.sample_flags, two_state.sample_flags]),
        np.array([len(bohm), len(two_state)]),
    )
    io.write_trajectories(outdir / "trajectories.csv", ensemble, config.output_every)


def cmd_retro(config, outdir, manifest):
    checks, art = suite.retro_checks(config)
    manifest.add(*checks)
    lattice = art["lattice"]
    rows = []
    for name in ("product", "entangled", "random"):
        for which in (1, 2):
            born, marginal = art[(name, which)]
            for k, x in enumerate(lattice.x):
                rows.append((name, which, x, born.j0[k], born.j1[k], marginal.j0[k], marginal.j1[k]))
    io.write_csv(
        outdir / "retro_currents.csv",
        ["state", "particle", "x", "born_j0", "born_j1", "marginal_j0", "marginal_j1"],
        rows,
    )
    # per-channel two-state currents of the heaviest outcomes of the entangled state
    final, ensemble = art["entangled"]
    order = np.argsort(ensemble.weights, axis=None, kind="stable")[::-1][:4]
    rows = []
    for rank, flat in enumerate(order):
        a, b = np.unravel_index(flat, ensemble.weights.shape)
        j = retro.per_particle_weak_current(ensemble.channel(a, b), final, 1, lattice)
        causal = cur.classify(j.j0, j.j1)
        for k, x in enumerate(lattice.x):
            rows.append((rank, a, b, ensemble.weights[a, b], x, j.j0[k], j.j1[k], causal[k]))
    io.write_csv(outdir / "channels.csv", ["rank", "f1", "f2", "weight", "x", "j0", "j1", "causal_class"], rows)


def cmd_boost_check(config, outdir, manifest):
    checks, _ = suite.covariance_checks(config)
    manifest.add(*checks)


def cmd_verify(config, outdir, manifest):
    checks, _ = suite.grid_checks(config)
    manifest.add(*checks)
    checks, art = suite.dynamics_checks(config)
    manifest.add(*checks)
    history = art["history"]
    checks, art = suite.currents_checks(config, history)
    manifest.add(*checks)
    standard, psi_f = art["standard"], art["psi_f"]
    checks, art = suite.guidance_checks(config, history, standard)
    manifest.add(*checks)
    ensemble = art["ensemble"]
    checks, art = suite.onshell_checks(config, history, psi_f, standard)
    manifest.add(*checks)
    worldline = art["worldline"]
    manifest.add(*suite.retro_checks(config)[0])
    manifest.add(*suite.covariance_checks(config, worldline)[0])
    lattice = build_lattice(config)
    io.write_trajectories(outdir / "trajectories.csv", ensemble, config.output_every)
    io.write_currents(outdir / "currents.csv", standard, lattice, config.output_every)


COMMANDS = {
    "evolve": (cmd_evolve, "evolve the initial packet; write fields and currents"),
    "guide": (cmd_guide, "integrate a trajectory ensemble through the standard current"),
    "weak": (cmd_weak, "two-state run: final packet, weak current, on-shell report"),
    "retro": (cmd_retro, "two-particle final-channel study and Born recovery"),
    "boost-check": (cmd_boost_check, "Lorentz covariance suite"),
    "verify": (cmd_verify, "run every invariant check and write a manifest"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="retrolab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
    return parser


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        config = _apply_env(load_config(args.config), args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    outdir = Path(config.output_dir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return 2

    manifest = _manifest(args.command, config)
    start = time.perf_counter()
    COMMANDS[args.command][0](config, outdir, manifest)
    manifest.wall_clock = time.perf_counter() - start
    io.write_report(outdir / "manifest.txt", manifest.lines())
    logger.info("%s finished in %.2f s", args.command, manifest.wall_clock)
    for check in manifest.checks:
        if not check.passed:
            print(f"FAILED {check.name}: value={check.value:.6g} tolerance={check.tolerance:.6g}", file=sys.stderr)
    return 0 if manifest.passed else 1


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
