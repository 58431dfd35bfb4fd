import numpy as np
import pytest

from retrolab import currents as cur
from retrolab import guidance as gd
from retrolab import io


def test_seventeen_digits_round_trip(rng):
    values = np.concatenate([rng.normal(size=500) * 10.0 ** rng.integers(-300, 300, 500), [0.1, 1 / 3, -0.0, 5e-324]])
    assert all(float(io.fmt(v)) == v for v in values)
    assert io.fmt(np.float64(0.1)) == "0.10000000000000001"
    assert io.fmt(3) == "3" and io.fmt(True) == "true"


def test_trajectory_csv_round_trip(tmp_path, small_lattice):
    currents = [cur.FourCurrentField(np.full(small_lattice.nx, 2.0), np.full(small_lattice.nx, 0.3), n * 0.01) for n in range(6)]
    ens = gd.integrate_ensemble([-1.0, 0.123456789, 2.0], currents, small_lattice)
    path = io.write_trajectories(tmp_path / "t.csv", ens)
    header, rows = io.read_csv(path)
    assert header == ["traj_id", "t", "x", "u0", "u1", "flags"]
    assert len(rows) == 3 * 6
    x = np.array([float(r[2]) for r in rows]).reshape(3, 6)
    u0 = np.array([float(r[3]) for r in rows]).reshape(3, 6)
    assert np.array_equal(x, ens.x)
    assert np.array_equal(u0, ens.u0)


def test_empty_ensemble_is_header_only(tmp_path):
    path = io.write_trajectories(tmp_path / "empty.csv", None)
    assert path.read_text() == "traj_id,t,x,u0,u1,flags\n"


def test_current_csv_carries_causal_class(tmp_path, small_lattice):
    j0 = np.ones(small_lattice.nx)
    j1 = np.zeros(small_lattice.nx)
    j1[0] = 1.0
    j1[1] = 2.0
    path = io.write_currents(tmp_path / "c.csv", [cur.FourCurrentField(j0, j1, 0.0)], small_lattice)
    header, rows = io.read_csv(path)
    assert header == ["t", "x", "j0", "j1", "causal_class"]
    assert [r[4] for r in rows[:3]] == ["null", "spacelike", "timelike"]


def test_failing_manifest_reports_value_and_tolerance(tmp_path):
    manifest = io.RunManifest("verify", {"nx": 8}, seed=1)
    manifest.add(io.below("good", 1e-14, 1e-12), io.below("bad", 0.25, 0.03))
    assert not manifest.passed
    report = io.read_report(io.write_report(tmp_path / "m.txt", manifest.lines()))
    assert report["status"] == "fail"
    assert report["checks.failed"] == "1"
    assert float(report["check.bad.value"]) == 0.25
    assert float(report["check.bad.tolerance"]) == 0.03
    assert report["check.bad.passed"] == "false"


def test_manifest_rejects_duplicate_checks():
    manifest = io.RunManifest("verify", {}, seed=1)
    manifest.add(io.holds("a", True))
    with pytest.raises(ValueError):
        manifest.add(io.holds("a", True))


def test_manifest_leaves_out_wall_clock():
    manifest = io.RunManifest("verify", {}, seed=1, wall_clock=12.5)
    assert not any("wall" in line for line in manifest.lines())


def test_check_helpers():
    assert io.near("n", 4.2, 4.0, 0.5).passed
    assert not io.near("n", 4.6, 4.0, 0.5).passed
    assert io.above("a", 1e-3, 0.0).passed
    assert not io.below("b", float("nan"), 1.0).passed
