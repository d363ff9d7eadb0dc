import json
import math

import numpy as np
import pytest

from dispersion_lab import io as dio
from dispersion_lab.cli import main
from dispersion_lab.errors import DataError
from dispersion_lab.fields import FieldGrid
from dispersion_lab.semiclassical import Grid1D, solve_nls

from reference_values import KDV_PHI


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    out = capsys.readouterr() if capsys is not None else None
    return code, out


# ---------------------------------------------------------------------------
# formatting and readers


def test_fmt():
    assert dio.fmt(1 / 3, "table") == "0.33333"
    assert dio.fmt(-1e-9, "table") == "0.00000"
    assert float(dio.fmt(1 / 3)) == 1 / 3
    with pytest.raises(ValueError):
        dio.fmt(1.0, "wide")


def test_profile_round_trip(tmp_path):
    x = np.linspace(-4, 4, 81)
    v = -np.exp(-x**2)
    path = tmp_path / "p.csv"
    dio.write_kdv_profile(path, x, v)
    well = dio.read_kdv_profile(path)
    np.testing.assert_array_equal(well.values, v)
    assert path.read_bytes().startswith(b"x,value\n")
    dio.write_nls_profile(tmp_path / "n.csv", x, 1 + 0.5 * v, -1 - 0.5 * v)
    assert dio.read_nls_profile(tmp_path / "n.csv").lambda_min == pytest.approx(0.5)


def test_field_round_trip(tmp_path):
    x = 0.1 * np.arange(32)
    u = np.exp(1j * x)
    path = tmp_path / "f.csv"
    dio.write_text(path, dio.field_csv(x, u))
    f = dio.read_field(path)
    np.testing.assert_array_equal(f.values, u)
    assert f.spacing[0] == pytest.approx(0.1)


def test_field_round_trip_table_precision(tmp_path):
    x = 0.013 * np.arange(40)
    path = tmp_path / "f.csv"
    dio.write_text(path, dio.field_csv(x, np.sin(x), "table"))
    f = dio.read_field(path)
    np.testing.assert_allclose(f.values, np.sin(x), atol=5e-6)


def test_reader_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,val\n1,2\n")
    with pytest.raises(DataError):
        dio.read_csv(bad, ["x", "value"])
    bad.write_text("x,value\n1,abc\n")
    with pytest.raises(DataError):
        dio.read_csv(bad, ["x", "value"])
    bad.write_text("x,value\n0,1\n1,1\n3,1\n")
    with pytest.raises(DataError):
        dio.read_field(bad)
    with pytest.raises(DataError):
        dio.read_csv(tmp_path / "missing.csv", ["x"])


def test_field2d_round_trip(tmp_path):
    f = FieldGrid.from_function(lambda x, y: np.stack([x, y * y], axis=-1), (4, 5), (2.0, 3.0))
    path = tmp_path / "u.csv"
    dio.write_text(path, dio.field2d_csv(f, dio.VECTOR_NAMES))
    g = dio.read_field2d(path, dio.VECTOR_NAMES, (2,))
    np.testing.assert_array_equal(g.values, f.values)
    assert g.same_grid(f)


def test_trajectory_round_trip(tmp_path):
    grid = Grid1D(10.0, 64)
    traj = solve_nls(lambda x: 1 - 0.2 * np.exp(-x**2), lambda x: 0 * x, 0.2, grid, 1e-3, 4e-3, snap_every=2)
    manifest = dio.write_trajectory(tmp_path / "run", traj)
    back = dio.read_trajectory(manifest)
    np.testing.assert_array_equal(back.frames, traj.frames)
    np.testing.assert_array_equal(back.times, traj.times)
    assert back.kind == "nls" and back.epsilon == 0.2


# ---------------------------------------------------------------------------
# commands


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    assert "table1" in capsys.readouterr().out


def test_bad_invocations_exit_one(capsys):
    assert main(["bogus"]) == 1
    assert main(["phi", "kdv"]) == 1
    assert main(["table1", "--tol", "-1"]) == 1
    assert main(["phi", "kdv", "--beta", "2", "--eta-min", "0", "--steps", "2"]) == 1
    assert "error" in capsys.readouterr().err


def test_conservation_failure_exits_two(tmp_path, capsys):
    argv = ["simulate", "nls", "--beta", "2", "--epsilon", "0.05", "--grid-n", "64", "--length", "20",
            "--dt", "0.004", "--t-final", "0.4", "--out", tmp_path / "r"]
    assert run(argv + ["--strict"], capsys)[0] == 2
    assert run(argv, capsys)[0] == 0
    report = json.loads((tmp_path / "r" / "conservation.json").read_text())
    assert not report["passed"]


@pytest.mark.filterwarnings("ignore::dispersion_lab.profiles.NonSmoothProfileWarning")
def test_table1_wide(tmp_path):
    out = tmp_path / "t1.csv"
    assert main(["table1", "--layout", "wide", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "eta,beta=1,beta=1.5,beta=2,beta=4"
    values = np.array([[float(v) for v in line.split(",")[1:]] for line in lines[1:]])
    assert values.shape == (9, 4)
    cols = [0, 2, 3]
    np.testing.assert_allclose(values[:, cols], KDV_PHI[:, cols], rtol=1e-4)


def test_table1_long_reads_back(tmp_path):
    out = tmp_path / "t1.csv"
    assert main(["table1", "--betas", "2", "--precision", "full", "--out", str(out)]) == 0
    cols = dio.read_table(out, "eta", "phi")
    assert cols["phi"][-1] == pytest.approx(3.05934, abs=1e-4)
    assert np.all(cols["err"] < 1e-8)


def test_table2_json(capsys):
    code, out = run(["table2", "--betas", "3.5", "--format", "json"], capsys)
    assert code == 0
    payload = json.loads(out.out)
    assert payload["schema_version"] == 1
    assert payload["tables"][0]["g"][-1] == pytest.approx(1.64733, abs=5e-5)


def test_sign_nls_mixed(capsys):
    code, out = run(["sign", "nls", "--beta", "3.5"], capsys)
    assert code == 0
    payload = json.loads(out.out)
    assert payload["classification"] == "mixed"
    bad = [w["at"] for w in payload["witness_points"] if w["sign"] < 0]
    assert bad == [[0.8, 0.9]] == payload["violations"]
    assert payload["schema_version"] == 1


def test_sign_kdv(capsys):
    code, out = run(["sign", "kdv", "--beta", "2"], capsys)
    assert code == 0 and json.loads(out.out)["classification"] == "antidiffusive"


def test_phi_with_profile(tmp_path, capsys):
    x = np.linspace(-5, 5, 2001)
    path = tmp_path / "p.csv"
    dio.write_kdv_profile(path, x, -np.exp(-x**2))
    code, out = run(["phi", "kdv", "--profile", path, "--eta-min", "0.5", "--steps", "1", "--tol", "1e-8"], capsys)
    assert code == 0
    row = out.out.splitlines()[1].split(",")
    assert float(row[2]) == pytest.approx(2.62709, abs=5e-4)


def test_phi_nls_grid(capsys):
    code, out = run(["phi", "nls", "--beta", "2", "--steps", "5"], capsys)
    assert code == 0
    rows = out.out.splitlines()
    assert rows[0] == "beta,lambda,phi,err"
    assert rows[1].split(",")[2] == "0.00000"


def test_lattice_command(tmp_path):
    out = tmp_path / "lat.csv"
    assert main(["lattice", "--beta", "2", "--epsilon", "0.05", "--time", "10", "--samples", "500",
                 "--out", str(out)]) == 0
    f = dio.read_csv(out, ["x", "rho"])
    assert f["rho"].size == 500 and f["rho"].min() > 0.0
    assert main(["lattice", "--beta", "2", "--epsilon", "5", "--time", "10"]) == 1


def test_simulate_then_wigner(tmp_path):
    run_dir = tmp_path / "run"
    assert main(["simulate", "kdv", "--beta", "2", "--epsilon", "0.2", "--grid-n", "256", "--length", "30",
                 "--dt", "0.001", "--t-final", "0.01", "--snap-every", "5", "--out", str(run_dir)]) == 0
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert len(manifest["frames"]) == 3
    assert json.loads((run_dir / "conservation.json").read_text())["passed"]
    out = tmp_path / "w.csv"
    assert main(["wigner", "space", "--input", str(run_dir / "frame_00002.csv"), "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "x,k,value"


def test_simulate_unstable_step_exits_one(tmp_path):
    assert main(["simulate", "kdv", "--beta", "2", "--epsilon", "0.2", "--grid-n", "256", "--dt", "0.1",
                 "--t-final", "0.2", "--out", str(tmp_path / "r")]) == 1


def test_wigner_time(tmp_path, capsys):
    t = 0.05 * np.arange(64)
    path = tmp_path / "s.csv"
    dio.write_text(path, dio.field_csv(t, np.exp(1j * t)))
    code, out = run(["wigner", "time", "--input", path, "--window", "0.5"], capsys)
    assert code == 0
    assert out.out.splitlines()[0] == "t,tau,re,im"


def test_decompose_command(tmp_path, capsys):
    u = FieldGrid.from_function(lambda x, y: np.stack([y, 0 * x], axis=-1), (8, 8), 2.0)
    s = u.with_values(np.broadcast_to(np.array([[0.0, 1.0], [1.0, 0.0]]), (8, 8, 2, 2)).reshape(8, 8, 4))
    s = FieldGrid(s.values, u.spacing, u.origin)
    dio.write_text(tmp_path / "u.csv", dio.field2d_csv(u, dio.VECTOR_NAMES))
    dio.write_text(tmp_path / "s.csv", dio.field2d_csv(s, dio.TENSOR_NAMES))
    code, out = run(["decompose", "--s-field", tmp_path / "s.csv", "--u-field", tmp_path / "u.csv"], capsys)
    assert code == 0
    rows = [line.split(",") for line in out.out.splitlines()[1:]]
    assert all(float(r[2]) == 1.0 for r in rows)


def test_prop1_command(tmp_path, capsys):
    grid = Grid1D(10.0, 64)
    A = lambda x: 1 - 0.2 * np.exp(-x**2)  # noqa: E731
    S = lambda x: 0 * x  # noqa: E731
    traj = solve_nls(A, S, 0.2, grid, 1e-3, 4e-3, snap_every=2)
    dio.write_trajectory(tmp_path / "a", traj)
    dio.write_trajectory(tmp_path / "b", traj)
    (tmp_path / "runs.json").write_text(json.dumps(
        {"members": ["a/manifest.json"], "limit": "b/manifest.json", "nu": 0.0}))
    code, out = run(["prop1", "--runs", tmp_path / "runs.json"], capsys)
    assert code == 0
    payload = json.loads(out.out)
    assert payload["data"]["verdict"] == "consistent" and payload["data"]["gap"] == 0.0
    (tmp_path / "bad.json").write_text("{}")
    assert main(["prop1", "--runs", str(tmp_path / "bad.json")]) == 1


def test_byte_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["table2", "--precision", "full", "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep settings\nbeta = 3.5\nlayout = wide\n")
    code, out = run(["table2", "--betas", "2", "--config", cfg], capsys)
    assert code == 1  # beta is not a table2 option
    cfg.write_text("betas = 3.5\nlayout = wide\n")
    code, out = run(["table2", "--config", cfg], capsys)
    assert code == 0
    assert out.out.splitlines()[0] == "lambda,beta=3.5"
    code, out = run(["table2", "--config", cfg, "--layout", "long"], capsys)
    assert out.out.splitlines()[0] == "beta,lambda,g,err"
    cfg.write_text("epsilon = 0.05\ntime = 10\nbeta = 2\nsamples = 100\n")
    code, out = run(["lattice", "--config", cfg], capsys)
    assert code == 0 and len(out.out.splitlines()) == 101
    cfg.write_text("not a pair\n")
    assert main(["table1", "--config", str(cfg)]) == 1
