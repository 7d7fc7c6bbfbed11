import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from stommel_osc.cli import lambda_grid, main
from stommel_osc.core import ForcingSpec, ModelParams, Trajectory
from stommel_osc.integrate import integrate
from stommel_osc.io import (FORCED_COLUMNS, SWEEP_COLUMNS, IngestionError, fmt_float, ingest_obliquity,
                            read_trajectory_csv, trajectory_from_json, trajectory_to_json,
                            write_trajectory_csv)
from stommel_osc.models import reduced_field

RELAX = ["--A", "5", "--lambda", "0.8", "--delta0", "0.1"]


def run_cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "stommel_osc", *map(str, args)],
                          capture_output=True, text=True, cwd=cwd, timeout=600)


def header(text):
    return next(line for line in text.splitlines() if not line.startswith("#"))


@pytest.fixture(scope="module")
def relax_traj():
    return integrate(reduced_field(ModelParams.reduced(5.0, 0.8, 0.1)), (0.5, 1.5), (0.0, 120.0))


# -- serialization ------------------------------------------------------------

class TestRoundTrip:
    def test_csv_exact(self, relax_traj):
        buf = io.StringIO()
        write_trajectory_csv(buf, relax_traj, ("y", "mu"), {"seed": 4})
        buf.seek(0)
        back, cols, meta = read_trajectory_csv(buf)
        assert cols == ["y", "mu"] and meta == {"seed": 4}
        assert np.array_equal(back.times, relax_traj.times)
        assert np.array_equal(back.states, relax_traj.states)
        assert [e[:2] for e in back.events] == [e[:2] for e in relax_traj.events]

    def test_json_exact(self, relax_traj):
        back, cols, meta = trajectory_from_json(trajectory_to_json(relax_traj, ("y", "mu"), {"seed": 1}))
        assert np.array_equal(back.times, relax_traj.times)
        assert np.array_equal(back.states, relax_traj.states)
        assert back.events == relax_traj.events
        assert cols == ["y", "mu"] and meta["seed"] == 1

    @pytest.mark.parametrize("x", [0.1, 1 / 3, math.pi * 1e-300, 5e-324, -1.7976931348623157e308])
    def test_fmt_float_roundtrips(self, x):
        assert float(fmt_float(x)) == x

    def test_fmt_missing(self):
        assert fmt_float(None) == fmt_float(float("nan")) == ""

    def test_column_count_checked(self):
        tr = Trajectory([0.0, 1.0], [[0.0, 1.0], [1.0, 2.0]])
        with pytest.raises(ValueError):
            write_trajectory_csv(io.StringIO(), tr, ("y",))

    def test_missing_header(self):
        with pytest.raises(IngestionError):
            read_trajectory_csv(io.StringIO("0,1,2,\n"))


# -- obliquity ingestion --------------------------------------------------------

class TestObliquity:
    def test_two_rows_span(self):
        series = ingest_obliquity(io.StringIO("0,22.0\n41,24.5\n"))
        A = series.scaled_A(3.5, 2.4)
        assert A.min() == pytest.approx(3.5 - 2.4) and A.max() == pytest.approx(3.5 + 2.4)

    def test_header_detected(self):
        series = ingest_obliquity(io.StringIO("time_kyr,obliquity\n0,22\n10,23\n"))
        assert series.time_kyr.tolist() == [0.0, 10.0]

    def test_descending_time_sorted_into_tau(self):
        f = ingest_obliquity(io.StringIO("100,22\n50,24\n0,23\n")).forcing()
        taus = [t for t, _ in f.table]
        assert taus == sorted(taus) and taus[-1] == pytest.approx(100 * 540 / 41)

    @pytest.mark.parametrize("text, line", [
        ("0,22\n10,22\n", None),             # constant
        ("0,22\n", None),                    # one row
        ("0,22\n1,abc\n", 2),
        ("0,22\n1,23,4\n", 2),
        ("0,22\n2,23\n1,24\n", 3),          # non-monotone
        ("0,22\n1,30\n", 2),                # out of bounds
        ("t,o\n0,22\n0,23\n", 3),
        ("0,22\n1,inf\n", 2),
    ])
    def test_errors(self, text, line):
        with pytest.raises(IngestionError) as info:
            ingest_obliquity(io.StringIO(text))
        assert info.value.line == line

    def test_bounds_configurable(self):
        ingest_obliquity(io.StringIO("0,10\n1,30\n"), bounds=(0, 90))

    def test_sinusoid_matches_analytic(self):
        kyr = np.linspace(0, 123, 401)
        obl = 23.0 + 1.2 * np.sin(2 * np.pi * kyr / 41)
        text = "\n".join(f"{t:.17g},{o:.17g}" for t, o in zip(kyr, obl))
        f = ingest_obliquity(io.StringIO(text)).forcing(ForcingSpec())
        ref = ForcingSpec()
        taus = np.linspace(0, 3 * 540, 997)
        err = max(abs(f.A_at(t) - ref.A_at(t)) for t in taus)
        # piecewise-linear interpolation error plus the min-max rescale of sampled extrema
        h = (kyr[1] - kyr[0]) * 540 / 41
        assert err < ref.p * (ref.omega * h) ** 2 / 8 * 2 + 1e-3


# -- grid arithmetic ---------------------------------------------------------------

def test_lambda_grid():
    g = lambda_grid(0.4, 1.3, 0.02)
    assert len(g) == 46 and g[0] == 0.4 and g[-1] == 1.3


@pytest.mark.parametrize("args", [(1.3, 0.4, 0.02), (0.4, 0.4, 0.02), (0.4, 1.3, 0.0)])
def test_lambda_grid_invalid(args):
    with pytest.raises(ValueError):
        lambda_grid(*args)


# -- command line, in process ---------------------------------------------------------

class TestMainInProcess:
    def test_classify(self, capsys):
        assert main(["classify", *RELAX]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["regime"]["regime"] == "oscillating"
        assert doc["equilibrium"]["class"] == "unstable-node"

    @pytest.mark.parametrize("args, key, value", [
        (["--A", "1.1", "--lambda", "0.995", "--delta0", "0.01"], "bifurcation_at_corner", "canard-focus"),
        (["--A", "0.5", "--lambda", "0.9", "--delta0", "0.01"], "regime", "equilibration-A<1"),
    ])
    def test_classify_examples(self, capsys, args, key, value):
        assert main(["classify", *args]) == 0
        assert json.loads(capsys.readouterr().out)["regime"][key] == value

    @pytest.mark.parametrize("argv", [
        ["simulate", "--model", "reduced", "--A", "5", "--delta0", "0.1"],
        ["simulate", "--A", "5"],
        ["simulate", "--model", "lin3", "--A", "5", "--epsilon", "0.01", "--delta0", "0.1", "--lambda", "0.7"],
        ["simulate", "--model", "reduced", *RELAX, "--init", "1,2,3"],
        ["simulate", "--model", "reduced", *RELAX, "--t-end", "-1"],
        ["simulate", "--model", "bogus"],
        ["classify", "--A", "5", "--lambda", "0.8"],
        ["classify", "--A", "x", "--lambda", "0.8", "--delta0", "0.1"],
        ["sweep", "--A", "5", "--delta0", "0.1", "--lambda-min", "1.3", "--lambda-max", "0.4", "--step", "0.02"],
        ["sweep", "--A", "5", "--delta0", "0.1", "--lambda-min", "0.0", "--lambda-max", "0.4", "--step", "0.1"],
        ["forced", "--delta0", "-1"],
        ["forced", "--config", "/nonexistent/file.cfg"],
    ])
    def test_usage_errors(self, argv, capsys):
        assert main(argv) == 2
        assert capsys.readouterr().err

    def test_numerical_failure(self, capsys):
        assert main(["simulate", "--model", "reduced", *RELAX, "--init=-1e200,0"]) == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# relax parameters\nA = 5\nlambda=0.8\ndelta0=0.1\n")
        assert main(["classify", "--config", str(cfg)]) == 0
        assert json.loads(capsys.readouterr().out)["regime"]["regime"] == "oscillating"
        # explicit flags override the file
        assert main(["classify", "--config", str(cfg), "--lambda", "1.2"]) == 0
        assert json.loads(capsys.readouterr().out)["regime"]["regime"] == "stable-haline"

    @pytest.mark.parametrize("body", ["nonsense=1\n", "A\n", "A=abc\n", "format=xml\n"])
    def test_bad_config(self, tmp_path, body):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(body)
        assert main(["classify", "--config", str(cfg), "--lambda", "0.8", "--delta0", "0.1"]) == 2


# -- command line, as a subprocess -----------------------------------------------------------

class TestBinary:
    def test_reduced_schema(self, tmp_path):
        out = tmp_path / "relax.csv"
        r = run_cli("simulate", "--model", "reduced", *RELAX, "--t-end", 100, "--out", out)
        assert r.returncode == 0, r.stderr
        text = out.read_text()
        assert header(text) == "tau,y,mu,event"
        assert text.endswith("\n") and "# seed=0" in text

    def test_lin3_schema(self):
        r = run_cli("simulate", "--model", "lin3", "--A", 5, "--epsilon", 0.01, "--delta0", 0.1, "--t-end", 50)
        assert r.returncode == 0, r.stderr
        assert header(r.stdout) == "tau,x,y,mu,event"

    @pytest.mark.parametrize("model, cols", [("nondim", "x,y"), ("stom2", "T,S"), ("stom4", "T_e,T_p,S_e,S_p")])
    def test_other_schemas(self, model, cols):
        r = run_cli("simulate", "--model", model, "--A", 5, "--epsilon", 0.1, "--mu", 1.3, "--t-end", 5)
        assert r.returncode == 0, r.stderr
        assert header(r.stdout) == f"tau,{cols},event"

    def test_simulate_roundtrip(self, tmp_path):
        out = tmp_path / "relax.csv"
        assert run_cli("simulate", "--model", "reduced", *RELAX, "--t-end", 100, "--init", "0.5,1.5",
                       "--out", out).returncode == 0
        back, cols, meta = read_trajectory_csv(out)
        ref = integrate(reduced_field(ModelParams.reduced(5.0, 0.8, 0.1)), (0.5, 1.5), (0.0, 100.0))
        assert np.array_equal(back.times, ref.times) and np.array_equal(back.states, ref.states)
        assert meta["init"] == [0.5, 1.5] and meta["model"] == "reduced"

    def test_json_roundtrip(self, tmp_path):
        out = tmp_path / "relax.json"
        assert run_cli("simulate", "--model", "reduced", *RELAX, "--t-end", 60, "--format", "json",
                       "--seed", 9, "--out", out).returncode == 0
        traj, cols, meta = trajectory_from_json(out.read_text())
        ref = integrate(reduced_field(ModelParams.reduced(5.0, 0.8, 0.1)), meta["init"], (0.0, 60.0))
        assert cols == ["y", "mu"] and meta["seed"] == 9
        assert np.array_equal(traj.states, ref.states) and traj.events == ref.events

    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_byte_determinism(self, fmt):
        args = ("simulate", "--model", "reduced", *RELAX, "--t-end", 200, "--seed", 42, "--format", fmt)
        a, b = run_cli(*args), run_cli(*args)
        assert a.returncode == 0 and a.stdout == b.stdout

    def test_seed_changes_init(self):
        base = ("simulate", "--model", "reduced", *RELAX, "--t-end", 10)
        assert run_cli(*base, "--seed", 1).stdout != run_cli(*base, "--seed", 2).stdout

    def test_exit_codes(self, tmp_path):
        assert run_cli("simulate", "--model", "reduced", "--A", 5, "--delta0", 0.1).returncode == 2
        assert run_cli("sweep", "--A", 5, "--delta0", 0.1, "--lambda-min", 1.3, "--lambda-max", 0.4,
                       "--step", 0.02).returncode == 2
        assert run_cli("simulate", "--model", "reduced", *RELAX, "--init=-1e200,0").returncode == 3
        assert run_cli("--help").returncode == 0
        assert run_cli().returncode == 2

    def test_sweep_rows(self):
        r = run_cli("sweep", "--A", 5, "--delta0", 0.1, "--lambda-min", 0.4, "--lambda-max", 1.3,
                    "--step", 0.02, "--jobs", 2)
        assert r.returncode == 0, r.stderr
        lines = [ln for ln in r.stdout.splitlines() if not ln.startswith("#")]
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert len(lines) == 47

    def test_sweep_monotone_manifold(self):
        r = run_cli("sweep", "--A", 0.5, "--delta0", 0.1, "--lambda-min", 0.4, "--lambda-max", 1.3,
                    "--step", 0.1, "--format", "json")
        assert r.returncode == 0, r.stderr
        rows = json.loads(r.stdout)["rows"]
        assert len(rows) == 10 and {row["cycle_kind"] for row in rows} == {"none"}

    def test_forced_defaults(self, tmp_path):
        out = tmp_path / "forced.csv"
        r = run_cli("forced", "--out", out)
        assert r.returncode == 0, r.stderr
        assert header(out.read_text()) == ",".join(FORCED_COLUMNS)
        stats = json.loads((tmp_path / "forced.csv.stats.json").read_text())
        assert stats["count_large"] >= 1 and len(stats["envelope"]) > 0

    def test_forced_obliquity_table(self, tmp_path):
        csv_path = tmp_path / "obl.csv"
        kyr = np.arange(0, 101, 1.0)
        csv_path.write_text("kyr,deg\n" + "".join(f"{t},{23 + 1.2 * math.sin(t / 7)}\n" for t in kyr))
        out = tmp_path / "f.csv"
        r = run_cli("forced", "--obliquity-csv", csv_path, "--out", out, "--q", 0.199)
        assert r.returncode == 0, r.stderr
        body = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
        rows = np.genfromtxt(body, delimiter=",", names=True)
        assert rows["tau"][0] == 0 and rows["tau"][-1] == pytest.approx(100 * 540 / 41)
        assert rows["A_tau"].min() >= 3.5 - 2.4 - 1e-12 and rows["A_tau"].max() <= 3.5 + 2.4 + 1e-12
        f = ForcingSpec(q=0.199)
        np.testing.assert_allclose(rows["lambda_tau"], [f.lambda_at(t) for t in rows["tau"]], atol=1e-12)

    def test_forced_bad_csv_line(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("0,22\n10,23\n5,24\n")
        r = run_cli("forced", "--obliquity-csv", bad)
        assert r.returncode == 2 and "line 3" in r.stderr
