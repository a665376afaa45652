import csv
import json
import os
import subprocess
import sys

import pytest

from l1l2pg.core import TRACE_COLUMNS
from l1l2pg.cli import MEDIAN_COLUMNS, OUTPUT_ENV, SWEEP_COLUMNS, main
from l1l2pg.selection import PROBE_COLUMNS

TOY = ["cs", "--n", "4", "--m", "4", "--s", "1", "--snr-db", "300"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(argv, tmp_path, name="out"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out)])
    return code, out


class TestBlurStats:
    def test_reference_operator(self, capsys):
        assert main(["blur", "--n", "64", "--band", "3", "--tau", "0.7", "--stats-only"]) == 0
        stats = json.loads(capsys.readouterr().out)
        assert 0.8 <= stats["norm2"] <= 1.2 and 20 <= stats["cond"] <= 45

    def test_band_one(self, capsys):
        assert main(["blur", "--n", "8", "--band", "1", "--tau", "0.7", "--stats-only"]) == 0
        assert json.loads(capsys.readouterr().out)["cond"] == pytest.approx(1.0)


class TestCs:
    def test_outputs_and_schema(self, tmp_path):
        code, out = run(["cs", "--solver", "pg-gcgm", "--radius", "16"], tmp_path)
        assert code == 0
        rows = read_csv(out / "pg-gcgm_trace.csv")
        assert tuple(rows[0]) == TRACE_COLUMNS
        assert [int(r["iter"]) for r in rows] == list(range(len(rows)))
        summary = json.loads((out / "summary.json").read_text())
        run0 = summary["runs"][0]
        assert run0["solver"] == "pg-gcgm" and run0["radius"] == 16.0
        assert run0["final_rerror"] < 0.05
        assert float(rows[-1]["rerror"]) == run0["final_rerror"]
        assert {"a1_holds", "a2_holds", "max_eig_seen"} <= set(run0["assumptions"])
        man = json.loads((out / "manifest.json").read_text())
        assert man["format"] == "l1l2pg-manifest" and "--out" not in man["argv"]
        assert man["config"]["alpha"] == 0.02 and man["seed"] == 0

    def test_all_solvers(self, tmp_path):
        code, out = run(["cs", "--solver", "all", "--max-iters", "50"], tmp_path)
        assert code == 0
        names = [r["solver"] for r in json.loads((out / "summary.json").read_text())["runs"]]
        assert names == ["st", "pg-gcgm", "pg-sf"]
        assert all((out / f"{n}_trace.csv").exists() for n in names)

    def test_radius_search_one_sided(self, tmp_path):
        code, out = run(["cs", "--solver", "pg-gcgm", "--search-radius", "--r0", "10", "--c", "1",
                         "--one-sided"], tmp_path)
        assert code == 0
        run0 = json.loads((out / "summary.json").read_text())["runs"][0]
        assert abs(run0["chosen_radius"] - 16) <= 1 and run0["radius_satisfied"]
        probes = read_csv(out / "pg-gcgm_probes.csv")
        assert tuple(probes[0]) == PROBE_COLUMNS
        d = [float(r["discrepancy"]) for r in probes]
        assert all(b <= a * (1 + 1e-6) for a, b in zip(d, d[1:]))

    def test_radius_search_default_band(self, tmp_path):
        # the default band [1.01, 1.2] delta is narrower than one radius step here
        code, out = run(["cs", "--solver", "pg-gcgm", "--search-radius", "--r0", "10", "--c", "1"], tmp_path)
        assert code == 0
        run0 = json.loads((out / "summary.json").read_text())["runs"][0]
        assert run0["chosen_radius"] == 15.0 and not run0["radius_satisfied"]

    def test_ista_toy(self, tmp_path):
        code, out = run(TOY + ["--solver", "ista", "--alpha", "1e-4"], tmp_path)
        assert code == 0
        assert json.loads((out / "summary.json").read_text())["runs"][0]["final_rerror"] <= 1e-3

    def test_alpha_search(self, tmp_path):
        code, out = run(["cs", "--solver", "st", "--search-alpha", "--alpha", "0.5", "--one-sided",
                         "--max-iters", "500"], tmp_path)
        assert code == 0
        run0 = json.loads((out / "summary.json").read_text())["runs"][0]
        assert "chosen_alpha" in run0 and run0["alpha"] == run0["chosen_alpha"]


class TestBlur:
    def test_small_run(self, tmp_path):
        code, out = run(["blur", "--n", "16", "--solver", "pg-sf", "--radius", "120", "--max-iters", "50"],
                        tmp_path)
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["instance"]["shape"] == [256, 256] and summary["instance"]["n"] == 16
        assert summary["operator"]["cond"] > 1
        assert summary["config"]["eta"] == 0.7 and summary["config"]["alpha"] == 0.2


class TestExitCodes:
    @pytest.mark.parametrize("argv", [
        ["cs", "--eta", "1.5"],
        ["cs", "--s", "0"],
        ["cs", "--solver", "nope"],
        ["cs", "--solver", "st", "--objective", "D"],
        ["frobnicate"],
    ])
    def test_usage_errors(self, argv, tmp_path, capsys):
        code, _ = run(argv, tmp_path)
        assert code == 1
        assert capsys.readouterr().err

    def test_strict_budget(self, tmp_path):
        assert run(["cs", "--solver", "pg-sf", "--max-iters", "2", "--strict"], tmp_path)[0] == 2
        assert run(["cs", "--solver", "pg-sf", "--max-iters", "2"], tmp_path, "lenient")[0] == 0

    def test_strict_band_never_entered(self, tmp_path):
        argv = ["cs", "--solver", "pg-sf", "--search-radius", "--r0", "1", "--probe-budget", "2",
                "--max-iters", "200", "--strict"]
        assert run(argv, tmp_path)[0] == 2

    def test_bad_manifest(self, tmp_path):
        bad = tmp_path / "m.json"
        bad.write_text("{}")
        assert main(["replay", str(bad)]) == 1


def test_env_output_dir(tmp_path):
    target = tmp_path / "from-env"
    env = dict(os.environ, **{OUTPUT_ENV: str(target)})
    proc = subprocess.run([sys.executable, "-m", "l1l2pg", *TOY, "--solver", "ista", "--max-iters", "20"],
                          env=env, capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert (target / "summary.json").exists()


def test_replay_reproduces(tmp_path):
    code, first = run(["cs", "--solver", "pg-sf", "--seed", "3", "--max-iters", "200"], tmp_path, "a")
    assert code == 0
    assert main(["replay", str(first / "manifest.json"), "--out", str(tmp_path / "b")]) == 0
    a = read_csv(first / "pg-sf_trace.csv")
    b = read_csv(tmp_path / "b" / "pg-sf_trace.csv")
    strip = lambda rows: [{k: v for k, v in r.items() if k != "seconds"} for r in rows]  # noqa: E731
    assert strip(a) == strip(b)


SWEEP_ARGS = ["sweep", "cs", "--etas", "0,1", "--seeds", "3", "--solvers", "pg-gcgm,pg-sf", "--max-iters", "2000"]


@pytest.fixture(scope="module")
def sweep_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    assert main(SWEEP_ARGS + ["--out", str(out)]) == 0
    return out


class TestSweep:
    ARGS = SWEEP_ARGS

    def test_tables(self, sweep_dir):
        rows = read_csv(sweep_dir / "sweep.csv")
        assert tuple(rows[0]) == SWEEP_COLUMNS and len(rows) == 2 * 2 * 3
        med = read_csv(sweep_dir / "median.csv")
        assert tuple(med[0]) == MEDIAN_COLUMNS and len(med) == 4
        assert all(int(r["cells"]) == 3 for r in med)

    def test_eta_trend(self, sweep_dir):
        med = {(r["solver"], float(r["eta"])): float(r["median_rerror"]) for r in read_csv(sweep_dir / "median.csv")}
        for s in ("pg-gcgm", "pg-sf"):
            assert med[(s, 1.0)] < med[(s, 0.0)]

    def test_cell_matches_cs(self, sweep_dir, tmp_path):
        cell = next(r for r in read_csv(sweep_dir / "sweep.csv")
                    if r["solver"] == "pg-sf" and float(r["eta"]) == 1.0 and r["seed"] == "1")
        code, out = run(["cs", "--solver", "pg-sf", "--seed", "1", "--eta", "1", "--max-iters", "2000"], tmp_path)
        assert code == 0
        run0 = json.loads((out / "summary.json").read_text())["runs"][0]
        assert float(cell["rerror"]) == run0["final_rerror"]
        assert int(cell["iterations"]) == run0["iterations"]

    def test_jobs_keep_order(self, sweep_dir, tmp_path):
        out = tmp_path / "par"
        assert main(self.ARGS + ["--jobs", "2", "--out", str(out)]) == 0
        cols = [c for c in SWEEP_COLUMNS if c != "seconds"]
        a = [[r[c] for c in cols] for r in read_csv(sweep_dir / "sweep.csv")]
        b = [[r[c] for c in cols] for r in read_csv(out / "sweep.csv")]
        assert a == b

    def test_radius_sweep(self, tmp_path):
        out = tmp_path / "radii"
        argv = ["sweep", "cs", "--etas", "1", "--seeds", "1", "--solvers", "pg-sf", "--radii", "12,14,16",
                "--out", str(out)]
        assert main(argv) == 0
        d = [float(r["discrepancy"]) for r in read_csv(out / "sweep.csv")]
        assert all(b <= a * (1 + 1e-6) for a, b in zip(d, d[1:]))
        assert len(read_csv(out / "median.csv")) == 3
