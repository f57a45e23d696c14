import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from orbitsep.cli import run
from orbitsep.pointcloud import write_cloud_csv
from orbitsep.report import Report, emit_report, render


def invoke(tmp_path, *argv, fmt="csv", name="out"):
    out = tmp_path / f"{name}.{fmt}"
    code = run([*argv, "--out", str(out), "--format", fmt])
    return code, out


def csv_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- exit codes, one block per suite ------------------------------------------------------


@pytest.mark.parametrize(
    "argv,expected",
    [
        (["invariance", "--n", "3", "--trials", "200"], 0),
        (["invariance", "--family", "raw-diag", "--n", "3", "--trials", "50"], 1),
        (["invariance", "--family", "nope"], 2),
        (["separation", "--n", "3", "--trials", "500"], 0),
        (["separation", "--family", "veronese", "--n", "4", "--j", "2", "--trials", "400"], 1),
        (["separation", "--n", "1"], 2),
        (["galois-check", "--n", "3"], 0),
        (["galois-check", "--n", "5"], 3),
        (["galois-check", "--n", "1"], 2),
        (["badset", "--n", "3", "--trials", "3000"], 0),
        (["badset", "--n", "3", "--trials", "100", "--tol", "1000"], 1),
        (["badset", "--n", "3", "--trials", "0"], 2),
        (["veronese", "--n", "5", "--j", "2", "--trials", "500", "--budget", "2000"], 0),
        (["veronese", "--n", "4", "--j", "2", "--trials", "200", "--budget", "2000"], 1),
        (["veronese", "--n", "4", "--j", "7"], 2),
        (["sortsep", "--n", "4", "--d", "2", "--trials", "500"], 0),
        (["sortsep", "--n", "4", "--d", "2", "--trials", "200", "--tol", "10"], 1),
        (["sortsep", "--n", "4", "--d", "2", "--count", "0"], 2),
        (["pointcloud", "--d", "2", "--n", "4", "--trials", "300", "--invariance-trials", "100"], 0),
        (["pointcloud", "--d", "2", "--n", "4", "--trials", "40", "--invariance-trials", "10", "--tol", "10"], 1),
        (["pointcloud", "--d", "2", "--n", "1"], 2),
        (["mra", "--sigmas", "0.3,0.5", "--trials", "1", "--slope-band=-100,100"], 0),
        (["mra", "--sigmas", "0.3,0.5", "--trials", "1", "--slope-band", "100,200"], 1),
        (["mra", "--sigmas", "0.3,4", "--trials", "1", "--max-samples", "200"], 3),
        (["mra", "--sigmas", "0,1"], 2),
    ],
)
def test_exit_codes(tmp_path, argv, expected):
    code, _ = invoke(tmp_path, *argv)
    assert code == expected


def test_unknown_flag_prints_usage(capsys):
    assert run(["separation", "--bogus"]) == 2
    assert "usage:" in capsys.readouterr().err


def test_missing_subcommand_is_usage_error(capsys):
    assert run([]) == 2
    assert "usage:" in capsys.readouterr().err


def test_unwritable_path(tmp_path):
    assert run(["galois-check", "--n", "3", "--out", str(tmp_path / "missing" / "x.csv")]) == 2
    assert run(["galois-check", "--n", "3", "--out", str(tmp_path)]) == 2


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "g.csv"
    proc = subprocess.run([sys.executable, "-m", "orbitsep.cli", "galois-check", "--n", "3", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert len(csv_rows(out)) == 6


# -- report content ---------------------------------------------------------------------------


def test_galois_check_lists_embedded_fixers(tmp_path):
    code, out = invoke(tmp_path, "galois-check", "--n", "3", fmt="json")
    doc = json.loads(out.read_text())
    assert code == 0
    assert doc["summary"]["group_size"] == 36 and doc["summary"]["fixers"] == 6
    assert all(r["embedded"] for r in doc["rows"])


def test_veronese_collision_witness_is_certified(tmp_path):
    code, out = invoke(tmp_path, "veronese", "--n", "4", "--j", "2", "--trials", "10", fmt="json")
    doc = json.loads(out.read_text())
    assert code == 1
    assert doc["summary"]["collision_found"]
    from orbitsep.invariants import veronese_map
    from orbitsep.separation import ScalarRootAction, features_equal

    w = [r for r in doc["rows"] if r["type"] == "collision"][0]
    x1 = np.array([complex(*z) for z in w["x1"]])
    x2 = np.array([complex(*z) for z in w["x2"]])
    assert features_equal(veronese_map(4, 2)(x1), veronese_map(4, 2)(x2), 1e-9)
    assert not ScalarRootAction(4).same_orbit(x1, x2)


def test_witness_replay_reproduces_row(tmp_path):
    _, out = invoke(tmp_path, "invariance", "--family", "raw-diag", "--n", "3", "--trials", "40", name="full")
    first = csv_rows(out)[0]
    _, again = invoke(tmp_path, "invariance", "--family", "raw-diag", "--n", "3", "--trials", "40",
                      "--replay-trial", first["trial"], name="replay")
    assert csv_rows(again) == [first]
    x1 = np.array(json.loads(first["x1"]))
    assert x1.shape == (6,)


def test_empty_report_is_header_only(tmp_path):
    code, out = invoke(tmp_path, "separation", "--n", "3", "--trials", "50")
    assert code == 0
    assert out.read_bytes() == b"type,trial,kind,in_bad_set,x1_in_bad_set,x2_in_bad_set,x1,x2,f1,f2,element\r\n"


def test_manifest_accompanies_report(tmp_path):
    _, out = invoke(tmp_path, "galois-check", "--n", "3")
    man = json.loads((tmp_path / "out.csv.manifest.json").read_text())
    assert man["subcommand"] == "galois-check" and man["seed"] == 0
    assert man["flags"]["n"] == 3 and man["outputs"] == [str(out)]
    assert man["started"] <= man["finished"] and man["version"]


def test_mra_report_has_summary_row(tmp_path):
    code, out = invoke(tmp_path, "mra", "--sigmas", "0.3,0.5", "--trials", "2", "--slope-band=-100,100")
    rows = csv_rows(out)
    assert code == 0
    assert list(rows[0]) == ["sigma", "trial", "N_required", "censored", "mean_err", "power_err",
                             "bispec_err", "align_err", "slope"]
    assert len(rows) == 5 and rows[-1]["trial"] == "summary"
    assert np.isfinite(float(rows[-1]["slope"]))
    assert all(r["slope"] == "" for r in rows[:-1])


def test_mra_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "mra.cfg"
    cfg.write_text("n=5\nsigmas=0.3,0.5\ntrials=1\nseed=4\n")
    code, out = invoke(tmp_path, "mra", "--config", str(cfg), "--trials", "2", "--slope-band=-100,100", fmt="json")
    doc = json.loads(out.read_text())
    assert code == 0
    assert doc["summary"]["config"]["n"] == 5
    assert doc["summary"]["config"]["trials"] == 2
    assert doc["summary"]["config"]["seed"] == 4
    cfg.write_text("colour=blue\n")
    assert run(["mra", "--config", str(cfg)]) == 2
    assert run(["mra", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_pointcloud_file_comparison(tmp_path):
    rng = np.random.default_rng(0)
    P = rng.standard_normal((2, 5))
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    write_cloud_csv(P, tmp_path / "a.csv")
    write_cloud_csv(R @ P[:, ::-1] + 3.0, tmp_path / "b.csv")
    write_cloud_csv(rng.standard_normal((2, 5)), tmp_path / "c.csv")
    code, out = invoke(tmp_path, "pointcloud", "--cloud", str(tmp_path / "a.csv"), str(tmp_path / "b.csv"), fmt="json")
    doc = json.loads(out.read_text())
    assert code == 0 and doc["summary"]["same_orbit"] and doc["summary"]["features_equal"]
    code, out = invoke(tmp_path, "pointcloud", "--cloud", str(tmp_path / "a.csv"), str(tmp_path / "c.csv"),
                       fmt="json", name="diff")
    doc = json.loads(out.read_text())
    assert code == 0 and not doc["summary"]["same_orbit"] and not doc["summary"]["features_equal"]
    (tmp_path / "bad.csv").write_text("x0,x1\n1,2\n3\n")
    assert run(["pointcloud", "--cloud", str(tmp_path / "a.csv"), str(tmp_path / "bad.csv")]) == 2


# -- determinism -----------------------------------------------------------------------------------


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_outputs_identical_across_runs_and_workers(tmp_path, fmt):
    # one clean suite and one whose report is full of witnesses
    clean = ["separation", "--n", "4", "--trials", "800"]
    noisy = ["invariance", "--family", "raw-diag", "--n", "4", "--trials", "600"]
    for base in (clean, noisy):
        _, a = invoke(tmp_path, *base, "--workers", "1", fmt=fmt, name="a")
        _, b = invoke(tmp_path, *base, "--workers", "4", fmt=fmt, name="b")
        _, c = invoke(tmp_path, *base, "--workers", "1", fmt=fmt, name="c")
        assert a.read_bytes() == b.read_bytes() == c.read_bytes()


def test_json_round_trips_floats_exactly():
    rep = Report("demo", ["a", "b", "c"], [{"a": 0.1 + 0.2, "b": [1e-300, -2.5e17], "c": complex(1, -3)}],
                 {"x": float("nan"), "y": float("inf")})
    doc = json.loads(render(rep, "json"))
    assert doc["rows"][0]["a"] == 0.1 + 0.2
    assert doc["rows"][0]["b"] == [1e-300, -2.5e17]
    assert doc["rows"][0]["c"] == [1.0, -3.0]
    assert doc["summary"] == {"x": "nan", "y": "inf"}


def test_csv_quotes_structured_cells(tmp_path):
    rep = Report("demo", ["v", "s", "flag"], [{"v": [0.1, 2.0], "s": 'say "hi", then\nleave', "flag": False}])
    path = tmp_path / "r.csv"
    emit_report(rep, "csv", path)
    raw = path.read_bytes()
    assert raw.startswith(b"v,s,flag\r\n")
    row = csv_rows(path)[0]
    assert json.loads(row["v"]) == [0.1, 2.0]
    assert row["s"] == 'say "hi", then\nleave'
    assert row["flag"] == "false"
