import json
import subprocess
import sys

import numpy as np
import pytest

from clusterkit.cli import main
from clusterkit.core import DistanceMatrix, Partition


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


@pytest.fixture
def bundle(tmp_path, capsys):
    out = tmp_path / "b"
    code, _ = run_json(capsys, "generate", "--sizes", "3,3,2", "--margin", "1.5", "--seed", "1", "--out", out)
    assert code == 0
    return out


def test_generate_writes_bundle(bundle):
    names = sorted(p.name for p in bundle.iterdir())
    assert names == ["certificate.json", "coords.json", "matrix.json", "meta.json", "partition.json"]
    cert = json.loads((bundle / "certificate.json").read_text())
    assert cert["valid"] and cert["criterion"] == "variational"
    assert cert["min_inter"] / cert["threshold"] >= 1.5
    meta = json.loads((bundle / "meta.json").read_text())
    assert meta["seed"] == 1 and meta["sizes"] == [3, 3, 2]


def test_generate_large_bundle(tmp_path, capsys):
    code, rep = run_json(
        capsys, "generate", "--sizes", "50,50,50", "--dim", "5", "--spread", "1",
        "--margin", "1.5", "--seed", "7", "--out", tmp_path / "big",
    )
    assert code == 0 and rep["certificate"]["valid"] and rep["n"] == 150


def test_generate_two_valued_running_example(tmp_path, capsys, four_point):
    out = tmp_path / "tv"
    code, _ = run_json(capsys, "generate", "--two-valued", "--sizes", "2,2", "--intra", "1", "--inter", "10", "--out", out)
    assert code == 0
    d, g = four_point
    assert DistanceMatrix.load(out / "matrix.json") == d
    assert Partition.from_json((out / "partition.json").read_text()) == g
    assert not (out / "coords.json").exists()


def test_generate_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--out", str(tmp_path / "x")])
    assert exc.value.code == 2
    code, _, err = run(capsys, "generate", "--sizes", "2,2", "--spread", "0", "--out", tmp_path / "y")
    assert code == 2 and "spread" in err
    code, _, err = run(capsys, "generate", "--two-valued", "--sizes", "2,2", "--out", tmp_path / "z")
    assert code == 2


def test_detect_planted_bundle(bundle, capsys):
    code, rep = run_json(capsys, "detect", bundle, "--kmax", "4", "--restarts", "10")
    assert code == 0
    planted = json.loads((bundle / "partition.json").read_text())["clusters"]
    assert rep["found"] and rep["partition"] == planted and rep["level"] == 3
    assert all("restart_q" in lv for lv in rep["levels"])


def test_detect_uniform_matrix_is_negative(tmp_path, capsys):
    p = tmp_path / "eq.json"
    p.write_text(DistanceMatrix(1 - np.eye(8)).to_json())
    code, rep = run_json(capsys, "detect", p, "--kmax", "4")
    assert code == 1 and not rep["found"]


def test_detect_rejects_asymmetric_matrix(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("0,1,2\n1,0,3\n2,4,0\n")
    code, _, err = run(capsys, "detect", p)
    assert code == 2 and "malformed" in err
    code, _, _ = run(capsys, "detect", tmp_path / "missing.json")
    assert code == 2


def test_verify_planted_bundle(bundle, capsys):
    code, rep = run_json(capsys, "verify", bundle)
    assert code == 0 and rep["passed"]
    names = [c["name"] for c in rep["checks"]]
    assert names == ["variational_certificate", "q_lower_bound", "beta_shift", "oracle_optimal"]


def test_verify_tampered_partition(bundle, capsys):
    g = Partition.from_json((bundle / "partition.json").read_text())
    a, b = g.clusters[0][0], g.clusters[1][0]
    swapped = [[b if x == a else a if x == b else x for x in c] for c in g.to_dict()["clusters"]]
    (bundle / "partition.json").write_text(json.dumps({"clusters": swapped}))
    code, rep = run_json(capsys, "verify", bundle)
    assert code == 1
    oracle = next(c for c in rep["checks"] if c["name"] == "oracle_optimal")
    assert not oracle["passed"]
    assert oracle["detail"]["best_partition"] == g.to_dict()["clusters"]


def test_verify_oracle_cap(tmp_path, capsys):
    out = tmp_path / "n30"
    run_json(capsys, "generate", "--sizes", "10,10,10", "--out", out)
    code, _, err = run(capsys, "verify", out)
    assert code == 2 and "--no-oracle" in err
    code, rep = run_json(capsys, "verify", out, "--no-oracle")
    assert code == 0 and len(rep["checks"]) == 3


def test_transform_round_trip(bundle, tmp_path, capsys):
    g = json.loads((bundle / "partition.json").read_text())["clusters"]
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"kind": "convergent_consistency", "shrink": [0.5, 0.7, 1.0], "growth": 2.0, "reference_partition": g}))
    out = tmp_path / "t.json"
    code, rep = run_json(capsys, "transform", bundle, "--spec", spec, "--out", out)
    assert code == 0 and rep["validation"]["passed"]
    assert DistanceMatrix.load(out) == DistanceMatrix.from_dict(rep["matrix"])
    spec.write_text(json.dumps({"kind": "scale"}))
    code, _, err = run(capsys, "transform", bundle, "--spec", spec)
    assert code == 2 and "alpha" in err


def test_embed_verb(tmp_path, capsys):
    rhombus = tmp_path / "r.json"
    rhombus.write_text(DistanceMatrix([[0, 1, 1.9, 1], [1, 0, 1, 1.9], [1.9, 1, 0, 1], [1, 1.9, 1, 0]]).to_json())
    code, rep = run_json(capsys, "embed", rhombus)
    assert code == 0 and rep["delta_used"] > 0 and not rep["analysis"]["is_psd"]
    code, rep = run_json(capsys, "embed", rhombus, "--no-shift")
    assert code == 1 and rep["embedding"] is None


def test_hitting_experiment(tmp_path, capsys):
    big = tmp_path / "big"
    run_json(capsys, "generate", "--sizes", "50,50,50", "--margin", "1.5", "--seed", "7", "--out", big)
    code, rep = run_json(capsys, "experiment", "hitting", big, "--trials", "3000", "--seed", "1")
    assert code == 0 and rep["passed"]
    assert rep["bound"] == pytest.approx(0.970685, abs=1e-6)
    tv = tmp_path / "tv"
    run_json(capsys, "generate", "--two-valued", "--sizes", "4,4,4", "--intra", "1", "--inter", "3", "--out", tv)
    code, rep = run_json(capsys, "experiment", "hitting", tv, "--mode", "residual", "--trials", "500")
    assert code == 0 and rep["estimate"] == 1.0
    code, _, _ = run(capsys, "experiment", "hitting", tv, "--trials", "0")
    assert code == 2


def test_axiom_check_variational(bundle, capsys):
    code, rep = run_json(capsys, "axiom-check", bundle, "--kmax", "4", "--specs", "4", "--restarts", "8", "--richness-max", "5")
    assert code == 0 and rep["passed"]
    assert [s["name"] for s in rep["sweeps"]] == [
        "scale_invariance", "consistency[convergent_consistency]", "range_richness"
    ]


def test_axiom_check_residual_with_control(tmp_path, capsys):
    out = tmp_path / "res"
    run_json(capsys, "generate", "--sizes", "3,3,2", "--criterion", "residual", "--seed", "2", "--out", out)
    code, rep = run_json(capsys, "axiom-check", out, "--kmax", "4", "--specs", "4", "--restarts", "8", "--richness-max", "4")
    assert rep["criterion"] == "residual"
    assert rep["sweeps"][1]["name"] == "consistency[convergent_consistency_keep_min]"
    assert code == 0 and rep["passed"]
    assert rep["controls"][0]["name"].startswith("negative_control")


def test_reports_are_byte_identical(bundle, tmp_path, capsys):
    argvs = [
        ("detect", bundle, "--kmax", "4", "--restarts", "6", "--seed", "3"),
        ("verify", bundle),
        ("embed", bundle / "matrix.json"),
        ("experiment", "hitting", bundle, "--trials", "300", "--seed", "5"),
    ]
    for argv in argvs:
        _, first, _ = run(capsys, *argv)
        _, second, _ = run(capsys, *argv)
        assert first == second
    a, b = tmp_path / "g1", tmp_path / "g2"
    run(capsys, "generate", "--sizes", "4,5", "--seed", "9", "--out", a)
    run(capsys, "generate", "--sizes", "4,5", "--seed", "9", "--out", b)
    for name in ("matrix.json", "partition.json", "certificate.json", "coords.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_report_file_and_human_output(bundle, tmp_path, capsys):
    rep = tmp_path / "r.json"
    code, out, _ = run(capsys, "verify", bundle, "--human", "--report", rep)
    assert code == 0 and out.startswith("PASS")
    assert json.loads(rep.read_text())["passed"]


def test_console_entry_point(bundle):
    proc = subprocess.run(
        [sys.executable, "-m", "clusterkit", "verify", str(bundle), "--human"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and "oracle_optimal" in proc.stdout
