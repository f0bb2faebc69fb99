import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from laminate import runner
from laminate.cli import main

SMALL_ANNULUS = {
    "schema_version": 1,
    "domain": {"kind": "annulus", "r0": 1.0, "r1": 2.0, "n_theta": 32, "n_r": 16,
               "grading": {"first": 0.004, "ratio": 1.2}},
    "rho": [6.283185307179586],
    "solver": {"p_schedule": [2, 8, 32]},
    "analyses": {"duality": True, "limits": {"lg_trials": 10},
                 "cones": {"n": [2], "p_list": [8], "steps": 8},
                 "lamination": {"transversals": 8}},
    "output_dir": "out",
    "seed": 5,
}

SMALL_TORUS = {
    "schema_version": 1,
    "domain": {"kind": "torus", "basis": [[1.0, 0.0], [0.5, 1.0]], "resolution": 4},
    "rho": [1.0, 0.0],
    "solver": {"p_schedule": [2, 8]},
    "analyses": {"duality": True, "limits": {"lg_trials": 5}, "lamination": {"laminations": 2}},
    "output_dir": "out",
    "seed": 1,
}


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="module")
def annulus_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("annulus")
    assert main(["run", str(write_config(tmp, SMALL_ANNULUS))]) == 0
    return tmp / "out"


def _rehash(root: Path, rel: str):
    man = json.loads((root / "manifest.json").read_text())
    man["files"][rel]["sha256"] = hashlib.sha256((root / rel).read_bytes()).hexdigest()
    (root / "manifest.json").write_text(json.dumps(man))


def copy_tree(src: Path, dst: Path) -> Path:
    import shutil
    shutil.copytree(src, dst)
    return dst


def test_artifact_tree(annulus_dir):
    names = {p.relative_to(annulus_dir).as_posix() for p in annulus_dir.rglob("*") if p.is_file()}
    for required in ("mesh.json", "solve/32.json", "solve/32_trace.csv", "limits.json", "lamination.json",
                     "tables/convergence.csv", "tables/region_masses.csv", "tables/cocycles.csv",
                     "tables/cone_n2_p8.csv", "plots/stretch.svg", "plots/cones.svg", "manifest.json"):
        assert required in names, required
    assert any(n.startswith("dual/") for n in names)
    assert "failure.json" not in names
    man = json.loads((annulus_dir / "manifest.json").read_text())
    assert man["version"] == "0.1.0"
    assert man["files"]["limits.json"]["operation"] == "limits.limit_report"
    limits = json.loads((annulus_dir / "limits.json").read_text())
    assert abs(limits["L_hat"] - 1.0) < 0.02
    assert "data:" in (annulus_dir / "plots" / "cones.svg").read_text()


def test_verify_fresh_run(annulus_dir, capsys):
    assert main(["verify", str(annulus_dir)]) == 0
    out = capsys.readouterr().out
    for suite in ("mesh.topology", "penergy.kp-law", "duality.mass-law", "duality.conjugacy",
                  "limits.k-le-l", "hyperbolic.sandwich", "lamination.cocycle"):
        assert suite in out
    assert "FAIL" not in out


def test_planted_kp_corruption_is_named(annulus_dir, tmp_path, capsys):
    root = copy_tree(annulus_dir, tmp_path / "bad")
    doc = json.loads((root / "solve" / "8.json").read_text())
    doc["k_p"] *= 1.01
    (root / "solve" / "8.json").write_text(json.dumps(doc))
    _rehash(root, "solve/8.json")
    code = main(["verify", str(root)])
    out = capsys.readouterr().out
    assert code == 4
    line = next(l for l in out.splitlines() if l.startswith("duality.mass-law"))
    assert "FAIL" in line


def test_stale_mesh_hash(annulus_dir, tmp_path):
    root = copy_tree(annulus_dir, tmp_path / "stale")
    text = (root / "mesh.json").read_text()
    (root / "mesh.json").write_text(text.replace('"n_r": 16', '"n_r": 17'))
    assert main(["verify", str(root)]) == 5


def test_missing_artifacts(annulus_dir, tmp_path):
    root = copy_tree(annulus_dir, tmp_path / "missing")
    (root / "limits.json").unlink()
    assert main(["verify", str(root)]) == 5
    assert main(["verify", str(tmp_path / "nowhere")]) == 5
    assert main(["k-vs-l", str(tmp_path / "nowhere")]) == 5


@pytest.mark.parametrize("patch, field", [
    ({"domain": {"kind": "annulus", "r0": 2.0, "r1": 1.0, "n_theta": 8, "n_r": 4}}, "domain.r0"),
    ({"solvr": {}}, "solvr"),
    ({"solver": {"p_schedule": [8, 4]}}, "solver"),
    ({"solver": {"p_shedule": [2, 4]}}, "solver.p_shedule"),
    ({"rho": [1.0, 2.0]}, "rho"),
    ({"schema_version": 2}, "schema_version"),
    ({"analyses": {"lamination": True}}, "analyses.lamination"),
    ({"analyses": {"limits": {"epsilon": 0.1}}}, "analyses.limits.epsilon"),
    ({"seed": -1}, "seed"),
])
def test_config_errors(tmp_path, capsys, patch, field):
    doc = dict(SMALL_ANNULUS, **patch)
    assert main(["run", str(write_config(tmp_path, doc))]) == 2
    assert field in capsys.readouterr().err


def test_unreadable_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == 2
    assert main(["run", str(tmp_path / "absent.json")]) == 2


def test_stall_exit_code(tmp_path):
    doc = dict(SMALL_ANNULUS, solver={"p_schedule": [2, 64], "max_iters": 2})
    assert main(["run", str(write_config(tmp_path, doc))]) == 3
    failure = json.loads((tmp_path / "out" / "failure.json").read_text())
    assert failure["invariant"] == "penergy.converged" and failure["exit_code"] == 3


def test_torus_run_and_k_vs_l(tmp_path, capsys):
    assert main(["run", str(write_config(tmp_path, SMALL_TORUS))]) == 0
    capsys.readouterr()
    assert main(["k-vs-l", str(tmp_path / "out")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["argmax_class"] == [5, -2]
    assert abs(doc["relative_gap"]) < 1e-9
    lam = json.loads((tmp_path / "out" / "lamination.json").read_text())
    assert len(lam["ruelle_sullivan"]) == 2 and all(t["passed"] for t in lam["ruelle_sullivan"])
    assert main(["verify", str(tmp_path / "out")]) == 0


def test_determinism(tmp_path):
    for name in ("a", "b"):
        doc = dict(SMALL_ANNULUS, output_dir=name)
        assert main(["run", str(write_config(tmp_path, doc, f"{name}.json"))]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    for rel in files:
        if rel.name in ("manifest.json", "config.json"):
            continue
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    # config.json differs only by output_dir; every other hash must agree
    for k in ma["files"]:
        if k != "config.json":
            assert ma["files"][k] == mb["files"][k], k


def test_cone_table(capsys):
    assert main(["cone-table", "--n", "2", "--p-list", "8,32", "--t-max", "1.5", "--steps", "3"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "n,p,t,f_p,lower,upper" and len(out) == 7
    assert main(["cone-table", "--n", "3", "--p-list", "2"]) == 2


def test_threads_env(monkeypatch):
    monkeypatch.setenv("LAMINATE_THREADS", "3")
    assert runner.threads() == 3
    monkeypatch.setenv("LAMINATE_THREADS", "zero")
    assert runner.threads() >= 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "laminate", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
