import json
import subprocess
import sys

import numpy as np
import pytest

from neokit import bundle, laplacian as lp, meshio, shapes
from neokit.cli import main
from neokit.neural.config import TINY, save_config


@pytest.fixture
def cloud_bundle(tmp_path):
    meshio.write_xyz(tmp_path / "s.xyz", lp.normalize_cloud(shapes.sphere_cloud(300, seed=2)))
    assert main(["build", str(tmp_path / "s.xyz"), "--knn", "10", "--out", str(tmp_path / "s.neob")]) == 0
    return tmp_path / "s.neob"


def eigs(src, out, *extra):
    return main(["eigs", str(src), "--out", str(out), *extra])


def test_build_small_xyz(tmp_path):
    (tmp_path / "p.xyz").write_text("0 0 0\n1 0 0\n0 1 0\n0 0 1\n")
    assert main(["build", str(tmp_path / "p.xyz"), "--knn", "3", "--out", str(tmp_path / "p.neob")]) == 0
    d = bundle.load(tmp_path / "p.neob")
    assert d["M.weights"].size == 4
    assert set(d) == {"L.rowptr", "L.colidx", "L.values", "M.weights", "points"}


def test_build_mesh_cotangent(tmp_path):
    P = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    meshio.write_obj(tmp_path / "sq.obj", P, np.array([[0, 1, 2], [0, 2, 3]]))
    assert main(["build", str(tmp_path / "sq.obj"), "--mesh", "--out", str(tmp_path / "sq.neob")]) == 0
    d = bundle.load(tmp_path / "sq.neob")
    row = slice(d["L.rowptr"][0], d["L.rowptr"][1])
    entries = dict(zip(d["L.colidx"][row], d["L.values"][row]))
    assert entries[1] == pytest.approx(-0.5, rel=1e-14)
    assert entries[0] == pytest.approx(1.0, rel=1e-14)


def test_build_empty_file(tmp_path, capsys):
    (tmp_path / "e.xyz").write_text("")
    assert main(["build", str(tmp_path / "e.xyz"), "--out", str(tmp_path / "e.neob")]) == 2
    assert "no points parsed" in capsys.readouterr().err


def test_eigs_table(cloud_bundle, tmp_path, capsys):
    assert eigs(cloud_bundle, tmp_path / "e.neob", "-k", "6") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "index,eigenvalue"
    assert abs(float(lines[1].split(",")[1])) < 1e-8
    assert bundle.load(tmp_path / "e.neob")["evecs"].shape == (300, 6)


def test_eigs_lobpcg_agrees(cloud_bundle, tmp_path):
    assert eigs(cloud_bundle, tmp_path / "d.neob", "-k", "6") == 0
    assert eigs(cloud_bundle, tmp_path / "l.neob", "-k", "6", "--solver", "lobpcg") == 0
    a = bundle.load(tmp_path / "d.neob")["evals"]
    b = bundle.load(tmp_path / "l.neob")["evals"]
    np.testing.assert_allclose(b[1:], a[1:], rtol=1e-6)


def test_eigs_k_too_large(cloud_bundle, tmp_path):
    assert eigs(cloud_bundle, tmp_path / "e.neob", "-k", "301") == 2


def test_eigs_reports_nonconvergence(cloud_bundle, tmp_path, capsys):
    code = eigs(cloud_bundle, tmp_path / "e.neob", "-k", "6", "--solver", "lobpcg", "--max-iter", "2",
                "--precond", "none")
    assert code == 3
    assert "converged" in capsys.readouterr().err


def with_fields(src, dst, F):
    d = bundle.load(src)
    d["F"] = F
    bundle.save(dst, d)
    return dst


def test_refine_exact_span(cloud_bundle, tmp_path):
    assert eigs(cloud_bundle, tmp_path / "e.neob", "-k", "8") == 0
    truth = bundle.load(tmp_path / "e.neob")
    G = np.random.default_rng(0).standard_normal((8, 8))
    src = with_fields(tmp_path / "e.neob", tmp_path / "f.neob", truth["evecs"] @ G)
    assert main(["refine", str(src), "-k", "8", "--out", str(tmp_path / "r.neob")]) == 0
    r = bundle.load(tmp_path / "r.neob")
    np.testing.assert_allclose(r["evals"][1:], truth["evals"][1:], rtol=1e-8)
    csv = (tmp_path / "r.neob.timings.csv").read_text().splitlines()
    assert csv[0] == "stage,name,N,m,seconds" and len(csv) == 5


def test_refine_rank_deficient(cloud_bundle, tmp_path, caplog):
    F = np.random.default_rng(1).standard_normal((300, 4))
    src = with_fields(cloud_bundle, tmp_path / "f.neob", np.hstack([F, F[:, :1]]))
    assert main(["refine", str(src), "-k", "3", "--out", str(tmp_path / "r.neob")]) == 0
    assert "rank-deficient" in caplog.text


def test_refine_missing_fields(cloud_bundle, tmp_path):
    assert main(["refine", str(cloud_bundle), "-k", "3", "--out", str(tmp_path / "r.neob")]) == 2


def test_eval_identical_and_perturbed(cloud_bundle, tmp_path):
    assert eigs(cloud_bundle, tmp_path / "e.neob", "-k", "6") == 0
    assert main(["eval", str(tmp_path / "e.neob"), str(tmp_path / "e.neob"),
                 "--json", str(tmp_path / "m.json")]) == 0
    same = json.loads((tmp_path / "m.json").read_text())
    assert abs(same["means"]["span"]) < 1e-12 and same["means"]["evec"] < 1e-20
    d = bundle.load(tmp_path / "e.neob")
    d["evecs"] = d["evecs"] + 1e-3 * np.random.default_rng(0).standard_normal(d["evecs"].shape)
    d["evals"] = d["evals"] * 1.01
    bundle.save(tmp_path / "p.neob", d)
    assert main(["eval", str(tmp_path / "p.neob"), str(tmp_path / "e.neob"),
                 "--json", str(tmp_path / "p.json")]) == 0
    m = json.loads((tmp_path / "p.json").read_text())["means"]
    assert m["span"] > 0 and m["evec"] > 0 and m["eval"] == pytest.approx(0.01, rel=1e-9)


def test_eval_mismatched_k(cloud_bundle, tmp_path):
    assert eigs(cloud_bundle, tmp_path / "a.neob", "-k", "6") == 0
    assert eigs(cloud_bundle, tmp_path / "b.neob", "-k", "5") == 0
    assert main(["eval", str(tmp_path / "a.neob"), str(tmp_path / "b.neob")]) == 2


def test_bench_rows_and_single_size(tmp_path, capsys):
    assert main(["bench-scaling", "--sizes", "500,1000", "--m", "8", "--repeat", "2",
                 "--csv", str(tmp_path / "b.csv")]) == 0
    rows = (tmp_path / "b.csv").read_text().splitlines()
    assert rows[0] == "N,stage,seconds,repeat" and len(rows) == 1 + 2 * 3 * 2
    assert "slope qr+projection" in capsys.readouterr().err
    assert main(["bench-scaling", "--sizes", "500", "--m", "8", "--repeat", "1"]) == 0
    assert "slope qr: nan" in capsys.readouterr().err


def test_bench_with_weights(tmp_path):
    cfg = TINY.replace(output_fields=8)
    save_config(tmp_path / "c.txt", cfg)
    from neokit.neural.backbone import init_weights
    bundle.save(tmp_path / "w.neob", init_weights(cfg, 0))
    assert main(["bench-scaling", "--sizes", "300,600", "--m", "8", "--repeat", "1",
                 "--weights", str(tmp_path / "w.neob"), "--config", str(tmp_path / "c.txt"),
                 "--csv", str(tmp_path / "b.csv")]) == 0
    assert ",forward," in (tmp_path / "b.csv").read_text()


@pytest.fixture
def mesh_files(tmp_path):
    V, F = shapes.icosphere(3)
    meshio.write_obj(tmp_path / "ico.obj", V, F)
    assert main(["build", str(tmp_path / "ico.obj"), "--mesh", "--out", str(tmp_path / "ico.neob")]) == 0
    assert eigs(tmp_path / "ico.neob", tmp_path / "ico_e.neob", "-k", "24") == 0
    return tmp_path


def test_demo_geodesic(mesh_files, capsys):
    t = mesh_files
    capsys.readouterr()
    assert main(["demo-geodesic", str(t / "ico.obj"), "--source", "4", "--deflate", str(t / "ico_e.neob"),
                 "--out", str(t / "d.txt")]) == 0
    d = np.loadtxt(t / "d.txt")
    assert d[4] == 0.0
    exact = shapes.great_circle_distance(shapes.icosphere(3)[0], shapes.icosphere(3)[0][4])
    assert np.abs(d - exact).max() / exact.max() < 0.05
    for name in ("icpcg", "deflated"):
        assert (t / f"d.txt.{name}.csv").read_text().startswith("iter,residual\n")
    out = capsys.readouterr().out.splitlines()
    iters = {line.split(",")[0]: int(line.split(",")[1]) for line in out[1:]}
    assert iters["deflated"] < iters["icpcg"]


def test_demo_geodesic_bad_source(mesh_files):
    assert main(["demo-geodesic", str(mesh_files / "ico.obj"), "--source", "99999",
                 "--out", str(mesh_files / "d.txt")]) == 2


def test_attention_check_default(capsys):
    assert main(["attention-check"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 4 and all(line.startswith("PASS") for line in out)


def test_attention_check_expected_failure(capsys):
    assert main(["attention-check", "--mass-injection", "off", "--expect-fail", "point_split"]) == 0
    assert "FAIL point_split" in capsys.readouterr().out
    assert main(["attention-check", "--mass-injection", "off"]) == 3


def test_attention_check_single_point(capsys):
    assert main(["attention-check", "--n", "1", "--seed", "3"]) == 0


def test_bad_usage():
    assert main(["eigs"]) == 2
    assert main(["attention-check", "--expect-fail", "nope"]) == 2


def test_deterministic_output(cloud_bundle, tmp_path):
    for name in ("a", "b"):
        assert main(["--threads", "1", "eigs", str(cloud_bundle), "-k", "5", "--solver", "lobpcg",
                     "--out", str(tmp_path / f"{name}.neob")]) == 0
    assert (tmp_path / "a.neob").read_bytes() == (tmp_path / "b.neob").read_bytes()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "neokit.cli", "attention-check", "--n", "8"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.count("PASS") == 4
