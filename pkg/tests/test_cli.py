import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from levelmorph.cli import main
from levelmorph.embed import EmbeddingMethod, load_embedding
from levelmorph.grid import BinaryGrid3
from levelmorph.mesh import euler_from_mesh
from levelmorph.metaimage import read_volume, write_volume
from levelmorph.ply import read_ply


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def torus_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("torus")
    assert run("synth", "torus", "--inner", 20, "--outer", 40, "--spacing", 0.5, "--out", out) == 0
    return out / "volume.mhd"


@pytest.fixture(scope="module")
def sphere_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("sphere")
    assert run("synth", "sphere", "--radius", 20, "--spacing", 0.5, "--out", out) == 0
    return out / "volume.mhd"


def _fg_volume(path):
    g = read_volume(path)
    return np.count_nonzero(g.values) * g.voxel_volume


def test_synth_volumes(torus_file, sphere_file):
    assert abs(_fg_volume(torus_file) - 59217.6) / 59217.6 < 0.01
    assert abs(_fg_volume(sphere_file) - 33510.3) / 33510.3 < 0.01


def test_synth_missing_radius(tmp_path, capsys):
    assert run("synth", "sphere", "--out", tmp_path) == 2
    assert "--radius" in capsys.readouterr().err


def test_synth_clipped(tmp_path):
    assert run("synth", "sphere", "--radius", 10, "--dims", 21, 21, 21, "--spacing", 1, "--out", tmp_path) == 1


def test_argparse_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("synth", "cube", "--out", tmp_path)
    assert exc.value.code == 2


def test_embed_all_ones_constant(tmp_path):
    write_volume(tmp_path / "ones.mhd", BinaryGrid3(np.ones((8, 8, 8), np.uint8)))
    assert run("embed", tmp_path / "ones.mhd", "--sigma", 1, "--pad", 0, "--out", tmp_path / "o") == 0
    e = load_embedding(tmp_path / "o" / "embedding.mhd")
    assert np.all(np.abs(e.values + 0.5) < 1e-12)


def test_embed_gauss_requires_sigma(tmp_path, sphere_file):
    assert run("embed", sphere_file, "--out", tmp_path) == 2


def test_embed_sdt_single_phase(tmp_path):
    write_volume(tmp_path / "ones.mhd", BinaryGrid3(np.ones((8, 8, 8), np.uint8)))
    assert run("embed", tmp_path / "ones.mhd", "--method", "sdt", "--out", tmp_path / "o") == 1


def test_embed_sdt_metadata(tmp_path):
    v = np.zeros((9, 9, 9), np.uint8)
    v[3:6, 3:6, 3:6] = 255
    write_volume(tmp_path / "b.mhd", BinaryGrid3((v > 0).astype(np.uint8)), "MET_UCHAR")
    assert run("embed", tmp_path / "b.mhd", "--method", "sdt", "--out", tmp_path / "o") == 0
    e = load_embedding(tmp_path / "o" / "embedding.mhd")
    assert e.method is EmbeddingMethod.SIGNED_DISTANCE


def test_embed_flattens_255(tmp_path):
    from levelmorph.grid import ScalarGrid3

    v = np.zeros((9, 9, 9))
    v[3:6, 3:6, 3:6] = 255
    write_volume(tmp_path / "raw.mhd", ScalarGrid3(v), "MET_UCHAR")
    assert run("embed", tmp_path / "raw.mhd", "--method", "sdt", "--fg-threshold", 127, "--out", tmp_path / "o") == 0
    e = load_embedding(tmp_path / "o" / "embedding.mhd")
    assert np.count_nonzero(e.values < 0) == 27


@pytest.fixture(scope="module")
def torus_embedding(tmp_path_factory, torus_file):
    out = tmp_path_factory.mktemp("temb")
    assert run("embed", torus_file, "--sigma", 1, "--out", out) == 0
    return out / "embedding.mhd"


def test_torus_embed_then_morph(tmp_path, torus_embedding):
    assert run("morph", torus_embedding, "--t", 1.5, "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["chi"] == 0
    assert abs(rep["area_mm2"] - 11843.5) / 11843.5 < 0.02
    rows = list(csv.DictReader((tmp_path / "report.csv").open()))
    assert len(rows) == 1 and rows[0]["chi"] == "0"


def test_sphere_morph_from_binary(tmp_path, sphere_file):
    assert run("morph", sphere_file, "--sigma", 1, "--t", 1.5, "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["chi"] == 2
    assert abs(rep["avg_mean_curv_per_mm"] - 0.05) / 0.05 < 0.03
    assert rep["params"] == {
        "method": "GaussianBlur",
        "sigma_mm": 1.0,
        "T": 0.5,
        "t_mm": 1.5,
        "epsilon": rep["params"]["epsilon"],
    }


def test_morph_empty_binary(tmp_path):
    write_volume(tmp_path / "z.mhd", BinaryGrid3(np.zeros((10, 10, 10), np.uint8)))
    assert run("morph", tmp_path / "z.mhd", "--out", tmp_path / "o") == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["volume_mm3"] == 0 and rep["area_mm2"] == 0
    assert rep["avg_mean_curv_per_mm"] is None


def test_morph_unknown_provenance(tmp_path):
    from levelmorph.grid import ScalarGrid3

    x = np.linspace(-1, 1, 9)
    write_volume(tmp_path / "f.mhd", ScalarGrid3(np.broadcast_to(x[:, None, None], (9, 9, 9))))
    assert run("morph", tmp_path / "f.mhd", "--out", tmp_path / "o") == 1
    assert run("morph", tmp_path / "f.mhd", "--kind", "embedding", "--out", tmp_path / "o") == 1
    assert run("morph", tmp_path / "f.mhd", "--kind", "embedding", "--method", "sdt", "--out", tmp_path / "o") == 0


def test_missing_input(tmp_path):
    missing = tmp_path / "nope.mhd"
    assert run("embed", missing, "--sigma", 1, "--out", tmp_path) == 2
    for cmd in ("morph", "mesh", "histo", "compare"):
        assert run(cmd, missing, "--out", tmp_path) == 2, cmd
    assert run("sweep", missing, "--vary", "sigma", "--range", 1, 2, "--out", tmp_path) == 2


def test_mesh_torus_closed(tmp_path, torus_embedding):
    assert run("mesh", torus_embedding, "--with", "H,K", "--out", tmp_path) == 0
    m = read_ply(tmp_path / "surface.ply")
    eu = euler_from_mesh(m)
    assert eu.closed and eu.chi == 0
    assert set(m.vertex_scalars) == {"H", "K"}


def test_mesh_empty_warns(tmp_path, caplog):
    from levelmorph.embed import Embedding, save_embedding
    from levelmorph.grid import ScalarGrid3

    e = Embedding(ScalarGrid3(np.full((6, 6, 6), 0.5)), EmbeddingMethod.GAUSSIAN_BLUR, sigma=1.0, T=0.5)
    save_embedding(tmp_path / "c.mhd", e)
    assert run("mesh", tmp_path / "c.mhd", "--with", "H", "--out", tmp_path / "o") == 0
    assert read_ply(tmp_path / "o" / "surface.ply").is_empty
    assert "empty" in caplog.text


@pytest.fixture(scope="module")
def sphere_embedding(tmp_path_factory, sphere_file):
    out = tmp_path_factory.mktemp("semb")
    assert run("embed", sphere_file, "--sigma", 2, "--out", out) == 0
    return out / "embedding.mhd"


def test_histo_sphere_mode_bin(tmp_path, sphere_embedding):
    assert run("histo", sphere_embedding, "--channel", "H", "--bins", 100, "--range", -0.2, 0.2, "--out", tmp_path) == 0
    lines = (tmp_path / "histogram.csv").read_text().splitlines()
    assert lines[0].startswith("# underflow,") and lines[1].startswith("# overflow,")
    rows = [tuple(map(float, ln.split(","))) for ln in lines[3:]]
    assert len(rows) == 100
    left, _ = max(rows, key=lambda r: r[1])
    assert left <= 0.05 < left + 0.004


def test_histo_from_ply(tmp_path, sphere_embedding):
    assert run("mesh", sphere_embedding, "--with", "H", "--out", tmp_path) == 0
    assert run("histo", tmp_path / "surface.ply", "--out", tmp_path) == 0
    assert run("histo", tmp_path / "surface.ply", "--channel", "K2", "--out", tmp_path) == 2


def test_histo_bad_range(tmp_path, sphere_embedding):
    assert run("histo", sphere_embedding, "--range", 0.2, -0.2, "--out", tmp_path) == 2
    assert run("histo", sphere_embedding, "--range", 0.1, 0.1, "--out", tmp_path) == 2


def test_sweep_single_step(tmp_path, sphere_file):
    assert run("sweep", sphere_file, "--vary", "thickness", "--range", 2, 2, "--steps", 1, "--out", tmp_path) == 0
    rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
    assert len(rows) == 1
    assert rows[0]["vary"] == "thickness" and float(rows[0]["value"]) == 2.0
    assert rows[0]["t_mm"] == "2.0"


def test_sweep_invalid_range(tmp_path, sphere_file):
    assert run("sweep", sphere_file, "--vary", "sigma", "--range", 3, 1, "--out", tmp_path) == 2
    assert run("sweep", sphere_file, "--vary", "sigma", "--range", 1, 1, "--steps", 3, "--out", tmp_path) == 2


def test_sweep_thickness_flat(tmp_path, torus_file):
    assert run("sweep", torus_file, "--vary", "thickness", "--range", 1, 5, "--steps", 5, "--sigma", 2.5,
               "--out", tmp_path) == 0
    rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
    assert len(rows) == 5
    for key in ("volume_mm3", "area_mm2", "avg_mean_curv_per_mm"):
        vals = np.array([float(r[key]) for r in rows])
        assert (vals.max() - vals.min()) / vals.mean() < 0.01


def test_compare_torus(tmp_path, torus_file):
    assert run("compare", torus_file, "--sigma", 1, "--t", 1.5, "--out", tmp_path) == 0
    res = json.loads((tmp_path / "compare.json").read_text())
    assert res["iqr_ratio_sdt_over_gaussian"] >= 10
    assert abs(res["sdt"]["report"]["chi_raw"]) > 1
    assert abs(res["gaussian"]["report"]["chi_raw"]) < 0.1
    rows = list(csv.DictReader((tmp_path / "report.csv").open()))
    assert [r["method"] for r in rows] == ["GaussianBlur", "SignedDistance"]


def test_compare_sphere_default_thickness(tmp_path, sphere_file):
    assert run("compare", sphere_file, "--sigma", 1, "--out", tmp_path) == 0
    res = json.loads((tmp_path / "compare.json").read_text())
    H_sdt = res["sdt"]["report"]["avg_mean_curv_per_mm"]
    assert abs(H_sdt - 0.05) / 0.05 < 0.06
    assert (res["sdt"]["vertex_H_std"] / res["gaussian"]["vertex_H_std"]) ** 2 >= 10
    assert res["iqr_ratio_sdt_over_gaussian"] >= 10


def test_outputs_byte_identical(tmp_path, sphere_embedding):
    for d in ("a", "b"):
        assert run("morph", sphere_embedding, "--out", tmp_path / d) == 0
        assert run("mesh", sphere_embedding, "--with", "H,K", "--out", tmp_path / d) == 0
        assert run("histo", tmp_path / d / "surface.ply", "--out", tmp_path / d) == 0
    for name in ("report.json", "report.csv", "surface.ply", "histogram.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_thread_env_matches_serial(tmp_path, sphere_embedding, monkeypatch):
    assert run("morph", sphere_embedding, "--out", tmp_path / "s") == 0
    monkeypatch.setenv("LEVELMORPH_THREADS", "4")
    assert run("morph", sphere_embedding, "--out", tmp_path / "p") == 0
    s = json.loads((tmp_path / "s" / "report.json").read_text())
    p = json.loads((tmp_path / "p" / "report.json").read_text())
    for k in ("volume_mm3", "area_mm2", "total_mean_curv_mm", "total_gauss_curv", "chi_raw"):
        assert math.isclose(s[k], p[k], rel_tol=1e-10)


def test_bad_thread_env(tmp_path, sphere_embedding, monkeypatch):
    monkeypatch.setenv("LEVELMORPH_THREADS", "0")
    assert run("morph", sphere_embedding, "--out", tmp_path) == 1


def test_console_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "levelmorph.cli", "synth", "sphere", "--radius", "3", "--spacing", "1",
         "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "volume.mhd").exists() and (tmp_path / "volume.raw").exists()
