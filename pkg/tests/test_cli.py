"""Command line front-end: exit codes, artifacts, scene specs."""

import json

import numpy as np
import pytest

import transurf as ts
from transurf.cli import main


SPHERE_SCENE = {
    "bbox": [[-0.6, -0.6, -0.6], [0.6, 0.6, 0.6]],
    "components": [
        {"type": "sphere", "center": [0, 0, 0], "radius": 0.5,
         "material": "transparent", "m": 0.003}
    ],
}

MIXED_SCENE = {
    "bbox": [[-0.45, -0.45, -0.4], [0.45, 0.45, 0.35]],
    "components": [
        {"type": "box", "center": [0, 0, -0.15], "half_extents": [0.35, 0.35, 0.15],
         "material": "opaque"},
        {"type": "sphere", "center": [0, 0, 0], "radius": 0.25,
         "material": "transparent", "m": 0.003},
    ],
}


@pytest.fixture
def sphere_json(tmp_path):
    p = tmp_path / "sphere.json"
    p.write_text(json.dumps(SPHERE_SCENE))
    return str(p)


@pytest.fixture
def mixed_json(tmp_path):
    p = tmp_path / "mixed.json"
    p.write_text(json.dumps(MIXED_SCENE))
    return str(p)


def test_theorem_verify_passes(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code = main([
        "theorem-verify", "--s-list", "10,50", "--d0-list", "1",
        "--m-list=-0.1,0,0.1", "--out", str(out),
    ])
    captured = capsys.readouterr()
    assert code == 0
    assert "6/6 cases passed" in captured.out
    rows = out.read_text().strip().splitlines()
    assert len(rows) == 7
    first = rows[1].split(",")
    assert float(first[0]) == 10.0 and float(first[2]) == -0.1
    assert float(first[5]) == pytest.approx(0.731046366505588, abs=1e-12)
    assert first[9] == "1"


def test_theorem_verify_detects_failures(capsys):
    code = main(["theorem-verify", "--s-list", "50", "--d0-list", "1",
                 "--m-list", "0.01", "--step", "0.05", "--tol", "1e-9"])
    captured = capsys.readouterr()
    assert code == 1
    assert "FAIL" in captured.out


def test_theorem_verify_rejects_empty_list():
    assert main(["theorem-verify", "--s-list", ""]) == 2


def test_bake_and_extract_zero_iso(tmp_path, mixed_json, capsys):
    grid_path = tmp_path / "scene.anfd"
    code = main(["bake", "--scene", mixed_json, "--res", "32",
                 "--out", str(grid_path)])
    assert code == 0
    assert grid_path.stat().st_size == 72 + 32**3 * 8  # res counts lattice vertices

    mesh_path = tmp_path / "base.obj"
    code = main(["extract", "--grid", str(grid_path), "--mode", "zero-iso",
                 "--res", "32", "--out", str(mesh_path)])
    assert code == 0
    mesh = ts.read_obj(mesh_path)
    assert mesh.n_faces > 0
    assert mesh.vertices[:, 2].max() < 0.05  # baseline has no dome


def test_bake_abs_field(tmp_path, sphere_json):
    grid_path = tmp_path / "abs.anfd"
    code = main(["bake", "--scene", sphere_json, "--res", "16", "--field", "abs",
                 "--dtype", "f32", "--out", str(grid_path)])
    assert code == 0
    grid = ts.read_grid(grid_path)
    assert grid.values.dtype == np.float32
    assert grid.values.min() >= 0.0


def test_extract_envelope_writes_mesh_and_loss(tmp_path, sphere_json):
    mesh_path = tmp_path / "cover.obj"
    loss_path = tmp_path / "cover_loss.csv"
    code = main([
        "extract", "--scene", sphere_json, "--mode", "abs", "--iso", "0.05",
        "--res", "16", "--epochs1", "40", "--epochs2", "10",
        "--out", str(mesh_path),
    ])
    assert code == 0
    assert loss_path.exists()  # default name derives from the mesh stem
    mesh = ts.read_obj(mesh_path)
    r = np.linalg.norm(mesh.vertices, axis=1)
    assert np.abs(r - 0.5).max() < 0.05
    rows = loss_path.read_text().strip().splitlines()
    assert len(rows) == 1 + 40 + 10


def test_extract_zero_iso_warns_when_empty(tmp_path, sphere_json, capsys):
    mesh_path = tmp_path / "empty.obj"
    code = main(["extract", "--scene", sphere_json, "--mode", "zero-iso",
                 "--res", "16", "--out", str(mesh_path)])
    captured = capsys.readouterr()
    assert code == 0
    assert "no surface" in captured.err.lower() or "empty" in captured.err.lower()


def test_extract_rejects_nonpositive_iso_for_envelope(sphere_json, tmp_path):
    code = main(["extract", "--scene", sphere_json, "--mode", "abs", "--iso", "0",
                 "--res", "16", "--out", str(tmp_path / "x.obj")])
    assert code == 2


def test_extract_requires_scene_xor_grid(tmp_path, sphere_json):
    grid_path = tmp_path / "g.anfd"
    main(["bake", "--scene", sphere_json, "--res", "8", "--out", str(grid_path)])
    assert main(["extract", "--mode", "abs", "--out", str(tmp_path / "m.obj")]) == 2
    assert main(["extract", "--scene", sphere_json, "--grid", str(grid_path),
                 "--out", str(tmp_path / "m.obj")]) == 2


def test_eval_against_scene(tmp_path, mixed_json, capsys):
    mesh_path = tmp_path / "base.obj"
    main(["extract", "--scene", mixed_json, "--mode", "zero-iso", "--res", "24",
          "--out", str(mesh_path)])
    csv_path = tmp_path / "metrics.csv"
    code = main(["--serial", "eval", "--gt-scene", mixed_json, "--rec", str(mesh_path),
                 "--samples", "5000", "--thresholds", "0.01,0.05",
                 "--out", str(csv_path)])
    captured = capsys.readouterr()
    assert code == 0
    assert "chamfer" in captured.out
    rows = {line.split(",")[0]: line.split(",")[1]
            for line in csv_path.read_text().strip().splitlines()[1:]}
    # the baseline misses the dome: completeness below 1 at tight threshold
    assert float(rows["completeness@0.01"]) < 1.0


def test_eval_mesh_vs_mesh(tmp_path, capsys):
    mesh = ts.TriangleMesh(
        vertices=[[0, 0, 0], [1, 0, 0], [0, 1, 0]], faces=[[0, 1, 2]]
    )
    a = tmp_path / "a.obj"
    b = tmp_path / "b.obj"
    ts.write_obj(mesh, a)
    ts.write_obj(ts.TriangleMesh(mesh.vertices + [0, 0, 0.01], mesh.faces), b)
    code = main(["eval", "--gt", str(a), "--rec", str(b), "--samples", "2000"])
    captured = capsys.readouterr()
    assert code == 0
    assert "x 1e-3" in captured.out or "chamfer" in captured.out


def test_eval_fails_on_empty_reconstruction(tmp_path, mixed_json, capsys):
    empty = tmp_path / "empty.obj"
    empty.write_text("")
    code = main(["eval", "--gt-scene", mixed_json, "--rec", str(empty),
                 "--samples", "1000"])
    assert code == 1


def test_eval_requires_gt_xor_scene(tmp_path, mixed_json):
    mesh = ts.TriangleMesh(vertices=[[0, 0, 0], [1, 0, 0], [0, 1, 0]], faces=[[0, 1, 2]])
    rec = tmp_path / "r.obj"
    ts.write_obj(mesh, rec)
    assert main(["eval", "--rec", str(rec)]) == 2


def test_slice_writes_overlay_image(tmp_path, mixed_json):
    out = tmp_path / "cut.ppm"
    code = main(["slice", "--scene", mixed_json, "--axis", "z", "--offset", "0.12",
                 "--res", "48", "--iso", "0,0.005", "--out", str(out)])
    assert code == 0
    raw = out.read_bytes()
    assert raw.startswith(b"P6\n48 48\n255\n")
    rgb = np.frombuffer(raw.split(b"255\n", 1)[1], dtype=np.uint8).reshape(48, 48, 3)
    orange = np.all(rgb == (255, 165, 0), axis=2).sum()
    white = np.all(rgb == (255, 255, 255), axis=2).sum()
    assert orange > 10 and white == 0


def test_missing_files_exit_3(tmp_path):
    assert main(["bake", "--scene", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "g.anfd")]) == 3
    assert main(["eval", "--gt", str(tmp_path / "nope.obj"),
                 "--rec", str(tmp_path / "nope2.obj")]) == 3


def test_malformed_scene_exits_3(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["bake", "--scene", str(bad), "--out", str(tmp_path / "g.anfd")]) == 3

    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"bbox": SPHERE_SCENE["bbox"], "components": [
        {"type": "torus", "material": "opaque"}]}))
    assert main(["bake", "--scene", str(wrong), "--out", str(tmp_path / "g.anfd")]) == 3


def test_scene_alpha_reference_derives_offset(tmp_path):
    spec = {
        "bbox": [[-0.6, -0.6, -0.6], [0.6, 0.6, 0.6]],
        "components": [
            {"type": "sphere", "center": [0, 0, 0], "radius": 0.5,
             "material": "transparent",
             "alpha": 0.2, "alpha_ref": {"s": 100.0, "d0": 1.0}}
        ],
    }
    p = tmp_path / "alpha.json"
    p.write_text(json.dumps(spec))
    scene = ts.SceneSpec.load(str(p)).build()
    m = scene.components[0].m
    assert m == pytest.approx(ts.m_from_alpha(0.2, 100.0, 1.0))
    assert ts.closed_form_opacity(100.0, 1.0, m) == pytest.approx(0.2, rel=1e-12)
    # specifying both alpha and m is contradictory
    spec["components"][0]["m"] = 0.01
    p.write_text(json.dumps(spec))
    with pytest.raises(Exception):
        ts.SceneSpec.load(str(p)).build()


def test_no_command_is_usage_error():
    assert main([]) == 2
