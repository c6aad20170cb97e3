"""Grid files, OBJ round trips, slice images, CSV reports."""

import csv
import struct

import numpy as np
import pytest

import transurf as ts
from transurf.io import FormatError, read_grid_header


BB = [[-0.5, -0.5, -0.5], [0.5, 0.5, 0.5]]


def small_grid(dtype=np.float64, dims=(5, 4, 3)):
    sph = ts.Sphere(center=(0, 0, 0), radius=0.3)
    return ts.bake_grid(sph, BB, dims, dtype=dtype)


def test_grid_round_trip_is_bit_exact(tmp_path):
    for dtype in (np.float64, np.float32):
        grid = small_grid(dtype)
        path = tmp_path / f"g_{np.dtype(dtype).name}.anfd"
        ts.write_grid(grid, path)
        back = ts.read_grid(path)
        assert back.dims == grid.dims
        assert np.array_equal(back.bbox, grid.bbox)
        assert back.values.dtype == grid.values.dtype
        assert np.array_equal(back.values, grid.values)


def test_grid_file_layout(tmp_path):
    grid = small_grid(np.float64, dims=(5, 4, 3))
    path = tmp_path / "g.anfd"
    ts.write_grid(grid, path)
    raw = path.read_bytes()
    assert len(raw) == 72 + 5 * 4 * 3 * 8
    assert raw[:4] == b"ANFD"
    header = read_grid_header(raw)
    assert header.version == 1
    assert header.dims == (5, 4, 3)
    assert header.dtype_tag == 1
    # payload is x-fastest: the first two samples differ along x
    first = struct.unpack_from("<2d", raw, 72)
    assert first[0] == grid.values[0, 0, 0]
    assert first[1] == grid.values[1, 0, 0]


def _write_patched(tmp_path, name, mutate):
    grid = small_grid()
    path = tmp_path / name
    ts.write_grid(grid, path)
    raw = bytearray(path.read_bytes())
    mutate(raw)
    path.write_bytes(bytes(raw))
    return path


def test_grid_format_errors_carry_offsets(tmp_path):
    p = tmp_path / "short.anfd"
    p.write_bytes(b"ANFD\x01")
    with pytest.raises(FormatError, match=r"truncated.*byte offset 0"):
        ts.read_grid(p)

    p = _write_patched(tmp_path, "magic.anfd", lambda raw: raw.__setitem__(slice(0, 4), b"JUNK"))
    with pytest.raises(FormatError, match=r"magic.*byte offset 0"):
        ts.read_grid(p)

    p = _write_patched(tmp_path, "ver.anfd", lambda raw: raw.__setitem__(slice(4, 8), struct.pack("<I", 9)))
    with pytest.raises(FormatError, match=r"version 9.*byte offset 4"):
        ts.read_grid(p)

    p = _write_patched(tmp_path, "dims.anfd", lambda raw: raw.__setitem__(slice(8, 12), struct.pack("<I", 1)))
    with pytest.raises(FormatError, match=r"dims.*byte offset 8"):
        ts.read_grid(p)

    def bad_bbox(raw):
        raw[20:28] = struct.pack("<d", 99.0)  # x0 above x1
    p = _write_patched(tmp_path, "bbox.anfd", bad_bbox)
    with pytest.raises(FormatError, match=r"bounding box.*byte offset 20"):
        ts.read_grid(p)

    p = _write_patched(tmp_path, "tag.anfd", lambda raw: raw.__setitem__(slice(68, 72), struct.pack("<I", 7)))
    with pytest.raises(FormatError, match=r"dtype tag 7.*byte offset 68"):
        ts.read_grid(p)

    p = _write_patched(tmp_path, "shortpay.anfd", lambda raw: raw.__delitem__(slice(-8, None)))
    with pytest.raises(FormatError, match=r"payload.*byte offset 72"):
        ts.read_grid(p)

    def poison(raw):
        raw[72:80] = struct.pack("<d", np.nan)
    p = _write_patched(tmp_path, "nan.anfd", poison)
    with pytest.raises(FormatError, match=r"byte offset 72"):
        ts.read_grid(p)


def test_obj_round_trip(tmp_path):
    mesh = ts.TriangleMesh(
        vertices=[[0.125, -1.5, 3.0], [0.25, 0.5, -0.75], [1.0, 2.0, 3.5], [0.0, 0.0, 1.0]],
        faces=[[0, 1, 2], [1, 3, 2]],
    )
    path = tmp_path / "m.obj"
    ts.write_obj(mesh, path)
    back = ts.read_obj(path)
    # these coordinates print exactly in 9 significant digits
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.faces, mesh.faces)


def test_obj_round_trip_general_coordinates(tmp_path):
    rng = np.random.default_rng(0)
    mesh = ts.TriangleMesh(vertices=rng.uniform(-1, 1, (50, 3)), faces=[[0, 1, 2]])
    path = tmp_path / "m.obj"
    ts.write_obj(mesh, path)
    back = ts.read_obj(path)
    assert np.abs(back.vertices - mesh.vertices).max() <= 1e-8


def test_obj_reader_tolerates_common_directives(tmp_path):
    path = tmp_path / "full.obj"
    path.write_text(
        "# exported mesh\n"
        "mtllib scene.mtl\n"
        "o part\n"
        "v 0 0 0\n"
        "v 1 0 0\n"
        "v 0 1 0\n"
        "vn 0 0 1\n"
        "vt 0.5 0.5\n"
        "s off\n"
        "usemtl default\n"
        "\n"
        "f 1/1/1 2/2/1 3/3/1\n"
    )
    mesh = ts.read_obj(path)
    assert mesh.n_vertices == 3 and mesh.n_faces == 1
    assert np.array_equal(mesh.faces, [[0, 1, 2]])


def test_obj_reader_positioned_errors(tmp_path):
    cases = [
        ("v 0 0\n", r"line 1"),
        ("v 0 0 zero\n", r"line 1"),
        ("v 0 0 0\nf 1 2 3 4\n", r"triangle.*line 2"),
        ("v 0 0 0\nf 0 1 1\n", r"positive.*line 2"),
        ("v 0 0 0\nf 1 1 9\n", r"exceeds.*line 2"),
        ("v 0 0 0\nbevel on\n", r"unknown directive.*line 2"),
    ]
    for content, pattern in cases:
        path = tmp_path / "bad.obj"
        path.write_text(content)
        with pytest.raises(FormatError, match=pattern):
            ts.read_obj(path)


def test_slice_orientation_follows_image_convention():
    pl = ts.Plane(point=(0, 0, 0), normal=(0, 1, 0))  # f = y
    values, u_axis, v_axis = ts.slice_samples(pl, "z", 0.0, 16, bbox=BB)
    assert (u_axis, v_axis) == (0, 1)
    assert values.shape == (16, 16)
    assert values[0, 0] == pytest.approx(0.5)    # top row at y max
    assert values[-1, 0] == pytest.approx(-0.5)
    assert np.all(values[:, 0] == values[:, -1])  # constant along x


def test_slice_uses_field_bbox_when_available():
    comp = ts.SceneComponent(ts.Sphere(center=(0, 0, 0), radius=0.3))
    scene = ts.ComposedScene([comp], bbox=BB)
    values, _, _ = ts.slice_samples(scene, 2, 0.0, 8)
    explicit, _, _ = ts.slice_samples(scene, 2, 0.0, 8, bbox=BB)
    assert np.array_equal(values, explicit)


def test_slice_validation():
    pl = ts.Plane(point=(0, 0, 0), normal=(0, 1, 0))
    with pytest.raises(ValueError, match="axis"):
        ts.slice_samples(pl, "w", 0.0, 8, bbox=BB)
    with pytest.raises(ValueError, match="outside"):
        ts.slice_samples(pl, "z", 2.0, 8, bbox=BB)
    with pytest.raises(ValueError, match="resolution"):
        ts.slice_samples(pl, "z", 0.0, 1, bbox=BB)
    with pytest.raises(ValueError, match="bounding box"):
        ts.slice_samples(pl, "z", 0.0, 8)


def test_write_slice_pgm(tmp_path):
    comp = ts.SceneComponent(ts.Sphere(center=(0, 0, 0), radius=0.3))
    scene = ts.ComposedScene([comp], bbox=BB)
    path = tmp_path / "s.pgm"
    ts.write_slice(scene, "z", 0.0, 32, path)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n32 32\n255\n")
    pixels = np.frombuffer(raw.split(b"255\n", 1)[1], dtype=np.uint8)
    assert pixels.size == 32 * 32
    assert pixels.min() < 60 and pixels.max() > 200  # spans inside and outside


def mixed_scene():
    box = ts.SceneComponent(ts.Box(center=(0, 0, -0.15), half_extents=(0.35, 0.35, 0.15)))
    dome = ts.SceneComponent(ts.Sphere(center=(0, 0, 0), radius=0.25), material=ts.TRANSPARENT, m=0.003)
    return ts.ComposedScene([box, dome], bbox=[[-0.45, -0.45, -0.4], [0.45, 0.45, 0.35]])


def _color_counts(path, resolution):
    raw = path.read_bytes()
    head = f"P6\n{resolution} {resolution}\n255\n".encode()
    assert raw.startswith(head)
    rgb = np.frombuffer(raw[len(head):], dtype=np.uint8).reshape(resolution, resolution, 3)
    white = np.all(rgb == (255, 255, 255), axis=2).sum()
    orange = np.all(rgb == (255, 165, 0), axis=2).sum()
    return int(white), int(orange)


def test_write_slice_overlays_distinguish_materials(tmp_path):
    """A plane cutting only the transparent dome shows the positive-level
    contour and no zero crossing; one cutting the box shows both."""
    scene = mixed_scene()
    above = tmp_path / "above.ppm"
    ts.write_slice(scene, "z", 0.12, 64, above, iso_overlays=(0.0, 0.005))
    white, orange = _color_counts(above, 64)
    assert white == 0
    assert orange > 20

    through = tmp_path / "through.ppm"
    ts.write_slice(scene, "z", -0.1, 64, through, iso_overlays=(0.0, 0.005))
    white, orange = _color_counts(through, 64)
    assert white > 20


def test_profile_csv_round_trip(tmp_path):
    prof = ts.render_profile(ts.RayCaseConfig(s=50.0, t0=1.0, m=0.01, t_max=1.2, step=0.01))
    path = tmp_path / "p.csv"
    ts.write_profile_csv(prof, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "f", "sigma", "T", "w"]
    assert len(rows) - 1 == len(prof.ts)
    # repr round trip keeps exact float values
    assert float(rows[1][3]) == prof.T[0] == 1.0
    k = len(rows) // 2
    assert float(rows[k][1]) == prof.f[k - 1]


def test_loss_csv(tmp_path):
    hist = np.array([[10.0, 1.0, 11.0], [8.0, 0.5, 8.5]])
    path = tmp_path / "loss.csv"
    ts.write_loss_csv(hist, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "field_term", "reg_term", "total"]
    assert rows[1] == ["0", "10.0", "1.0", "11.0"]
    assert rows[2][0] == "1"


def test_sweep_csv(tmp_path):
    reports = ts.verify_sweep([10.0], [1.0], [-0.1])
    path = tmp_path / "sweep.csv"
    ts.write_sweep_csv(reports, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:3] == ["s", "d0", "m"]
    assert len(rows) == 2
    assert float(rows[1][6]) == reports[0].alpha_closed
    assert rows[1][9] == "1"


def test_metrics_csv(tmp_path):
    rep = ts.chamfer(np.zeros((4, 3)), np.ones((4, 3)))
    path = tmp_path / "m.csv"
    ts.write_metrics_csv(rep, path, thresholds=[0.01, 0.1], completeness=[0.5, 1.0])
    with open(path) as fh:
        rows = {r[0]: r[1] for r in csv.reader(fh)}
    assert float(rows["chamfer"]) == rep.chamfer
    assert rows["n_gt"] == "4"
    assert float(rows["completeness@0.01"]) == 0.5
    assert float(rows["completeness@0.1"]) == 1.0
