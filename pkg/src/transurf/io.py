"""File formats: binary grids, OBJ meshes, slice images, CSV reports.

The grid format is a fixed 72-byte little-endian header followed by the
raw sample payload with x varying fastest:

    bytes 0-3    magic "ANFD"
    bytes 4-7    u32 version (currently 1)
    bytes 8-19   u32 nx, ny, nz   (vertex counts per axis, each >= 2)
    bytes 20-67  f64 x0,y0,z0,x1,y1,z1 (bounding box corners)
    bytes 68-71  u32 sample dtype: 0 = float32, 1 = float64

Write/read round trips preserve payload bits exactly; malformed files
raise FormatError carrying the byte offset (grids) or line number
(OBJ) of the violation.
"""

import csv
import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .envelope import TriangleMesh
from .field import Array, GridField, ScalarField, as_bbox

MAGIC = b"ANFD"
VERSION = 1
_HEADER = struct.Struct("<4sI3I6dI")
_DTYPES = {0: np.float32, 1: np.float64}
_DTYPE_TAGS = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class FormatError(ValueError):
    """Malformed file content; position is a byte offset or line number."""

    def __init__(self, message: str, *, offset: Optional[int] = None,
                 line: Optional[int] = None):
        where = ""
        if offset is not None:
            where = f" (byte offset {offset})"
        elif line is not None:
            where = f" (line {line})"
        super().__init__(message + where)
        self.offset = offset
        self.line = line


@dataclass
class GridFileHeader:
    magic: bytes
    version: int
    dims: tuple
    bbox: Array
    dtype_tag: int


def write_grid(grid: GridField, path) -> None:
    """Serialize a grid; payload bytes mirror the stored values exactly."""
    tag = _DTYPE_TAGS[np.dtype(grid.values.dtype)]
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        *grid.dims,
        *grid.bbox[0].tolist(),
        *grid.bbox[1].tolist(),
        tag,
    )
    payload = np.asfortranarray(grid.values).tobytes(order="F")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_grid_header(raw: bytes) -> GridFileHeader:
    if len(raw) < _HEADER.size:
        raise FormatError(
            f"truncated header: need {_HEADER.size} bytes, file has {len(raw)}",
            offset=0,
        )
    magic, version, nx, ny, nz, x0, y0, z0, x1, y1, z1, tag = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, expected {VERSION}", offset=4)
    if min(nx, ny, nz) < 2:
        raise FormatError(f"grid dims ({nx}, {ny}, {nz}) must each be >= 2", offset=8)
    bbox = np.array([[x0, y0, z0], [x1, y1, z1]])
    if not np.all(np.isfinite(bbox)) or not np.all(bbox[1] > bbox[0]):
        raise FormatError(f"invalid bounding box {bbox.tolist()}", offset=20)
    if tag not in _DTYPES:
        raise FormatError(f"unknown dtype tag {tag} (0=f32, 1=f64)", offset=68)
    return GridFileHeader(magic, version, (nx, ny, nz), bbox, tag)


def read_grid(path) -> GridField:
    with open(path, "rb") as fh:
        raw = fh.read()
    header = read_grid_header(raw)
    dtype = np.dtype(_DTYPES[header.dtype_tag])
    count = header.dims[0] * header.dims[1] * header.dims[2]
    expected = count * dtype.itemsize
    got = len(raw) - _HEADER.size
    if got != expected:
        raise FormatError(
            f"payload is {got} bytes, header promises {expected} "
            f"({count} x {dtype.itemsize}-byte samples)",
            offset=_HEADER.size,
        )
    values = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size)
    values = values.reshape(header.dims, order="F")
    try:
        return GridField(header.dims, header.bbox, values.copy())
    except ValueError as exc:
        raise FormatError(f"bad payload: {exc}", offset=_HEADER.size) from exc


_OBJ_SKIP = {"vn", "vt", "vp", "o", "g", "s", "usemtl", "mtllib", "l", "p"}


def write_obj(mesh: TriangleMesh, path) -> None:
    """ASCII OBJ, 9 significant digits, 1-based triangle indices."""
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def read_obj(path) -> TriangleMesh:
    """Parse triangle geometry; normals, textures, groups are ignored.

    Faces must be triangles; indices are 1-based (negative or zero
    indices are rejected).  'v/vt/vn' style face tokens keep only the
    vertex index.
    """
    verts = []
    faces = []
    with open(path) as fh:
        for ln, rawline in enumerate(fh, start=1):
            line = rawline.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            kw = parts[0]
            if kw == "v":
                if len(parts) != 4:
                    raise FormatError(
                        f"vertex needs 3 coordinates, got {len(parts) - 1}", line=ln
                    )
                try:
                    verts.append([float(x) for x in parts[1:]])
                except ValueError:
                    raise FormatError(f"bad vertex coordinate in {line!r}", line=ln)
            elif kw == "f":
                if len(parts) != 4:
                    raise FormatError(
                        f"only triangle faces are supported, got {len(parts) - 1} corners",
                        line=ln,
                    )
                idx = []
                for token in parts[1:]:
                    head = token.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise FormatError(f"bad face index {token!r}", line=ln)
                    if i <= 0:
                        raise FormatError(
                            f"face indices must be positive (1-based), got {i}", line=ln
                        )
                    idx.append((i, ln))
                faces.append(idx)
            elif kw in _OBJ_SKIP:
                continue
            else:
                raise FormatError(f"unknown directive {kw!r}", line=ln)
    v = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    f = np.empty((len(faces), 3), dtype=np.int64)
    for r, corner in enumerate(faces):
        for c, (i, ln) in enumerate(corner):
            if i > len(v):
                raise FormatError(
                    f"face index {i} exceeds vertex count {len(v)}", line=ln
                )
            f[r, c] = i - 1
    return TriangleMesh(v, f)


_AXIS_NAMES = {"x": 0, "y": 1, "z": 2}
# contour palette, cycled per iso value: white, orange, red, cyan, violet
_PALETTE = (
    (255, 255, 255),
    (255, 165, 0),
    (255, 64, 64),
    (64, 200, 255),
    (190, 120, 255),
)
_CLIP = 0.2  # field values mapped linearly from [-CLIP, CLIP] to [0, 255]


def slice_samples(
    field: ScalarField, axis, offset: float, resolution: int, bbox=None
):
    """Sample a field on an axis-aligned plane.

    Returns (values, u_axis, v_axis) where values[row, col] follows
    image convention: row 0 at the maximum of the second in-plane axis,
    columns increasing along the first.
    """
    if isinstance(axis, str):
        if axis not in _AXIS_NAMES:
            raise ValueError(f"axis must be x, y, z or 0..2, got {axis!r}")
        axis = _AXIS_NAMES[axis]
    axis = int(axis)
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be x, y, z or 0..2, got {axis}")
    if resolution < 2:
        raise ValueError("slice resolution must be at least 2")
    if bbox is None:
        bbox = getattr(field, "bbox", None)
        if bbox is None:
            raise ValueError(
                "field carries no bounding box; pass bbox explicitly"
            )
    bbox = as_bbox(bbox)
    if not bbox[0, axis] <= offset <= bbox[1, axis]:
        raise ValueError(
            f"slice offset {offset} outside bbox range "
            f"[{bbox[0, axis]}, {bbox[1, axis]}] on axis {axis}"
        )
    u_axis, v_axis = [k for k in range(3) if k != axis]
    us = np.linspace(bbox[0, u_axis], bbox[1, u_axis], resolution)
    vs = np.linspace(bbox[0, v_axis], bbox[1, v_axis], resolution)
    pts = np.empty((resolution, resolution, 3))
    pts[..., axis] = offset
    pts[..., u_axis] = us[None, :]
    pts[..., v_axis] = vs[::-1, None]
    return field.eval(pts), u_axis, v_axis


def _contour_mask(values: Array, iso: float) -> Array:
    """Pixels on the low side of an iso crossing (rasterized contour)."""
    low = values <= iso
    edge = np.zeros_like(low)
    edge[:-1, :] |= low[:-1, :] & ~low[1:, :]
    edge[1:, :] |= low[1:, :] & ~low[:-1, :]
    edge[:, :-1] |= low[:, :-1] & ~low[:, 1:]
    edge[:, 1:] |= low[:, 1:] & ~low[:, :-1]
    return edge


def write_slice(
    field: ScalarField,
    axis,
    offset: float,
    resolution: int,
    path,
    iso_overlays: Sequence[float] = (),
    bbox=None,
) -> None:
    """Grayscale plane image; with iso_overlays, a color overlay per level.

    Values clamp to [-0.2, 0.2] and map affinely onto [0, 255].  Without
    iso values the output is binary PGM (P5); with them, binary PPM (P6)
    whose contour pixels take palette colors in listed order.
    """
    values, _, _ = slice_samples(field, axis, offset, resolution, bbox)
    gray = np.round(
        (np.clip(values, -_CLIP, _CLIP) + _CLIP) / (2.0 * _CLIP) * 255.0
    ).astype(np.uint8)
    h, w = gray.shape
    if not iso_overlays:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode())
            fh.write(gray.tobytes())
        return
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    for i, iso in enumerate(iso_overlays):
        mask = _contour_mask(values, float(iso))
        rgb[mask] = _PALETTE[i % len(_PALETTE)]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.tobytes())


def _write_rows(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(x) if isinstance(x, float) else x for x in row])


def write_profile_csv(profile, path) -> None:
    """Ray profile table: t, f, sigma, T, w."""
    rows = zip(profile.ts, profile.f, profile.sigma, profile.T, profile.w)
    _write_rows(path, ["t", "f", "sigma", "T", "w"], ((float(a), float(b), float(c), float(d), float(e)) for a, b, c, d, e in rows))


def write_loss_csv(history: Array, path) -> None:
    """Optimization trace: epoch, field_term, reg_term, total."""
    rows = ((e, float(r[0]), float(r[1]), float(r[2])) for e, r in enumerate(history))
    _write_rows(path, ["epoch", "field_term", "reg_term", "total"], rows)


def write_sweep_csv(reports, path) -> None:
    """One row per verified ray case."""
    rows = (
        (
            float(r.cfg.s),
            float(r.cfg.d0),
            float(r.cfg.m),
            float(r.cfg.cos_theta),
            float(r.cfg.step),
            float(r.alpha_quad),
            float(r.alpha_closed),
            float(r.t_star),
            float(r.t_expected),
            int(r.passed),
        )
        for r in reports
    )
    _write_rows(
        path,
        ["s", "d0", "m", "cos_theta", "step", "alpha_quadrature",
         "alpha_closed", "t_star", "t_expected", "passed"],
        rows,
    )


def write_metrics_csv(report, path, thresholds=None, completeness=None) -> None:
    """Chamfer summary plus optional completeness rows, scene units."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerow(["g2d", repr(report.g2d)])
        writer.writerow(["d2g", repr(report.d2g)])
        writer.writerow(["chamfer", repr(report.chamfer)])
        writer.writerow(["n_gt", report.n_gt])
        writer.writerow(["n_rec", report.n_rec])
        if thresholds is not None and completeness is not None:
            for t, c in zip(thresholds, completeness):
                writer.writerow([f"completeness@{t!r}", repr(float(c))])
