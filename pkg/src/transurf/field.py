"""Distance-field primitives, mixed opaque/transparent composition, grids.

All fields map arrays of points with shape (..., 3) to values of shape
(...) and gradients of shape (..., 3).  Evaluation is pure; field objects
are treated as immutable after construction, so they can be shared freely
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

Array = np.ndarray

OPAQUE = "opaque"
TRANSPARENT = "transparent"


def as_points(p) -> Array:
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1] != 3:
        raise ValueError(f"points must have trailing dimension 3, got shape {p.shape}")
    return p


def as_bbox(b) -> Array:
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (2, 3):
        raise ValueError(f"bbox must have shape (2, 3) (min corner, max corner), got {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("bbox must be finite")
    if not np.all(b[1] > b[0]):
        raise ValueError(f"bbox max must exceed min componentwise, got {b.tolist()}")
    return b


def _unit(v, name: str) -> Array:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector")
    n = float(np.linalg.norm(v))
    if not n > 0.0:
        raise ValueError(f"{name} must be nonzero")
    return v / n


class ScalarField:
    """Base interface: eval(p) -> values, gradient(p) -> vectors.

    The default gradient is a central difference; subclasses with analytic
    gradients override it.  At non-differentiable loci the returned vector
    is a subgradient and consumers must treat it as a descent direction
    only.
    """

    def eval(self, p) -> Array:
        raise NotImplementedError

    def gradient(self, p, h: float = 1e-5) -> Array:
        if not h > 0.0:
            raise ValueError("finite-difference step h must be positive")
        p = as_points(p)
        g = np.empty_like(p)
        for axis in range(3):
            dp = np.zeros(3)
            dp[axis] = h
            g[..., axis] = (self.eval(p + dp) - self.eval(p - dp)) / (2.0 * h)
        return g

    def value_and_grad(self, p, h: Optional[float] = None):
        """Value and gradient together; overridden where work can be shared."""
        if h is None:
            return self.eval(p), self.gradient(p)
        return self.eval(p), self.gradient(p, h)


@dataclass
class Sphere(ScalarField):
    """Exact signed distance everywhere."""

    center: Sequence[float]
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.radius = float(self.radius)
        if not self.radius > 0.0:
            raise ValueError("sphere radius must be positive")

    def eval(self, p) -> Array:
        p = as_points(p)
        return np.linalg.norm(p - self.center, axis=-1) - self.radius

    def gradient(self, p, h: float = 1e-5) -> Array:
        p = as_points(p)
        d = p - self.center
        n = np.linalg.norm(d, axis=-1, keepdims=True)
        # zero vector at the center (kink of the distance function)
        return np.where(n > 0.0, d / np.where(n > 0.0, n, 1.0), 0.0)

    def value_and_grad(self, p, h: Optional[float] = None):
        p = as_points(p)
        d = p - self.center
        n = np.linalg.norm(d, axis=-1, keepdims=True)
        g = np.where(n > 0.0, d / np.where(n > 0.0, n, 1.0), 0.0)
        return n[..., 0] - self.radius, g


@dataclass
class Plane(ScalarField):
    """Exact signed distance everywhere; negative on the side opposite the normal."""

    point: Sequence[float]
    normal: Sequence[float]

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=np.float64).reshape(3)
        self.normal = _unit(self.normal, "plane normal")

    def eval(self, p) -> Array:
        p = as_points(p)
        return np.einsum("...k,k->...", p - self.point, self.normal)

    def gradient(self, p, h: float = 1e-5) -> Array:
        p = as_points(p)
        return np.broadcast_to(self.normal, p.shape).copy()


@dataclass
class Box(ScalarField):
    """Axis-aligned box. Signed distance is exact both outside and inside
    (inside it equals minus the distance to the nearest face)."""

    center: Sequence[float]
    half_extents: Sequence[float]

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.half_extents = np.asarray(self.half_extents, dtype=np.float64).reshape(3)
        if not np.all(self.half_extents > 0.0):
            raise ValueError("box half-extents must be positive componentwise")

    def eval(self, p) -> Array:
        p = as_points(p)
        q = np.abs(p - self.center) - self.half_extents
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside

    def gradient(self, p, h: float = 1e-5) -> Array:
        p = as_points(p)
        d = p - self.center
        sgn = np.where(d >= 0.0, 1.0, -1.0)
        q = np.abs(d) - self.half_extents
        qp = np.maximum(q, 0.0)
        out_norm = np.linalg.norm(qp, axis=-1, keepdims=True)
        outside_grad = sgn * qp / np.where(out_norm > 0.0, out_norm, 1.0)
        # inside: one-hot on the axis nearest a face; ties pick the lowest axis
        axis = np.argmax(q, axis=-1)
        inside_grad = sgn * (axis[..., None] == np.arange(3))
        return np.where(out_norm > 0.0, outside_grad, inside_grad)

    def value_and_grad(self, p, h: Optional[float] = None):
        p = as_points(p)
        d = p - self.center
        sgn = np.where(d >= 0.0, 1.0, -1.0)
        q = np.abs(d) - self.half_extents
        qp = np.maximum(q, 0.0)
        out_norm = np.linalg.norm(qp, axis=-1, keepdims=True)
        val = out_norm[..., 0] + np.minimum(np.max(q, axis=-1), 0.0)
        outside_grad = sgn * qp / np.where(out_norm > 0.0, out_norm, 1.0)
        axis = np.argmax(q, axis=-1)
        inside_grad = sgn * (axis[..., None] == np.arange(3))
        return val, np.where(out_norm > 0.0, outside_grad, inside_grad)


@dataclass
class Cylinder(ScalarField):
    """Finite capped cylinder. Signed distance is exact both outside
    (lateral wall, caps, and rim corner) and inside."""

    axis_point: Sequence[float]
    axis_dir: Sequence[float]
    radius: float
    half_height: float

    def __post_init__(self):
        self.axis_point = np.asarray(self.axis_point, dtype=np.float64).reshape(3)
        self.axis_dir = _unit(self.axis_dir, "cylinder axis dir")
        self.radius = float(self.radius)
        self.half_height = float(self.half_height)
        if not (self.radius > 0.0 and self.half_height > 0.0):
            raise ValueError("cylinder radius and half-height must be positive")

    def _frame(self, p: Array):
        w = p - self.axis_point
        y = np.einsum("...k,k->...", w, self.axis_dir)
        radial = w - y[..., None] * self.axis_dir
        rho = np.linalg.norm(radial, axis=-1)
        return y, radial, rho

    def eval(self, p) -> Array:
        p = as_points(p)
        y, _, rho = self._frame(p)
        qr = rho - self.radius
        qy = np.abs(y) - self.half_height
        outside = np.hypot(np.maximum(qr, 0.0), np.maximum(qy, 0.0))
        inside = np.minimum(np.maximum(qr, qy), 0.0)
        return outside + inside

    def gradient(self, p, h: float = 1e-5) -> Array:
        p = as_points(p)
        y, radial, rho = self._frame(p)
        rho_safe = np.where(rho > 0.0, rho, 1.0)[..., None]
        rdir = np.where(rho[..., None] > 0.0, radial / rho_safe, 0.0)
        ydir = np.where(y >= 0.0, 1.0, -1.0)[..., None] * self.axis_dir
        qr = rho - self.radius
        qy = np.abs(y) - self.half_height
        gr = np.maximum(qr, 0.0)
        gy = np.maximum(qy, 0.0)
        out_norm = np.hypot(gr, gy)
        safe = np.where(out_norm > 0.0, out_norm, 1.0)[..., None]
        outside_grad = (gr[..., None] * rdir + gy[..., None] * ydir) / safe
        inside_grad = np.where((qr >= qy)[..., None], rdir, ydir)
        return np.where((out_norm > 0.0)[..., None], outside_grad, inside_grad)

    def value_and_grad(self, p, h: Optional[float] = None):
        p = as_points(p)
        y, radial, rho = self._frame(p)
        qr = rho - self.radius
        qy = np.abs(y) - self.half_height
        gr = np.maximum(qr, 0.0)
        gy = np.maximum(qy, 0.0)
        out_norm = np.hypot(gr, gy)
        val = out_norm + np.minimum(np.maximum(qr, qy), 0.0)
        rho_safe = np.where(rho > 0.0, rho, 1.0)[..., None]
        rdir = np.where(rho[..., None] > 0.0, radial / rho_safe, 0.0)
        ydir = np.where(y >= 0.0, 1.0, -1.0)[..., None] * self.axis_dir
        safe = np.where(out_norm > 0.0, out_norm, 1.0)[..., None]
        outside_grad = (gr[..., None] * rdir + gy[..., None] * ydir) / safe
        inside_grad = np.where((qr >= qy)[..., None], rdir, ydir)
        return val, np.where((out_norm > 0.0)[..., None], outside_grad, inside_grad)


@dataclass
class SceneComponent(ScalarField):
    """One tagged primitive. Opaque components expose the raw signed
    distance; transparent ones expose |signed distance| + m, which is
    positive on both sides of the surface and attains its minimum m on it.
    """

    primitive: ScalarField
    material: str = OPAQUE
    m: float = 0.0

    def __post_init__(self):
        if self.material not in (OPAQUE, TRANSPARENT):
            raise ValueError(f"material must be {OPAQUE!r} or {TRANSPARENT!r}, got {self.material!r}")
        self.m = float(self.m)
        if self.material == TRANSPARENT and self.m < 0.0:
            raise ValueError("transparent offset m must be non-negative")
        if self.material == OPAQUE and self.m != 0.0:
            raise ValueError("opaque components take no offset m")

    def eval(self, p) -> Array:
        d = self.primitive.eval(p)
        if self.material == OPAQUE:
            return d
        return np.abs(d) + self.m

    def gradient(self, p, h: Optional[float] = None) -> Array:
        return self.value_and_grad(p, h)[1]

    def value_and_grad(self, p, h: Optional[float] = None):
        d, g = self.primitive.value_and_grad(p, h)
        if self.material == OPAQUE:
            return d, g
        sgn = np.where(d >= 0.0, 1.0, -1.0)
        return np.abs(d) + self.m, sgn[..., None] * g


@dataclass
class ComposedScene(ScalarField):
    """Pointwise minimum over component fields. Ties take the earliest
    component, which keeps gradients deterministic."""

    components: Sequence[SceneComponent]
    bbox: Array

    def __post_init__(self):
        self.components = list(self.components)
        if not self.components:
            raise ValueError("scene needs at least one component")
        for c in self.components:
            if not isinstance(c, SceneComponent):
                raise ValueError("scene components must be SceneComponent instances")
        self.bbox = as_bbox(self.bbox)

    def eval(self, p) -> Array:
        p = as_points(p)
        vals = np.stack([c.eval(p) for c in self.components], axis=0)
        return np.min(vals, axis=0)

    def gradient(self, p, h: Optional[float] = None) -> Array:
        return self.value_and_grad(p, h)[1]

    def value_and_grad(self, p, h: Optional[float] = None):
        p = as_points(p)
        val, grad = self.components[0].value_and_grad(p, h)
        for comp in self.components[1:]:
            v, g = comp.value_and_grad(p, h)
            closer = v < val
            val = np.where(closer, v, val)
            grad = np.where(closer[..., None], g, grad)
        return val, grad


@dataclass
class AbsField(ScalarField):
    """Absolute value of a base field.  The gradient is sign(f) * grad f
    with sign(0) := +1; on the zero set this is a valid subgradient."""

    base: ScalarField

    @property
    def bbox(self):
        return getattr(self.base, "bbox", None)

    def eval(self, p) -> Array:
        return np.abs(self.base.eval(p))

    def gradient(self, p, h: Optional[float] = None) -> Array:
        return self.value_and_grad(p, h)[1]

    def value_and_grad(self, p, h: Optional[float] = None):
        f, g = self.base.value_and_grad(p, h)
        sgn = np.where(f >= 0.0, 1.0, -1.0)
        return np.abs(f), sgn[..., None] * g


def absolute_field(field: ScalarField) -> ScalarField:
    return AbsField(field)


@dataclass
class GridField(ScalarField):
    """Trilinearly interpolated regular grid.

    Values are stored as an (nx, ny, nz) array over the vertex lattice of
    bbox.  Interpolation weights are computed from the stored coordinate
    arrays, so evaluation at a grid vertex reproduces the stored value
    bit-exactly.  Points outside bbox clamp to the nearest boundary value.
    """

    dims: Sequence[int]
    bbox: Array
    values: Array

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) != 3 or any(d < 2 for d in self.dims):
            raise ValueError(f"grid dims must be three counts >= 2, got {self.dims}")
        self.bbox = as_bbox(self.bbox)
        self.values = np.asarray(self.values)
        if self.values.dtype not in (np.float32, np.float64):
            raise ValueError(f"grid values must be float32 or float64, got {self.values.dtype}")
        expected = self.dims[0] * self.dims[1] * self.dims[2]
        if self.values.size != expected:
            raise ValueError(f"grid values size {self.values.size} != nx*ny*nz = {expected}")
        self.values = self.values.reshape(self.dims)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")
        self.axes = tuple(
            np.linspace(self.bbox[0, k], self.bbox[1, k], self.dims[k]) for k in range(3)
        )

    def _locate(self, x: Array, k: int):
        xs = self.axes[k]
        x = np.clip(x, xs[0], xs[-1])
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, self.dims[k] - 2)
        t = (x - xs[i]) / (xs[i + 1] - xs[i])
        return i, t

    def eval(self, p) -> Array:
        p = as_points(p)
        i, tx = self._locate(p[..., 0], 0)
        j, ty = self._locate(p[..., 1], 1)
        k, tz = self._locate(p[..., 2], 2)
        v = self.values

        def lerp(a, b, t):
            return (1.0 - t) * a + t * b

        c00 = lerp(v[i, j, k], v[i + 1, j, k], tx)
        c10 = lerp(v[i, j + 1, k], v[i + 1, j + 1, k], tx)
        c01 = lerp(v[i, j, k + 1], v[i + 1, j, k + 1], tx)
        c11 = lerp(v[i, j + 1, k + 1], v[i + 1, j + 1, k + 1], tx)
        c0 = lerp(c00, c10, ty)
        c1 = lerp(c01, c11, ty)
        return lerp(c0, c1, tz)

    def cell_size(self) -> Array:
        return (self.bbox[1] - self.bbox[0]) / (np.asarray(self.dims) - 1)

    def gradient(self, p, h: Optional[float] = None) -> Array:
        if h is None:
            h = 0.5 * float(np.min(self.cell_size()))
        return super().gradient(p, h)


def bake_grid(field: ScalarField, bbox, dims, dtype=np.float64) -> GridField:
    """Sample a field at the vertices of a regular grid. Deterministic."""
    bbox = as_bbox(bbox)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d < 2 for d in dims):
        raise ValueError(f"grid dims must be three counts >= 2, got {dims}")
    axes = [np.linspace(bbox[0, k], bbox[1, k], dims[k]) for k in range(3)]
    values = np.empty(dims, dtype=np.float64)
    # slab-by-slab keeps peak memory bounded for large grids
    yy, zz = np.meshgrid(axes[1], axes[2], indexing="ij")
    pts = np.empty(yy.shape + (3,), dtype=np.float64)
    pts[..., 1] = yy
    pts[..., 2] = zz
    for ix, x in enumerate(axes[0]):
        pts[..., 0] = x
        values[ix] = field.eval(pts)
    return GridField(dims, bbox, values.astype(dtype))


def m_from_alpha(alpha: float, s: float, d0: float) -> float:
    """Invert the closed-form opacity for the non-negative-minimum branch.

    Returns the offset m >= 0 such that a surface with sharpness s at
    camera distance d0 renders with the requested opacity.  alpha must lie
    in (0, (1-exp(-s*d0))/2]; the upper end is the watershed, mapping to
    m = 0 exactly.
    """
    s = float(s)
    d0 = float(d0)
    alpha = float(alpha)
    if not (s > 0.0 and d0 > 0.0):
        raise ValueError("s and d0 must be positive")
    full = -np.expm1(-s * d0)
    hi = 0.5 * full
    if not (0.0 < alpha <= hi):
        raise ValueError(f"alpha must lie in (0, {hi!r}] for s={s}, d0={d0}; got {alpha!r}")
    return float(np.log(full / alpha - 1.0) / s)
