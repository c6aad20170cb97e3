"""Distance-field primitives, composition, grids."""

import numpy as np
import pytest

import transurf as ts


def fd_gradient(field, p, h=1e-6):
    p = np.asarray(p, dtype=np.float64)
    g = np.empty_like(p)
    for k in range(3):
        dp = np.zeros(3)
        dp[k] = h
        g[..., k] = (field.eval(p + dp) - field.eval(p - dp)) / (2.0 * h)
    return g


def test_sphere_signed_distance():
    sph = ts.Sphere(center=(0.0, 0.0, 0.0), radius=0.5)
    assert sph.eval([0.0, 0.0, 0.0]) == -0.5
    assert sph.eval([1.0, 0.0, 0.0]) == 0.5
    assert sph.eval([0.3, 0.4, 0.0]) == pytest.approx(0.0, abs=1e-15)
    # batched shape handling
    pts = np.zeros((4, 7, 3))
    assert sph.eval(pts).shape == (4, 7)


def test_sphere_gradient_is_unit_radial():
    sph = ts.Sphere(center=(0.1, -0.2, 0.3), radius=0.4)
    rng = np.random.default_rng(3)
    p = rng.uniform(-1, 1, size=(50, 3))
    g = sph.gradient(p)
    assert np.allclose(np.linalg.norm(g, axis=-1), 1.0)
    assert np.allclose(g, fd_gradient(sph, p), atol=1e-9)
    # center is the kink: subgradient convention returns zero there
    assert np.all(sph.gradient(np.array([0.1, -0.2, 0.3])) == 0.0)


def test_box_signed_distance_regions():
    box = ts.Box(center=(0, 0, 0), half_extents=(1.0, 2.0, 3.0))
    # face, edge, corner distances outside
    assert box.eval([2.0, 0.0, 0.0]) == 1.0
    assert box.eval([2.0, 3.0, 0.0]) == pytest.approx(np.sqrt(2.0))
    assert box.eval([2.0, 3.0, 4.0]) == pytest.approx(np.sqrt(3.0))
    # inside: minus distance to nearest face
    assert box.eval([0.0, 0.0, 0.0]) == -1.0
    assert box.eval([0.9, 0.0, 0.0]) == pytest.approx(-0.1)
    assert box.eval([1.0, 0.0, 0.0]) == 0.0


def test_box_gradient_matches_fd_off_kinks():
    box = ts.Box(center=(0.05, 0.0, -0.1), half_extents=(0.3, 0.4, 0.2))
    rng = np.random.default_rng(11)
    p = rng.uniform(-0.8, 0.8, size=(200, 3))
    f = box.eval(p)
    keep = np.abs(f) > 1e-3  # kinks on the surface and medial axis
    g = box.gradient(p[keep])
    assert np.allclose(g, fd_gradient(box, p[keep]), atol=1e-7)


def test_cylinder_signed_distance():
    cyl = ts.Cylinder(axis_point=(0, 0, 0), axis_dir=(0, 0, 1), radius=0.5, half_height=1.0)
    assert cyl.eval([1.5, 0.0, 0.0]) == 1.0          # lateral
    assert cyl.eval([0.0, 0.0, 2.0]) == 1.0          # cap
    assert cyl.eval([1.5, 0.0, 2.0]) == pytest.approx(np.sqrt(2.0))  # rim corner
    assert cyl.eval([0.0, 0.0, 0.0]) == -0.5
    assert cyl.eval([0.5, 0.0, 0.0]) == 0.0
    # tilted axis is normalized internally
    tilted = ts.Cylinder(axis_point=(0, 0, 0), axis_dir=(0, 0, 7), radius=0.5, half_height=1.0)
    assert tilted.eval([1.5, 0.0, 0.0]) == 1.0


def test_cylinder_gradient_matches_fd():
    cyl = ts.Cylinder(axis_point=(0.1, 0, 0), axis_dir=(1, 1, 0), radius=0.3, half_height=0.5)
    rng = np.random.default_rng(7)
    p = rng.uniform(-1, 1, size=(200, 3))
    f = cyl.eval(p)
    keep = np.abs(f) > 1e-3
    g = cyl.gradient(p[keep])
    assert np.allclose(g, fd_gradient(cyl, p[keep]), atol=1e-6)


def test_plane_field():
    pl = ts.Plane(point=(0, 0, 1), normal=(0, 0, 2))
    assert pl.eval([5.0, -3.0, 1.5]) == 0.5
    assert pl.eval([0.0, 0.0, 0.0]) == -1.0
    assert np.allclose(pl.gradient(np.zeros((4, 3))), [0, 0, 1])


def test_primitive_validation():
    with pytest.raises(ValueError):
        ts.Sphere(center=(0, 0, 0), radius=0.0)
    with pytest.raises(ValueError):
        ts.Box(center=(0, 0, 0), half_extents=(1, -1, 1))
    with pytest.raises(ValueError):
        ts.Plane(point=(0, 0, 0), normal=(0, 0, 0))
    with pytest.raises(ValueError):
        ts.Sphere(center=(0, 0, 0), radius=1.0).eval([[1.0, 2.0]])


def test_transparent_component_offsets_absolute_distance():
    sph = ts.Sphere(center=(0, 0, 0), radius=0.5)
    comp = ts.SceneComponent(sph, material=ts.TRANSPARENT, m=0.003)
    # positive on both sides, floor m on the surface
    assert comp.eval([0.0, 0.0, 0.0]) == pytest.approx(0.503)
    assert comp.eval([1.0, 0.0, 0.0]) == pytest.approx(0.503)
    assert comp.eval([0.5, 0.0, 0.0]) == pytest.approx(0.003)
    # gradient flips sign inside
    g_in = comp.gradient(np.array([0.25, 0.0, 0.0]))
    g_out = comp.gradient(np.array([0.75, 0.0, 0.0]))
    assert np.allclose(g_in, [-1, 0, 0])
    assert np.allclose(g_out, [1, 0, 0])


def test_opaque_component_passthrough():
    box = ts.Box(center=(0, 0, 0), half_extents=(1, 1, 1))
    comp = ts.SceneComponent(box, material=ts.OPAQUE)
    p = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    assert np.array_equal(comp.eval(p), box.eval(p))


def test_component_validation():
    sph = ts.Sphere(center=(0, 0, 0), radius=0.5)
    with pytest.raises(ValueError):
        ts.SceneComponent(sph, material="shiny")
    with pytest.raises(ValueError):
        ts.SceneComponent(sph, material=ts.TRANSPARENT, m=-0.1)
    with pytest.raises(ValueError):
        ts.SceneComponent(sph, material=ts.OPAQUE, m=0.01)


def test_composed_scene_takes_pointwise_min():
    bbox = [[-1, -1, -1], [1, 1, 1]]
    a = ts.SceneComponent(ts.Sphere(center=(-0.5, 0, 0), radius=0.3), material=ts.OPAQUE)
    b = ts.SceneComponent(ts.Sphere(center=(0.5, 0, 0), radius=0.3), material=ts.TRANSPARENT, m=0.01)
    scene = ts.ComposedScene([a, b], bbox=bbox)
    p = np.array([[-0.5, 0, 0], [0.8, 0, 0], [0.0, 0, 0]])
    v = scene.eval(p)
    assert v[0] == pytest.approx(-0.3)          # inside opaque
    assert v[1] == pytest.approx(0.01)          # on the transparent surface: floor m
    assert v[2] == pytest.approx(0.2)           # both at 0.2 / 0.21, opaque wins
    # gradient follows the selected component
    g = scene.gradient(np.array([0.8, 0.0, 0.0]))
    assert np.allclose(np.linalg.norm(g), 1.0)


def test_composed_scene_tie_takes_earliest():
    bbox = [[-1, -1, -1], [1, 1, 1]]
    a = ts.SceneComponent(ts.Plane(point=(0, 0, 0), normal=(0, 0, 1)), material=ts.OPAQUE)
    b = ts.SceneComponent(ts.Plane(point=(0, 0, 0), normal=(1, 0, 0)), material=ts.OPAQUE)
    scene = ts.ComposedScene([a, b], bbox=bbox)
    g = scene.gradient(np.array([0.3, 0.0, 0.3]))  # both fields equal 0.3
    assert np.allclose(g, [0, 0, 1])


def test_composed_scene_validation():
    with pytest.raises(ValueError):
        ts.ComposedScene([], bbox=[[-1, -1, -1], [1, 1, 1]])
    with pytest.raises(ValueError):
        ts.ComposedScene([ts.Sphere(center=(0, 0, 0), radius=1.0)], bbox=[[-1, -1, -1], [1, 1, 1]])
    comp = ts.SceneComponent(ts.Sphere(center=(0, 0, 0), radius=1.0))
    with pytest.raises(ValueError):
        ts.ComposedScene([comp], bbox=[[1, 1, 1], [-1, -1, -1]])


def test_absolute_field_and_subgradient():
    sph = ts.Sphere(center=(0, 0, 0), radius=0.5)
    fa = ts.absolute_field(sph)
    p = np.array([[0.25, 0, 0], [0.75, 0, 0]])
    assert np.allclose(fa.eval(p), [0.25, 0.25])
    g = fa.gradient(p)
    assert np.allclose(g[0], [-1, 0, 0])
    assert np.allclose(g[1], [1, 0, 0])
    # bbox passes through from the wrapped field when it has one
    assert fa.bbox is None
    bounded = ts.ComposedScene([ts.SceneComponent(sph)], bbox=[[-1, -1, -1], [1, 1, 1]])
    assert np.array_equal(ts.absolute_field(bounded).bbox, bounded.bbox)


def test_value_and_grad_consistency():
    """Fused path must agree with separate eval/gradient everywhere."""
    bbox = [[-1, -1, -1], [1, 1, 1]]
    scene = ts.ComposedScene(
        [
            ts.SceneComponent(ts.Box(center=(0, 0, -0.2), half_extents=(0.4, 0.4, 0.2)), material=ts.OPAQUE),
            ts.SceneComponent(ts.Sphere(center=(0, 0, 0), radius=0.3), material=ts.TRANSPARENT, m=0.005),
            ts.SceneComponent(ts.Cylinder(axis_point=(0.5, 0.5, 0), axis_dir=(0, 0, 1),
                                          radius=0.1, half_height=0.3), material=ts.OPAQUE),
        ],
        bbox=bbox,
    )
    fa = ts.absolute_field(scene)
    rng = np.random.default_rng(5)
    p = rng.uniform(-0.9, 0.9, size=(500, 3))
    for fld in (scene, fa):
        v, g = fld.value_and_grad(p)
        assert np.array_equal(v, fld.eval(p))
        assert np.array_equal(g, fld.gradient(p))


def test_grid_field_reproduces_lattice_and_interpolates():
    bbox = [[-1.0, -0.5, 0.0], [1.0, 0.5, 2.0]]
    sph = ts.Sphere(center=(0, 0, 1), radius=0.4)
    grid = ts.bake_grid(sph, bbox, (9, 5, 17))
    # bit-exact at every lattice vertex
    ax = [np.linspace(bbox[0][k], bbox[1][k], d) for k, d in enumerate((9, 5, 17))]
    xx, yy, zz = np.meshgrid(*ax, indexing="ij")
    lattice = np.stack([xx, yy, zz], axis=-1)
    assert np.array_equal(grid.eval(lattice), grid.values)
    # trilinear: exact midpoint average along one axis
    a = grid.eval([0.0, 0.0, 1.0])
    b = grid.eval([0.25, 0.0, 1.0])
    mid = grid.eval([0.125, 0.0, 1.0])
    assert mid == pytest.approx(0.5 * (a + b), rel=1e-14)
    # clamp outside the box
    assert grid.eval([5.0, 0.0, 1.0]) == grid.eval([1.0, 0.0, 1.0])


def test_grid_field_interpolation_error_is_second_order():
    bbox = [[-1, -1, -1], [1, 1, 1]]
    sph = ts.Sphere(center=(0, 0, 0), radius=0.5)
    rng = np.random.default_rng(2)
    p = rng.uniform(-0.9, 0.9, size=(300, 3))
    err = []
    for n in (17, 33):
        grid = ts.bake_grid(sph, bbox, (n, n, n))
        err.append(np.max(np.abs(grid.eval(p) - sph.eval(p))))
    assert err[1] < err[0]
    assert err[1] < 5e-3


def test_grid_field_validation():
    bbox = [[0, 0, 0], [1, 1, 1]]
    with pytest.raises(ValueError):
        ts.GridField((1, 4, 4), bbox, np.zeros((1, 4, 4)))
    with pytest.raises(ValueError):
        ts.GridField((2, 2, 2), bbox, np.zeros(7))
    with pytest.raises(ValueError):
        ts.GridField((2, 2, 2), bbox, np.zeros(8, dtype=np.int32))
    bad = np.zeros((2, 2, 2))
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        ts.GridField((2, 2, 2), bbox, bad)


def test_bake_grid_float32_round_trip():
    bbox = [[-1, -1, -1], [1, 1, 1]]
    sph = ts.Sphere(center=(0, 0, 0), radius=0.5)
    g32 = ts.bake_grid(sph, bbox, (8, 8, 8), dtype=np.float32)
    assert g32.values.dtype == np.float32
    g64 = ts.bake_grid(sph, bbox, (8, 8, 8))
    assert np.allclose(g32.values, g64.values, atol=1e-6)


def test_m_from_alpha_round_trip():
    for s, d0 in [(20.0, 0.5), (100.0, 1.0), (50.0, 2.0)]:
        for alpha in (0.05, 0.2, 0.4):
            m = ts.m_from_alpha(alpha, s, d0)
            assert m >= 0.0
            assert ts.closed_form_opacity(s, d0, m) == pytest.approx(alpha, rel=1e-12)
    # watershed opacity maps to m = 0 exactly
    s, d0 = 100.0, 1.0
    hi = ts.watershed_alpha(s, d0)
    assert ts.m_from_alpha(hi, s, d0) == 0.0


def test_m_from_alpha_rejects_unreachable_opacity():
    with pytest.raises(ValueError):
        ts.m_from_alpha(0.6, 100.0, 1.0)  # above the watershed
    with pytest.raises(ValueError):
        ts.m_from_alpha(0.0, 100.0, 1.0)
    with pytest.raises(ValueError):
        ts.m_from_alpha(0.2, -1.0, 1.0)
