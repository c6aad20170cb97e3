"""Unbiased surface extraction and opacity analysis for mixed
opaque/transparent distance fields.

Submodules:
    field       distance-field primitives, scene composition, grids
    render      ray density/transmittance/weight machinery and opacity
    envelope    iso-envelope extraction via marching cubes
    projection  two-stage envelope-to-surface optimization
    metrics     Chamfer distances and completeness curves
    io          grid/OBJ/slice/CSV serialization
    cli         batch command-line front-end
"""

from .field import (
    OPAQUE,
    TRANSPARENT,
    AbsField,
    Box,
    ComposedScene,
    Cylinder,
    GridField,
    Plane,
    ScalarField,
    SceneComponent,
    Sphere,
    absolute_field,
    bake_grid,
    m_from_alpha,
)
from .render import (
    RayCaseConfig,
    RayProfile,
    TheoremCaseReport,
    closed_form_opacity,
    density,
    distance_profile,
    opacity_min_negative,
    opacity_min_nonneg,
    quadrature_opacity,
    render_profile,
    sweep_configs,
    verify_sweep,
    verify_theorem_case,
    watershed_alpha,
    weight_argmax,
)
from .envelope import (
    ExtractionConfig,
    TriangleMesh,
    check_closed,
    connected_components,
    marching_cubes,
    zero_iso_baseline,
)
from .projection import (
    OptimState,
    PipelineResult,
    ProjectionConfig,
    ProjectionResult,
    adaptive_weights,
    extract_unbiased_surface,
    laplacian,
    stage1_optimize,
    stage2_refine,
)
from .metrics import (
    ChamferReport,
    chamfer,
    completeness_curve,
    nearest_distances,
    point_mesh_distance,
    sample_scene_surface,
    sample_surface,
    set_workers,
)
from .io import (
    FormatError,
    GridFileHeader,
    read_grid,
    read_obj,
    slice_samples,
    write_grid,
    write_loss_csv,
    write_metrics_csv,
    write_obj,
    write_profile_csv,
    write_slice,
    write_sweep_csv,
)
from .cli import SceneSpec, main

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
