"""Two-stage projection of an envelope mesh onto the underlying surface.

Stage 1 descends the field value at every vertex and face centroid,
with a Laplacian regularizer weighted by local face area so coarse
regions move as stiffly as dense ones.  Stage 2 freezes the stage-1
normals and lets vertices slide only along them, which tightens the
fit without tangential drift.  Both stages use a vector-valued Adam
variant whose second moment tracks the squared norm of each vertex
gradient, keeping the update direction rotation-equivariant.
"""

from dataclasses import dataclass, field as dataclass_field
from typing import Optional

import numpy as np
from scipy import sparse

from .envelope import TriangleMesh
from .field import Array, ScalarField

_EVAL_CHUNK = 1_000_000


@dataclass
class ProjectionConfig:
    """Optimization knobs; defaults follow the reference schedule."""

    lambda1: float = 500.0
    lambda2: float = 0.5
    epochs1: int = 300
    epochs2: int = 100
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_h: Optional[float] = None

    def __post_init__(self):
        if self.lambda1 < 0.0 or self.lambda2 < 0.0:
            raise ValueError("regularizer weights must be non-negative")
        if self.epochs1 < 1 or self.epochs2 < 0:
            raise ValueError("epochs1 must be >= 1 and epochs2 >= 0")
        if self.step_size <= 0.0:
            raise ValueError("step_size must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")


@dataclass
class OptimState:
    """Adam accumulator: positions plus moment estimates.

    second_moment holds one scalar per vertex, the running mean of the
    squared gradient norm, so a vertex's step direction is exactly its
    averaged gradient direction.
    """

    positions: Array
    first_moment: Array
    second_moment: Array
    epoch: int = 0

    @classmethod
    def fresh(cls, positions: Array) -> "OptimState":
        p = np.array(positions, dtype=np.float64)
        return cls(p, np.zeros_like(p), np.zeros(len(p)), 0)

    def step(self, grad: Array, config: ProjectionConfig) -> None:
        self.epoch += 1
        b1, b2 = config.beta1, config.beta2
        self.first_moment = b1 * self.first_moment + (1.0 - b1) * grad
        sq = np.einsum("ij,ij->i", grad, grad)
        self.second_moment = b2 * self.second_moment + (1.0 - b2) * sq
        m_hat = self.first_moment / (1.0 - b1**self.epoch)
        v_hat = self.second_moment / (1.0 - b2**self.epoch)
        denom = np.sqrt(v_hat) + config.eps
        self.positions = self.positions - config.step_size * (m_hat / denom[:, None])


@dataclass
class ProjectionResult:
    positions: Array
    loss_history: Array  # (epochs, 3): field term, regularizer term, total
    degenerate_faces: int = 0


@dataclass
class PipelineResult:
    envelope: TriangleMesh
    mesh: TriangleMesh
    stage1: Optional[ProjectionResult]
    stage2: Optional[ProjectionResult]


def _value_and_grad(fld: ScalarField, pts: Array, h: Optional[float]):
    """Field values and gradients in bounded-memory chunks."""
    vals = np.empty(len(pts), dtype=np.float64)
    grads = np.empty((len(pts), 3), dtype=np.float64)
    for s in range(0, len(pts), _EVAL_CHUNK):
        chunk = pts[s : s + _EVAL_CHUNK]
        v, g = fld.value_and_grad(chunk, h)
        vals[s : s + _EVAL_CHUNK] = v
        grads[s : s + _EVAL_CHUNK] = g
    return vals, grads


def _scatter_faces(grad: Array, faces: Array, contrib: Array) -> None:
    """Add one third of each face contribution to its three vertices."""
    third = contrib / 3.0
    n = len(grad)
    for c in range(3):
        idx = faces[:, c]
        for d in range(3):
            grad[:, d] += np.bincount(idx, weights=third[:, d], minlength=n)


def adaptive_weights(mesh: TriangleMesh) -> Array:
    """Per-vertex stiffness: mean incident face area over mean face area.

    Vertices bordering large faces get proportionally stronger
    smoothing so sparsely triangulated patches keep up with dense ones.
    Raises on vertices with no incident face.
    """
    if mesh.n_faces == 0:
        raise ValueError("mesh has no faces; cannot derive vertex weights")
    areas = mesh.face_areas()
    acc = np.zeros(mesh.n_vertices)
    cnt = np.zeros(mesh.n_vertices)
    for c in range(3):
        acc += np.bincount(mesh.faces[:, c], weights=areas, minlength=mesh.n_vertices)
        cnt += np.bincount(mesh.faces[:, c], minlength=mesh.n_vertices)
    if (cnt == 0).any():
        orphan = int(np.nonzero(cnt == 0)[0][0])
        raise ValueError(
            f"mesh topology error: vertex {orphan} has no incident face"
        )
    mean_area = areas.mean()
    if mean_area == 0.0:
        raise ValueError("mesh topology error: all faces are degenerate")
    return (acc / cnt) / mean_area


def _neighbor_matrix(mesh: TriangleMesh) -> sparse.csr_matrix:
    """Row-stochastic vertex adjacency (each row averages the 1-ring)."""
    e = mesh.edges()
    if mesh.n_vertices and len(e) == 0:
        raise ValueError("mesh topology error: no edges")
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    n = mesh.n_vertices
    a = sparse.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n, n)
    )
    valence = np.asarray(a.sum(axis=1)).ravel()
    if (valence < 2).any():
        v = int(np.nonzero(valence < 2)[0][0])
        raise ValueError(
            f"mesh topology error: vertex {v} has valence {int(valence[v])} (< 2)"
        )
    inv = sparse.diags(1.0 / valence)
    return (inv @ a).tocsr()


def laplacian(mesh: TriangleMesh, positions: Optional[Array] = None) -> Array:
    """Umbrella operator: vertex minus mean of its 1-ring, shape (N, 3)."""
    p = mesh.vertices if positions is None else np.asarray(positions)
    return p - _neighbor_matrix(mesh) @ p


def _stage1_loss_grad(fld, positions, faces, nbr, nbr_t, weights, cfg):
    """Loss terms and total gradient for one stage-1 epoch."""
    n = len(positions)
    cents = positions[faces].mean(axis=1)
    pts = np.concatenate([positions, cents])
    vals, grads = _value_and_grad(fld, pts, cfg.grad_h)
    field_term = float(vals.sum())

    grad = grads[:n].copy()
    _scatter_faces(grad, faces, grads[n:])

    delta = positions - nbr @ positions
    wdelta = weights[:, None] * delta
    reg_term = float(cfg.lambda1 * np.einsum("ij,ij->", delta, wdelta))
    grad += 2.0 * cfg.lambda1 * (wdelta - nbr_t @ wdelta)
    return field_term, reg_term, grad


def _check_finite_epoch(loss, positions, epoch, stage):
    if np.isfinite(loss) and np.isfinite(positions).all():
        return
    finite_rows = np.isfinite(positions).all(axis=1)
    vertex = int(np.nonzero(~finite_rows)[0][0]) if not finite_rows.all() else -1
    raise RuntimeError(
        f"{stage} diverged at epoch {epoch}: non-finite "
        + (f"position at vertex {vertex}" if vertex >= 0 else "loss")
    )


def stage1_optimize(
    mesh: TriangleMesh, fld: ScalarField, config: ProjectionConfig
) -> ProjectionResult:
    """Minimize field value at vertices and centroids, Laplacian-damped.

    Runs config.epochs1 full-batch steps; loss_history[e] is the loss
    at the positions entering epoch e, so history[-1] reflects all but
    the last update.
    """
    weights = adaptive_weights(mesh)
    nbr = _neighbor_matrix(mesh)
    nbr_t = nbr.T.tocsr()
    state = OptimState.fresh(mesh.vertices)
    history = np.zeros((config.epochs1, 3))
    for e in range(config.epochs1):
        f_term, r_term, grad = _stage1_loss_grad(
            fld, state.positions, mesh.faces, nbr, nbr_t, weights, config
        )
        total = f_term + r_term
        history[e] = (f_term, r_term, total)
        _check_finite_epoch(total, state.positions, e, "stage 1")
        state.step(grad, config)
    _check_finite_epoch(0.0, state.positions, config.epochs1, "stage 1")
    return ProjectionResult(state.positions, history)


def stage2_refine(
    mesh: TriangleMesh,
    stage1_positions: Array,
    fld: ScalarField,
    config: ProjectionConfig,
) -> ProjectionResult:
    """Slide vertices along frozen stage-1 normals to tighten the fit.

    Face normals and centroid anchors come from the stage-1 positions;
    a penalty on the tangential displacement of each centroid keeps
    the parametrization from sliding.  Faces degenerate at stage-1
    (zero area, undefined normal) are excluded from the penalty and
    counted in the result.
    """
    p1 = np.asarray(stage1_positions, dtype=np.float64)
    if p1.shape != (mesh.n_vertices, 3):
        raise ValueError("stage-1 positions do not match mesh vertex count")
    faces = mesh.faces
    a, b, c = p1[faces[:, 0]], p1[faces[:, 1]], p1[faces[:, 2]]
    normals = np.cross(b - a, c - a)
    norm = np.linalg.norm(normals, axis=1)
    degenerate = norm == 0.0
    n_deg = int(np.count_nonzero(degenerate))
    safe = np.where(degenerate, 1.0, norm)
    normals = normals / safe[:, None]
    anchors = p1[faces].mean(axis=1)

    state = OptimState.fresh(p1)
    history = np.zeros((config.epochs2, 3))
    n = mesh.n_vertices
    for e in range(config.epochs2):
        pos = state.positions
        cents = pos[faces].mean(axis=1)
        pts = np.concatenate([pos, cents])
        vals, grads = _value_and_grad(fld, pts, config.grad_h)
        f_term = float(vals.sum())

        grad = grads[:n].copy()
        _scatter_faces(grad, faces, grads[n:])

        u = cents - anchors
        tang = u - normals * np.einsum("ij,ij->i", u, normals)[:, None]
        tnorm = np.linalg.norm(tang, axis=1)
        tnorm[degenerate] = 0.0
        r_term = float(config.lambda2 * tnorm.sum())
        live = tnorm > 0.0
        tgrad = np.zeros_like(tang)
        tgrad[live] = tang[live] / tnorm[live, None]
        _scatter_faces(grad, faces, config.lambda2 * tgrad)

        total = f_term + r_term
        history[e] = (f_term, r_term, total)
        _check_finite_epoch(total, pos, e, "stage 2")
        state.step(grad, config)
    _check_finite_epoch(0.0, state.positions, config.epochs2, "stage 2")
    return ProjectionResult(state.positions, history, n_deg)


def extract_unbiased_surface(
    scene_field: ScalarField,
    extraction_config,
    projection_config: Optional[ProjectionConfig] = None,
    project_field: Optional[ScalarField] = None,
) -> PipelineResult:
    """Envelope extraction followed by both projection stages.

    scene_field is the field handed to the iso-surfacer (normally the
    absolute field); projection descends project_field when given,
    otherwise the same field.  extraction_config.iso must be positive,
    otherwise the two-wall envelope degenerates and there is nothing
    to project.
    """
    from .envelope import marching_cubes

    if extraction_config.iso <= 0.0:
        raise ValueError(
            "envelope extraction needs a positive iso level; "
            "use the zero-iso baseline for sign-crossing surfaces"
        )
    envelope = marching_cubes(scene_field, extraction_config)
    if envelope.n_faces == 0:
        return PipelineResult(envelope, envelope, None, None)
    pcfg = projection_config if projection_config is not None else ProjectionConfig()
    target = project_field if project_field is not None else scene_field
    s1 = stage1_optimize(envelope, target, pcfg)
    if pcfg.epochs2 > 0:
        s2 = stage2_refine(envelope, s1.positions, target, pcfg)
        final_pos = s2.positions
    else:
        s2 = None
        final_pos = s1.positions
    return PipelineResult(
        envelope, TriangleMesh(final_pos, envelope.faces), s1, s2
    )
