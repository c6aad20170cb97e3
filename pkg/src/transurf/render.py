"""Ray density, transmittance, weight, and opacity for the single
ray-plane intersection setup.

A ray hits a planar surface at parameter t0 with incidence cosine
cos_theta < 0.  The distance field along the ray is a V-shaped profile
with minimum value m: for m >= 0 the minimum sits at t0; for m < 0 the
field crosses zero at t0 and bottoms out at t0 - m/|cos_theta|.  Density
follows the sigmoid-weighted construction with back-face clipping, so it
vanishes past the minimum.  The quadrature integrates each step cell only
over its covered part (the portion in front of the minimum), which keeps
the discrete opacity consistent with the closed forms to well below the
verification tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy.special import expit

Array = np.ndarray


@dataclass(frozen=True)
class RayCaseConfig:
    """One verification case: sharpness s, hit parameter t0, incidence
    cosine, field minimum m (signed), integration end, quadrature step."""

    s: float
    t0: float
    cos_theta: float = -1.0
    m: float = 0.0
    t_max: Optional[float] = None
    step: float = 1e-4

    def __post_init__(self):
        if not self.s > 0.0:
            raise ValueError("sharpness s must be positive")
        if not (-1.0 <= self.cos_theta < 0.0):
            raise ValueError("cos_theta must lie in [-1, 0) (front-facing)")
        if not self.t0 > 0.0:
            raise ValueError("t0 must be positive")
        if not self.step > 0.0:
            raise ValueError("step must be positive")
        if self.t_max is None:
            # density support ends at the field minimum, which moves past
            # t0 only when m < 0; extend the range for that case alone
            abs_cos = -self.cos_theta
            default = self.t0 + max(1.0, 10.0 * max(0.0, -self.m) / abs_cos)
            object.__setattr__(self, "t_max", float(default))
        if not self.t_max > self.t0:
            raise ValueError("t_max must exceed t0")

    @property
    def abs_cos(self) -> float:
        return -self.cos_theta

    @property
    def d0(self) -> float:
        """Camera-to-plane distance."""
        return self.t0 * self.abs_cos

    @property
    def t_break(self) -> float:
        """Location of the field minimum, where density clips to zero."""
        if self.m >= 0.0:
            return self.t0
        return self.t0 + (-self.m) / self.abs_cos


@dataclass
class RayProfile:
    """Sampled quantities at the cell edges 0, step, 2*step, ..., t_max.

    w[i] is the weight mass of cell [ts[i], ts[i+1]] divided by step, so
    sum(w) * step telescopes to 1 - T[-1] exactly; the trailing w is 0.
    """

    ts: Array
    f: Array
    sigma: Array
    T: Array
    w: Array


def ray_distance(cfg: RayCaseConfig, t) -> Array:
    """V-shaped distance along the ray: |t - t_break| * |cos_theta| + m."""
    t = np.asarray(t, dtype=np.float64)
    return np.abs(t - cfg.t_break) * cfg.abs_cos + cfg.m


def distance_profile(cfg: RayCaseConfig, ts=None) -> Array:
    if ts is None:
        ts = _edges(cfg)
    return ray_distance(cfg, ts)


def density(f_value, grad_dot_dir, s: float) -> Array:
    """max(-s * (1 - sigmoid(s*f)) * grad_dot_dir, 0); zero wherever the
    ray points away from the surface (grad_dot_dir >= 0)."""
    if not s > 0.0:
        raise ValueError("sharpness s must be positive")
    f_value = np.asarray(f_value, dtype=np.float64)
    raw = -s * expit(-s * f_value) * np.asarray(grad_dot_dir, dtype=np.float64)
    return np.maximum(raw, 0.0)


def _edges(cfg: RayCaseConfig) -> Array:
    n_cells = int(np.ceil(cfg.t_max / cfg.step))
    return np.arange(n_cells + 1, dtype=np.float64) * cfg.step


def render_profile(cfg: RayCaseConfig) -> RayProfile:
    ts = _edges(cfg)
    n_cells = len(ts) - 1
    f = ray_distance(cfg, ts)
    grad_dot = np.where(ts < cfg.t_break, cfg.cos_theta, cfg.abs_cos)
    sigma = density(f, grad_dot, cfg.s)

    # per-cell quadrature restricted to the covered part [left, t_break)
    left = ts[:-1]
    covered = np.clip(cfg.t_break - left, 0.0, cfg.step)
    mid = left + 0.5 * covered
    sigma_mid = density(ray_distance(cfg, mid), cfg.cos_theta, cfg.s)
    optical = np.where(covered > 0.0, sigma_mid * covered, 0.0)

    T = np.empty(n_cells + 1, dtype=np.float64)
    T[0] = 1.0
    T[1:] = np.cumprod(np.exp(-optical))

    # w[i]*step = T[i] - T[i+1]; the expm1 form keeps masses nonzero even
    # when the per-cell attenuation is below one ulp of 1.0
    w = np.zeros(n_cells + 1, dtype=np.float64)
    w[:-1] = T[:-1] * -np.expm1(-optical) / cfg.step
    return RayProfile(ts=ts, f=f, sigma=sigma, T=T, w=w)


def quadrature_opacity(cfg: RayCaseConfig) -> float:
    profile = render_profile(cfg)
    return float(1.0 - profile.T[-1])


def opacity_min_nonneg(s: float, d0: float, m: float) -> float:
    """Closed-form opacity when the field minimum m is >= 0:
    (1 - exp(-s*d0)) / (1 + exp(s*m))."""
    return float(-np.expm1(-s * d0) * expit(-s * m))


def opacity_min_negative(s: float, d0: float, m: float) -> float:
    """Closed-form opacity when the field minimum m is < 0 (zero crossing
    in front): 1 - (1 + exp(-s*d0)) / (1 + exp(-s*m)), rearranged as
    (1 - exp(s*(m - d0))) / (1 + exp(s*m)) so that both branches share the
    same floating-point value at m = 0."""
    return float(-np.expm1(s * (m - d0)) * expit(-s * m))


def closed_form_opacity(s: float, d0: float, m: float) -> float:
    if not (s > 0.0 and d0 > 0.0):
        raise ValueError("s and d0 must be positive")
    if m < 0.0:
        return opacity_min_negative(s, d0, m)
    return opacity_min_nonneg(s, d0, m)


def watershed_alpha(s: float, d0: float) -> float:
    """Opacity at m = 0, the boundary between the two regimes:
    (1 - exp(-s*d0)) / 2."""
    if not (s > 0.0 and d0 > 0.0):
        raise ValueError("s and d0 must be positive")
    return float(-np.expm1(-s * d0) * expit(0.0))


def weight_argmax(profile: RayProfile) -> float:
    """Parameter of the maximal weight; ties resolve to the smallest t."""
    if not np.any(profile.w > 0.0):
        raise ValueError("degenerate profile: all weights are zero")
    return float(profile.ts[int(np.argmax(profile.w))])


@dataclass
class TheoremCaseReport:
    cfg: RayCaseConfig
    alpha_quad: float
    alpha_closed: float
    t_star: float
    t_expected: float
    tol_alpha: float
    passed: bool = dc_field(init=False)

    def __post_init__(self):
        ok_alpha = abs(self.alpha_quad - self.alpha_closed) <= self.tol_alpha
        ok_t = abs(self.t_star - self.t_expected) <= 2.0 * self.cfg.step
        self.passed = bool(ok_alpha and ok_t)


def verify_theorem_case(cfg: RayCaseConfig, tol_alpha: float = 1e-3) -> TheoremCaseReport:
    """End-to-end check of one case: quadrature opacity against the closed
    form, and the weight argmax against t0 (the minimum for m >= 0, the
    front zero crossing for m < 0)."""
    profile = render_profile(cfg)
    alpha_quad = float(1.0 - profile.T[-1])
    alpha_closed = closed_form_opacity(cfg.s, cfg.d0, cfg.m)
    t_star = weight_argmax(profile)
    return TheoremCaseReport(
        cfg=cfg,
        alpha_quad=alpha_quad,
        alpha_closed=alpha_closed,
        t_star=t_star,
        t_expected=cfg.t0,
        tol_alpha=tol_alpha,
    )


def sweep_configs(s_list, d0_list, m_list, step: float = 1e-4, cos_theta: float = -1.0):
    """Cartesian sweep in deterministic order; t0 is chosen so that the
    camera-to-plane distance equals each requested d0."""
    abs_cos = -float(cos_theta)
    cfgs = []
    for s in s_list:
        for d0 in d0_list:
            for m in m_list:
                cfgs.append(
                    RayCaseConfig(
                        s=float(s),
                        t0=float(d0) / abs_cos,
                        cos_theta=float(cos_theta),
                        m=float(m),
                        step=float(step),
                    )
                )
    return cfgs


def verify_sweep(s_list, d0_list, m_list, step: float = 1e-4,
                 tol_alpha: float = 1e-3, cos_theta: float = -1.0):
    return [
        verify_theorem_case(cfg, tol_alpha)
        for cfg in sweep_configs(s_list, d0_list, m_list, step, cos_theta)
    ]
