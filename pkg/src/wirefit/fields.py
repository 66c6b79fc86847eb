"""Analytic stand-ins for the learned fields: signed distance shapes,
density transforms, transmittance quadrature, attraction-ray sampling, and
the volumetric rendering of 3D line segments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    Camera,
    LineSegment2D,
    LineSegment3D,
    WireframeGraph2D,
    WireframeGraph3D,
)

DEFAULT_W_MIN = 0.5


class NoSurfaceError(ValueError):
    """Raised when a ray accumulates too little surface mass to render."""


class AnalyticSDF:
    """Base class for analytic signed distance fields.

    ``eval`` accepts points of shape (..., 3) and returns distances of the
    broadcast shape; ``gradient`` returns unit normals away from the medial
    axis.
    """

    def eval(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class SphereSDF(AnalyticSDF):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")

    def eval(self, points):
        p = np.asarray(points, dtype=float)
        return np.linalg.norm(p - self.center, axis=-1) - self.radius

    def gradient(self, points):
        p = np.asarray(points, dtype=float)
        d = p - self.center
        n = np.linalg.norm(d, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            g = d / n
        return np.where(n > 0, g, 0.0)


@dataclass(frozen=True)
class BoxSDF(AnalyticSDF):
    """Axis-aligned box; the standard exact analytic form."""

    center: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        h = np.asarray(self.half_extents, dtype=float).reshape(3)
        if np.any(h <= 0):
            raise ValueError("box half-extents must be positive")
        object.__setattr__(self, "half_extents", h)

    def eval(self, points):
        p = np.asarray(points, dtype=float)
        q = np.abs(p - self.center) - self.half_extents
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside

    def gradient(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        rel = p - self.center
        q = np.abs(rel) - self.half_extents
        g = np.zeros_like(p)
        out = np.maximum(q, 0.0)
        norm_out = np.linalg.norm(out, axis=-1)
        is_out = norm_out > 0
        g[is_out] = np.sign(rel[is_out]) * out[is_out] / norm_out[is_out, None]
        # Inside: the nearest face is along the largest q component.
        ins = ~is_out
        if np.any(ins):
            ax = np.argmax(q[ins], axis=-1)
            rows = np.nonzero(ins)[0]
            g[rows, ax] = np.sign(rel[rows, ax])
        return g.reshape(np.shape(points))


@dataclass(frozen=True)
class UnionSDF(AnalyticSDF):
    """Pointwise minimum of child fields (lower-bound distance inside)."""

    shapes: tuple

    def __post_init__(self):
        shapes = tuple(self.shapes)
        if not shapes:
            raise ValueError("union requires at least one shape")
        object.__setattr__(self, "shapes", shapes)

    def eval(self, points):
        return np.min([s.eval(points) for s in self.shapes], axis=0)

    def gradient(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        dists = np.stack([s.eval(p) for s in self.shapes])
        winner = np.argmin(dists, axis=0)
        grads = np.stack([s.gradient(p) for s in self.shapes])
        g = grads[winner, np.arange(len(p))]
        return g.reshape(np.shape(points))


@dataclass(frozen=True)
class AttractionRay:
    """A rendering ray cast through an attracted pixel of a 2D segment."""

    pixel: np.ndarray
    origin: np.ndarray
    direction: np.ndarray
    target: LineSegment2D
    view_id: int

    def __post_init__(self):
        object.__setattr__(self, "pixel", np.asarray(self.pixel, dtype=float).reshape(2))
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))
        d = np.asarray(self.direction, dtype=float).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("ray direction must be a unit vector")
        object.__setattr__(self, "direction", d)

    def point_at(self, t):
        t = np.asarray(t, dtype=float)
        return self.origin + t[..., None] * self.direction


@dataclass(frozen=True)
class RenderQuadrature:
    """Discretization of the rendering integrals along a ray."""

    t_near: float
    t_far: float
    n_samples: int
    stratified: bool = False

    def __post_init__(self):
        if not (0 <= self.t_near < self.t_far):
            raise ValueError("need 0 <= t_near < t_far")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")

    def sample_ts(self, rng: np.random.Generator | None = None) -> tuple[np.ndarray, float]:
        """Sample positions and the (uniform) bin width.

        Midpoint rule by default; with ``stratified`` the sample is jittered
        uniformly within each bin (seeded rng, deterministic by default).
        """
        dt = (self.t_far - self.t_near) / self.n_samples
        if self.stratified:
            rng = rng if rng is not None else np.random.default_rng(0)
            offsets = rng.uniform(0.0, 1.0, self.n_samples)
        else:
            offsets = np.full(self.n_samples, 0.5)
        ts = self.t_near + (np.arange(self.n_samples) + offsets) * dt
        return ts, dt


def density_from_sdf(d, beta: float):
    """Laplace-CDF density transform of a signed distance.

    sigma = (1/beta) * Psi_beta(-d) with Psi the Laplace CDF of scale beta.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    d = np.asarray(d, dtype=float)
    s = -d
    # Piecewise form keeps the exponentials bounded.
    val = np.where(s <= 0, 0.5 * np.exp(np.minimum(s, 0.0) / beta),
                   1.0 - 0.5 * np.exp(-np.maximum(s, 0.0) / beta))
    out = val / beta
    return float(out) if np.isscalar(d) or out.shape == () else out


def transmittance(ray: AttractionRay, sdf: AnalyticSDF, beta: float,
                  quad: RenderQuadrature, t: float) -> float:
    """Estimate T(t) = exp(-integral of density from t_near to t)."""
    if not (quad.t_near <= t <= quad.t_far):
        raise ValueError("t must lie within [t_near, t_far]")
    if t <= quad.t_near:
        return 1.0
    sub = RenderQuadrature(quad.t_near, t, quad.n_samples, quad.stratified)
    ts, dt = sub.sample_ts()
    sigma = density_from_sdf(sdf.eval(ray.point_at(ts)), beta)
    return float(np.exp(-np.sum(sigma) * dt))


def render_weights(ray: AttractionRay, sdf: AnalyticSDF, beta: float,
                   quad: RenderQuadrature) -> tuple[np.ndarray, np.ndarray]:
    """Sample positions and compositing weights along a ray.

    Uses the alpha-compositing discretization w_i = T_i (1 - exp(-sigma_i dt)),
    which keeps the weight sum telescoped below 1.
    """
    ts, dt = quad.sample_ts()
    sigma = density_from_sdf(sdf.eval(ray.point_at(ts)), beta)
    return ts, _composite_weights(sigma, dt)


def _composite_weights(sigma: np.ndarray, dt: float) -> np.ndarray:
    """Alpha-composited weights for density samples along the last axis."""
    tau = sigma * dt
    alpha = -np.expm1(-tau)
    log_T = np.concatenate(
        [np.zeros((*tau.shape[:-1], 1)), -np.cumsum(tau, axis=-1)[..., :-1]], axis=-1
    )
    return np.exp(log_T) * alpha


def attraction_rays(view: WireframeGraph2D, camera: Camera, tau_ray: float,
                    view_id: int = 0) -> list[AttractionRay]:
    """Emit one ray per pixel attracted to a 2D segment.

    A pixel (center at integer coordinates) qualifies for a segment when its
    perpendicular foot lies inside the segment and within ``tau_ray`` pixels;
    it is attracted to its nearest qualifying segment, ties broken by lowest
    edge index.
    """
    if tau_ray <= 0:
        raise ValueError("tau_ray must be positive")
    if not view.edges:
        return []
    xs, ys = np.meshgrid(np.arange(camera.width), np.arange(camera.height))
    pix = np.stack([xs.ravel(), ys.ravel()], axis=-1).astype(float)

    dists = np.full((len(view.edges), len(pix)), np.inf)
    for k, (u, v) in enumerate(view.edges):
        p, q = view.vertices[u], view.vertices[v]
        d = q - p
        t = (pix - p) @ d / float(d @ d)
        foot = p + t[:, None] * d
        dist = np.linalg.norm(pix - foot, axis=1)
        ok = (t >= 0.0) & (t <= 1.0) & (dist <= tau_ray)
        dists[k, ok] = dist[ok]

    best = np.argmin(dists, axis=0)  # first minimum -> lowest edge index
    hit = np.isfinite(dists[best, np.arange(len(pix))])
    origin = camera.center
    rays = []
    for i in np.nonzero(hit)[0]:
        px = pix[i]
        rays.append(
            AttractionRay(
                pixel=px,
                origin=origin,
                direction=camera.pixel_ray(px),
                target=view.segment(int(best[i])),
                view_id=view_id,
            )
        )
    return rays


class DisplacementOracle:
    """Exact endpoint displacements backed by a ground-truth wireframe.

    For a query point x associated with ground-truth edge e = (a, b), the
    displacements are (a - x, b - x): the rendered segment collapses onto e.
    A ray is associated with the edge whose projection best matches the ray's
    2D target segment (both endpoint orderings considered, which also fixes
    the endpoint orientation). ``truncate_visible`` optionally clips the
    targets to the sub-segment spanned by the 2D target, modeling the
    view-dependent truncation of detections; off by default.
    """

    def __init__(self, gt: WireframeGraph3D, cameras: list[Camera],
                 truncate_visible: bool = False):
        self.gt = gt
        self.cameras = cameras
        self.truncate_visible = truncate_visible

    def associate(self, ray: AttractionRay, view_id: int | None = None) -> tuple[int, bool]:
        """Edge index plus whether the edge is flipped relative to the target."""
        vid = ray.view_id if view_id is None else view_id
        cam = self.cameras[vid]
        tgt_p, tgt_q = ray.target.p, ray.target.q
        best = (np.inf, 0, False)
        for k, (u, v) in enumerate(self.gt.edges):
            try:
                pu = cam.project(self.gt.junctions[u])
                pv = cam.project(self.gt.junctions[v])
            except ValueError:
                continue
            straight = np.linalg.norm(pu - tgt_p) + np.linalg.norm(pv - tgt_q)
            flipped = np.linalg.norm(pu - tgt_q) + np.linalg.norm(pv - tgt_p)
            if straight < best[0]:
                best = (straight, k, False)
            if flipped < best[0]:
                best = (flipped, k, True)
        return best[1], best[2]

    def target_endpoints(self, ray: AttractionRay, view_id: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """The 3D endpoints the displacements point to (oriented to the target)."""
        k, flipped = self.associate(ray, view_id)
        u, v = self.gt.edges[k]
        a, b = self.gt.junctions[u], self.gt.junctions[v]
        if flipped:
            a, b = b, a
        if self.truncate_visible:
            vid = ray.view_id if view_id is None else view_id
            a, b = self._truncate(a, b, ray.target, self.cameras[vid])
        return a, b

    def _truncate(self, a, b, target: LineSegment2D, cam: Camera):
        pa, pb = cam.project(a), cam.project(b)
        d = pb - pa
        denom = float(d @ d)
        ta = np.clip((target.p - pa) @ d / denom, 0.0, 1.0)
        tb = np.clip((target.q - pa) @ d / denom, 0.0, 1.0)
        return a + ta * (b - a), a + tb * (b - a)

    def displacements(self, points: np.ndarray, ray: AttractionRay,
                      view_id: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(delta1, delta2) for query points of shape (n, 3)."""
        a, b = self.target_endpoints(ray, view_id)
        pts = np.atleast_2d(points)
        return a - pts, b - pts


class ZeroDisplacementOracle:
    """Stub oracle with identically zero displacements (for tests)."""

    def displacements(self, points, ray, view_id=None):
        pts = np.atleast_2d(points)
        z = np.zeros_like(pts)
        return z, z


def render_line_segment(ray: AttractionRay, sdf: AnalyticSDF, oracle,
                        beta: float, quad: RenderQuadrature,
                        w_min: float = DEFAULT_W_MIN) -> LineSegment3D:
    """Render a 3D segment for a ray as the weight-averaged endpoints.

    The weights are normalized by their sum; rays with accumulated weight
    below ``w_min`` are treated as grazing/background and rejected.
    """
    ts, ws = render_weights(ray, sdf, beta, quad)
    total = float(np.sum(ws))
    if total < w_min:
        raise NoSurfaceError(f"ray at pixel {ray.pixel} accumulated weight {total:.3g}")
    pts = ray.point_at(ts)
    d1, d2 = oracle.displacements(pts, ray)
    w = ws[:, None] / total
    e1 = np.sum(w * (pts + d1), axis=0)
    e2 = np.sum(w * (pts + d2), axis=0)
    return LineSegment3D(e1, e2)


def endpoint_reprojection_loss(rendered: LineSegment3D, target: LineSegment2D,
                               camera: Camera) -> float:
    """Sum of squared pixel errors between projected endpoints and the target.

    Endpoint order is fixed: a pairs with target.p, b with target.q.
    """
    pa = camera.project(rendered.a)
    pb = camera.project(rendered.b)
    return float(np.sum((pa - target.p) ** 2) + np.sum((pb - target.q) ** 2))
