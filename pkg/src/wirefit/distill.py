"""Line-cloud distillation: endpoint indexing against global junctions,
segment grouping, damped least-squares junction optimization, SDF-based
refinement, and multi-view visibility filtering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import AnalyticSDF
from .geometry import (
    Camera,
    DegenerateSegmentError,
    LineCloud,
    LineSegment3D,
    WireframeGraph2D,
    WireframeGraph3D,
    project_point_to_line_3d,
)
from .junctions import JunctionSet

DEFAULT_THETA_MAX_DEG = 10.0
DEFAULT_D_MAX = 0.01


class DegenerateGradientError(ValueError):
    """SDF gradient too small to define a refinement direction."""


@dataclass(frozen=True)
class IndexedSegment:
    """A cloud segment assigned to an ordered junction pair."""

    segment: LineSegment3D
    ids: tuple

    def __post_init__(self):
        u, v = self.ids
        if u >= v:
            raise ValueError("indexed pair must be ordered u < v")
        object.__setattr__(self, "ids", (int(u), int(v)))


@dataclass(frozen=True)
class SegmentGroup:
    """All cloud segments sharing one global junction pair."""

    key: tuple
    members: list

    def __post_init__(self):
        u, v = self.key
        if u >= v:
            raise ValueError("group key must be ordered u < v")
        if not self.members:
            raise ValueError("group must have at least one member")
        object.__setattr__(self, "key", (int(u), int(v)))


def angular_distance(l0: LineSegment3D, li: LineSegment3D) -> float:
    """1 - |cos| of the angle between the segment directions; in [0, 1]."""
    return float(1.0 - abs(np.dot(l0.direction, li.direction)))


def perpendicular_distance(l0: LineSegment3D, li: LineSegment3D) -> float:
    """Sum of distances from l0's endpoints to the infinite line through li."""
    da = np.linalg.norm(l0.a - project_point_to_line_3d(l0.a, li))
    db = np.linalg.norm(l0.b - project_point_to_line_3d(l0.b, li))
    return float(da + db)


def index_endpoints(line_cloud: LineCloud, junctions: JunctionSet,
                    theta_max_deg: float = DEFAULT_THETA_MAX_DEG,
                    d_max: float = DEFAULT_D_MAX) -> list[IndexedSegment]:
    """Assign each cloud segment to its nearest active junction pair.

    Segments whose junction chord deviates angularly by more than
    ``theta_max_deg`` (applied as 1 - cos(theta) on the angular cost) or
    perpendicularly by more than ``d_max``, or whose endpoints share a
    junction, are removed.
    """
    active_idx = junctions.active_indices()
    if len(active_idx) < 2:
        raise ValueError("need at least two active junctions to index against")
    active_pos = junctions.positions[active_idx]
    ang_max = 1.0 - math.cos(math.radians(theta_max_deg))

    out = []
    for i in range(len(line_cloud)):
        a, b = line_cloud.endpoints[i]
        ia = active_idx[np.argmin(np.linalg.norm(active_pos - a, axis=1))]
        ib = active_idx[np.argmin(np.linalg.norm(active_pos - b, axis=1))]
        if ia == ib:
            continue
        seg = line_cloud.segment(i)
        if ia > ib:
            ia, ib = ib, ia
            seg = LineSegment3D(seg.b, seg.a)
        try:
            chord = LineSegment3D(junctions.positions[ia], junctions.positions[ib])
        except DegenerateSegmentError:
            continue
        if angular_distance(chord, seg) > ang_max:
            continue
        if perpendicular_distance(chord, seg) > d_max:
            continue
        out.append(IndexedSegment(segment=seg, ids=(int(ia), int(ib))))
    return out


def group_segments(indexed: list[IndexedSegment]) -> list[SegmentGroup]:
    """One group per distinct junction pair, multiplicity preserved."""
    by_key: dict[tuple, list] = {}
    for item in indexed:
        by_key.setdefault(item.ids, []).append(item.segment)
    return [SegmentGroup(key=k, members=v) for k, v in sorted(by_key.items())]


def _opt_layout(groups: list[SegmentGroup]) -> tuple[list[int], dict]:
    ids = sorted({i for g in groups for i in g.key})
    return ids, {jid: k for k, jid in enumerate(ids)}


def _residuals(flat: np.ndarray, groups: list[SegmentGroup], slot: dict) -> np.ndarray:
    pos = flat.reshape(-1, 3)
    res = []
    for g in groups:
        ju = pos[slot[g.key[0]]]
        jv = pos[slot[g.key[1]]]
        d = ju - jv
        n = np.linalg.norm(d)
        for m in g.members:
            w = m.direction
            if n > 0:
                res.append(1.0 - abs(float(d @ w) / n))
            else:
                res.append(1.0)
            ru = (ju - m.a) - w * float((ju - m.a) @ w)
            rv = (jv - m.a) - w * float((jv - m.a) @ w)
            res.append(float(np.linalg.norm(ru) + np.linalg.norm(rv)))
    return np.asarray(res)


def residual_jacobian(flat: np.ndarray, groups: list[SegmentGroup],
                      slot: dict) -> np.ndarray:
    """Analytic Jacobian of the stacked (d_ang, d_perp) residuals.

    Valid away from degeneracies (coincident junctions, junctions exactly on
    a member line).
    """
    pos = flat.reshape(-1, 3)
    n_res = sum(2 * len(g.members) for g in groups)
    J = np.zeros((n_res, flat.size))
    row = 0
    for g in groups:
        su, sv = slot[g.key[0]], slot[g.key[1]]
        ju, jv = pos[su], pos[sv]
        d = ju - jv
        n = np.linalg.norm(d)
        for m in g.members:
            w = m.direction
            s = float(d @ w) / n
            ds_dg = w / n - d * (float(d @ w) / n**3)
            dang_dg = -np.sign(s) * ds_dg
            J[row, 3 * su:3 * su + 3] = dang_dg
            J[row, 3 * sv:3 * sv + 3] = -dang_dg
            row += 1
            ru = (ju - m.a) - w * float((ju - m.a) @ w)
            rv = (jv - m.a) - w * float((jv - m.a) @ w)
            nu, nv = np.linalg.norm(ru), np.linalg.norm(rv)
            if nu > 0:
                J[row, 3 * su:3 * su + 3] = ru / nu
            if nv > 0:
                J[row, 3 * sv:3 * sv + 3] = rv / nv
            row += 1
    return J


def _fd_jacobian(flat: np.ndarray, groups, slot, step: float = 1e-7) -> np.ndarray:
    r0 = _residuals(flat, groups, slot)
    J = np.zeros((r0.size, flat.size))
    for k in range(flat.size):
        x = flat.copy()
        x[k] += step
        J[:, k] = (_residuals(x, groups, slot) - r0) / step
    return J


def optimize_junctions(junctions: JunctionSet, groups: list[SegmentGroup],
                       max_iters: int = 50, tol: float = 1e-10) -> JunctionSet:
    """Levenberg-Marquardt descent on the stacked alignment residuals.

    Forward finite-difference Jacobian (step 1e-7); damping starts at 1e-3,
    x10 on rejected steps, /10 on accepted ones. Cost is non-increasing over
    accepted steps; terminates on step norm below ``tol``.
    """
    if not groups:
        return junctions
    ids, slot = _opt_layout(groups)
    flat = junctions.positions[ids].reshape(-1).copy()
    r = _residuals(flat, groups, slot)
    cost = float(r @ r)
    if cost == 0.0:
        return junctions

    lam = 1e-3
    for _ in range(max_iters):
        J = _fd_jacobian(flat, groups, slot)
        JtJ = J.T @ J
        g = J.T @ r
        accepted = False
        while lam < 1e12:
            try:
                step = np.linalg.solve(JtJ + lam * np.eye(flat.size), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = flat + step
            r_trial = _residuals(trial, groups, slot)
            c_trial = float(r_trial @ r_trial)
            if c_trial < cost:
                flat, r, cost = trial, r_trial, c_trial
                lam = max(lam / 10, 1e-12)
                accepted = True
                break
            lam *= 10
        if not accepted:
            break
        if np.linalg.norm(step) < tol:
            break

    positions = junctions.positions.copy()
    positions[ids] = flat.reshape(-1, 3)
    return JunctionSet(positions=positions, active=junctions.active.copy())


def sdf_refine(junction, sdf: AnalyticSDF, steps: int = 1) -> np.ndarray:
    """Project a junction toward the SDF zero level set.

    Single Newton-like step J - d(J) * grad d(J) by default; a small capped
    multi-step variant is available for rough fields.
    """
    j = np.asarray(junction, dtype=float).reshape(3)
    for _ in range(max(1, steps)):
        g = np.asarray(sdf.gradient(j), dtype=float).reshape(3)
        if np.linalg.norm(g) < 1e-6:
            raise DegenerateGradientError("SDF gradient vanishes at the junction")
        j = j - float(sdf.eval(j)) * g
    return j


def _segment_supported(p0: np.ndarray, p1: np.ndarray, view: WireframeGraph2D,
                       cos_ang_min: float, perp_max: float,
                       overlap_min: float) -> bool:
    d = p1 - p0
    length = np.linalg.norm(d)
    if length <= 0:
        return False
    u = d / length
    for k in range(len(view.edges)):
        seg = view.segment(k)
        v = seg.q - seg.p
        vn = np.linalg.norm(v)
        if vn <= 0:
            continue
        if abs(float(u @ v) / vn) < cos_ang_min:
            continue
        rel_p = seg.p - p0
        rel_q = seg.q - p0
        da = abs(float(u[0] * rel_p[1] - u[1] * rel_p[0]))
        db = abs(float(u[0] * rel_q[1] - u[1] * rel_q[0]))
        if max(da, db) > perp_max:
            continue
        ta = float((seg.p - p0) @ u) / length
        tb = float((seg.q - p0) @ u) / length
        lo, hi = min(ta, tb), max(ta, tb)
        overlap = min(hi, 1.0) - max(lo, 0.0)
        if overlap >= overlap_min:
            return True
    return False


def visibility_filter(wf: WireframeGraph3D, views: list[tuple[WireframeGraph2D, Camera]],
                      ang_max_deg: float = 10.0, perp_max: float = 5.0,
                      overlap_min: float = 0.5,
                      vis_threshold: int = 1) -> WireframeGraph3D:
    """Keep edges supported by 2D detections in enough views.

    An edge is supported in a view when some detected segment aligns within
    the angular threshold, lies within ``perp_max`` pixels of the projected
    edge, and its perpendicular footprint covers at least ``overlap_min`` of
    the projected length. Isolated junctions are removed afterwards.
    """
    if vis_threshold < 1:
        raise ValueError("vis_threshold must be >= 1")
    cos_ang_min = math.cos(math.radians(ang_max_deg))
    kept_edges = []
    for (ju, jv) in wf.edges:
        support = 0
        for view, cam in views:
            try:
                p0 = cam.project(wf.junctions[ju])
                p1 = cam.project(wf.junctions[jv])
            except ValueError:
                continue
            if _segment_supported(p0, p1, view, cos_ang_min, perp_max, overlap_min):
                support += 1
                if support >= vis_threshold:
                    break
        if support >= vis_threshold:
            kept_edges.append((ju, jv))

    used = sorted({i for e in kept_edges for i in e})
    remap = {old: new for new, old in enumerate(used)}
    return WireframeGraph3D(
        junctions=wf.junctions[used] if used else np.empty((0, 3)),
        edges=[(remap[u], remap[v]) for u, v in kept_edges],
    )


def build_wireframe(junctions: JunctionSet, groups: list[SegmentGroup],
                    min_degree: int = 1) -> WireframeGraph3D:
    """Graph of active junctions referenced by groups; no isolated vertices.

    ``min_degree=2`` iteratively prunes junctions supported by a single
    group.
    """
    keys = sorted({g.key for g in groups})
    while True:
        deg: dict[int, int] = {}
        for u, v in keys:
            deg[u] = deg.get(u, 0) + 1
            deg[v] = deg.get(v, 0) + 1
        bad = {j for j, d in deg.items() if d < min_degree}
        if not bad:
            break
        keys = [k for k in keys if bad.isdisjoint(k)]
    used = sorted({i for k in keys for i in k})
    remap = {old: new for new, old in enumerate(used)}
    return WireframeGraph3D(
        junctions=junctions.positions[used] if used else np.empty((0, 3)),
        edges=[(remap[u], remap[v]) for u, v in keys],
    )
