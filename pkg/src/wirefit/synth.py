"""Synthetic ground truth: normalized wireframes, camera rings, projected
2D detections with optional occlusion and corruption, redundant noisy line
clouds, and the ideal-baseline upper bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import AnalyticSDF, BoxSDF
from .geometry import Camera, LineCloud, WireframeGraph2D, WireframeGraph3D

DEFAULT_RING_DISTANCE = float(np.sqrt(1.5**2 + 1.5**2))
DEFAULT_FOCAL_MM = 60.0
DEFAULT_SENSOR_MM = 32.0
DEFAULT_RESOLUTION = 512

_CUBE_CORNERS = np.array(
    [[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5) for z in (-0.5, 0.5)]
)
_CUBE_EDGES = [
    (u, v)
    for u in range(8)
    for v in range(u + 1, 8)
    if sum(a != b for a, b in zip(_CUBE_CORNERS[u], _CUBE_CORNERS[v])) == 1
]


@dataclass
class SyntheticScene:
    """Ground-truth wireframe, its surface SDF, cameras, and 2D views."""

    gt_wireframe: WireframeGraph3D
    sdf: AnalyticSDF | None
    cameras: list
    views: list


@dataclass(frozen=True)
class CorruptionSpec:
    """Detector-imperfection model for 2D views."""

    endpoint_noise_sigma: float = 0.0
    drop_rate: float = 0.0
    split_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.endpoint_noise_sigma < 0:
            raise ValueError("sigma must be nonnegative")
        for name in ("drop_rate", "split_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be a probability")


def cube_wireframe() -> WireframeGraph3D:
    """Unit cube wireframe centered at the origin: 8 corners, 12 edges."""
    return WireframeGraph3D(junctions=_CUBE_CORNERS.copy(), edges=list(_CUBE_EDGES))


def normalize_wireframe(wf: WireframeGraph3D) -> WireframeGraph3D:
    """Center the bounding box at the origin and scale the longest side to 1."""
    if len(wf.junctions) == 0:
        raise ValueError("cannot normalize an empty wireframe")
    lo = wf.junctions.min(axis=0)
    hi = wf.junctions.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0:
        raise ValueError("wireframe has zero extent")
    center = (lo + hi) / 2
    return WireframeGraph3D(junctions=(wf.junctions - center) / extent,
                            edges=list(wf.edges))


def _look_at(position: np.ndarray, width: int, height: int, fx: float) -> Camera:
    forward = -position / np.linalg.norm(position)
    up = np.array([0.0, 0.0, 1.0])
    if abs(float(forward @ up)) > 1.0 - 1e-6:
        up = np.array([1.0, 0.0, 0.0])
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])
    K = np.array([[fx, 0.0, width / 2], [0.0, fx, height / 2], [0.0, 0.0, 1.0]])
    return Camera(intrinsics=K, rotation=R, translation=-R @ position,
                  width=width, height=height)


def sample_cameras(n: int, distance: float = DEFAULT_RING_DISTANCE,
                   focal_mm: float = DEFAULT_FOCAL_MM,
                   sensor_mm: float = DEFAULT_SENSOR_MM,
                   resolution: int = DEFAULT_RESOLUTION,
                   seed: int = 0) -> list[Camera]:
    """n random camera positions on a sphere, all looking at the origin.

    Intrinsics follow the focal/sensor/resolution relation
    fx = focal_mm / sensor_mm * resolution with the principal point at the
    image center.
    """
    if n < 1 or distance <= 0:
        raise ValueError("need n >= 1 and a positive distance")
    rng = np.random.default_rng(seed)
    fx = focal_mm / sensor_mm * resolution
    cams = []
    while len(cams) < n:
        v = rng.normal(size=3)
        norm = np.linalg.norm(v)
        if norm < 1e-9:
            continue
        cams.append(_look_at(v / norm * distance, resolution, resolution, fx))
    return cams


def _sphere_trace_visible(point: np.ndarray, camera: Camera, sdf: AnalyticSDF,
                          tol: float = 1e-4, max_steps: int = 256) -> bool:
    """True when a sphere-traced ray from the camera reaches the point."""
    origin = camera.center
    to_p = point - origin
    dist = float(np.linalg.norm(to_p))
    v = to_p / dist
    t = 0.0
    for _ in range(max_steps):
        d = float(sdf.eval(origin + t * v))
        if dist - t <= 10 * tol:
            return True
        if d < tol:
            return False
        t += d
        if t >= dist - 10 * tol:
            return True
    return False


def _clip_to_image(p: np.ndarray, q: np.ndarray, width: int, height: int):
    """Liang-Barsky clip of a 2D segment against the image rectangle."""
    d = q - p
    t0, t1 = 0.0, 1.0
    for coord, lo, hi in ((0, 0.0, float(width)), (1, 0.0, float(height))):
        for sign, bound in ((-1.0, lo), (1.0, hi)):
            denom = sign * d[coord]
            num = sign * (bound - p[coord])
            if abs(denom) < 1e-15:
                if sign * (p[coord] - bound) > 0:
                    return None
                continue
            t = num / denom
            if denom < 0:
                t0 = max(t0, t)
            else:
                t1 = min(t1, t)
            if t0 > t1:
                return None
    return p + t0 * d, p + t1 * d


def project_wireframe(wf: WireframeGraph3D, camera: Camera,
                      sdf: AnalyticSDF | None = None,
                      occlusion: bool = False,
                      samples_per_edge: int = 64,
                      min_run_px: float = 5.0) -> WireframeGraph2D:
    """Project the wireframe edges into a view.

    Without occlusion, whole edges are emitted (clipped to the image). With
    occlusion, each edge is sampled and maximal sphere-trace-visible runs at
    least ``min_run_px`` long become 2D segments. Edges with an endpoint at
    or behind the camera are omitted.
    """
    vertices: list[np.ndarray] = []
    edges: list[tuple[int, int]] = []
    vertex_of_junction: dict[int, int] = {}

    def add_vertex(p: np.ndarray, junction_id: int | None = None) -> int:
        if junction_id is not None and junction_id in vertex_of_junction:
            return vertex_of_junction[junction_id]
        vertices.append(np.asarray(p, dtype=float))
        idx = len(vertices) - 1
        if junction_id is not None:
            vertex_of_junction[junction_id] = idx
        return idx

    def add_segment(p, q, id_p=None, id_q=None):
        if np.linalg.norm(np.asarray(p) - np.asarray(q)) <= 1e-8:
            return
        i = add_vertex(p, id_p)
        j = add_vertex(q, id_q)
        if i == j:
            return
        u, v = min(i, j), max(i, j)
        if (u, v) not in set(edges):
            edges.append((u, v))

    for ju, jv in wf.edges:
        a, b = wf.junctions[ju], wf.junctions[jv]
        if camera.depth(a) <= 1e-12 or camera.depth(b) <= 1e-12:
            continue
        if not occlusion or sdf is None:
            pa, pb = camera.project(a), camera.project(b)
            clipped = _clip_to_image(pa, pb, camera.width, camera.height)
            if clipped is None:
                continue
            ca, cb = clipped
            whole = np.allclose(ca, pa) and np.allclose(cb, pb)
            add_segment(ca, cb, ju if whole else None, jv if whole else None)
        else:
            params = np.linspace(0.0, 1.0, samples_per_edge)
            pts = a[None, :] + params[:, None] * (b - a)
            visible = np.array([_sphere_trace_visible(p, camera, sdf) for p in pts])
            start = None
            for i, vis in enumerate(list(visible) + [False]):
                if vis and start is None:
                    start = i
                elif not vis and start is not None:
                    run = (params[start], params[i - 1])
                    start = None
                    if run[1] <= run[0]:
                        continue
                    p3a = a + run[0] * (b - a)
                    p3b = a + run[1] * (b - a)
                    p2a, p2b = camera.project(p3a), camera.project(p3b)
                    if np.linalg.norm(p2b - p2a) < min_run_px:
                        continue
                    clipped = _clip_to_image(p2a, p2b, camera.width, camera.height)
                    if clipped is None:
                        continue
                    ca, cb = clipped
                    whole = run == (0.0, 1.0) and np.allclose(ca, p2a) and np.allclose(cb, p2b)
                    add_segment(ca, cb, ju if whole else None, jv if whole else None)

    return WireframeGraph2D(
        vertices=np.asarray(vertices, dtype=float).reshape(-1, 2),
        edges=edges,
    )


def corrupt_view(view: WireframeGraph2D, spec: CorruptionSpec) -> WireframeGraph2D:
    """Perturb endpoints, drop edges, and split surviving edges; seeded."""
    rng = np.random.default_rng(spec.seed)
    vertices = view.vertices.copy()
    if spec.endpoint_noise_sigma > 0:
        vertices = vertices + rng.normal(0.0, spec.endpoint_noise_sigma, vertices.shape)
    vert_list = [v for v in vertices]
    edges = []
    for u, v in view.edges:
        if rng.uniform() < spec.drop_rate:
            continue
        if rng.uniform() < spec.split_rate:
            t = rng.uniform(0.1, 0.9)
            mid = vert_list[u] + t * (vert_list[v] - vert_list[u])
            vert_list.append(mid)
            w = len(vert_list) - 1
            edges.append((min(u, w), max(u, w)))
            edges.append((min(v, w), max(v, w)))
        else:
            edges.append((u, v))
    return WireframeGraph2D(vertices=np.asarray(vert_list).reshape(-1, 2), edges=edges)


def synthesize_line_cloud(scene: SyntheticScene, duplicates_per_view: int,
                          noise_sigma_3d: float = 0.0, seed: int = 0) -> LineCloud:
    """Per-view duplicated, noise-perturbed copies of the visible GT edges.

    Stands in for querying a trained field: every ground-truth edge that is
    fully in front of a camera contributes ``duplicates_per_view`` copies
    with isotropic Gaussian endpoint noise.
    """
    if duplicates_per_view < 1:
        raise ValueError("duplicates_per_view must be >= 1")
    rng = np.random.default_rng(seed)
    wf = scene.gt_wireframe
    endpoints = []
    view_ids = []
    for vid, cam in enumerate(scene.cameras):
        for ju, jv in wf.edges:
            a, b = wf.junctions[ju], wf.junctions[jv]
            if cam.depth(a) <= 1e-12 or cam.depth(b) <= 1e-12:
                continue
            for _ in range(duplicates_per_view):
                pair = np.stack([a, b])
                if noise_sigma_3d > 0:
                    pair = pair + rng.normal(0.0, noise_sigma_3d, (2, 3))
                endpoints.append(pair)
                view_ids.append(vid)
    if not endpoints:
        raise ValueError("no visible edges to synthesize")
    return LineCloud(endpoints=np.stack(endpoints), view_ids=np.asarray(view_ids))


def ideal_baseline(scene: SyntheticScene, detections: list[WireframeGraph2D],
                   tau_px: float = 5.0):
    """Upper-bound recovery rates given the 2D detections.

    A GT junction counts as reconstructed when some view has a detected
    vertex within ``tau_px`` of its projection; a GT line when some view has
    a detected segment whose endpoints both lie within ``tau_px`` of the
    projected GT endpoints under the better of the two orderings.
    """
    if len(detections) != len(scene.cameras):
        raise ValueError("detections must align with scene cameras")
    wf = scene.gt_wireframe
    junction_hit = np.zeros(len(wf.junctions), dtype=bool)
    line_hit = np.zeros(len(wf.edges), dtype=bool)

    for cam, det in zip(scene.cameras, detections):
        proj = {}
        for j, p in enumerate(wf.junctions):
            try:
                proj[j] = cam.project(p)
            except ValueError:
                continue
        for j, pj in proj.items():
            if junction_hit[j] or len(det.vertices) == 0:
                continue
            if np.min(np.linalg.norm(det.vertices - pj, axis=1)) <= tau_px:
                junction_hit[j] = True
        for e, (ju, jv) in enumerate(wf.edges):
            if line_hit[e] or ju not in proj or jv not in proj:
                continue
            pu, pv = proj[ju], proj[jv]
            for k in range(len(det.edges)):
                seg = det.segment(k)
                d_straight = max(np.linalg.norm(seg.p - pu), np.linalg.norm(seg.q - pv))
                d_flipped = max(np.linalg.norm(seg.p - pv), np.linalg.norm(seg.q - pu))
                if min(d_straight, d_flipped) <= tau_px:
                    line_hit[e] = True
                    break

    counts = {
        "junctions_total": int(len(wf.junctions)),
        "junctions_reconstructed": int(junction_hit.sum()),
        "lines_total": int(len(wf.edges)),
        "lines_reconstructed": int(line_hit.sum()),
    }
    j_rate = counts["junctions_reconstructed"] / counts["junctions_total"] if counts["junctions_total"] else 0.0
    l_rate = counts["lines_reconstructed"] / counts["lines_total"] if counts["lines_total"] else 0.0
    return j_rate, l_rate, counts


def make_cube_scene(n_views: int = 20, distance: float = DEFAULT_RING_DISTANCE,
                    resolution: int = DEFAULT_RESOLUTION, seed: int = 0,
                    occlusion: bool = False,
                    corruption: CorruptionSpec | None = None) -> SyntheticScene:
    """Canonical unit-cube scene: box SDF, camera ring, projected views."""
    wf = cube_wireframe()
    sdf = BoxSDF(center=np.zeros(3), half_extents=np.full(3, 0.5))
    cams = sample_cameras(n_views, distance=distance, resolution=resolution, seed=seed)
    views = []
    for i, cam in enumerate(cams):
        view = project_wireframe(wf, cam, sdf=sdf, occlusion=occlusion)
        if corruption is not None:
            spec = CorruptionSpec(
                endpoint_noise_sigma=corruption.endpoint_noise_sigma,
                drop_rate=corruption.drop_rate,
                split_rate=corruption.split_rate,
                seed=corruption.seed + i,
            )
            view = corrupt_view(view, spec)
        views.append(view)
    return SyntheticScene(gt_wireframe=wf, sdf=sdf, cameras=cams, views=views)
