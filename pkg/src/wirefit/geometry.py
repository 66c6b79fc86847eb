"""Core geometric types: cameras, segments, and wireframe graphs.

All operations here are pure functions on immutable values. Coordinates are
plain numpy arrays; world-to-camera convention is ``x_cam = R @ x_world + t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Segments shorter than this (world units or pixels) are rejected as degenerate.
EPS_LEN = 1e-8


class BehindCameraError(ValueError):
    """Raised when projecting a point at or behind the camera plane."""


class DegenerateSegmentError(ValueError):
    """Raised when a segment is too short to define a direction."""


def _as_vec(x, n):
    v = np.asarray(x, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"expected a {n}-vector, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class Camera:
    """Pinhole camera with world-to-camera pose ``x_cam = R x + t``."""

    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        K = np.asarray(self.intrinsics, dtype=float)
        R = np.asarray(self.rotation, dtype=float)
        t = _as_vec(self.translation, 3)
        if K.shape != (3, 3) or R.shape != (3, 3):
            raise ValueError("intrinsics and rotation must be 3x3")
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9) or not np.isclose(
            np.linalg.det(R), 1.0, atol=1e-9
        ):
            raise ValueError("rotation must be orthonormal with determinant +1")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValueError("focal entries must be strictly positive")
        if not np.array_equal(K[2], [0.0, 0.0, 1.0]):
            raise ValueError("bottom row of intrinsics must be (0, 0, 1)")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        object.__setattr__(self, "intrinsics", K)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def depth(self, point) -> float:
        return float(self.rotation[2] @ np.asarray(point, dtype=float) + self.translation[2])

    def project(self, point) -> np.ndarray:
        """Project a world point to pixel coordinates.

        Raises BehindCameraError if the point has non-positive depth.
        """
        p = _as_vec(point, 3)
        x_cam = self.rotation @ p + self.translation
        if x_cam[2] <= 1e-12:
            raise BehindCameraError(f"point {p} is at or behind the camera plane")
        uv = self.intrinsics @ x_cam
        return uv[:2] / uv[2]

    def project_many(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project (n, 3) points; returns (pixels (n, 2), depths (n,))."""
        x_cam = points @ self.rotation.T + self.translation
        z = x_cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            uv = (x_cam @ self.intrinsics.T)[:, :2] / z[:, None]
        return uv, z

    def pixel_ray(self, pixel) -> np.ndarray:
        """Unit world-space direction of the ray through a pixel."""
        px = _as_vec(pixel, 2)
        K = self.intrinsics
        d_cam = np.array([(px[0] - K[0, 2]) / K[0, 0], (px[1] - K[1, 2]) / K[1, 1], 1.0])
        d = self.rotation.T @ d_cam
        return d / np.linalg.norm(d)


@dataclass(frozen=True)
class LineSegment3D:
    """Straight segment between two 3D endpoints."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = _as_vec(self.a, 3)
        b = _as_vec(self.b, 3)
        if np.linalg.norm(a - b) <= EPS_LEN:
            raise DegenerateSegmentError("3D segment endpoints coincide")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def direction(self) -> np.ndarray:
        d = self.b - self.a
        return d / np.linalg.norm(d)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.b - self.a))


@dataclass(frozen=True)
class LineSegment2D:
    """Straight segment between two pixel-space endpoints."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = _as_vec(self.p, 2)
        q = _as_vec(self.q, 2)
        if np.linalg.norm(p - q) <= EPS_LEN:
            raise DegenerateSegmentError("2D segment endpoints coincide")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.q - self.p))


def _check_edges(edges, n_vertices, min_len_points=None):
    seen = set()
    out = []
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n_vertices and 0 <= v < n_vertices):
            raise ValueError(f"edge ({u}, {v}) references a missing vertex")
        if u >= v:
            raise ValueError(f"edge ({u}, {v}) must be ordered u < v")
        if (u, v) in seen:
            raise ValueError(f"duplicate edge ({u}, {v})")
        seen.add((u, v))
        if min_len_points is not None:
            if np.linalg.norm(min_len_points[u] - min_len_points[v]) <= EPS_LEN:
                raise DegenerateSegmentError(f"edge ({u}, {v}) is degenerate")
        out.append((u, v))
    return out


@dataclass(frozen=True)
class WireframeGraph2D:
    """Per-view undirected graph of 2D junctions and segment edges."""

    vertices: np.ndarray
    edges: list = field(default_factory=list)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        e = _check_edges(self.edges, len(v), min_len_points=v)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "edges", e)

    def segment(self, edge_index: int) -> LineSegment2D:
        u, v = self.edges[edge_index]
        return LineSegment2D(self.vertices[u], self.vertices[v])


@dataclass(frozen=True)
class WireframeGraph3D:
    """3D wireframe graph: junction positions plus edge index pairs."""

    junctions: np.ndarray
    edges: list = field(default_factory=list)

    def __post_init__(self):
        j = np.asarray(self.junctions, dtype=float).reshape(-1, 3)
        e = _check_edges(self.edges, len(j))
        object.__setattr__(self, "junctions", j)
        object.__setattr__(self, "edges", e)

    def segment(self, edge_index: int) -> LineSegment3D:
        u, v = self.edges[edge_index]
        return LineSegment3D(self.junctions[u], self.junctions[v])

    def degrees(self) -> np.ndarray:
        deg = np.zeros(len(self.junctions), dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg


@dataclass(frozen=True)
class LineCloud:
    """Redundant, noisy set of 3D line segments with source view ids."""

    endpoints: np.ndarray  # (m, 2, 3)
    view_ids: np.ndarray  # (m,)

    def __post_init__(self):
        e = np.asarray(self.endpoints, dtype=float).reshape(-1, 2, 3)
        v = np.asarray(self.view_ids, dtype=int).reshape(-1)
        if len(e) != len(v):
            raise ValueError("endpoints and view_ids must have equal length")
        object.__setattr__(self, "endpoints", e)
        object.__setattr__(self, "view_ids", v)

    def __len__(self) -> int:
        return len(self.endpoints)

    def all_endpoints(self) -> np.ndarray:
        """Flatten to the (2m, 3) endpoint set."""
        return self.endpoints.reshape(-1, 3)

    def segment(self, i: int) -> LineSegment3D:
        return LineSegment3D(self.endpoints[i, 0], self.endpoints[i, 1])


def point_to_segment_2d(p, seg: LineSegment2D) -> tuple[float, np.ndarray, bool]:
    """Perpendicular projection of a pixel onto a 2D segment.

    Returns (distance to the segment, foot on the infinite line, whether the
    foot lies between the endpoints). When the foot falls outside, the
    distance is measured to the nearest endpoint.
    """
    p = _as_vec(p, 2)
    d = seg.q - seg.p
    t = float(np.dot(p - seg.p, d) / np.dot(d, d))
    foot = seg.p + t * d
    nearest = seg.p + min(max(t, 0.0), 1.0) * d
    return float(np.linalg.norm(p - nearest)), foot, 0.0 <= t <= 1.0


def project_point_to_line_3d(p, seg: LineSegment3D) -> np.ndarray:
    """Closest point on the infinite 3D line through a segment."""
    p = _as_vec(p, 3)
    d = seg.b - seg.a
    t = float(np.dot(p - seg.a, d) / np.dot(d, d))
    return seg.a + t * d
