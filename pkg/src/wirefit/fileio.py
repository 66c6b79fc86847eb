"""Versioned text file formats ("neat/1"), OBJ export, and the
points3D-layout export for Gaussian-splatting initialization.

All formats are YAML-based nested records so fixtures stay diffable; floats
are serialized in shortest round-trip decimal form. Writes are atomic
(temp file + rename).
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np
import yaml

from .fields import AnalyticSDF, BoxSDF, SphereSDF, UnionSDF
from .geometry import Camera, LineCloud, WireframeGraph2D, WireframeGraph3D
from .junctions import JunctionSet
from .synth import SyntheticScene

FORMAT_TAG = "neat/1"


class ParseError(ValueError):
    """Malformed or incomplete file."""


def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(doc: dict, path) -> None:
    _atomic_write_text(path, yaml.safe_dump(doc, sort_keys=True))


def _load(path, kind: str) -> dict:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: not valid structured text: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a top-level record")
    if doc.get("format") != FORMAT_TAG:
        raise ParseError(f"{path}: missing or unsupported 'format' (need {FORMAT_TAG})")
    if doc.get("kind") != kind:
        raise ParseError(f"{path}: 'kind' must be '{kind}', got {doc.get('kind')!r}")
    return doc


def _require(record: dict, field: str, context: str):
    if field not in record:
        raise ParseError(f"{context}: missing field '{field}'")
    return record[field]


def _floats(x) -> list:
    return np.asarray(x, dtype=float).tolist()


# -- cameras -----------------------------------------------------------------

def camera_to_record(cam: Camera) -> dict:
    return {
        "intrinsics": _floats(cam.intrinsics),
        "rotation": _floats(cam.rotation),
        "translation": _floats(cam.translation),
        "width": int(cam.width),
        "height": int(cam.height),
    }


def camera_from_record(rec: dict, context: str = "camera") -> Camera:
    try:
        return Camera(
            intrinsics=_require(rec, "intrinsics", context),
            rotation=_require(rec, "rotation", context),
            translation=_require(rec, "translation", context),
            width=_require(rec, "width", context),
            height=_require(rec, "height", context),
        )
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"{context}: {exc}") from exc


# -- wireframes and views ----------------------------------------------------

def wireframe3d_to_record(wf: WireframeGraph3D) -> dict:
    return {"junctions": _floats(wf.junctions), "edges": [[int(u), int(v)] for u, v in wf.edges]}


def wireframe3d_from_record(rec: dict, context: str = "wireframe") -> WireframeGraph3D:
    try:
        return WireframeGraph3D(
            junctions=np.asarray(_require(rec, "junctions", context), dtype=float).reshape(-1, 3),
            edges=[tuple(e) for e in _require(rec, "edges", context)],
        )
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(f"{context}: {exc}") from exc


def view_to_record(view: WireframeGraph2D) -> dict:
    return {"vertices": _floats(view.vertices), "edges": [[int(u), int(v)] for u, v in view.edges]}


def view_from_record(rec: dict, context: str = "view") -> WireframeGraph2D:
    try:
        return WireframeGraph2D(
            vertices=np.asarray(_require(rec, "vertices", context), dtype=float).reshape(-1, 2),
            edges=[tuple(e) for e in _require(rec, "edges", context)],
        )
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(f"{context}: {exc}") from exc


# -- SDF descriptors ---------------------------------------------------------

def sdf_to_record(sdf: AnalyticSDF | None) -> dict | None:
    if sdf is None:
        return None
    if isinstance(sdf, SphereSDF):
        return {"type": "sphere", "center": _floats(sdf.center), "radius": float(sdf.radius)}
    if isinstance(sdf, BoxSDF):
        return {"type": "box", "center": _floats(sdf.center),
                "half_extents": _floats(sdf.half_extents)}
    if isinstance(sdf, UnionSDF):
        return {"type": "union", "shapes": [sdf_to_record(s) for s in sdf.shapes]}
    raise ValueError(f"cannot serialize SDF of type {type(sdf).__name__}")


def sdf_from_record(rec: dict | None, context: str = "sdf") -> AnalyticSDF | None:
    if rec is None:
        return None
    kind = _require(rec, "type", context)
    if kind == "sphere":
        return SphereSDF(center=_require(rec, "center", context),
                         radius=_require(rec, "radius", context))
    if kind == "box":
        return BoxSDF(center=_require(rec, "center", context),
                      half_extents=_require(rec, "half_extents", context))
    if kind == "union":
        shapes = [sdf_from_record(s, context) for s in _require(rec, "shapes", context)]
        return UnionSDF(shapes=tuple(shapes))
    raise ParseError(f"{context}: unknown SDF type {kind!r}")


# -- top-level files ---------------------------------------------------------

def write_scene(scene: SyntheticScene, path) -> None:
    _dump(
        {
            "format": FORMAT_TAG,
            "kind": "scene",
            "wireframe": wireframe3d_to_record(scene.gt_wireframe),
            "sdf": sdf_to_record(scene.sdf),
            "cameras": [camera_to_record(c) for c in scene.cameras],
            "views": [view_to_record(v) for v in scene.views],
        },
        path,
    )


def read_scene(path) -> SyntheticScene:
    doc = _load(path, "scene")
    cameras = [
        camera_from_record(rec, f"{path}: cameras[{i}]")
        for i, rec in enumerate(_require(doc, "cameras", str(path)))
    ]
    views = [
        view_from_record(rec, f"{path}: views[{i}]")
        for i, rec in enumerate(_require(doc, "views", str(path)))
    ]
    if len(views) != len(cameras):
        raise ParseError(f"{path}: views and cameras must align")
    return SyntheticScene(
        gt_wireframe=wireframe3d_from_record(_require(doc, "wireframe", str(path)),
                                             f"{path}: wireframe"),
        sdf=sdf_from_record(doc.get("sdf"), f"{path}: sdf"),
        cameras=cameras,
        views=views,
    )


def write_line_cloud(cloud: LineCloud, path) -> None:
    _dump(
        {
            "format": FORMAT_TAG,
            "kind": "line_cloud",
            "endpoints": _floats(cloud.endpoints),
            "view_ids": [int(v) for v in cloud.view_ids],
        },
        path,
    )


def read_line_cloud(path) -> LineCloud:
    doc = _load(path, "line_cloud")
    try:
        return LineCloud(
            endpoints=np.asarray(_require(doc, "endpoints", str(path)), dtype=float).reshape(-1, 2, 3),
            view_ids=_require(doc, "view_ids", str(path)),
        )
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_junctions(junctions: JunctionSet, path) -> None:
    _dump(
        {
            "format": FORMAT_TAG,
            "kind": "junctions",
            "positions": _floats(junctions.positions),
            "active": [bool(a) for a in junctions.active],
        },
        path,
    )


def read_junctions(path) -> JunctionSet:
    doc = _load(path, "junctions")
    try:
        return JunctionSet(
            positions=np.asarray(_require(doc, "positions", str(path)), dtype=float).reshape(-1, 3),
            active=_require(doc, "active", str(path)),
        )
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_wireframe(wf: WireframeGraph3D, path) -> None:
    doc = {"format": FORMAT_TAG, "kind": "wireframe"}
    doc.update(wireframe3d_to_record(wf))
    _dump(doc, path)


def read_wireframe(path) -> WireframeGraph3D:
    doc = _load(path, "wireframe")
    return wireframe3d_from_record(doc, str(path))


# -- OBJ ---------------------------------------------------------------------

def export_obj(wf: WireframeGraph3D, path) -> None:
    """Vertices as ``v x y z`` lines, edges as 1-based ``l u v`` lines."""
    lines = ["# wireframe line-segment export"]
    for x, y, z in wf.junctions:
        lines.append(f"v {float(x)!r} {float(y)!r} {float(z)!r}")
    for u, v in wf.edges:
        lines.append(f"l {u + 1} {v + 1}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def import_obj(path) -> WireframeGraph3D:
    vertices = []
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0] == "#":
                continue
            if parts[0] == "v":
                if len(parts) != 4:
                    raise ParseError(f"{path}:{lineno}: malformed vertex line")
                vertices.append([float(x) for x in parts[1:]])
            elif parts[0] == "l":
                if len(parts) != 3:
                    raise ParseError(f"{path}:{lineno}: malformed line element")
                u, v = int(parts[1]) - 1, int(parts[2]) - 1
                edges.append((min(u, v), max(u, v)))
    return WireframeGraph3D(junctions=np.asarray(vertices, dtype=float).reshape(-1, 3),
                            edges=edges)


# -- points3D export ---------------------------------------------------------

def export_gaussian_init(junctions: JunctionSet, path) -> None:
    """Active junctions in the sparse-reconstruction points3D text layout.

    One line per point: POINT3D_ID X Y Z R G B ERROR, mid-gray color, zero
    error, no track elements.
    """
    active = junctions.active_positions()
    if len(active) == 0:
        raise ValueError("no active junctions to export")
    lines = [
        "# 3D point list with one line of data per point:",
        "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)",
        f"# Number of points: {len(active)}, mean track length: 0",
    ]
    for i, (x, y, z) in enumerate(active, 1):
        lines.append(f"{i} {float(x)!r} {float(y)!r} {float(z)!r} 128 128 128 0")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_gaussian_init(path) -> np.ndarray:
    points = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if line.startswith("#") or not line.strip():
                continue
            parts = line.split()
            if len(parts) < 8:
                raise ParseError(f"{path}:{lineno}: malformed point line")
            points.append([float(p) for p in parts[1:4]])
    return np.asarray(points, dtype=float).reshape(-1, 3)


# -- metrics reports ---------------------------------------------------------

def write_metrics_report(report: dict, txt_path, structured_path) -> None:
    """Flat key-value text table plus the machine-readable structured file."""
    flat = _flatten(report)
    width = max((len(k) for k in flat), default=0)
    lines = [f"{k.ljust(width)}  {v!r}" if isinstance(v, float) else f"{k.ljust(width)}  {v}"
             for k, v in flat.items()]
    _atomic_write_text(txt_path, "\n".join(lines) + "\n")
    doc = {"format": FORMAT_TAG, "kind": "metrics", "metrics": report}
    _dump(doc, structured_path)


def read_metrics_report(structured_path) -> dict:
    doc = _load(structured_path, "metrics")
    return _require(doc, "metrics", str(structured_path))


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, f"{key}."))
        elif isinstance(v, (list, tuple)):
            for i, item in enumerate(v):
                out[f"{key}[{i}]"] = item
        else:
            out[key] = v
    return out
