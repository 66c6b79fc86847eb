"""Quantitative evaluation: sampled-cloud ACC/COMP and junction/line
precision-recall at distance thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import WireframeGraph3D


@dataclass(frozen=True)
class SampledCloud:
    """Points sampled along wireframe edges with per-point provenance."""

    points: np.ndarray
    provenance: np.ndarray  # (n, 2): edge index, sample parameter

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "provenance", np.asarray(self.provenance, dtype=float).reshape(-1, 2))
        if len(self.points) != len(self.provenance):
            raise ValueError("points and provenance must align")

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class PRReport:
    """Per-threshold precision/recall for junctions and lines."""

    thresholds: list
    precision_j: list
    recall_j: list
    precision_l: list
    recall_l: list
    counts: dict = field(default_factory=dict)


def sample_wireframe(wf: WireframeGraph3D, k: int = 32) -> SampledCloud:
    """k equally spaced points per edge, endpoints included."""
    if k < 2:
        raise ValueError("need k >= 2 samples per edge")
    points = []
    prov = []
    params = np.linspace(0.0, 1.0, k)
    for e, (u, v) in enumerate(wf.edges):
        a, b = wf.junctions[u], wf.junctions[v]
        points.append(a[None, :] + params[:, None] * (b - a))
        prov.append(np.stack([np.full(k, e), params], axis=1))
    if not points:
        return SampledCloud(np.empty((0, 3)), np.empty((0, 2)))
    return SampledCloud(np.concatenate(points), np.concatenate(prov))


def _nn_distances(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    diff = src[:, None, :] - dst[None, :, :]
    return np.min(np.linalg.norm(diff, axis=-1), axis=1)


def acc(pred: SampledCloud, gt: SampledCloud) -> float:
    """Mean nearest-neighbor distance from prediction to ground truth."""
    if len(pred) == 0 or len(gt) == 0:
        raise ValueError("clouds must be nonempty")
    return float(np.mean(_nn_distances(pred.points, gt.points)))


def comp(pred: SampledCloud, gt: SampledCloud) -> float:
    """Mean nearest-neighbor distance from ground truth to prediction."""
    if len(pred) == 0 or len(gt) == 0:
        raise ValueError("clouds must be nonempty")
    return float(np.mean(_nn_distances(gt.points, pred.points)))


def _greedy_match_count(dist: np.ndarray, tau: float) -> int:
    """One-to-one greedy matching by ascending distance, ties by index."""
    n_pred, n_gt = dist.shape
    order = sorted(
        ((dist[i, j], i, j) for i in range(n_pred) for j in range(n_gt)),
        key=lambda t: (t[0], t[1], t[2]),
    )
    used_pred = np.zeros(n_pred, dtype=bool)
    used_gt = np.zeros(n_gt, dtype=bool)
    matched = 0
    for d, i, j in order:
        if d > tau:
            break
        if used_pred[i] or used_gt[j]:
            continue
        used_pred[i] = used_gt[j] = True
        matched += 1
    return matched


def _line_distance_matrix(pred: WireframeGraph3D, gt: WireframeGraph3D) -> np.ndarray:
    dist = np.zeros((len(pred.edges), len(gt.edges)))
    for i, (pu, pv) in enumerate(pred.edges):
        a, b = pred.junctions[pu], pred.junctions[pv]
        for j, (gu, gv) in enumerate(gt.edges):
            c, d = gt.junctions[gu], gt.junctions[gv]
            straight = max(np.linalg.norm(a - c), np.linalg.norm(b - d))
            flipped = max(np.linalg.norm(a - d), np.linalg.norm(b - c))
            dist[i, j] = min(straight, flipped)
    return dist


def precision_recall(pred: WireframeGraph3D, gt: WireframeGraph3D,
                     thresholds) -> PRReport:
    """Greedy one-to-one matching of junctions and lines per threshold.

    A line matches when the larger endpoint distance, under the better of
    the two endpoint orderings, is within the threshold.
    """
    if len(pred.junctions) == 0 or len(gt.junctions) == 0:
        raise ValueError("both graphs must be nonempty")
    taus = [float(t) for t in thresholds]
    jdist = np.linalg.norm(
        pred.junctions[:, None, :] - gt.junctions[None, :, :], axis=-1
    )
    ldist = _line_distance_matrix(pred, gt)

    pj, rj, pl, rl = [], [], [], []
    for tau in taus:
        mj = _greedy_match_count(jdist, tau)
        pj.append(mj / len(pred.junctions))
        rj.append(mj / len(gt.junctions))
        if len(pred.edges) and len(gt.edges):
            ml = _greedy_match_count(ldist, tau)
            pl.append(ml / len(pred.edges))
            rl.append(ml / len(gt.edges))
        else:
            pl.append(0.0)
            rl.append(0.0)
    counts = {
        "pred_junctions": len(pred.junctions),
        "gt_junctions": len(gt.junctions),
        "pred_lines": len(pred.edges),
        "gt_lines": len(gt.edges),
    }
    return PRReport(thresholds=taus, precision_j=pj, recall_j=rj,
                    precision_l=pl, recall_l=rl, counts=counts)
