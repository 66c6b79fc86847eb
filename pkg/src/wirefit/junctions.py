"""Global junction fitting: DBSCAN pseudo-labels, Hungarian set matching,
and the deterministic match-and-replace alternation that distills a sparse
junction set from redundant line-cloud endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import DBSCAN

from .geometry import Camera, LineCloud

DEFAULT_N_JUNCTIONS = 1024
DEFAULT_EPS = 0.01
DEFAULT_MIN_SAMPLES = 2


@dataclass
class JunctionSet:
    """N candidate 3D junction positions with active flags."""

    positions: np.ndarray
    active: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.active = np.asarray(self.active, dtype=bool).reshape(-1)
        if len(self.positions) != len(self.active):
            raise ValueError("positions and active flags must align")
        if len(self.positions) < 1:
            raise ValueError("junction set must be nonempty")

    @property
    def n(self) -> int:
        return len(self.positions)

    def active_positions(self) -> np.ndarray:
        return self.positions[self.active]

    def active_indices(self) -> np.ndarray:
        return np.nonzero(self.active)[0]


@dataclass(frozen=True)
class ClusterResult:
    """DBSCAN output: centroids, members per cluster, and noise points."""

    centroids: np.ndarray
    members: list = field(default_factory=list)
    noise: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    def __post_init__(self):
        object.__setattr__(self, "centroids",
                           np.asarray(self.centroids, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "members",
                           [np.asarray(m, dtype=int) for m in self.members])
        object.__setattr__(self, "noise", np.asarray(self.noise, dtype=int))

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)


@dataclass(frozen=True)
class Matching:
    """One-to-one assignment between junctions and cluster centroids."""

    pairs: list
    total_cost: float


def dbscan(points, eps: float, min_samples: int) -> ClusterResult:
    """Euclidean DBSCAN; min_samples counts the query point itself."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return ClusterResult(np.empty((0, 3)), [], np.empty(0, dtype=int))
    labels = DBSCAN(eps=eps, min_samples=min_samples).fit(pts).labels_
    members = []
    centroids = []
    for lab in range(labels.max() + 1):
        idx = np.nonzero(labels == lab)[0]
        members.append(idx)
        centroids.append(pts[idx].mean(axis=0))
    noise = np.nonzero(labels == -1)[0]
    centroids = np.asarray(centroids, dtype=float).reshape(-1, 3)
    return ClusterResult(centroids, members, noise)


def hungarian(cost) -> Matching:
    """Minimum-cost assignment of size min(rows, cols)."""
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.size == 0:
        raise ValueError("cost must be a nonempty 2D matrix")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix must be finite")
    rows, cols = linear_sum_assignment(c)
    pairs = sorted(zip(rows.tolist(), cols.tolist()))
    return Matching(pairs=pairs, total_cost=float(c[rows, cols].sum()))


def junction_consistency_loss(junction, pseudo, cameras: list[Camera],
                              lam: float) -> float:
    """L1 distance in 3D plus lam times the mean projected L1 distance.

    Views where either point falls behind the camera are skipped; with no
    usable view the 2D term is zero.
    """
    j = np.asarray(junction, dtype=float).reshape(3)
    p = np.asarray(pseudo, dtype=float).reshape(3)
    loss = float(np.abs(j - p).sum())
    terms = []
    for cam in cameras:
        try:
            terms.append(float(np.abs(cam.project(j) - cam.project(p)).sum()))
        except ValueError:
            continue
    if terms:
        loss += lam * float(np.mean(terms))
    return loss


def fit_junctions(line_cloud: LineCloud, n_junctions: int = DEFAULT_N_JUNCTIONS,
                  eps: float = DEFAULT_EPS, min_samples: int = DEFAULT_MIN_SAMPLES,
                  max_iters: int = 20, tol: float = 1e-9,
                  seed: int = 0, cost_history: list | None = None) -> JunctionSet:
    """Distill global junctions from line-cloud endpoints.

    Positions start uniformly at random inside the endpoint bounding box,
    then alternate {cluster endpoints, Hungarian-match positions to cluster
    centroids, replace matched positions by their centroids} until the
    largest move falls below ``tol``. Positions never matched stay inactive.
    """
    if len(line_cloud) == 0:
        raise ValueError("line cloud is empty")
    if n_junctions < 1:
        raise ValueError("need at least one junction")
    endpoints = line_cloud.all_endpoints()
    rng = np.random.default_rng(seed)
    lo = endpoints.min(axis=0)
    hi = endpoints.max(axis=0)
    positions = rng.uniform(lo, hi, size=(n_junctions, 3))
    ever_matched = np.zeros(n_junctions, dtype=bool)

    for _ in range(max_iters):
        clusters = dbscan(endpoints, eps, min_samples)
        if clusters.n_clusters == 0:
            break
        diff = positions[:, None, :] - clusters.centroids[None, :, :]
        cost = np.linalg.norm(diff, axis=-1)
        match = hungarian(cost)
        if cost_history is not None:
            cost_history.append(match.total_cost)
        max_move = 0.0
        for k, i in match.pairs:
            move = float(np.linalg.norm(positions[k] - clusters.centroids[i]))
            max_move = max(max_move, move)
            positions[k] = clusters.centroids[i]
            ever_matched[k] = True
        if max_move < tol:
            break

    return JunctionSet(positions=positions, active=ever_matched)
