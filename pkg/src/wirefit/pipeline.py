"""End-to-end driver: line-cloud generation or rendering, junction fitting,
distillation, evaluation, and export.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import fileio
from .config import PipelineConfig
from .distill import (
    DegenerateGradientError,
    build_wireframe,
    group_segments,
    index_endpoints,
    optimize_junctions,
    sdf_refine,
    visibility_filter,
)
from .fields import (
    DisplacementOracle,
    RenderQuadrature,
    _composite_weights,
    attraction_rays,
    density_from_sdf,
)
from .geometry import LineCloud, WireframeGraph3D
from .junctions import JunctionSet, fit_junctions
from .metrics import SampledCloud, acc, comp, precision_recall, sample_wireframe
from .synth import SyntheticScene, synthesize_line_cloud


class PipelineStageError(RuntimeError):
    """Wraps a failure with the name of the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def _scene_quadrature(camera, scene: SyntheticScene, n_samples: int,
                      margin: float = 0.3) -> RenderQuadrature:
    bound = float(np.linalg.norm(scene.gt_wireframe.junctions, axis=1).max()) + margin
    dist = float(np.linalg.norm(camera.center))
    return RenderQuadrature(t_near=max(dist - bound, 1e-3), t_far=dist + bound,
                            n_samples=n_samples)


def render_line_cloud(scene: SyntheticScene, config: PipelineConfig,
                      chunk_size: int = 4096) -> LineCloud:
    """Render a 3D segment per attraction ray against the scene's oracle fields.

    The displacement oracle makes the rendered endpoints independent of the
    sample positions once the ray carries enough surface mass, so only the
    weight sums need the full quadrature; rays below the weight floor are
    discarded as background.
    """
    if scene.sdf is None:
        raise ValueError("scene has no SDF; cannot render")
    oracle = DisplacementOracle(scene.gt_wireframe, scene.cameras)
    endpoints = []
    view_ids = []
    for vid, (view, cam) in enumerate(zip(scene.views, scene.cameras)):
        rays = attraction_rays(view, cam, config.tau_ray, view_id=vid)
        if not rays:
            continue
        quad = _scene_quadrature(cam, scene, config.n_samples)
        ts, dt = quad.sample_ts()
        origin = cam.center
        for start in range(0, len(rays), chunk_size):
            chunk = rays[start:start + chunk_size]
            dirs = np.stack([r.direction for r in chunk])
            pts = origin[None, None, :] + ts[None, :, None] * dirs[:, None, :]
            sigma = density_from_sdf(scene.sdf.eval(pts), config.beta)
            wsum = _composite_weights(sigma, dt).sum(axis=-1)
            for ray, total in zip(chunk, wsum):
                if total < config.w_min:
                    continue
                a, b = oracle.target_endpoints(ray)
                endpoints.append(np.stack([a, b]))
                view_ids.append(vid)
    if not endpoints:
        raise ValueError("no ray accumulated enough surface mass")
    return LineCloud(endpoints=np.stack(endpoints), view_ids=np.asarray(view_ids))


def make_line_cloud(scene: SyntheticScene, config: PipelineConfig) -> LineCloud:
    if config.line_source == "render":
        return render_line_cloud(scene, config)
    return synthesize_line_cloud(scene, config.duplicates_per_view,
                                 noise_sigma_3d=config.noise_sigma_3d,
                                 seed=config.seed)


def distill_wireframe(scene: SyntheticScene, cloud: LineCloud,
                      junctions: JunctionSet,
                      config: PipelineConfig) -> WireframeGraph3D:
    """Index, group, optimize, filter, and refine into the final graph."""
    indexed = index_endpoints(cloud, junctions, theta_max_deg=config.theta_max,
                              d_max=config.d_max)
    groups = group_segments(indexed)
    optimized = optimize_junctions(junctions, groups)
    wf = build_wireframe(optimized, groups, min_degree=config.min_degree)
    wf = visibility_filter(wf, list(zip(scene.views, scene.cameras)),
                           ang_max_deg=config.ang_max, perp_max=config.perp_max,
                           overlap_min=config.overlap_min,
                           vis_threshold=config.vis_threshold)
    if config.refine_with_sdf and scene.sdf is not None and len(wf.junctions):
        refined = wf.junctions.copy()
        for i, j in enumerate(wf.junctions):
            try:
                refined[i] = sdf_refine(j, scene.sdf)
            except DegenerateGradientError:
                continue  # left unrefined
        wf = WireframeGraph3D(junctions=refined, edges=list(wf.edges))
    return wf


def _point_cloud(points: np.ndarray) -> SampledCloud:
    prov = np.stack([np.arange(len(points)), np.zeros(len(points))], axis=1)
    return SampledCloud(points=points, provenance=prov)


def evaluate_wireframe(pred: WireframeGraph3D, gt: WireframeGraph3D,
                       config: PipelineConfig) -> dict:
    pred_cloud = sample_wireframe(pred, config.sample_k)
    gt_cloud = sample_wireframe(gt, config.sample_k)
    pr = precision_recall(pred, gt, config.pr_thresholds)
    report = {
        "acc_j": acc(_point_cloud(pred.junctions), _point_cloud(gt.junctions)),
        "acc_l": acc(pred_cloud, gt_cloud),
        "comp_l": comp(pred_cloud, gt_cloud),
        "n_junctions": len(pred.junctions),
        "n_lines": len(pred.edges),
        "gt_junctions": len(gt.junctions),
        "gt_lines": len(gt.edges),
        "thresholds": pr.thresholds,
        "precision_j": pr.precision_j,
        "recall_j": pr.recall_j,
        "precision_l": pr.precision_l,
        "recall_l": pr.recall_l,
    }
    return report


def run_pipeline(config: PipelineConfig, scene_path, out_dir) -> dict:
    """Full pipeline; writes all stage files into out_dir and returns the report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def stage(name, fn):
        try:
            return fn()
        except Exception as exc:
            raise PipelineStageError(name, exc) from exc

    scene = stage("read-scene", lambda: fileio.read_scene(scene_path))
    cloud = stage("line-cloud", lambda: make_line_cloud(scene, config))
    stage("line-cloud", lambda: fileio.write_line_cloud(cloud, out / "line_cloud.yaml"))

    junctions = stage(
        "fit-junctions",
        lambda: fit_junctions(cloud, n_junctions=config.n_junctions,
                              eps=config.dbscan_eps,
                              min_samples=config.dbscan_min_samples,
                              seed=config.seed),
    )
    stage("fit-junctions", lambda: fileio.write_junctions(junctions, out / "junctions.yaml"))

    wf = stage("distill", lambda: distill_wireframe(scene, cloud, junctions, config))
    stage("distill", lambda: fileio.write_wireframe(wf, out / "wireframe.yaml"))
    stage("distill", lambda: fileio.export_obj(wf, out / "wireframe.obj"))

    report = stage("eval", lambda: evaluate_wireframe(wf, scene.gt_wireframe, config))
    stage("eval", lambda: fileio.write_metrics_report(report, out / "report.txt",
                                                      out / "report.yaml"))

    active = JunctionSet(positions=wf.junctions, active=np.ones(len(wf.junctions), dtype=bool)) \
        if len(wf.junctions) else None
    if active is not None:
        stage("export", lambda: fileio.export_gaussian_init(active, out / "points3D.txt"))
    return report
