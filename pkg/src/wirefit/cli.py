"""Command-line pipeline driver.

Subcommands mirror the pipeline stages; each consumes the previous stage's
file, so any prefix of the pipeline is resumable.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields as dc_fields
from pathlib import Path

from . import fileio
from .config import PipelineConfig
from .junctions import fit_junctions
from .pipeline import (
    PipelineStageError,
    distill_wireframe,
    evaluate_wireframe,
    make_line_cloud,
    run_pipeline,
)
from .synth import CorruptionSpec, make_cube_scene


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="YAML config file")
    for f in dc_fields(PipelineConfig):
        flag = "--" + ("lambda" if f.name == "lambda_2d" else f.name).replace("_", "-")
        if f.type == "bool" or isinstance(f.default, bool):
            parser.add_argument(flag, dest=f.name, default=None,
                                action=argparse.BooleanOptionalAction)
        elif f.name == "pr_thresholds":
            parser.add_argument(flag, dest=f.name, default=None, type=float, nargs="+")
        else:
            typ = float if "float" in str(f.type) else (str if f.name == "line_source" else int)
            parser.add_argument(flag, dest=f.name, default=None, type=typ)


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    base = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    overrides = {f.name: getattr(args, f.name, None) for f in dc_fields(PipelineConfig)}
    return base.replaced(**overrides)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wirefit",
                                     description="3D wireframe reconstruction pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic scene file")
    p.add_argument("scene", type=Path)
    p.add_argument("--views", type=int, default=20)
    p.add_argument("--resolution", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--occlusion", action="store_true")
    p.add_argument("--corrupt-sigma", type=float, default=0.0)
    p.add_argument("--corrupt-drop", type=float, default=0.0)
    p.add_argument("--corrupt-split", type=float, default=0.0)

    p = sub.add_parser("render-lines", help="scene -> line cloud")
    p.add_argument("scene", type=Path)
    p.add_argument("cloud", type=Path)
    _add_config_flags(p)

    p = sub.add_parser("fit-junctions", help="line cloud -> global junctions")
    p.add_argument("cloud", type=Path)
    p.add_argument("junctions", type=Path)
    _add_config_flags(p)

    p = sub.add_parser("distill", help="scene + cloud + junctions -> wireframe")
    p.add_argument("scene", type=Path)
    p.add_argument("cloud", type=Path)
    p.add_argument("junctions", type=Path)
    p.add_argument("wireframe", type=Path)
    p.add_argument("--obj", type=Path, help="also export an OBJ copy")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="wireframe vs. scene ground truth -> report")
    p.add_argument("scene", type=Path)
    p.add_argument("wireframe", type=Path)
    p.add_argument("report", type=Path, help="text report path (.yaml twin written alongside)")
    _add_config_flags(p)

    p = sub.add_parser("export-gaussian-init", help="junctions -> points3D text file")
    p.add_argument("junctions", type=Path)
    p.add_argument("output", type=Path)

    p = sub.add_parser("run", help="full pipeline into an output directory")
    p.add_argument("scene", type=Path)
    p.add_argument("out_dir", type=Path)
    _add_config_flags(p)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (PipelineStageError, fileio.ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "gen":
        corruption = None
        if args.corrupt_sigma > 0 or args.corrupt_drop > 0 or args.corrupt_split > 0:
            corruption = CorruptionSpec(endpoint_noise_sigma=args.corrupt_sigma,
                                        drop_rate=args.corrupt_drop,
                                        split_rate=args.corrupt_split,
                                        seed=args.seed)
        scene = make_cube_scene(n_views=args.views, resolution=args.resolution,
                                seed=args.seed, occlusion=args.occlusion,
                                corruption=corruption)
        fileio.write_scene(scene, args.scene)
        print(f"wrote {args.scene}")
        return 0

    if args.command == "render-lines":
        config = _config_from_args(args)
        scene = fileio.read_scene(args.scene)
        cloud = make_line_cloud(scene, config)
        fileio.write_line_cloud(cloud, args.cloud)
        print(f"wrote {args.cloud} ({len(cloud)} segments)")
        return 0

    if args.command == "fit-junctions":
        config = _config_from_args(args)
        cloud = fileio.read_line_cloud(args.cloud)
        junctions = fit_junctions(cloud, n_junctions=config.n_junctions,
                                  eps=config.dbscan_eps,
                                  min_samples=config.dbscan_min_samples,
                                  seed=config.seed)
        fileio.write_junctions(junctions, args.junctions)
        print(f"wrote {args.junctions} ({int(junctions.active.sum())} active)")
        return 0

    if args.command == "distill":
        config = _config_from_args(args)
        scene = fileio.read_scene(args.scene)
        cloud = fileio.read_line_cloud(args.cloud)
        junctions = fileio.read_junctions(args.junctions)
        wf = distill_wireframe(scene, cloud, junctions, config)
        fileio.write_wireframe(wf, args.wireframe)
        if args.obj:
            fileio.export_obj(wf, args.obj)
        print(f"wrote {args.wireframe} ({len(wf.junctions)} junctions, {len(wf.edges)} lines)")
        return 0

    if args.command == "eval":
        config = _config_from_args(args)
        scene = fileio.read_scene(args.scene)
        wf = fileio.read_wireframe(args.wireframe)
        report = evaluate_wireframe(wf, scene.gt_wireframe, config)
        fileio.write_metrics_report(report, args.report,
                                    args.report.with_suffix(".yaml"))
        print(f"wrote {args.report}")
        return 0

    if args.command == "export-gaussian-init":
        junctions = fileio.read_junctions(args.junctions)
        fileio.export_gaussian_init(junctions, args.output)
        print(f"wrote {args.output}")
        return 0

    if args.command == "run":
        config = _config_from_args(args)
        report = run_pipeline(config, args.scene, args.out_dir)
        for tau, p, r in zip(report["thresholds"], report["precision_l"], report["recall_l"]):
            print(f"lines @ {tau}: P={p:.3f} R={r:.3f}")
        print(f"ACC-J {report['acc_j']:.6g}  ACC-L {report['acc_l']:.6g}")
        return 0

    raise ValueError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
