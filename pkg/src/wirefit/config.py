"""Pipeline configuration with defaults, file loading, and CLI overrides."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import yaml


@dataclass
class PipelineConfig:
    tau_ray: float = 5.0
    beta: float = 1e-3
    n_samples: int = 256
    n_junctions: int = 1024
    dbscan_eps: float = 0.01
    dbscan_min_samples: int = 2
    theta_max: float = 10.0
    d_max: float = 0.01
    ang_max: float = 10.0
    perp_max: float = 5.0
    overlap_min: float = 0.5
    vis_threshold: int = 1
    lambda_2d: float = 0.01
    seed: int = 0
    # Artifact plumbing beyond the core thresholds.
    line_source: str = "synth"  # "synth" or "render"
    duplicates_per_view: int = 5
    noise_sigma_3d: float = 0.0
    w_min: float = 0.5
    min_degree: int = 1
    refine_with_sdf: bool = True
    sample_k: int = 32
    pr_thresholds: list = field(default_factory=lambda: [0.01, 0.02, 0.05])

    def __post_init__(self):
        if self.tau_ray <= 0 or self.beta <= 0:
            raise ValueError("tau_ray and beta must be positive")
        if self.n_samples < 2 or self.n_junctions < 1:
            raise ValueError("n_samples >= 2 and n_junctions >= 1 required")
        if self.dbscan_eps <= 0 or self.dbscan_min_samples < 1:
            raise ValueError("invalid clustering parameters")
        if not 0.0 <= self.overlap_min <= 1.0:
            raise ValueError("overlap_min must be a ratio")
        if self.vis_threshold < 1 or self.min_degree < 1:
            raise ValueError("vis_threshold and min_degree must be >= 1")
        if self.line_source not in ("synth", "render"):
            raise ValueError("line_source must be 'synth' or 'render'")
        if self.duplicates_per_view < 1:
            raise ValueError("duplicates_per_view must be >= 1")
        if not 0.0 < self.w_min <= 1.0:
            raise ValueError("w_min must be in (0, 1]")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            key = "lambda" if f.name == "lambda_2d" else f.name
            out[key] = getattr(self, f.name)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = "lambda_2d" if key == "lambda" else key
            if name not in known:
                raise ValueError(f"unknown config field {key!r}")
            kwargs[name] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a mapping")
        return cls.from_dict(data)

    def replaced(self, **overrides) -> "PipelineConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update({k: v for k, v in overrides.items() if v is not None})
        return PipelineConfig(**data)
