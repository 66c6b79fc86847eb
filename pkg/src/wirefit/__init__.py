"""Parsimonious 3D wireframe reconstruction from multi-view 2D observations."""

from .config import PipelineConfig
from .geometry import (
    Camera,
    LineCloud,
    LineSegment2D,
    LineSegment3D,
    WireframeGraph2D,
    WireframeGraph3D,
)
from .junctions import JunctionSet
from .pipeline import run_pipeline

__all__ = [
    "Camera",
    "JunctionSet",
    "LineCloud",
    "LineSegment2D",
    "LineSegment3D",
    "PipelineConfig",
    "WireframeGraph2D",
    "WireframeGraph3D",
    "run_pipeline",
]

__version__ = "0.1.0"
