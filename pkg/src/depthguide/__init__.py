"""Depth-guided super-resolved rendering of radiance fields.

A dense low-resolution render supplies depth and normals; these are lifted to a
sorted multi-depth map at high resolution, and the high-resolution image is
composited from a handful of field queries per pixel at those depths.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .camera import Camera, look_at
from .dense import RenderConfig, RenderOutput, render_dense
from .guided import GuidedOutput, GuidedRenderConfig, render_guided
from .metrics import ConsistencyReport, consistency_sweep, psnr, ssim
from .morphology import StructuringElement
from .normal_sr import MultiDepthMap, SRConfig, build_multi_depth
from .pipeline import PipelineConfig, profile, render_oracle, run_pipeline
from .scenes import Scene, load_scene, preset

__all__ = [
    "__version__",
    "Camera",
    "look_at",
    "RenderConfig",
    "RenderOutput",
    "render_dense",
    "GuidedOutput",
    "GuidedRenderConfig",
    "render_guided",
    "ConsistencyReport",
    "consistency_sweep",
    "psnr",
    "ssim",
    "StructuringElement",
    "MultiDepthMap",
    "SRConfig",
    "build_multi_depth",
    "PipelineConfig",
    "profile",
    "render_oracle",
    "run_pipeline",
    "Scene",
    "load_scene",
    "preset",
]
