"""Deterministic stick-figure rendering of motions to numbered PNG frames."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image, ImageDraw

from .errors import ConfigError
from .pose import Pose2DSequence
from .skeleton import Motion, Skeleton, forward_kinematics
from .synth import orbit_camera_track, project_points

BONE_COLOR = (40, 90, 200)
JOINT_COLOR = (220, 60, 40)
OVERLAY_COLOR = (30, 180, 90)


@dataclass
class RenderSpec:
    azimuth_deg: float = 40.0
    elevation_deg: float = 15.0
    distance: float = 3.5
    target: tuple[float, float, float] = (0.0, 0.9, 0.0)
    image_size: tuple[int, int] = (640, 480)
    focal: float = 500.0
    frame_stride: int = 1
    mode: str = "perspective"
    overlay_condition: bool = False

    def __post_init__(self):
        w, h = self.image_size
        if w <= 0 or h <= 0:
            raise ConfigError("image size must be positive")
        if self.frame_stride < 1:
            raise ConfigError("frame stride must be >= 1")
        if self.mode not in ("perspective", "orthographic"):
            raise ConfigError(f"unknown projection mode {self.mode!r}")


def project_for_render(points: np.ndarray, spec: RenderSpec) -> np.ndarray:
    """Project (S, J, 3) world points to pixels under the render camera."""
    S = points.shape[0]
    w, h = spec.image_size
    cam = orbit_camera_track(
        S, spec.azimuth_deg, spec.elevation_deg, spec.distance,
        target=spec.target, focal=spec.focal, principal=(w / 2.0, h / 2.0),
    )
    if spec.mode == "perspective":
        uv, _depth = project_points(points, cam)
        return uv
    # orthographic: rotate into the camera frame, drop depth, scale by
    # focal/distance pixels-per-meter
    rotated = np.einsum("sij,skj->ski", cam.rotations, points) + cam.translations[:, None, :]
    scale = spec.focal / spec.distance
    return rotated[..., :2] * scale + np.array([w / 2.0, h / 2.0])


def render_motion(
    motion: Motion,
    skeleton: Skeleton,
    spec: RenderSpec,
    out_dir: str | Path,
    condition: Pose2DSequence | None = None,
) -> list[Path]:
    """Write one PNG per sampled frame; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    positions = forward_kinematics(torch.from_numpy(motion.frames), skeleton).numpy()
    uv = project_for_render(positions, spec)
    w, h = spec.image_size
    paths = []
    for s in range(0, motion.num_frames, spec.frame_stride):
        img = Image.new("RGB", (w, h), (255, 255, 255))
        draw = ImageDraw.Draw(img)
        for j in range(1, len(skeleton.parents)):
            p = skeleton.parents[j]
            draw.line(
                [tuple(uv[s, p]), tuple(uv[s, j])], fill=BONE_COLOR, width=2
            )
        for j in range(len(skeleton.parents)):
            x, y = uv[s, j]
            draw.ellipse([x - 3, y - 3, x + 3, y + 3], fill=JOINT_COLOR)
        if spec.overlay_condition and condition is not None and s < condition.num_frames:
            for x, y, conf in condition.frames[s]:
                if conf > 0:
                    draw.line([(x - 4, y), (x + 4, y)], fill=OVERLAY_COLOR, width=1)
                    draw.line([(x, y - 4), (x, y + 4)], fill=OVERLAY_COLOR, width=1)
        path = out / f"frame_{s:06d}.png"
        img.save(path)
        paths.append(path)
    return paths
