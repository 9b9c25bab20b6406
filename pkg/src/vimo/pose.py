"""COCO-17 2D keypoint sequences: loading, gap interpolation, normalization
and windowing against paired motions.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AllMissing, DegenerateScale, SchemaError, TooShort
from .skeleton import Motion

log = logging.getLogger(__name__)

COCO_JOINT_NAMES = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
)
NUM_COCO_JOINTS = len(COCO_JOINT_NAMES)

COCO_LEFT_HIP, COCO_RIGHT_HIP = 11, 12
COCO_LEFT_SHOULDER, COCO_RIGHT_SHOULDER = 5, 6


@dataclass
class Pose2DSequence:
    """(S, 17, 3) COCO keypoints as (x, y, confidence) at a fixed fps."""

    frames: np.ndarray
    fps: float = 30.0

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[1:] != (NUM_COCO_JOINTS, 3):
            raise SchemaError(
                f"pose frames must be (S, {NUM_COCO_JOINTS}, 3), got {self.frames.shape}"
            )

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    def confidences(self) -> np.ndarray:
        return self.frames[:, :, 2]


def pose_to_dict(pose: Pose2DSequence) -> dict:
    return {
        "format": "pose2d-v1",
        "fps": pose.fps,
        "joints": list(COCO_JOINT_NAMES),
        "frames": pose.frames.tolist(),
    }


def pose_from_dict(data: dict) -> Pose2DSequence:
    if data.get("format", "pose2d-v1") != "pose2d-v1":
        raise SchemaError(f"unsupported pose format {data.get('format')!r}")
    joints = data.get("joints")
    if joints is not None and list(joints) != list(COCO_JOINT_NAMES):
        raise SchemaError("joint list does not follow the COCO-17 convention")
    frames = np.asarray(data.get("frames", []), dtype=np.float64)
    if frames.ndim != 3 or frames.shape[1:] != (NUM_COCO_JOINTS, 3):
        raise SchemaError(f"pose frames must be (S, {NUM_COCO_JOINTS}, 3), got {frames.shape}")
    conf = frames[:, :, 2]
    if np.any(conf < 0.0) or np.any(conf > 1.0):
        warnings.warn("confidence outside [0, 1]; clamping", stacklevel=2)
        frames = frames.copy()
        frames[:, :, 2] = np.clip(conf, 0.0, 1.0)
    return Pose2DSequence(frames=frames, fps=float(data.get("fps", 30.0)))


def load_pose_json(path: str | Path) -> Pose2DSequence:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return pose_from_dict(data)


def save_pose_json(pose: Pose2DSequence, path: str | Path) -> None:
    Path(path).write_text(json.dumps(pose_to_dict(pose), sort_keys=True))


def clean_sequence(pose: Pose2DSequence, conf_threshold: float = 0.3) -> Pose2DSequence:
    """Replace low-confidence joints by linear interpolation between the
    nearest valid frames of the same joint.

    Leading/trailing gaps copy the nearest valid value. Replaced joints keep
    confidence 0 so downstream encoders can mask them. Raises AllMissing when
    a joint is never valid in the window.
    """
    frames = pose.frames.copy()
    S = frames.shape[0]
    for j in range(NUM_COCO_JOINTS):
        valid = frames[:, j, 2] >= conf_threshold
        if valid.all():
            continue
        if not valid.any():
            raise AllMissing(f"joint {COCO_JOINT_NAMES[j]} has no frame above {conf_threshold}")
        valid_idx = np.nonzero(valid)[0]
        missing_idx = np.nonzero(~valid)[0]
        for axis in (0, 1):
            frames[missing_idx, j, axis] = np.interp(
                missing_idx, valid_idx, frames[valid_idx, j, axis]
            )
        frames[missing_idx, j, 2] = 0.0
    return Pose2DSequence(frames=frames, fps=pose.fps)


def normalize_condition(pose: Pose2DSequence) -> Pose2DSequence:
    """Center the hip midpoint per frame and scale so the median torso length
    (hip midpoint to shoulder midpoint) is 1. Confidence untouched.
    """
    frames = pose.frames.copy()
    hips = 0.5 * (frames[:, COCO_LEFT_HIP, :2] + frames[:, COCO_RIGHT_HIP, :2])
    shoulders = 0.5 * (frames[:, COCO_LEFT_SHOULDER, :2] + frames[:, COCO_RIGHT_SHOULDER, :2])
    torso = np.median(np.linalg.norm(shoulders - hips, axis=1))
    if torso < 1e-6:
        raise DegenerateScale(f"median torso length {torso:.2e} below tolerance")
    frames[:, :, :2] = (frames[:, :, :2] - hips[:, None, :]) / torso
    return Pose2DSequence(frames=frames, fps=pose.fps)


def window_sequence(
    pose: Pose2DSequence,
    motion: Motion,
    length: int = 150,
    stride: int | None = None,
) -> list[tuple[Pose2DSequence, Motion]]:
    """Cut aligned fixed-length windows; the trailing remainder is dropped."""
    if pose.num_frames != motion.num_frames:
        raise SchemaError(
            f"pose ({pose.num_frames}) and motion ({motion.num_frames}) are not frame-aligned"
        )
    if pose.fps != motion.fps:
        raise SchemaError("pose and motion fps differ")
    S = pose.num_frames
    if S < length:
        raise TooShort(f"sequence of {S} frames is shorter than window length {length}")
    stride = length if stride is None else int(stride)
    if stride < 1:
        raise SchemaError("stride must be >= 1")
    windows = []
    for start in range(0, S - length + 1, stride):
        windows.append(
            (
                Pose2DSequence(frames=pose.frames[start : start + length].copy(), fps=pose.fps),
                Motion(frames=motion.frames[start : start + length].copy(), fps=motion.fps),
            )
        )
    return windows
