"""Motion completion and editing via masked denoising.

Masked entries of the output are held to forward-diffused samples of a
reference motion at every denoising step, so constrained regions reproduce
the reference exactly while the rest is regenerated (in-between, in-fill,
blending, or arbitrary per-channel masks).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .diffusion import DiffusionSchedule, SamplerConfig, sample_frames
from .errors import BadRange, ShapeMismatch
from .model import DenoiserNet
from .pose import Pose2DSequence
from .skeleton import MOTION_DIM, Motion


@dataclass
class MaskSpec:
    """Binary (S, 151) mask; 1 = constrained to the reference."""

    mask: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        self.mask = np.asarray(self.mask)
        if self.mask.ndim != 2 or self.mask.shape[1] != MOTION_DIM:
            raise ShapeMismatch(f"mask must be (S, {MOTION_DIM}), got {self.mask.shape}")
        if not np.isin(self.mask, (0, 1)).all():
            raise BadRange("mask entries must be 0 or 1")
        self.mask = self.mask.astype(np.float64)

    @property
    def num_frames(self) -> int:
        return self.mask.shape[0]


def build_inbetween_mask(num_frames: int, n_head: int, n_tail: int) -> MaskSpec:
    """Constrain the first ``n_head`` and last ``n_tail`` frames."""
    if n_head < 0 or n_tail < 0 or n_head + n_tail >= num_frames:
        raise BadRange(
            f"need 0 <= n_head + n_tail < {num_frames}, got {n_head} + {n_tail}"
        )
    mask = np.zeros((num_frames, MOTION_DIM))
    mask[:n_head] = 1.0
    if n_tail > 0:
        mask[num_frames - n_tail:] = 1.0
    return MaskSpec(mask=mask, kind="in_between")


def build_infill_mask(num_frames: int, hole: tuple[int, int]) -> MaskSpec:
    """Constrain everything outside the half-open frame interval ``hole``."""
    start, end = hole
    if not (0 <= start <= end <= num_frames):
        raise BadRange(f"hole {hole} not within [0, {num_frames})")
    mask = np.ones((num_frames, MOTION_DIM))
    mask[start:end] = 0.0
    return MaskSpec(mask=mask, kind="in_fill")


@dataclass
class EditRequest:
    reference: Motion
    mask: MaskSpec
    condition: Pose2DSequence | None = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self):
        if self.reference.num_frames != self.mask.num_frames:
            raise ShapeMismatch(
                f"reference ({self.reference.num_frames}) and mask "
                f"({self.mask.num_frames}) lengths differ"
            )
        if self.condition is not None and self.condition.num_frames != self.mask.num_frames:
            raise ShapeMismatch("condition length must match the mask")


def complete(request: EditRequest, model: DenoiserNet, schedule: DiffusionSchedule) -> Motion:
    """Regenerate the unmasked region of the reference under the condition."""
    ref = torch.as_tensor(request.reference.frames)
    frames = sample_frames(
        model,
        request.condition,
        schedule,
        request.sampler,
        num_frames=request.reference.num_frames,
        constraint=(ref, request.mask.mask),
    ).double().numpy()
    # the t=0 forward diffusion is the identity: splice the reference in at
    # full precision so constrained entries match it exactly
    constrained = request.mask.mask.astype(bool)
    frames[constrained] = request.reference.frames[constrained]
    return Motion(frames=frames, fps=request.reference.fps)
