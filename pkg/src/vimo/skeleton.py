"""Skeleton representation, 6D rotation algebra, forward kinematics and
foot-contact labelling.

The motion state is a per-frame 151-vector laid out as
``[24 joints x 6D rotation | 4 foot-contact channels | 3 root position]``.
All geometric operations are pure and dtype-generic (float32 for training,
float64 for high-precision checks).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import torch

from .errors import DegenerateRotation, NotARotation, SchemaError

NUM_JOINTS = 24
ROT_CHANNELS = NUM_JOINTS * 6        # [0, 144)
CONTACT_CHANNELS = 4                 # [144, 148)
ROOT_CHANNELS = 3                    # [148, 151)
MOTION_DIM = ROT_CHANNELS + CONTACT_CHANNELS + ROOT_CHANNELS

ROT_SLICE = slice(0, ROT_CHANNELS)
CONTACT_SLICE = slice(ROT_CHANNELS, ROT_CHANNELS + CONTACT_CHANNELS)
ROOT_SLICE = slice(ROT_CHANNELS + CONTACT_CHANNELS, MOTION_DIM)

_PARALLEL_TOL = 1e-8


@dataclass(frozen=True)
class Skeleton:
    """24-joint hierarchy with rest offsets (child relative to parent, meters).

    ``parents`` must be topologically sorted (parents[i] < i) with a single
    root at index 0 (parent -1). ``foot_joint_ids`` name the four joints whose
    up-axis velocity defines the contact channels, ordered
    (left ankle, right ankle, left toe, right toe).
    """

    joint_names: tuple[str, ...]
    parents: tuple[int, ...]
    rest_offsets: np.ndarray  # (24, 3) float64
    foot_joint_ids: tuple[int, int, int, int]
    up_axis: int = 1

    def __post_init__(self):
        if len(self.joint_names) != NUM_JOINTS or len(self.parents) != NUM_JOINTS:
            raise SchemaError(f"skeleton must have exactly {NUM_JOINTS} joints")
        if self.parents[0] != -1 or any(p < 0 for p in self.parents[1:]):
            raise SchemaError("exactly one root joint (index 0, parent -1) required")
        if any(self.parents[i] >= i for i in range(1, NUM_JOINTS)):
            raise SchemaError("parents must be topologically sorted (parents[i] < i)")
        offsets = np.asarray(self.rest_offsets, dtype=np.float64)
        if offsets.shape != (NUM_JOINTS, 3):
            raise SchemaError("rest_offsets must have shape (24, 3)")
        lengths = np.linalg.norm(offsets[1:], axis=1)
        if np.any(lengths < 1e-9):
            raise SchemaError("zero-length bone (only the root offset may be zero)")
        feet = tuple(int(j) for j in self.foot_joint_ids)
        if len(set(feet)) != 4 or any(not 0 <= j < NUM_JOINTS for j in feet):
            raise SchemaError("foot_joint_ids must be 4 distinct valid joint indices")
        if self.up_axis not in (0, 1, 2):
            raise SchemaError("up_axis must be 0, 1 or 2")
        object.__setattr__(self, "rest_offsets", offsets)
        object.__setattr__(self, "foot_joint_ids", feet)

    def bone_lengths(self) -> np.ndarray:
        """Rest bone length per joint; index 0 is the (zero) root offset."""
        return np.linalg.norm(self.rest_offsets, axis=1)

    def offsets_tensor(self, dtype=torch.float64) -> torch.Tensor:
        return torch.as_tensor(self.rest_offsets, dtype=dtype)


@dataclass
class Motion:
    """A motion window: (S, 151) frames at a fixed fps."""

    frames: np.ndarray
    fps: float = 30.0

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[1] != MOTION_DIM:
            raise SchemaError(f"motion frames must be (S, {MOTION_DIM}), got {self.frames.shape}")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    def rotations(self) -> np.ndarray:
        """(S, 24, 6) view of the rotation channels."""
        return self.frames[:, ROT_SLICE].reshape(-1, NUM_JOINTS, 6)

    def contacts(self) -> np.ndarray:
        return self.frames[:, CONTACT_SLICE]

    def root_positions(self) -> np.ndarray:
        return self.frames[:, ROOT_SLICE]


def skeleton_to_dict(skeleton: Skeleton) -> dict:
    return {
        "format": "skeleton-v1",
        "joint_names": list(skeleton.joint_names),
        "parents": list(skeleton.parents),
        "rest_offsets": [[float(v) for v in row] for row in skeleton.rest_offsets],
        "foot_joint_ids": list(skeleton.foot_joint_ids),
        "up_axis": skeleton.up_axis,
    }


def skeleton_from_dict(data: dict) -> Skeleton:
    if data.get("format", "skeleton-v1") != "skeleton-v1":
        raise SchemaError(f"unsupported skeleton format {data.get('format')!r}")
    try:
        return Skeleton(
            joint_names=tuple(data["joint_names"]),
            parents=tuple(int(p) for p in data["parents"]),
            rest_offsets=np.asarray(data["rest_offsets"], dtype=np.float64),
            foot_joint_ids=tuple(int(j) for j in data["foot_joint_ids"]),
            up_axis=int(data.get("up_axis", 1)),
        )
    except KeyError as exc:
        raise SchemaError(f"skeleton file missing field {exc}") from exc


def load_skeleton(path: str | Path | None = None) -> Skeleton:
    """Load a skeleton asset; the bundled canonical 24-joint body by default."""
    if path is None:
        text = resources.files("vimo.assets").joinpath("skeleton_smpl24.json").read_text()
    else:
        text = Path(path).read_text()
    return skeleton_from_dict(json.loads(text))


def save_skeleton(skeleton: Skeleton, path: str | Path) -> None:
    Path(path).write_text(json.dumps(skeleton_to_dict(skeleton), indent=2, sort_keys=True))


# -- rotation algebra --------------------------------------------------------

def rot6d_to_matrix(r: torch.Tensor) -> torch.Tensor:
    """Orthonormalize a 6D rotation (..., 6) into a matrix (..., 3, 3).

    Gram-Schmidt on the two column vectors; the third column is their cross
    product, so the result is a proper rotation (det +1).
    """
    r = torch.as_tensor(r)
    if r.shape[-1] != 6:
        raise DegenerateRotation(f"expected trailing dim 6, got {r.shape[-1]}")
    a, b = r[..., 0:3], r[..., 3:6]
    a_norm = torch.linalg.norm(a, dim=-1, keepdim=True)
    if bool((a_norm < _PARALLEL_TOL).any()):
        raise DegenerateRotation("first 6D column has (near-)zero norm")
    c0 = a / a_norm
    b_perp = b - (c0 * b).sum(-1, keepdim=True) * c0
    b_norm = torch.linalg.norm(b_perp, dim=-1, keepdim=True)
    if bool((b_norm < _PARALLEL_TOL).any()):
        raise DegenerateRotation("6D columns are parallel within tolerance")
    c1 = b_perp / b_norm
    c2 = torch.linalg.cross(c0, c1, dim=-1)
    return torch.stack((c0, c1, c2), dim=-1)


def matrix_to_rot6d(matrix: torch.Tensor, tol: float = 1e-6) -> torch.Tensor:
    """First two columns of a verified rotation matrix, flattened to (..., 6)."""
    matrix = torch.as_tensor(matrix)
    if matrix.shape[-2:] != (3, 3):
        raise NotARotation(f"expected (..., 3, 3), got {tuple(matrix.shape)}")
    eye = torch.eye(3, dtype=matrix.dtype, device=matrix.device)
    gram_err = (matrix.transpose(-1, -2) @ matrix - eye).abs().max()
    det_err = (torch.linalg.det(matrix) - 1.0).abs().max()
    if float(gram_err) > tol or float(det_err) > tol:
        raise NotARotation(
            f"orthonormality/determinant check failed (gram {float(gram_err):.2e}, det {float(det_err):.2e})"
        )
    return torch.cat((matrix[..., :, 0], matrix[..., :, 1]), dim=-1)


# -- forward kinematics -------------------------------------------------------

def forward_kinematics(frames: torch.Tensor | np.ndarray, skeleton: Skeleton) -> torch.Tensor:
    """World-space joint positions (..., S, 24, 3) from motion frames (..., S, 151).

    The root takes its position channel directly; every child sits at
    ``parent_position + parent_global_rotation @ rest_offset``.
    """
    frames = torch.as_tensor(frames)
    if frames.shape[-1] != MOTION_DIM:
        raise SchemaError(f"expected trailing dim {MOTION_DIM}, got {frames.shape[-1]}")
    rot6d = frames[..., ROT_SLICE].reshape(*frames.shape[:-1], NUM_JOINTS, 6)
    local = rot6d_to_matrix(rot6d)  # (..., S, 24, 3, 3)
    root_pos = frames[..., ROOT_SLICE]

    offsets = skeleton.offsets_tensor(dtype=frames.dtype).to(frames.device)
    global_rot: list[torch.Tensor] = [local[..., 0, :, :]]
    positions: list[torch.Tensor] = [root_pos]
    for j in range(1, NUM_JOINTS):
        p = skeleton.parents[j]
        parent_rot = global_rot[p]
        positions.append(positions[p] + torch.einsum("...ij,j->...i", parent_rot, offsets[j]))
        global_rot.append(parent_rot @ local[..., j, :, :])
    return torch.stack(positions, dim=-2)


def motion_positions(motion: Motion, skeleton: Skeleton) -> np.ndarray:
    """Convenience wrapper: FK of a Motion as a float64 numpy array (S, 24, 3)."""
    return forward_kinematics(torch.from_numpy(motion.frames), skeleton).numpy()


def compute_foot_contacts(
    positions: torch.Tensor | np.ndarray,
    skeleton: Skeleton,
    vel_threshold: float = 0.01,
) -> np.ndarray:
    """Binary (S, 4) contact labels from up-axis foot velocities.

    A foot is in contact between frames s and s+1 when the magnitude of its
    up-axis displacement is below ``vel_threshold`` (meters/frame). The last
    frame copies the previous label.
    """
    pos = np.asarray(positions.detach().numpy() if torch.is_tensor(positions) else positions)
    if pos.ndim != 3 or pos.shape[0] < 2:
        raise SchemaError("positions must be (S, 24, 3) with S >= 2")
    feet = list(skeleton.foot_joint_ids)
    heights = pos[:, feet, skeleton.up_axis]            # (S, 4)
    vel = np.abs(np.diff(heights, axis=0))              # (S-1, 4)
    labels = np.zeros((pos.shape[0], 4), dtype=np.float64)
    labels[:-1] = (vel < vel_threshold).astype(np.float64)
    labels[-1] = labels[-2]
    return labels
