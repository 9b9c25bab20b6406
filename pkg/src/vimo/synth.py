"""Synthetic casual-video training data.

Procedural 3D motions (walk / wave / spin / jump) built in rotation space,
pinhole cameras with optional hard cuts, COCO-17 projection of the 24-joint
body, and an occlusion model. Every generator is a deterministic function of
its seed and exposes ground-truth metadata (stance phase, beat frames,
periods) so tests can use it as an oracle.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import BadKind, SchemaError
from .pose import Pose2DSequence, save_pose_json
from .skeleton import (
    CONTACT_SLICE,
    MOTION_DIM,
    NUM_JOINTS,
    Motion,
    Skeleton,
    compute_foot_contacts,
    forward_kinematics,
    matrix_to_rot6d,
)

MOTION_KINDS = ("walk", "wave", "spin", "jump")

# SMPL-24 joint indices used throughout the generators.
PELVIS, L_HIP, R_HIP, SPINE1 = 0, 1, 2, 3
L_KNEE, R_KNEE, SPINE2 = 4, 5, 6
L_ANKLE, R_ANKLE, SPINE3 = 7, 8, 9
L_TOE, R_TOE, NECK = 10, 11, 12
L_COLLAR, R_COLLAR, HEAD = 13, 14, 15
L_SHOULDER, R_SHOULDER = 16, 17
L_ELBOW, R_ELBOW = 18, 19
L_WRIST, R_WRIST = 20, 21

_UPPER_LEG = 0.38
_LOWER_LEG = 0.40


def _rx(angles: np.ndarray) -> np.ndarray:
    a = np.asarray(angles, dtype=np.float64)
    c, s = np.cos(a), np.sin(a)
    out = np.zeros(a.shape + (3, 3))
    out[..., 0, 0] = 1.0
    out[..., 1, 1], out[..., 1, 2] = c, -s
    out[..., 2, 1], out[..., 2, 2] = s, c
    return out


def _ry(angles: np.ndarray) -> np.ndarray:
    a = np.asarray(angles, dtype=np.float64)
    c, s = np.cos(a), np.sin(a)
    out = np.zeros(a.shape + (3, 3))
    out[..., 1, 1] = 1.0
    out[..., 0, 0], out[..., 0, 2] = c, s
    out[..., 2, 0], out[..., 2, 2] = -s, c
    return out


def _rz(angles: np.ndarray) -> np.ndarray:
    a = np.asarray(angles, dtype=np.float64)
    c, s = np.cos(a), np.sin(a)
    out = np.zeros(a.shape + (3, 3))
    out[..., 2, 2] = 1.0
    out[..., 0, 0], out[..., 0, 1] = c, -s
    out[..., 1, 0], out[..., 1, 1] = s, c
    return out


def _leg_ik(dy: np.ndarray, dz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Planar two-link leg IK in the sagittal (Y, Z) plane.

    Targets are ankle offsets relative to the hip (dy < 0 down, dz forward).
    Returns local X-rotation angles (hip, knee) with the knee bending backward.
    """
    dy = np.asarray(dy, dtype=np.float64)
    dz = np.asarray(dz, dtype=np.float64)
    l1, l2 = _UPPER_LEG, _LOWER_LEG
    d = np.sqrt(dy * dy + dz * dz)
    d = np.clip(d, abs(l1 - l2) + 1e-6, l1 + l2 - 1e-6)
    psi = np.arctan2(dz, -dy)  # swing of the hip->ankle line, forward positive
    gamma1 = np.arccos(np.clip((l1 * l1 + d * d - l2 * l2) / (2 * l1 * d), -1.0, 1.0))
    gamma2 = np.arccos(np.clip((l2 * l2 + d * d - l1 * l1) / (2 * l2 * d), -1.0, 1.0))
    sigma1 = psi + gamma1          # upper-leg swing (knee forward of the line)
    sigma2 = psi - gamma2          # lower-leg swing
    hip = -sigma1                  # local Rx angle: positive Rx swings backward
    knee = sigma1 - sigma2
    return hip, knee


def _identity_rotations(num_frames: int) -> np.ndarray:
    rots = np.zeros((num_frames, NUM_JOINTS, 3, 3))
    rots[:, :] = np.eye(3)
    return rots


def _assemble_motion(
    local_rots: np.ndarray,
    root_pos: np.ndarray,
    skeleton: Skeleton,
    fps: float = 30.0,
    vel_threshold: float = 0.01,
) -> Motion:
    """Pack local rotations + root track into a Motion; contacts from FK."""
    S = local_rots.shape[0]
    rot6d = matrix_to_rot6d(torch.from_numpy(local_rots)).numpy().reshape(S, NUM_JOINTS * 6)
    frames = np.concatenate([rot6d, np.zeros((S, 4)), root_pos], axis=1)
    positions = forward_kinematics(torch.from_numpy(frames), skeleton)
    frames[:, CONTACT_SLICE] = compute_foot_contacts(positions, skeleton, vel_threshold)
    return Motion(frames=frames, fps=fps)


def _stance_targets(phase: np.ndarray, duty: float, amp: float, dy_stance: float, lift: float):
    """Per-frame ankle target (dy, dz) relative to the hip plus stance flags."""
    in_stance = phase < duty
    dz = np.empty_like(phase)
    dy = np.empty_like(phase)
    u_st = phase / duty
    u_sw = (phase - duty) / (1.0 - duty)
    dz[in_stance] = amp * (1.0 - 2.0 * u_st[in_stance])
    dy[in_stance] = dy_stance
    dz[~in_stance] = -amp * np.cos(np.pi * u_sw[~in_stance])
    dy[~in_stance] = dy_stance + lift * np.sin(np.pi * u_sw[~in_stance]) ** 2
    return dy, dz, in_stance


def _walk(rng: np.random.Generator, length: int, skeleton: Skeleton, fps: float):
    s = np.arange(length, dtype=np.float64)
    period = int(rng.integers(22, 35))
    duty = 0.6
    amp = float(rng.uniform(0.15, 0.26))
    lift = float(rng.uniform(0.10, 0.15))   # high enough that swing velocity
    # clears the 0.01 m/frame contact threshold through most of the swing
    arm_amp = float(rng.uniform(0.3, 0.7))
    root_y = 0.88
    dy_stance = 0.07 - (root_y - 0.09)     # constant stance ankle height 0.07 m

    phase_l = (s / period) % 1.0
    phase_r = (s / period + 0.5) % 1.0
    dy_l, dz_l, stance_l = _stance_targets(phase_l, duty, amp, dy_stance, lift)
    dy_r, dz_r, stance_r = _stance_targets(phase_r, duty, amp, dy_stance, lift)
    hip_l, knee_l = _leg_ik(dy_l, dz_l)
    hip_r, knee_r = _leg_ik(dy_r, dz_r)

    rots = _identity_rotations(length)
    rots[:, L_HIP] = _rx(hip_l)
    rots[:, R_HIP] = _rx(hip_r)
    rots[:, L_KNEE] = _rx(knee_l)
    rots[:, R_KNEE] = _rx(knee_r)
    rots[:, L_ANKLE] = _rx(-(hip_l + knee_l))    # keep feet world-flat
    rots[:, R_ANKLE] = _rx(-(hip_r + knee_r))

    swing = 2.0 * np.pi * s / period
    down_l, down_r = -1.35, -1.35
    rots[:, L_SHOULDER] = _rx(arm_amp * np.sin(swing + np.pi)) @ _rz(np.full(length, down_l))
    rots[:, R_SHOULDER] = _rx(arm_amp * np.sin(swing)) @ _rz(np.full(length, down_r))
    rots[:, SPINE2] = _ry(0.04 * np.sin(swing))

    speed = 2.0 * amp / (duty * period)          # world-static stance feet
    root = np.zeros((length, 3))
    root[:, 1] = root_y
    root[:, 2] = speed * (s - length / 2.0)      # centered so cameras keep the subject
    motion = _assemble_motion(rots, root, skeleton, fps)

    stance = np.stack([stance_l, stance_r, stance_l, stance_r], axis=1)
    beats = sorted(
        set(np.nonzero(np.diff(stance_l.astype(int)) == 1)[0] + 1)
        | set(np.nonzero(np.diff(stance_r.astype(int)) == 1)[0] + 1)
    )
    meta = {
        "kind": "walk",
        "period_frames": period,
        "duty": duty,
        "step_amplitude": amp,
        "lift": lift,
        "root_speed": speed,
        "stance": stance,
        "beat_frames": [int(b) for b in beats],
    }
    return motion, meta


def _wave(rng: np.random.Generator, length: int, skeleton: Skeleton, fps: float):
    s = np.arange(length, dtype=np.float64)
    period = int(rng.integers(16, 26))
    wave_amp = float(rng.uniform(0.35, 0.6))
    sway_amp = float(rng.uniform(0.02, 0.05))

    rots = _identity_rotations(length)
    rots[:, L_SHOULDER] = _rz(np.full(length, -1.35))    # arm down
    rots[:, R_SHOULDER] = _rz(np.full(length, -1.75))    # arm up
    rots[:, R_ELBOW] = _rz(wave_amp * np.sin(2.0 * np.pi * s / period))
    rots[:, SPINE1] = _rz(sway_amp * np.sin(2.0 * np.pi * s / (2 * period)))

    root = np.zeros((length, 3))
    root[:, 1] = 0.93
    motion = _assemble_motion(rots, root, skeleton, fps)
    beats = [int(b) for b in np.arange(period // 4, length, period / 2.0).astype(int)]
    meta = {
        "kind": "wave",
        "period_frames": period,
        "wave_amplitude": wave_amp,
        "beat_frames": beats,
        "stance": np.ones((length, 4), dtype=bool),
    }
    return motion, meta


def _spin(rng: np.random.Generator, length: int, skeleton: Skeleton, fps: float):
    s = np.arange(length, dtype=np.float64)
    turns = float(rng.uniform(1.5, 2.5)) * float(rng.choice([-1.0, 1.0]))
    total_yaw = turns * 2.0 * np.pi
    arm_lift = float(rng.uniform(0.2, 0.5))

    rots = _identity_rotations(length)
    rots[:, PELVIS] = _ry(total_yaw * s / length)
    rots[:, L_SHOULDER] = _rz(np.full(length, -1.35 + arm_lift))
    rots[:, R_SHOULDER] = _rz(np.full(length, -1.35 - arm_lift))
    rots[:, HEAD] = _ry(0.1 * np.sin(4.0 * np.pi * s / length))

    root = np.zeros((length, 3))
    root[:, 1] = 0.93
    motion = _assemble_motion(rots, root, skeleton, fps)
    meta = {
        "kind": "spin",
        "total_yaw": total_yaw,
        "beat_frames": [],
        "stance": np.ones((length, 4), dtype=bool),
    }
    return motion, meta


def _jump(rng: np.random.Generator, length: int, skeleton: Skeleton, fps: float):
    s = np.arange(length, dtype=np.float64)
    period = int(rng.integers(32, 45))
    air_frac = float(rng.uniform(0.25, 0.35))
    height = float(rng.uniform(0.10, 0.20))
    crouch = float(rng.uniform(0.08, 0.14))
    root_y0 = 0.92

    phase = (s / period) % 1.0
    airborne = phase >= (1.0 - air_frac)
    u_ground = phase / (1.0 - air_frac)
    u_air = (phase - (1.0 - air_frac)) / air_frac

    root_y = np.where(
        airborne,
        root_y0 + height * 4.0 * u_air * (1.0 - u_air),
        root_y0 - crouch * np.sin(np.pi * np.clip(u_ground, 0.0, 1.0)) ** 2,
    )
    hip_y = root_y - 0.09
    ankle_y = np.where(airborne, hip_y + (0.07 - (root_y0 - 0.09)), 0.07)
    dy = ankle_y - hip_y
    hip_a, knee_a = _leg_ik(dy, np.zeros_like(dy))

    rots = _identity_rotations(length)
    rots[:, L_HIP] = _rx(hip_a)
    rots[:, R_HIP] = _rx(hip_a)
    rots[:, L_KNEE] = _rx(knee_a)
    rots[:, R_KNEE] = _rx(knee_a)
    rots[:, L_ANKLE] = _rx(-(hip_a + knee_a))
    rots[:, R_ANKLE] = _rx(-(hip_a + knee_a))
    rots[:, L_SHOULDER] = _rz(np.full(length, -1.2)) @ _rx(0.4 * np.sin(2 * np.pi * phase))
    rots[:, R_SHOULDER] = _rz(np.full(length, -1.2)) @ _rx(0.4 * np.sin(2 * np.pi * phase))

    root = np.zeros((length, 3))
    root[:, 1] = root_y
    motion = _assemble_motion(rots, root, skeleton, fps)

    stance_col = ~airborne
    landings = np.nonzero(np.diff(airborne.astype(int)) == -1)[0] + 1
    meta = {
        "kind": "jump",
        "period_frames": period,
        "air_fraction": air_frac,
        "jump_height": height,
        "airborne": airborne,
        "stance": np.stack([stance_col] * 4, axis=1),
        "beat_frames": [int(b) for b in landings],
    }
    return motion, meta


_GENERATORS = {"walk": _walk, "wave": _wave, "spin": _spin, "jump": _jump}


def synth_motion(
    kind: str,
    seed: int,
    length: int = 150,
    skeleton: Skeleton | None = None,
    fps: float = 30.0,
) -> tuple[Motion, dict]:
    """Generate a deterministic procedural motion plus ground-truth metadata.

    Metadata keys common to all kinds: ``kind``, ``beat_frames`` (footfall /
    rhythm frames) and ``stance`` (S, 4 per-channel ground-truth contact).
    """
    if kind not in _GENERATORS:
        raise BadKind(f"unknown motion kind {kind!r}; expected one of {MOTION_KINDS}")
    if skeleton is None:
        from .skeleton import load_skeleton

        skeleton = load_skeleton()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, hash(kind) & 0xFFFF)))
    motion, meta = _GENERATORS[kind](rng, int(length), skeleton, fps)
    meta["seed"] = int(seed)
    return motion, meta


# -- COCO-17 projection of the 24-joint body ----------------------------------

def coco17_from_joints(positions: np.ndarray) -> np.ndarray:
    """Map 24-joint world positions (..., 24, 3) to the COCO-17 set.

    Limb joints map one-to-one. The face points, which have no direct
    counterpart, are fixed linear combinations of head/neck/collar joints:

    ==========  =============================================
    nose        head + 0.30 (head - neck)
    eyes        head + 0.40 (head - neck) +/- 0.22 (lcollar - rcollar)
    ears        head + 0.15 (head - neck) +/- 0.45 (lcollar - rcollar)
    ==========  =============================================
    """
    p = np.asarray(positions, dtype=np.float64)
    head, neck = p[..., HEAD, :], p[..., NECK, :]
    face_up = head - neck
    lat = p[..., L_COLLAR, :] - p[..., R_COLLAR, :]
    coco = np.empty(p.shape[:-2] + (17, 3), dtype=np.float64)
    coco[..., 0, :] = head + 0.30 * face_up
    coco[..., 1, :] = head + 0.40 * face_up + 0.22 * lat
    coco[..., 2, :] = head + 0.40 * face_up - 0.22 * lat
    coco[..., 3, :] = head + 0.15 * face_up + 0.45 * lat
    coco[..., 4, :] = head + 0.15 * face_up - 0.45 * lat
    for coco_idx, joint in (
        (5, L_SHOULDER), (6, R_SHOULDER), (7, L_ELBOW), (8, R_ELBOW),
        (9, L_WRIST), (10, R_WRIST), (11, L_HIP), (12, R_HIP),
        (13, L_KNEE), (14, R_KNEE), (15, L_ANKLE), (16, R_ANKLE),
    ):
        coco[..., coco_idx, :] = p[..., joint, :]
    return coco


# -- cameras -------------------------------------------------------------------

@dataclass
class CameraTrack:
    """Per-frame pinhole camera: ``x_cam = R @ x_world + t``,
    ``u = fx x/z + cx``, ``v = fy y/z + cy`` (camera y points down).
    """

    focal: np.ndarray        # (S, 2) fx, fy in pixels
    principal: np.ndarray    # (S, 2) cx, cy in pixels
    rotations: np.ndarray    # (S, 3, 3)
    translations: np.ndarray  # (S, 3) meters
    cuts: tuple[int, ...] = ()

    def __post_init__(self):
        self.focal = np.asarray(self.focal, dtype=np.float64)
        self.principal = np.asarray(self.principal, dtype=np.float64)
        self.rotations = np.asarray(self.rotations, dtype=np.float64)
        self.translations = np.asarray(self.translations, dtype=np.float64)
        S = self.focal.shape[0]
        if self.principal.shape != (S, 2) or self.rotations.shape != (S, 3, 3) \
                or self.translations.shape != (S, 3):
            raise SchemaError("camera track arrays disagree on length")
        if np.any(self.focal <= 0):
            raise SchemaError("focal length must be positive")
        eye = np.eye(3)
        err = np.abs(self.rotations @ self.rotations.transpose(0, 2, 1) - eye).max()
        if err > 1e-6:
            raise SchemaError(f"camera rotations not orthonormal (err {err:.2e})")

    @property
    def num_frames(self) -> int:
        return self.focal.shape[0]


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """World->camera rotation and translation with image y pointing down."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward = forward / np.linalg.norm(forward)
    right = np.cross(np.asarray(up, dtype=np.float64), forward)
    right = right / np.linalg.norm(right)
    cam_up = np.cross(forward, right)
    rot = np.stack([right, -cam_up, forward], axis=0)
    return rot, -rot @ eye


def orbit_camera_track(
    num_frames: int,
    azimuth_deg: float | np.ndarray,
    elevation_deg: float | np.ndarray,
    distance: float | np.ndarray,
    target=(0.0, 0.9, 0.0),
    focal: float = 500.0,
    principal=(320.0, 240.0),
    cuts: tuple[int, ...] = (),
) -> CameraTrack:
    """Camera rig on an orbit around ``target``; scalars make a static camera."""
    az = np.broadcast_to(np.deg2rad(np.asarray(azimuth_deg, dtype=np.float64)), (num_frames,))
    el = np.broadcast_to(np.deg2rad(np.asarray(elevation_deg, dtype=np.float64)), (num_frames,))
    dist = np.broadcast_to(np.asarray(distance, dtype=np.float64), (num_frames,))
    target = np.asarray(target, dtype=np.float64)
    rotations = np.empty((num_frames, 3, 3))
    translations = np.empty((num_frames, 3))
    for i in range(num_frames):
        eye = target + dist[i] * np.array(
            [math.sin(az[i]) * math.cos(el[i]), math.sin(el[i]), math.cos(az[i]) * math.cos(el[i])]
        )
        rotations[i], translations[i] = look_at(eye, target)
    return CameraTrack(
        focal=np.full((num_frames, 2), float(focal)),
        principal=np.tile(np.asarray(principal, dtype=np.float64), (num_frames, 1)),
        rotations=rotations,
        translations=translations,
        cuts=tuple(int(c) for c in cuts),
    )


def casual_camera_track(
    num_frames: int,
    rng: np.random.Generator,
    target=(0.0, 0.9, 0.0),
    focal: float = 500.0,
    principal=(320.0, 240.0),
    n_cuts: int = 1,
) -> CameraTrack:
    """Moving camera with slow azimuth/distance drift and hard cuts."""
    cut_frames = sorted(rng.choice(np.arange(10, num_frames - 10), size=n_cuts, replace=False)) \
        if n_cuts > 0 else []
    bounds = [0, *[int(c) for c in cut_frames], num_frames]
    az = np.empty(num_frames)
    el = np.empty(num_frames)
    dist = np.empty(num_frames)
    for a, b in zip(bounds[:-1], bounds[1:]):
        base_az = rng.uniform(-180.0, 180.0)
        sweep = rng.uniform(-40.0, 40.0)
        base_el = rng.uniform(5.0, 25.0)
        base_d = rng.uniform(2.5, 4.5)
        u = np.linspace(0.0, 1.0, b - a, endpoint=False)
        az[a:b] = base_az + sweep * u
        el[a:b] = base_el + 3.0 * np.sin(2 * np.pi * u)
        dist[a:b] = base_d + rng.uniform(-0.3, 0.3) * u
    return orbit_camera_track(
        num_frames, az, el, dist, target=target, focal=focal, principal=principal,
        cuts=tuple(int(c) for c in cut_frames),
    )


def project_points(points: np.ndarray, camera: CameraTrack) -> tuple[np.ndarray, np.ndarray]:
    """Pinhole projection of (S, J, 3) world points -> (S, J, 2) pixels + depth."""
    pts = np.asarray(points, dtype=np.float64)
    cam = np.einsum("sij,skj->ski", camera.rotations, pts) + camera.translations[:, None, :]
    depth = cam[..., 2]
    safe_z = np.where(np.abs(depth) < 1e-9, 1e-9, depth)
    uv = cam[..., :2] / safe_z[..., None]
    uv = uv * camera.focal[:, None, :] + camera.principal[:, None, :]
    return uv, depth


@dataclass
class OcclusionModel:
    """Per-joint dropout with geometric burst lengths and confidence noise."""

    joint_drop_prob: float = 0.0
    burst_mean: float = 5.0
    burst_max: int = 30
    conf_noise_std: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.joint_drop_prob <= 1.0:
            raise SchemaError("joint_drop_prob must be in [0, 1]")
        if self.burst_mean < 1.0 or self.burst_max < 1:
            raise SchemaError("burst lengths must be >= 1")

    def sample_mask(self, num_frames: int, num_joints: int, rng: np.random.Generator) -> np.ndarray:
        """Boolean (S, J) mask of occluded joints."""
        occluded = np.zeros((num_frames, num_joints), dtype=bool)
        if self.joint_drop_prob <= 0.0:
            return occluded
        for j in range(num_joints):
            s = 0
            while s < num_frames:
                if rng.random() < self.joint_drop_prob:
                    burst = int(min(rng.geometric(1.0 / self.burst_mean), self.burst_max))
                    occluded[s : s + burst, j] = True
                    s += burst
                else:
                    s += 1
        return occluded


def render_views(
    motion: Motion,
    skeleton: Skeleton,
    cameras: list[CameraTrack],
    occlusion: OcclusionModel | None = None,
    seed: int = 0,
) -> list[Pose2DSequence]:
    """Project a motion into each camera as a COCO-17 keypoint sequence.

    Occluded joints (and whole frames with non-positive depth) get confidence
    0 with their pixel position frozen at the last visible value.
    """
    if not cameras:
        raise SchemaError("at least one camera required")
    occlusion = occlusion or OcclusionModel()
    positions = forward_kinematics(torch.from_numpy(motion.frames), skeleton).numpy()
    coco = coco17_from_joints(positions)
    streams = np.random.SeedSequence(seed).spawn(len(cameras))
    views = []
    for cam, stream in zip(cameras, streams):
        rng = np.random.default_rng(stream)
        uv, depth = project_points(coco, cam)
        S, J = uv.shape[:2]
        conf = np.ones((S, J))
        if occlusion.conf_noise_std > 0.0:
            noise = rng.normal(0.0, occlusion.conf_noise_std, size=(S, J))
            conf = np.clip(1.0 - np.abs(noise), 0.0, 1.0)
        conf[occlusion.sample_mask(S, J, rng)] = 0.0
        conf[np.any(depth <= 1e-9, axis=1), :] = 0.0   # behind-camera frames
        # freeze invisible joints at their last visible pixel position
        frozen = uv.copy()
        for j in range(J):
            visible = conf[:, j] > 0.0
            if not visible.any():
                continue
            idx = np.nonzero(visible)[0]
            carry = idx[np.clip(np.searchsorted(idx, np.arange(S), side="right") - 1, 0, len(idx) - 1)]
            frozen[:, j] = uv[carry, j]
        frames = np.concatenate([frozen, conf[..., None]], axis=2)
        views.append(Pose2DSequence(frames=frames, fps=motion.fps))
    return views


# -- dataset builder ------------------------------------------------------------

@dataclass
class SynthConfig:
    kinds: tuple[str, ...] = ("walk", "wave")
    n_motions: int = 8
    n_views: int = 2
    length: int = 150
    fps: float = 30.0
    seed: int = 0
    occlusion_prob: float = 0.0
    conf_noise_std: float = 0.0
    moving_cameras: bool = False
    n_cuts: int = 1
    holdout_kinds: tuple[str, ...] = ()

    def __post_init__(self):
        self.kinds = tuple(self.kinds)
        self.holdout_kinds = tuple(self.holdout_kinds)
        for k in self.kinds + self.holdout_kinds:
            if k not in MOTION_KINDS:
                raise BadKind(f"unknown motion kind {k!r}")


@dataclass
class ManifestSample:
    kind: str
    seed: int
    split: str
    motion: str
    poses: list[str]
    camera: str


@dataclass
class DatasetManifest:
    samples: list[ManifestSample]
    root: Path

    def paths(self, sample: ManifestSample) -> tuple[Path, list[Path], Path]:
        return (
            self.root / sample.motion,
            [self.root / p for p in sample.poses],
            self.root / sample.camera,
        )


def camera_to_dict(camera: CameraTrack) -> dict:
    return {
        "format": "camera-v1",
        "focal": camera.focal.tolist(),
        "principal": camera.principal.tolist(),
        "rotations": camera.rotations.tolist(),
        "translations": camera.translations.tolist(),
        "cuts": list(camera.cuts),
    }


def camera_from_dict(data: dict) -> CameraTrack:
    if data.get("format", "camera-v1") != "camera-v1":
        raise SchemaError(f"unsupported camera format {data.get('format')!r}")
    return CameraTrack(
        focal=np.asarray(data["focal"]),
        principal=np.asarray(data["principal"]),
        rotations=np.asarray(data["rotations"]),
        translations=np.asarray(data["translations"]),
        cuts=tuple(data.get("cuts", ())),
    )


def build_dataset(config: SynthConfig, out_dir: str | Path, skeleton: Skeleton | None = None) -> DatasetManifest:
    """Write N motions x K views plus a manifest-v1 file; fully seed-determined."""
    from .io import save_json, save_motion_json
    from .skeleton import load_skeleton

    skeleton = skeleton or load_skeleton()
    out = Path(out_dir)
    (out / "motions").mkdir(parents=True, exist_ok=True)
    (out / "poses").mkdir(exist_ok=True)
    (out / "cameras").mkdir(exist_ok=True)

    seeds = np.random.SeedSequence(config.seed).generate_state(config.n_motions * 2)
    samples = []
    for i in range(config.n_motions):
        kind = config.kinds[i % len(config.kinds)]
        motion_seed = int(seeds[2 * i])
        view_seed = int(seeds[2 * i + 1])
        motion, _meta = synth_motion(kind, motion_seed, config.length, skeleton, config.fps)

        cam_rng = np.random.default_rng(view_seed)
        cameras = []
        for v in range(config.n_views):
            if config.moving_cameras:
                cameras.append(casual_camera_track(config.length, cam_rng, n_cuts=config.n_cuts))
            else:
                cameras.append(
                    orbit_camera_track(
                        config.length,
                        azimuth_deg=cam_rng.uniform(-180, 180),
                        elevation_deg=cam_rng.uniform(5, 25),
                        distance=cam_rng.uniform(2.5, 4.5),
                    )
                )
        occ = OcclusionModel(
            joint_drop_prob=config.occlusion_prob, conf_noise_std=config.conf_noise_std
        )
        views = render_views(motion, skeleton, cameras, occ, seed=view_seed)

        motion_rel = f"motions/motion_{i:04d}.json"
        camera_rel = f"cameras/camera_{i:04d}.json"
        save_motion_json(motion, out / motion_rel)
        save_json(camera_to_dict(cameras[0]), out / camera_rel)
        pose_rels = []
        for v, view in enumerate(views):
            rel = f"poses/pose_{i:04d}_v{v}.json"
            save_pose_json(view, out / rel)
            pose_rels.append(rel)
        split = "test" if kind in config.holdout_kinds else "train"
        samples.append(
            ManifestSample(
                kind=kind, seed=motion_seed, split=split,
                motion=motion_rel, poses=pose_rels, camera=camera_rel,
            )
        )

    manifest = DatasetManifest(samples=samples, root=out)
    save_json(manifest_to_dict(manifest), out / "manifest.json")
    return manifest


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    return {
        "format": "manifest-v1",
        "samples": [
            {
                "kind": s.kind, "seed": s.seed, "split": s.split,
                "motion": s.motion, "poses": list(s.poses), "camera": s.camera,
            }
            for s in manifest.samples
        ],
    }


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    data = json.loads(path.read_text())
    if data.get("format") != "manifest-v1":
        raise SchemaError(f"unsupported manifest format {data.get('format')!r}")
    root = path.parent
    samples = [
        ManifestSample(
            kind=s["kind"], seed=int(s["seed"]), split=s["split"],
            motion=s["motion"], poses=list(s["poses"]), camera=s["camera"],
        )
        for s in data["samples"]
    ]
    manifest = DatasetManifest(samples=samples, root=root)
    for s in samples:
        motion_path, pose_paths, camera_path = manifest.paths(s)
        for p in [motion_path, camera_path, *pose_paths]:
            if not p.exists():
                raise SchemaError(f"manifest references missing file {p}")
    return manifest
