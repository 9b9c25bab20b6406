"""Evaluation metrics: kinetic/geometric features, Frechet distance,
diversity, beat alignment and the physical foot-contact score.

All metrics are pure numpy over FK joint positions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, EmptyMusic, NumericalFailure, TooFew, TooShort
from .skeleton import Motion, Skeleton, motion_positions
from .synth import (
    L_ANKLE, R_ANKLE, L_KNEE, R_KNEE, L_HIP, R_HIP, L_SHOULDER, R_SHOULDER,
    L_ELBOW, R_ELBOW, L_WRIST, R_WRIST, HEAD,
)

KINETIC_DIM = 24
GEOMETRIC_DIM = 12

GEOMETRIC_FEATURE_NAMES = (
    "left_hand_above_head", "right_hand_above_head",
    "left_hand_above_shoulder", "right_hand_above_shoulder",
    "left_knee_bent", "right_knee_bent",
    "left_foot_in_front", "right_foot_in_front",
    "feet_wider_than_shoulders", "hands_closer_than_shoulders",
    "left_elbow_bent", "right_elbow_bent",
)

_KNEE_BENT_DEG = 120.0
_ELBOW_BENT_DEG = 90.0


def kinetic_features_from_positions(positions: np.ndarray) -> np.ndarray:
    """Per-joint log(1 + mean squared speed); speed in m/frame."""
    pos = np.asarray(positions, dtype=np.float64)
    if pos.shape[0] < 2:
        raise TooShort("kinetic features need at least 2 frames")
    vel = np.diff(pos, axis=0)
    return np.log1p((vel ** 2).sum(axis=2).mean(axis=0))


def kinetic_features(motion: Motion, skeleton: Skeleton) -> np.ndarray:
    return kinetic_features_from_positions(motion_positions(motion, skeleton))


def _angle_deg(a: np.ndarray, pivot: np.ndarray, b: np.ndarray) -> np.ndarray:
    u = a - pivot
    v = b - pivot
    cos = (u * v).sum(-1) / np.maximum(
        np.linalg.norm(u, axis=-1) * np.linalg.norm(v, axis=-1), 1e-12
    )
    return np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))


def geometric_features_from_positions(positions: np.ndarray, up_axis: int = 1) -> np.ndarray:
    """Twelve relational booleans aggregated as fraction of frames true.

    See GEOMETRIC_FEATURE_NAMES; thresholds are 120 deg (knee), 90 deg
    (elbow). The facing direction is the cross product of the hip axis with
    the up axis, so left/right-paired features swap under mirroring.
    """
    p = np.asarray(positions, dtype=np.float64)
    up = np.zeros(3)
    up[up_axis] = 1.0
    height = lambda j: p[:, j, up_axis]

    lat = p[:, L_HIP] - p[:, R_HIP]
    facing = np.cross(lat, up[None, :])
    facing = facing / np.maximum(np.linalg.norm(facing, axis=1, keepdims=True), 1e-12)

    shoulder_width = np.linalg.norm(p[:, L_SHOULDER] - p[:, R_SHOULDER], axis=1)
    foot_gap = ((p[:, L_ANKLE] - p[:, R_ANKLE]) * facing).sum(axis=1)

    checks = np.stack(
        [
            height(L_WRIST) > height(HEAD),
            height(R_WRIST) > height(HEAD),
            height(L_WRIST) > height(L_SHOULDER),
            height(R_WRIST) > height(R_SHOULDER),
            _angle_deg(p[:, L_HIP], p[:, L_KNEE], p[:, L_ANKLE]) < _KNEE_BENT_DEG,
            _angle_deg(p[:, R_HIP], p[:, R_KNEE], p[:, R_ANKLE]) < _KNEE_BENT_DEG,
            foot_gap > 0.0,
            -foot_gap > 0.0,
            np.linalg.norm(p[:, L_ANKLE] - p[:, R_ANKLE], axis=1) > shoulder_width,
            np.linalg.norm(p[:, L_WRIST] - p[:, R_WRIST], axis=1) < shoulder_width,
            _angle_deg(p[:, L_SHOULDER], p[:, L_ELBOW], p[:, L_WRIST]) < _ELBOW_BENT_DEG,
            _angle_deg(p[:, R_SHOULDER], p[:, R_ELBOW], p[:, R_WRIST]) < _ELBOW_BENT_DEG,
        ],
        axis=1,
    )
    return checks.mean(axis=0)


def geometric_features(motion: Motion, skeleton: Skeleton) -> np.ndarray:
    return geometric_features_from_positions(motion_positions(motion, skeleton), skeleton.up_axis)


@dataclass
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray
    count: int


def fit_gaussian(features: np.ndarray) -> GaussianStats:
    """Sample mean/covariance (n-1 denominator); tiny negative eigenvalues
    of the covariance are clamped to zero."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < 2:
        raise TooFew("need at least 2 feature vectors")
    mean = feats.mean(axis=0)
    cov = np.cov(feats, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals.min() < 0.0:
        if eigvals.min() < -1e-8:
            raise NumericalFailure(f"covariance eigenvalue {eigvals.min():.2e} below clamp")
        cov = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
    return GaussianStats(mean=mean, cov=cov, count=feats.shape[0])


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh((mat + mat.T) / 2.0)
    return (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T


def fid(a: GaussianStats, b: GaussianStats, clamp: float = -1e-6) -> float:
    """Frechet distance between two Gaussians.

    ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}); the matrix square root
    comes from the eigendecomposition of the symmetrized product
    sqrt(Sa) Sb sqrt(Sa).
    """
    if a.mean.shape != b.mean.shape:
        raise DimMismatch(f"{a.mean.shape} vs {b.mean.shape}")
    sqrt_a = _sqrtm_psd(a.cov)
    inner = sqrt_a @ b.cov @ sqrt_a
    eigvals = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    if eigvals.min() < clamp:
        raise NumericalFailure(f"sqrtm eigenvalue {eigvals.min():.2e} below clamp {clamp}")
    tr_sqrt = np.sqrt(np.clip(eigvals, 0.0, None)).sum()
    diff = a.mean - b.mean
    return float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * tr_sqrt)


def diversity(features: np.ndarray) -> float:
    """Mean Euclidean distance over all unordered pairs."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < 2:
        raise TooFew("diversity needs at least 2 feature vectors")
    diffs = feats[:, None, :] - feats[None, :, :]
    dist = np.linalg.norm(diffs, axis=2)
    n = feats.shape[0]
    return float(dist[np.triu_indices(n, k=1)].mean())


def extract_motion_beats(motion: Motion, skeleton: Skeleton,
                         min_gap_frames: int = 5) -> np.ndarray:
    """Kinematic beats: strict local minima of mean joint speed that fall
    below the median speed, at least ``min_gap_frames`` apart. Seconds."""
    if motion.num_frames < 3:
        raise TooShort("beat extraction needs at least 3 frames")
    pos = motion_positions(motion, skeleton)
    speed = np.linalg.norm(np.diff(pos, axis=0), axis=2).mean(axis=1)
    median = np.median(speed)
    beats = []
    last = -min_gap_frames
    for s in range(1, len(speed) - 1):
        if speed[s] < speed[s - 1] and speed[s] < speed[s + 1] and speed[s] < median:
            if s - last >= min_gap_frames:
                beats.append(s)
                last = s
    return np.asarray(beats, dtype=np.float64) / motion.fps


def _check_beats(beats: np.ndarray, name: str) -> np.ndarray:
    beats = np.asarray(beats, dtype=np.float64)
    if beats.size and (np.any(np.diff(beats) <= 0) or beats[0] < 0):
        raise ValueError(f"{name} beats must be strictly increasing and nonnegative")
    return beats


def beat_align(music_beats, motion_beats, sigma_seconds: float = 0.1) -> float:
    """Alignment in [0, 1]: mean over musical beats of
    exp(-(nearest kinematic beat discrepancy)^2 / (2 sigma^2))."""
    music = _check_beats(music_beats, "music")
    if music.size == 0:
        raise EmptyMusic("beat alignment needs at least one musical beat")
    motion = _check_beats(motion_beats, "motion")
    if motion.size == 0:
        return 0.0
    gaps = np.abs(music[:, None] - motion[None, :]).min(axis=1)
    return float(np.exp(-(gaps ** 2) / (2.0 * sigma_seconds ** 2)).mean())


def beat_discrepancy(music_beats, motion_beats) -> float:
    """Raw mean distance (seconds) from each musical beat to the nearest
    kinematic beat; inf when the motion has no beats."""
    music = _check_beats(music_beats, "music")
    if music.size == 0:
        raise EmptyMusic("beat discrepancy needs at least one musical beat")
    motion = _check_beats(motion_beats, "motion")
    if motion.size == 0:
        return float("inf")
    return float(np.abs(music[:, None] - motion[None, :]).min(axis=1).mean())


def pfc(motion: Motion, skeleton: Skeleton) -> float:
    """Physical foot-contact score (lower is better).

    Per frame: ||root acceleration|| (vertical component clamped to upward
    only) times the speed of the slower ankle; averaged and normalized by the
    peak root acceleration. Zero when the root never accelerates or one foot
    is pinned throughout.
    """
    if motion.num_frames < 3:
        raise TooShort("pfc needs at least 3 frames")
    pos = motion_positions(motion, skeleton)
    up = skeleton.up_axis
    root = pos[:, 0, :]
    accel = root[2:] - 2.0 * root[1:-1] + root[:-2]
    accel = accel.copy()
    accel[:, up] = np.maximum(accel[:, up], 0.0)
    accel_norm = np.linalg.norm(accel, axis=1)

    left = np.linalg.norm(np.diff(pos[:, skeleton.foot_joint_ids[0]], axis=0), axis=1)[:-1]
    right = np.linalg.norm(np.diff(pos[:, skeleton.foot_joint_ids[1]], axis=0), axis=1)[:-1]
    slower = np.minimum(left, right)

    peak = accel_norm.max()
    if peak <= 0.0:
        return 0.0
    return float((accel_norm * slower).mean() / peak)


@dataclass
class MetricsReport:
    fid_kinetic: float
    fid_geometric: float
    div_kinetic: float
    div_geometric: float
    beat_align_score: float | None
    beat_discrepancy_seconds: float | None
    pfc_score: float
    n_generated: int
    n_reference: int
    config: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format": "report-v1",
            "FID_k": self.fid_kinetic,
            "FID_m": self.fid_geometric,
            "Div_k": self.div_kinetic,
            "Div_m": self.div_geometric,
            "BA": self.beat_align_score,
            "BA_raw_discrepancy": self.beat_discrepancy_seconds,
            "PFC": self.pfc_score,
            "n_generated": self.n_generated,
            "n_reference": self.n_reference,
            "config": self.config,
            "provenance": self.provenance,
        }


def evaluate(generated: list[Motion], reference: list[Motion], music_beats,
             skeleton: Skeleton, sigma_seconds: float = 0.1,
             provenance: dict | None = None) -> MetricsReport:
    """Compute the full metric suite of a generated set against a reference
    corpus (reference statistics use the whole corpus)."""
    if len(generated) < 2 or len(reference) < 2:
        raise TooFew("need at least 2 generated and 2 reference motions")
    gen_k = np.stack([kinetic_features(m, skeleton) for m in generated])
    ref_k = np.stack([kinetic_features(m, skeleton) for m in reference])
    gen_g = np.stack([geometric_features(m, skeleton) for m in generated])
    ref_g = np.stack([geometric_features(m, skeleton) for m in reference])

    ba = disc = None
    if music_beats is not None:
        music = np.asarray(music_beats, dtype=np.float64)
        scores = []
        gaps = []
        for m in generated:
            beats = extract_motion_beats(m, skeleton)
            scores.append(beat_align(music, beats, sigma_seconds))
            gaps.append(beat_discrepancy(music, beats))
        ba = float(np.mean(scores))
        disc = float(np.mean(gaps))

    return MetricsReport(
        fid_kinetic=fid(fit_gaussian(gen_k), fit_gaussian(ref_k)),
        fid_geometric=fid(fit_gaussian(gen_g), fit_gaussian(ref_g)),
        div_kinetic=diversity(gen_k),
        div_geometric=diversity(gen_g),
        beat_align_score=ba,
        beat_discrepancy_seconds=disc,
        pfc_score=float(np.mean([pfc(m, skeleton) for m in generated])),
        n_generated=len(generated),
        n_reference=len(reference),
        config={"sigma_seconds": sigma_seconds},
        provenance=provenance or {},
    )
