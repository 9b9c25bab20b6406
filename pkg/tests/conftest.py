import numpy as np
import pytest
import torch

from vimo.model import DenoiserNet, ModelConfig
from vimo.skeleton import MOTION_DIM, NUM_JOINTS, Skeleton, load_skeleton


@pytest.fixture(scope="session")
def skeleton():
    return load_skeleton()


@pytest.fixture
def tiny_model():
    torch.manual_seed(0)
    return DenoiserNet(ModelConfig(hidden_dim=32, num_blocks=2, num_heads=2,
                                   cond_dim=32, max_len=160))


def random_rotation_matrices(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish random rotations from seeded axis-angle draws."""
    axes = rng.normal(size=(n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = rng.uniform(-np.pi, np.pi, size=n)
    K = np.zeros((n, 3, 3))
    K[:, 0, 1], K[:, 0, 2] = -axes[:, 2], axes[:, 1]
    K[:, 1, 0], K[:, 1, 2] = axes[:, 2], -axes[:, 0]
    K[:, 2, 0], K[:, 2, 1] = -axes[:, 1], axes[:, 0]
    eye = np.eye(3)[None]
    sin = np.sin(angles)[:, None, None]
    cos = np.cos(angles)[:, None, None]
    return eye + sin * K + (1 - cos) * (K @ K)


def random_motion_frames(num_frames: int, rng: np.random.Generator) -> np.ndarray:
    """Valid random motion: proper rotations, random contacts and root track."""
    rots = random_rotation_matrices(num_frames * NUM_JOINTS, rng)
    rot6d = np.concatenate([rots[:, :, 0], rots[:, :, 1]], axis=1)
    frames = np.zeros((num_frames, MOTION_DIM))
    frames[:, : NUM_JOINTS * 6] = rot6d.reshape(num_frames, NUM_JOINTS * 6)
    frames[:, NUM_JOINTS * 6 : NUM_JOINTS * 6 + 4] = rng.integers(0, 2, (num_frames, 4))
    frames[:, NUM_JOINTS * 6 + 4 :] = rng.normal(0.0, 0.5, (num_frames, 3))
    return frames


def chain_skeleton() -> Skeleton:
    """A 24-joint pure chain: joints 1 and 2 are unit bones along +X."""
    parents = [-1] + list(range(NUM_JOINTS - 1))
    offsets = np.full((NUM_JOINTS, 3), [0.001, 0.0, 0.0])
    offsets[0] = 0.0
    offsets[1] = [1.0, 0.0, 0.0]
    offsets[2] = [1.0, 0.0, 0.0]
    return Skeleton(
        joint_names=tuple(f"j{i}" for i in range(NUM_JOINTS)),
        parents=tuple(parents),
        rest_offsets=offsets,
        foot_joint_ids=(7, 8, 10, 11),
    )
