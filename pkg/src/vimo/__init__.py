"""Pose-conditioned diffusion for 3D human motion.

Subpackages: skeleton geometry, 2D pose processing, synthetic data, the
denoiser network, the diffusion engine, masked-denoising editing, zero-conv
style adapters, evaluation metrics, rendering, and the CLI.
"""

from .skeleton import Motion, Skeleton, load_skeleton
from .pose import Pose2DSequence

__version__ = "0.1.0"

__all__ = ["Motion", "Skeleton", "Pose2DSequence", "load_skeleton", "__version__"]
