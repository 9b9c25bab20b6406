"""Few-shot stylization through zero-initialized merge projections.

A trainable copy of every denoising block attaches to a frozen backbone; each
copy's output enters the stream through a linear projection initialized to
exactly zero, so the adapted model starts as an identity over the backbone and
only drifts as the merge projections learn.
"""
from __future__ import annotations

import copy
from dataclasses import asdict
from pathlib import Path

import torch
import torch.nn as nn

from .errors import CheckpointMismatch
from .model import (
    CKPT_FORMAT,
    ConditionEncoding,
    DenoiserNet,
    ModelConfig,
    load_checkpoint,
    state_dict_hash,
)

ADAPTER_FORMAT = "adapter-v1"


class ZeroConvAdapter(nn.Module):
    """Frozen backbone + trainable block clones merged through zero projections."""

    def __init__(self, backbone: DenoiserNet):
        super().__init__()
        self.backbone = backbone
        for p in self.backbone.parameters():
            p.requires_grad_(False)
        self.clone_blocks = copy.deepcopy(backbone.blocks)
        for p in self.clone_blocks.parameters():
            p.requires_grad_(True)
        d = backbone.config.hidden_dim
        self.merges = nn.ModuleList(nn.Linear(d, d) for _ in backbone.blocks)
        for merge in self.merges:
            nn.init.zeros_(merge.weight)
            nn.init.zeros_(merge.bias)

    @property
    def config(self) -> ModelConfig:
        return self.backbone.config

    def encode_condition(self, pose_frames) -> ConditionEncoding:
        return self.backbone.encode_condition(pose_frames)

    def null_encoding(self, batch: int, num_frames: int) -> ConditionEncoding:
        return self.backbone.null_encoding(batch, num_frames)

    def forward(self, noisy: torch.Tensor, t, cond: ConditionEncoding | None = None) -> torch.Tensor:
        squeeze = noisy.ndim == 2
        if squeeze:
            noisy = noisy.unsqueeze(0)
        h, cond_tokens, film_signal = self.backbone.prepare(noisy, t, cond)
        for block, clone, merge in zip(self.backbone.blocks, self.clone_blocks, self.merges):
            h = block(h, cond_tokens, film_signal) + merge(clone(h, cond_tokens, film_signal))
        out = self.backbone.output_proj(self.backbone.norm_out(h))
        return out.squeeze(0) if squeeze else out

    def denoise(self, noisy: torch.Tensor, t, cond: ConditionEncoding | None = None) -> torch.Tensor:
        return self.forward(noisy, t, cond)

    def trainable_parameters(self):
        return [p for p in self.parameters() if p.requires_grad]

    def trainable_parameter_count(self) -> int:
        return sum(p.numel() for p in self.trainable_parameters())


def attach_adapter(backbone_ckpt: str | Path) -> ZeroConvAdapter:
    """Load a backbone checkpoint and attach a freshly zeroed adapter."""
    backbone, _meta = load_checkpoint(backbone_ckpt)
    return ZeroConvAdapter(backbone)


def train_adapter(adapter: ZeroConvAdapter, motions: torch.Tensor, poses: torch.Tensor,
                  schedule, skeleton, cfg, weights=None, log_path=None) -> list[dict]:
    """Train only the clones and merge projections on a small style set.

    Same objective as backbone training; the backbone stays byte-identical.
    """
    from .diffusion import train_model

    return train_model(adapter, motions, poses, schedule, skeleton, cfg,
                       weights=weights, log_path=log_path)


def sample_styled(adapter: ZeroConvAdapter, cond, schedule, scfg, num_frames: int = 150,
                  fps: float = 30.0):
    """Sample from the adapted model; identical plumbing to plain sampling."""
    from .diffusion import ddim_sample

    return ddim_sample(adapter, cond, schedule, scfg, num_frames=num_frames, fps=fps)


def _backbone_hash(backbone_ckpt: str | Path) -> str:
    from .io import load_tensor_archive

    header, tensors = load_tensor_archive(backbone_ckpt)
    if header.get("format") != CKPT_FORMAT:
        raise CheckpointMismatch(f"{backbone_ckpt}: not a {CKPT_FORMAT} checkpoint")
    tensors.pop("__torch_rng_state__", None)
    return state_dict_hash(tensors)


def save_adapter(adapter: ZeroConvAdapter, path: str | Path, backbone_ckpt: str | Path,
                 step: int = 0) -> None:
    from .io import save_tensor_archive

    header = {
        "format": ADAPTER_FORMAT,
        "model_config": asdict(adapter.config),
        "backbone_hash": _backbone_hash(backbone_ckpt),
        "step": int(step),
    }
    tensors = {f"clone.{k}": v for k, v in adapter.clone_blocks.state_dict().items()}
    tensors.update({f"merge.{k}": v for k, v in adapter.merges.state_dict().items()})
    save_tensor_archive(path, header, tensors)


def load_adapter(path: str | Path, backbone_ckpt: str | Path) -> ZeroConvAdapter:
    from .io import load_tensor_archive

    header, tensors = load_tensor_archive(path)
    if header.get("format") != ADAPTER_FORMAT:
        raise CheckpointMismatch(f"{path}: not an {ADAPTER_FORMAT} checkpoint")
    if _backbone_hash(backbone_ckpt) != header["backbone_hash"]:
        raise CheckpointMismatch("adapter was trained against a different backbone")
    adapter = attach_adapter(backbone_ckpt)
    adapter.clone_blocks.load_state_dict(
        {k[len("clone."):]: v for k, v in tensors.items() if k.startswith("clone.")}
    )
    adapter.merges.load_state_dict(
        {k[len("merge."):]: v for k, v in tensors.items() if k.startswith("merge.")}
    )
    return adapter
