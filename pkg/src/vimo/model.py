"""Pose-conditioned denoising network.

The network predicts the clean motion window directly from a noisy one.
Per-frame 2D pose features enter through cross-attention tokens; a pooled
condition summary joins the timestep embedding inside FiLM. A learned null
embedding stands in for the condition when guidance is dropped.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .errors import CheckpointMismatch, ConfigError, LengthMismatch, OutOfRange, ShapeMismatch
from .pose import NUM_COCO_JOINTS, Pose2DSequence
from .skeleton import MOTION_DIM

COND_INPUT_DIM = NUM_COCO_JOINTS * 3


@dataclass
class ModelConfig:
    hidden_dim: int = 256
    num_blocks: int = 3
    num_heads: int = 4
    cond_dim: int = 256
    dropout_rate: float = 0.0
    max_len: int = 300
    max_timestep: int = 1000
    null_cond_mode: str = "learned"

    def __post_init__(self):
        if self.hidden_dim % self.num_heads != 0:
            raise ConfigError("hidden_dim must be divisible by num_heads")
        if self.num_blocks < 1:
            raise ConfigError("num_blocks must be >= 1")
        if self.max_len < 150:
            raise ConfigError("max_len must be >= 150")
        if self.null_cond_mode != "learned":
            raise ConfigError(f"unsupported null_cond_mode {self.null_cond_mode!r}")


@dataclass
class ConditionEncoding:
    """Per-frame condition tokens (B, S, cond_dim) plus a pooled summary (B, cond_dim)."""

    tokens: torch.Tensor
    pooled: torch.Tensor


def timestep_embedding(t: torch.Tensor, dim: int, max_timestep: int | None = None) -> torch.Tensor:
    """Sinusoidal timestep embedding with interleaved (sin, cos) pairs.

    The lowest frequency is 1, so the first pair at t=0 is (0, 1).
    """
    t = torch.as_tensor(t)
    if bool((t < 0).any()) or (max_timestep is not None and bool((t > max_timestep).any())):
        raise OutOfRange(f"timestep outside [0, {max_timestep}]")
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float64) / half)
    args = t.double().reshape(-1, 1) * freqs[None, :]
    emb = torch.zeros(args.shape[0], dim, dtype=torch.float64)
    emb[:, 0::2] = torch.sin(args)
    emb[:, 1::2] = torch.cos(args)
    return emb


def frame_position_encoding(num_frames: int, dim: int) -> torch.Tensor:
    """Sinusoidal per-frame position encoding (S, dim), same bank as timesteps."""
    return timestep_embedding(torch.arange(num_frames), dim)


class DenoisingBlock(nn.Module):
    """self-attention -> FiLM -> cross-attention -> MLP.

    Attention and MLP stages are residual with pre-normalization; the FiLM
    stage applies gamma * h + beta directly so that gamma=1, beta=0 is an
    exact identity.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.hidden_dim
        self.norm_self = nn.LayerNorm(d)
        self.self_attn = nn.MultiheadAttention(d, cfg.num_heads, dropout=cfg.dropout_rate,
                                               batch_first=True)
        self.film = nn.Linear(d, 2 * d)
        self.norm_cross = nn.LayerNorm(d)
        self.cross_attn = nn.MultiheadAttention(d, cfg.num_heads, dropout=cfg.dropout_rate,
                                                kdim=cfg.cond_dim, vdim=cfg.cond_dim,
                                                batch_first=True)
        self.norm_mlp = nn.LayerNorm(d)
        self.mlp = nn.Sequential(
            nn.Linear(d, 2 * d), nn.GELU(), nn.Dropout(cfg.dropout_rate), nn.Linear(2 * d, d)
        )
        # FiLM starts as the identity (gamma=1, beta=0)
        nn.init.zeros_(self.film.weight)
        with torch.no_grad():
            self.film.bias[:d] = 1.0
            self.film.bias[d:] = 0.0

    def forward(self, h: torch.Tensor, cond_tokens: torch.Tensor,
                film_signal: torch.Tensor) -> torch.Tensor:
        x = self.norm_self(h)
        h = h + self.self_attn(x, x, x, need_weights=False)[0]
        gamma, beta = self.film(film_signal).chunk(2, dim=-1)
        h = gamma.unsqueeze(1) * h + beta.unsqueeze(1)
        h = h + self.cross_attn(self.norm_cross(h), cond_tokens, cond_tokens,
                                need_weights=False)[0]
        h = h + self.mlp(self.norm_mlp(h))
        return h


class DenoiserNet(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        d, c = config.hidden_dim, config.cond_dim
        self.input_proj = nn.Linear(MOTION_DIM, d)
        self.cond_embed = nn.Linear(COND_INPUT_DIM, c)
        self.null_cond = nn.Parameter(torch.randn(c) * 0.02)
        self.time_mlp = nn.Sequential(nn.Linear(d, 2 * d), nn.SiLU(), nn.Linear(2 * d, d))
        self.pool_proj = nn.Linear(c, d)
        self.blocks = nn.ModuleList(DenoisingBlock(config) for _ in range(config.num_blocks))
        self.norm_out = nn.LayerNorm(d)
        self.output_proj = nn.Linear(d, MOTION_DIM)
        pe = frame_position_encoding(config.max_len, d)
        self.register_buffer("frame_pe", pe.to(torch.get_default_dtype()), persistent=False)
        cpe = frame_position_encoding(config.max_len, c)
        self.register_buffer("cond_pe", cpe.to(torch.get_default_dtype()), persistent=False)

    # -- condition encoding --------------------------------------------------

    def encode_condition(self, pose_frames) -> ConditionEncoding:
        """Encode (B, S, 17, 3) or (S, 17, 3) keypoints, (x, y, confidence).

        Coordinates are multiplied by confidence before embedding, so
        confidence-0 joints contribute nothing but the zero itself.
        """
        feats = torch.as_tensor(
            pose_frames.frames if isinstance(pose_frames, Pose2DSequence) else pose_frames
        )
        param = self.cond_embed.weight
        feats = feats.to(dtype=param.dtype, device=param.device)
        squeeze = feats.ndim == 3
        if squeeze:
            feats = feats.unsqueeze(0)
        if feats.ndim != 4 or feats.shape[2:] != (NUM_COCO_JOINTS, 3):
            raise ShapeMismatch(f"expected (B, S, {NUM_COCO_JOINTS}, 3), got {tuple(feats.shape)}")
        S = feats.shape[1]
        if S < 1 or S > self.config.max_len:
            raise LengthMismatch(f"sequence length {S} outside [1, {self.config.max_len}]")
        conf = feats[..., 2:3]
        masked = torch.cat([feats[..., 0:1] * conf, feats[..., 1:2] * conf, conf], dim=-1)
        tokens = self.cond_embed(masked.reshape(*feats.shape[:2], COND_INPUT_DIM))
        tokens = tokens + self.cond_pe[:S].to(tokens.dtype)
        return ConditionEncoding(tokens=tokens, pooled=tokens.mean(dim=1))

    def null_encoding(self, batch: int, num_frames: int) -> ConditionEncoding:
        tokens = self.null_cond.reshape(1, 1, -1).expand(batch, num_frames, -1)
        return ConditionEncoding(tokens=tokens, pooled=self.null_cond.expand(batch, -1))

    # -- denoising forward pass ------------------------------------------------

    def prepare(self, noisy: torch.Tensor, t, cond: ConditionEncoding | None):
        """Shared input processing; returns (h, cond_tokens, film_signal)."""
        if noisy.shape[-1] != MOTION_DIM:
            raise ShapeMismatch(f"expected trailing dim {MOTION_DIM}, got {noisy.shape[-1]}")
        if noisy.ndim != 3:
            raise ShapeMismatch(f"expected (B, S, {MOTION_DIM}), got {tuple(noisy.shape)}")
        B, S = noisy.shape[:2]
        if S > self.config.max_len:
            raise LengthMismatch(f"sequence length {S} exceeds max_len {self.config.max_len}")
        t = torch.as_tensor(t)
        if t.ndim == 0:
            t = t.expand(B)
        param = self.input_proj.weight
        if cond is None:
            cond = self.null_encoding(B, S)
        h = self.input_proj(noisy) + self.frame_pe[:S].to(param.dtype)
        t_emb = timestep_embedding(t, self.config.hidden_dim, self.config.max_timestep)
        film_signal = self.time_mlp(t_emb.to(dtype=param.dtype, device=param.device))
        film_signal = film_signal + self.pool_proj(cond.pooled)
        return h, cond.tokens, film_signal

    def forward(self, noisy: torch.Tensor, t, cond: ConditionEncoding | None = None) -> torch.Tensor:
        squeeze = noisy.ndim == 2
        if squeeze:
            noisy = noisy.unsqueeze(0)
        h, cond_tokens, film_signal = self.prepare(noisy, t, cond)
        for block in self.blocks:
            h = block(h, cond_tokens, film_signal)
        out = self.output_proj(self.norm_out(h))
        return out.squeeze(0) if squeeze else out

    def denoise(self, noisy: torch.Tensor, t, cond: ConditionEncoding | None = None) -> torch.Tensor:
        """Predict the clean window from a noisy one; cond=None uses the null embedding."""
        return self.forward(noisy, t, cond)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


# -- checkpoints ----------------------------------------------------------------

CKPT_FORMAT = "ckpt-v1"
_RNG_KEY = "__torch_rng_state__"


def save_checkpoint(model: DenoiserNet, path: str | Path, step: int = 0,
                    extra: dict | None = None) -> None:
    from .io import save_tensor_archive

    header = {
        "format": CKPT_FORMAT,
        "model_config": asdict(model.config),
        "step": int(step),
        "extra": extra or {},
    }
    tensors = dict(model.state_dict())
    tensors[_RNG_KEY] = torch.get_rng_state()
    save_tensor_archive(path, header, tensors)


def load_checkpoint(path: str | Path, expect_config: ModelConfig | None = None
                    ) -> tuple[DenoiserNet, dict]:
    from .errors import SchemaError
    from .io import load_tensor_archive

    try:
        header, tensors = load_tensor_archive(path)
    except (SchemaError, OSError) as exc:
        raise CheckpointMismatch(f"{path}: cannot read checkpoint ({exc})") from exc
    if header.get("format") != CKPT_FORMAT:
        raise CheckpointMismatch(f"{path}: not a {CKPT_FORMAT} checkpoint")
    config = ModelConfig(**header["model_config"])
    if expect_config is not None and asdict(expect_config) != asdict(config):
        raise CheckpointMismatch("checkpoint config does not match the expected config")
    rng_state = tensors.pop(_RNG_KEY, None)
    model = DenoiserNet(config)
    model.load_state_dict(tensors)
    meta = {"step": header["step"], "extra": header["extra"], "rng_state": rng_state}
    return model, meta


def state_dict_hash(state_dict: dict) -> str:
    """SHA-256 over parameter names and raw tensor bytes (order-independent)."""
    digest = hashlib.sha256()
    for name in sorted(state_dict):
        digest.update(name.encode())
        digest.update(state_dict[name].detach().cpu().numpy().tobytes())
    return digest.hexdigest()
