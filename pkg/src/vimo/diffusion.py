"""Diffusion engine: noise schedule, forward noising, training objective with
auxiliary geometric losses, DDPM/DDIM samplers and classifier-free guidance.

The denoiser predicts the clean window directly (x0 parameterization), so the
posterior and DDIM updates are written in terms of the predicted clean sample.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import (
    BadKind,
    ConfigError,
    NonFiniteLoss,
    OutOfRange,
    ShapeMismatch,
    TooShort,
)
from .model import ConditionEncoding, DenoiserNet
from .pose import Pose2DSequence
from .skeleton import CONTACT_SLICE, MOTION_DIM, Motion, Skeleton, forward_kinematics


@dataclass(frozen=True)
class DiffusionSchedule:
    """Noise coefficients indexed 0..T; index 0 is the identity (alpha_bar=1)."""

    total_steps: int
    alphas: np.ndarray       # (T+1,) float64, alphas[0] = 1 unused
    alpha_bars: np.ndarray   # (T+1,) float64, alpha_bars[0] = 1 exactly
    kind: str = "cosine"

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[t])

    def beta(self, t: int) -> float:
        return 1.0 - float(self.alphas[t])

    def ddim_timesteps(self, steps: int) -> list[int]:
        """Monotone decreasing subsample of [1, T] with ``steps`` entries."""
        if steps < 1:
            raise ConfigError("ddim_steps must be >= 1")
        taus = np.unique(np.round(np.linspace(1, self.total_steps, min(steps, self.total_steps))))
        return [int(t) for t in taus[::-1]]


def make_schedule(kind: str = "cosine", total_steps: int = 1000,
                  max_alpha: float = 0.9999, min_alpha: float = 0.001) -> DiffusionSchedule:
    """Build a cosine (default) or linear schedule with per-step alpha clamps."""
    if not isinstance(total_steps, int) or total_steps < 1:
        raise BadKind(f"total_steps must be a positive integer, got {total_steps!r}")
    T = total_steps
    if kind == "cosine":
        s = 0.008
        steps = np.arange(T + 1, dtype=np.float64)
        f = np.cos(((steps / T + s) / (1 + s)) * np.pi / 2.0) ** 2
        raw_bars = f / f[0]
        alphas = raw_bars[1:] / raw_bars[:-1]
    elif kind == "linear":
        alphas = 1.0 - np.linspace(1e-4, 0.02, T)
    else:
        raise BadKind(f"unknown schedule kind {kind!r}")
    alphas = np.clip(alphas, min_alpha, max_alpha)
    alpha_bars = np.concatenate([[1.0], np.cumprod(alphas)])
    alphas = np.concatenate([[1.0], alphas])
    return DiffusionSchedule(total_steps=T, alphas=alphas, alpha_bars=alpha_bars, kind=kind)


def _check_t(t, total_steps: int, low: int = 0):
    t_arr = torch.as_tensor(t)
    if bool((t_arr < low).any()) or bool((t_arr > total_steps).any()):
        raise OutOfRange(f"timestep {t} outside [{low}, {total_steps}]")
    return t_arr


def q_sample(x0: torch.Tensor, t, noise: torch.Tensor, schedule: DiffusionSchedule) -> torch.Tensor:
    """Closed-form forward noising: sqrt(a_bar_t) x0 + sqrt(1 - a_bar_t) noise."""
    t_arr = _check_t(t, schedule.total_steps)
    if x0.shape != noise.shape:
        raise ShapeMismatch(f"x0 {tuple(x0.shape)} vs noise {tuple(noise.shape)}")
    bars = torch.as_tensor(schedule.alpha_bars, dtype=x0.dtype, device=x0.device)
    ab = bars[t_arr.long()]
    while ab.ndim < x0.ndim:
        ab = ab.unsqueeze(-1)
    return torch.sqrt(ab) * x0 + torch.sqrt(1.0 - ab) * noise


# -- losses ---------------------------------------------------------------------

def _batched(x: torch.Tensor) -> torch.Tensor:
    return x.unsqueeze(0) if x.ndim == 2 else x


def loss_simple(m0: torch.Tensor, pred: torch.Tensor) -> torch.Tensor:
    """Mean squared error over every entry of the window."""
    if m0.shape != pred.shape:
        raise ShapeMismatch(f"{tuple(m0.shape)} vs {tuple(pred.shape)}")
    return ((m0 - pred) ** 2).mean()


def loss_joints(m0: torch.Tensor, pred: torch.Tensor, skeleton: Skeleton) -> torch.Tensor:
    """Per-frame squared position error after forward kinematics, averaged
    over frames (summed over joints and coordinates)."""
    if m0.shape != pred.shape:
        raise ShapeMismatch(f"{tuple(m0.shape)} vs {tuple(pred.shape)}")
    pos = forward_kinematics(_batched(m0), skeleton)
    pos_hat = forward_kinematics(_batched(pred), skeleton)
    return ((pos - pos_hat) ** 2).sum(dim=(-1, -2)).mean()


def loss_vel(m0: torch.Tensor, pred: torch.Tensor) -> torch.Tensor:
    """Squared difference of frame-to-frame deltas over the full state."""
    if m0.shape != pred.shape:
        raise ShapeMismatch(f"{tuple(m0.shape)} vs {tuple(pred.shape)}")
    m0, pred = _batched(m0), _batched(pred)
    if m0.shape[1] < 2:
        raise TooShort("velocity loss needs at least 2 frames")
    d = m0[:, 1:] - m0[:, :-1]
    d_hat = pred[:, 1:] - pred[:, :-1]
    return ((d - d_hat) ** 2).sum(dim=-1).mean()


def loss_foot(pred: torch.Tensor, skeleton: Skeleton) -> torch.Tensor:
    """Foot-joint velocity gated by the model's own contact prediction.

    The gate is the sigmoid of the predicted contact channels at the earlier
    frame of each velocity pair; the product sits inside the squared norm.
    """
    pred = _batched(pred)
    if pred.shape[1] < 2:
        raise TooShort("foot loss needs at least 2 frames")
    pos = forward_kinematics(pred, skeleton)
    feet = list(skeleton.foot_joint_ids)
    vel = pos[:, 1:, feet, :] - pos[:, :-1, feet, :]
    gate = torch.sigmoid(pred[:, :-1, CONTACT_SLICE])
    return ((vel * gate.unsqueeze(-1)) ** 2).sum(dim=(-1, -2)).mean()


@dataclass
class LossWeights:
    joints: float = 1.0
    vel: float = 2.0
    foot: float = 5.0

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not np.isfinite(v) or v < 0:
                raise ConfigError(f"loss weight {name} must be finite and >= 0")


def total_loss(m0: torch.Tensor, pred: torch.Tensor, skeleton: Skeleton,
               weights: LossWeights) -> tuple[torch.Tensor, dict]:
    """Weighted sum of the simple loss and auxiliary geometric terms."""
    ls = loss_simple(m0, pred)
    lj = loss_joints(m0, pred, skeleton)
    lv = loss_vel(m0, pred)
    lf = loss_foot(pred, skeleton)
    total = ls + weights.joints * lj + weights.vel * lv + weights.foot * lf
    breakdown = {
        "simple": float(ls.detach()), "joints": float(lj.detach()),
        "vel": float(lv.detach()), "foot": float(lf.detach()),
        "total": float(total.detach()),
    }
    return total, breakdown


# -- training ---------------------------------------------------------------------

@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    weight_decay: float = 0.02
    optimizer_kind: str = "adamw"
    epochs: int = 100
    batch_size: int = 8
    cond_dropout_prob: float = 0.25
    seed: int = 0
    steps: int | None = None          # explicit step count overrides epochs
    aux_gate_half: bool = True        # auxiliary losses only when t < T/2
    log_every: int = 50

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0.0 <= self.cond_dropout_prob <= 1.0:
            raise ConfigError("cond_dropout_prob must be in [0, 1]")
        if self.optimizer_kind not in ("adamw", "adan"):
            raise ConfigError(f"unsupported optimizer_kind {self.optimizer_kind!r}")


class DiffusionTrainer:
    """Single-writer training loop state: optimizer plus a seeded RNG stream."""

    def __init__(self, model: DenoiserNet, schedule: DiffusionSchedule, skeleton: Skeleton,
                 cfg: TrainConfig, weights: LossWeights | None = None):
        self.model = model
        self.schedule = schedule
        self.skeleton = skeleton
        self.cfg = cfg
        self.weights = weights or LossWeights()
        trainable = [p for p in model.parameters() if p.requires_grad]
        # decoupled weight decay stands in for any adaptive-momentum optimizer
        # matching (lr, decay); see TrainConfig.optimizer_kind
        self.optimizer = torch.optim.AdamW(
            trainable, lr=cfg.learning_rate, weight_decay=cfg.weight_decay
        )
        self.generator = torch.Generator().manual_seed(cfg.seed)
        self.step_count = 0

    def train_step(self, motions: torch.Tensor, poses: torch.Tensor) -> dict:
        """One optimizer step on a batch of aligned (motion, pose) windows."""
        model, cfg, sched = self.model, self.cfg, self.schedule
        model.train()
        B, S = motions.shape[0], motions.shape[1]
        t = torch.randint(1, sched.total_steps + 1, (B,), generator=self.generator)
        noise = torch.randn(motions.shape, generator=self.generator, dtype=motions.dtype)
        noisy = q_sample(motions, t, noise, sched)

        cond = model.encode_condition(poses)
        drop = torch.rand(B, generator=self.generator) < cfg.cond_dropout_prob
        null = model.null_encoding(B, S)
        tokens = torch.where(drop[:, None, None], null.tokens, cond.tokens)
        pooled = torch.where(drop[:, None], null.pooled, cond.pooled)
        pred = model(noisy, t, ConditionEncoding(tokens=tokens, pooled=pooled))

        ls = loss_simple(motions, pred)
        gate = (t < sched.total_steps // 2) if cfg.aux_gate_half \
            else torch.ones(B, dtype=torch.bool)
        if gate.any():
            frac = float(gate.sum()) / B
            lj = loss_joints(motions[gate], pred[gate], self.skeleton) * frac
            lv = loss_vel(motions[gate], pred[gate]) * frac
            lf = loss_foot(pred[gate], self.skeleton) * frac
        else:
            lj = lv = lf = torch.zeros((), dtype=motions.dtype)
        w = self.weights
        total = ls + w.joints * lj + w.vel * lv + w.foot * lf

        if not bool(torch.isfinite(total)):
            raise NonFiniteLoss(
                f"non-finite loss at step {self.step_count}",
                diagnostics={
                    "step": self.step_count,
                    "simple": float(ls.detach()), "joints": float(lj.detach()),
                    "vel": float(lv.detach()), "foot": float(lf.detach()),
                    "timesteps": t.tolist(),
                },
            )
        self.optimizer.zero_grad()
        total.backward()
        self.optimizer.step()
        self.step_count += 1
        return {
            "step": self.step_count, "simple": float(ls.detach()),
            "joints": float(lj.detach()), "vel": float(lv.detach()),
            "foot": float(lf.detach()), "total": float(total.detach()),
        }


def train_model(model: DenoiserNet, motions: torch.Tensor, poses: torch.Tensor,
                schedule: DiffusionSchedule, skeleton: Skeleton, cfg: TrainConfig,
                weights: LossWeights | None = None, log_path: str | Path | None = None,
                ) -> list[dict]:
    """Train on an in-memory window set; batches are drawn with replacement.

    Returns the per-``log_every`` loss history (always including the final
    step). The optional JSONL log additionally records wall time.
    """
    trainer = DiffusionTrainer(model, schedule, skeleton, cfg, weights)
    n = motions.shape[0]
    steps = cfg.steps if cfg.steps is not None \
        else cfg.epochs * max(1, (n + cfg.batch_size - 1) // cfg.batch_size)
    history = []
    log_file = open(log_path, "w") if log_path else None
    start = time.monotonic()
    try:
        for step in range(steps):
            idx = torch.randint(0, n, (min(cfg.batch_size, n),), generator=trainer.generator)
            breakdown = trainer.train_step(motions[idx], poses[idx])
            if step % cfg.log_every == 0 or step == steps - 1:
                history.append(breakdown)
                if log_file:
                    entry = dict(breakdown, wall_time=time.monotonic() - start)
                    log_file.write(json.dumps(entry, sort_keys=True) + "\n")
    finally:
        if log_file:
            log_file.close()
    return history


# -- guidance and samplers ---------------------------------------------------------

def guided_denoise(model, noisy: torch.Tensor, t, cond: ConditionEncoding | None,
                   guidance_weight: float) -> torch.Tensor:
    """(1 - w) * unconditional + w * conditional prediction.

    w=0 and w=1 take the single-branch path so they are exactly the
    unconditional / conditional outputs.
    """
    if cond is None or guidance_weight == 0.0:
        return model.denoise(noisy, t, None)
    if guidance_weight == 1.0:
        return model.denoise(noisy, t, cond)
    uncond = model.denoise(noisy, t, None)
    conditional = model.denoise(noisy, t, cond)
    return (1.0 - guidance_weight) * uncond + guidance_weight * conditional


def ddpm_step(noisy: torch.Tensor, t: int, pred_x0: torch.Tensor,
              schedule: DiffusionSchedule, noise: torch.Tensor | None = None) -> torch.Tensor:
    """One reverse step: sample the Gaussian posterior with an x0-parameterized
    mean. The final step (t=1) is deterministic (zero posterior variance)."""
    _check_t(t, schedule.total_steps, low=1)
    t = int(t)
    ab_t = schedule.alpha_bar(t)
    ab_prev = schedule.alpha_bar(t - 1)
    alpha_t = float(schedule.alphas[t])
    beta_t = 1.0 - alpha_t
    coef_x0 = beta_t * np.sqrt(ab_prev) / (1.0 - ab_t)
    coef_xt = (1.0 - ab_prev) * np.sqrt(alpha_t) / (1.0 - ab_t)
    mean = coef_x0 * pred_x0 + coef_xt * noisy
    if t == 1:
        return mean
    var = (1.0 - ab_prev) / (1.0 - ab_t) * beta_t
    if noise is None:
        noise = torch.randn_like(noisy)
    return mean + np.sqrt(var) * noise


@dataclass
class SamplerConfig:
    method: str = "ddim"
    ddim_steps: int = 50
    guidance_weight: float = 0.75
    ddim_eta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("ddim", "ddpm"):
            raise ConfigError(f"unknown sampler method {self.method!r}")
        if not 0.0 <= self.guidance_weight <= 4.0:
            raise ConfigError("guidance_weight must be in [0, 4]")
        if self.ddim_steps < 1:
            raise ConfigError("ddim_steps must be >= 1")


def _as_condition(model: DenoiserNet, cond) -> ConditionEncoding | None:
    if cond is None or isinstance(cond, ConditionEncoding):
        return cond
    if isinstance(cond, Pose2DSequence):
        cond = cond.frames
    return model.encode_condition(torch.as_tensor(np.asarray(cond)).unsqueeze(0))


def sample_frames(model, cond, schedule: DiffusionSchedule, scfg: SamplerConfig,
                  num_frames: int = 150, constraint: tuple[torch.Tensor, torch.Tensor] | None = None,
                  ) -> torch.Tensor:
    """Run the reverse process and return (S, 151) frames.

    ``constraint`` is an optional (reference, mask) pair; at every visited
    timestep the masked entries are replaced by the forward-diffused
    reference, so they match it exactly at t=0.
    """
    cond_enc = _as_condition(model, cond)
    if cond_enc is not None:
        num_frames = cond_enc.tokens.shape[1]
    generator = torch.Generator().manual_seed(scfg.seed)
    dtype = next(model.parameters()).dtype
    x = torch.randn((1, num_frames, MOTION_DIM), generator=generator, dtype=dtype)

    ref = mask = None
    if constraint is not None:
        ref, mask = constraint
        ref = torch.as_tensor(ref, dtype=dtype).unsqueeze(0)
        mask = torch.as_tensor(np.asarray(mask), dtype=torch.bool).unsqueeze(0)
        if ref.shape != x.shape or mask.shape != x.shape:
            raise ShapeMismatch("constraint reference/mask must match the sample shape")

    def apply_constraint(x: torch.Tensor, t_prev: int) -> torch.Tensor:
        if ref is None:
            return x
        noise = torch.randn(ref.shape, generator=generator, dtype=dtype)
        return torch.where(mask, q_sample(ref, t_prev, noise, schedule), x)

    model.eval()
    with torch.no_grad():
        if scfg.method == "ddim":
            taus = schedule.ddim_timesteps(scfg.ddim_steps)
            for i, tau in enumerate(taus):
                pred_x0 = guided_denoise(model, x, tau, cond_enc, scfg.guidance_weight)
                tau_prev = taus[i + 1] if i + 1 < len(taus) else 0
                ab_t = schedule.alpha_bar(tau)
                ab_prev = schedule.alpha_bar(tau_prev)
                eps = (x - np.sqrt(ab_t) * pred_x0) / np.sqrt(1.0 - ab_t)
                sigma = scfg.ddim_eta * np.sqrt((1 - ab_prev) / (1 - ab_t)) \
                    * np.sqrt(max(1 - ab_t / ab_prev, 0.0))
                dir_coef = np.sqrt(max(1.0 - ab_prev - sigma**2, 0.0))
                x = np.sqrt(ab_prev) * pred_x0 + dir_coef * eps
                if sigma > 0:
                    x = x + sigma * torch.randn(x.shape, generator=generator, dtype=dtype)
                x = apply_constraint(x, tau_prev)
        else:
            for t in range(schedule.total_steps, 0, -1):
                pred_x0 = guided_denoise(model, x, t, cond_enc, scfg.guidance_weight)
                noise = torch.randn(x.shape, generator=generator, dtype=dtype)
                x = ddpm_step(x, t, pred_x0, schedule, noise)
                x = apply_constraint(x, t - 1)
    return x.squeeze(0)


def ddim_sample(model, cond, schedule: DiffusionSchedule, scfg: SamplerConfig,
                num_frames: int = 150, fps: float = 30.0) -> Motion:
    """Sample a Motion; deterministic given (seed, checkpoint, condition)."""
    frames = sample_frames(model, cond, schedule, scfg, num_frames)
    return Motion(frames=frames.double().numpy(), fps=fps)
