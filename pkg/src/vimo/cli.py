"""Command-line surface tying the pipeline together.

Every command writes a resolved-config echo next to its outputs so a run can
be reproduced bit-for-bit from the artifacts alone. Errors map to exit codes:
2 configuration, 3 data/IO, 4 numerical.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np
import torch

from . import adapter as adapter_mod
from .diffusion import (
    LossWeights,
    SamplerConfig,
    TrainConfig,
    ddim_sample,
    make_schedule,
    train_model,
)
from .editing import EditRequest, MaskSpec, build_inbetween_mask, build_infill_mask, complete
from .errors import ConfigError, DataError, NumericsError, VimoError
from .io import load_beats_json, load_json, load_motion_json, save_json, save_motion_json
from .metrics import evaluate
from .model import DenoiserNet, ModelConfig, load_checkpoint, save_checkpoint, state_dict_hash
from .pose import clean_sequence, load_pose_json, normalize_condition, window_sequence
from .render import RenderSpec, render_motion
from .skeleton import load_skeleton
from .synth import OcclusionModel, SynthConfig, build_dataset, load_manifest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _build_config(cls, data: dict, where: str):
    """Instantiate a config dataclass, rejecting unknown keys."""
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return cls(**data)


def _echo_config(config: dict, out: Path) -> None:
    if out.suffix:  # single-file output: write a sibling echo
        path = out.with_suffix(out.suffix + ".config.json")
    else:
        out.mkdir(parents=True, exist_ok=True)
        path = out / "resolved_config.json"
    save_json(config, path)



def _require_file(path, field: str) -> None:
    if path is None or not Path(path).exists():
        exc = ConfigError(f"required path does not exist: {path} (field: {field})")
        exc.field = field
        raise exc

def _load_condition(path: str, conf_threshold: float = 0.3):
    pose = load_pose_json(path)
    return normalize_condition(clean_sequence(pose, conf_threshold))


def _load_training_windows(manifest_path: str, length: int, stride: int | None,
                           split: str = "train", conf_threshold: float = 0.3):
    """(motions, poses) tensors from every (view, motion) pair in the split."""
    manifest = load_manifest(manifest_path)
    motions, poses = [], []
    for sample in manifest.samples:
        if sample.split != split:
            continue
        motion_path, pose_paths, _cam = manifest.paths(sample)
        motion = load_motion_json(motion_path)
        for pose_path in pose_paths:
            pose = _load_condition(pose_path, conf_threshold)
            for pose_win, motion_win in window_sequence(pose, motion, length, stride):
                motions.append(motion_win.frames)
                poses.append(pose_win.frames)
    if not motions:
        raise DataError(f"no {split!r} windows in {manifest_path}")
    return (
        torch.tensor(np.stack(motions), dtype=torch.float32),
        torch.tensor(np.stack(poses), dtype=torch.float32),
    )


# -- subcommands -------------------------------------------------------------

def cmd_synth(args) -> int:
    config = SynthConfig(
        kinds=tuple(args.kinds.split(",")),
        n_motions=args.n,
        n_views=args.views,
        length=args.length,
        seed=args.seed,
        occlusion_prob=args.occlusion,
        conf_noise_std=args.conf_noise,
        moving_cameras=args.moving_cameras,
        holdout_kinds=tuple(k for k in args.holdout.split(",") if k),
    )
    out = Path(args.out)
    build_dataset(config, out)
    _echo_config({"command": "synth", **dataclasses.asdict(config)}, out)
    return EXIT_OK


def _train_configs_from_file(path: str | None):
    raw = load_json(path) if path else {}
    known_sections = {"model", "train", "loss_weights", "schedule", "window"}
    unknown = set(raw) - known_sections
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    model_cfg = _build_config(ModelConfig, raw.get("model", {}), "model")
    train_cfg = _build_config(TrainConfig, raw.get("train", {}), "train")
    weights = _build_config(LossWeights, raw.get("loss_weights", {}), "loss_weights")
    sched_raw = dict(raw.get("schedule", {}))
    unknown = set(sched_raw) - {"kind", "total_steps"}
    if unknown:
        raise ConfigError(f"unknown schedule keys: {sorted(unknown)}")
    window = dict(raw.get("window", {}))
    unknown = set(window) - {"length", "stride"}
    if unknown:
        raise ConfigError(f"unknown window keys: {sorted(unknown)}")
    return model_cfg, train_cfg, weights, sched_raw, window


def cmd_train(args) -> int:
    model_cfg, train_cfg, weights, sched_raw, window = _train_configs_from_file(args.config)
    if args.seed is not None:
        train_cfg = dataclasses.replace(train_cfg, seed=args.seed)
    schedule = make_schedule(sched_raw.get("kind", "cosine"),
                             int(sched_raw.get("total_steps", 1000)))
    length = int(window.get("length", 150))
    stride = window.get("stride")
    motions, poses = _load_training_windows(args.data, length, stride)

    skeleton = load_skeleton()
    torch.manual_seed(train_cfg.seed)
    model = DenoiserNet(model_cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    history = train_model(model, motions, poses, schedule, skeleton, train_cfg,
                          weights, log_path=out / "train.log.jsonl")
    save_checkpoint(model, out / "final.pt",
                    step=history[-1]["step"] if history else 0,
                    extra={"schedule": {"kind": schedule.kind,
                                        "total_steps": schedule.total_steps}})
    _echo_config(
        {
            "command": "train",
            "data": str(args.data),
            "model": dataclasses.asdict(model_cfg),
            "train": dataclasses.asdict(train_cfg),
            "loss_weights": dataclasses.asdict(weights),
            "schedule": {"kind": schedule.kind, "total_steps": schedule.total_steps},
            "window": {"length": length, "stride": stride},
            "final_loss": history[-1] if history else None,
        },
        out,
    )
    return EXIT_OK


def _schedule_from_ckpt(meta: dict):
    sched_info = meta.get("extra", {}).get("schedule", {})
    return make_schedule(sched_info.get("kind", "cosine"),
                         int(sched_info.get("total_steps", 1000)))


def cmd_sample(args) -> int:
    _require_file(args.ckpt, "ckpt")
    model, meta = load_checkpoint(args.ckpt)
    schedule = _schedule_from_ckpt(meta)
    scfg = SamplerConfig(method=args.method, ddim_steps=args.steps,
                         guidance_weight=args.guidance, ddim_eta=args.eta, seed=args.seed)
    cond = _load_condition(args.pose) if args.pose else None
    motion = ddim_sample(model, cond, schedule, scfg, num_frames=args.length)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_motion_json(motion, out)
    _echo_config(
        {"command": "sample", "ckpt": str(args.ckpt), "pose": args.pose,
         "sampler": dataclasses.asdict(scfg), "length": args.length},
        out,
    )
    return EXIT_OK


def _parse_mask(spec: str, num_frames: int) -> MaskSpec:
    try:
        kind, _, rest = spec.partition(":")
        if kind == "inbetween":
            head, tail = (int(v) for v in rest.split(","))
            return build_inbetween_mask(num_frames, head, tail)
        if kind == "infill":
            start, end = (int(v) for v in rest.split(","))
            return build_infill_mask(num_frames, (start, end))
    except ValueError as exc:
        raise ConfigError(f"cannot parse mask spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown mask kind {spec!r}; use inbetween:H,T or infill:S,E")


def cmd_complete(args) -> int:
    _require_file(args.ckpt, "ckpt")
    _require_file(args.ref, "ref")
    model, meta = load_checkpoint(args.ckpt)
    schedule = _schedule_from_ckpt(meta)
    reference = load_motion_json(args.ref)
    mask = _parse_mask(args.mask, reference.num_frames)
    scfg = SamplerConfig(method=args.method, ddim_steps=args.steps,
                         guidance_weight=args.guidance, seed=args.seed)
    cond = _load_condition(args.pose) if args.pose else None
    request = EditRequest(reference=reference, mask=mask, condition=cond, sampler=scfg)
    motion = complete(request, model, schedule)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_motion_json(motion, out)
    _echo_config(
        {"command": "complete", "ckpt": str(args.ckpt), "ref": str(args.ref),
         "mask": args.mask, "pose": args.pose, "sampler": dataclasses.asdict(scfg)},
        out,
    )
    return EXIT_OK


def cmd_stylize(args) -> int:
    from .adapter import _backbone_hash
    from .io import load_tensor_archive

    _require_file(args.backbone, "backbone")
    _require_file(args.style_data, "style_data")
    adapter = adapter_mod.attach_adapter(args.backbone)
    motions, poses = _load_training_windows(args.style_data, args.length, None)
    header, _tensors = load_tensor_archive(args.backbone)
    schedule = _schedule_from_ckpt(header)
    train_cfg = TrainConfig(steps=args.steps, seed=args.seed,
                            batch_size=min(4, motions.shape[0]))
    skeleton = load_skeleton()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    adapter_mod.train_adapter(adapter, motions, poses, schedule, skeleton, train_cfg,
                              log_path=out / "train.log.jsonl")
    adapter_mod.save_adapter(adapter, out / "adapter.pt", args.backbone, step=args.steps)
    _echo_config(
        {"command": "stylize", "backbone": str(args.backbone),
         "backbone_hash": _backbone_hash(args.backbone),
         "style_data": str(args.style_data),
         "train": dataclasses.asdict(train_cfg), "length": args.length},
        out,
    )
    return EXIT_OK


def _load_motion_dir(path: str):
    files = sorted(Path(path).glob("*.json"))
    motions = [load_motion_json(f) for f in files if not f.name.endswith(".config.json")]
    if not motions:
        raise DataError(f"no motion files found in {path}")
    return motions


def cmd_eval(args) -> int:
    skeleton = load_skeleton()
    generated = _load_motion_dir(args.gen)
    reference = _load_motion_dir(args.ref)
    music = load_beats_json(args.music) if args.music else None
    report = evaluate(generated, reference, music, skeleton, sigma_seconds=args.sigma,
                      provenance={"gen": str(args.gen), "ref": str(args.ref)})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_json(report.to_dict(), out)
    _echo_config({"command": "eval", "gen": str(args.gen), "ref": str(args.ref),
                  "music": args.music, "sigma_seconds": args.sigma}, out)
    return EXIT_OK


def cmd_render(args) -> int:
    motion = load_motion_json(args.motion)
    skeleton = load_skeleton()
    spec = RenderSpec(
        azimuth_deg=args.azimuth, elevation_deg=args.elevation, distance=args.distance,
        image_size=(args.width, args.height), frame_stride=args.stride, mode=args.mode,
        focal=args.focal, overlay_condition=args.overlay is not None,
    )
    condition = load_pose_json(args.overlay) if args.overlay else None
    out = Path(args.out)
    render_motion(motion, skeleton, spec, out, condition)
    _echo_config({"command": "render", "motion": str(args.motion),
                  **dataclasses.asdict(spec)}, out)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vimo",
                                     description="pose-conditioned motion diffusion toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--kinds", default="walk,wave")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--views", type=int, default=2)
    p.add_argument("--length", type=int, default=150)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--occlusion", type=float, default=0.0)
    p.add_argument("--conf-noise", type=float, default=0.0)
    p.add_argument("--moving-cameras", action="store_true")
    p.add_argument("--holdout", default="")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the denoiser")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="sample a motion from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--pose", default=None)
    p.add_argument("--length", type=int, default=150)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--guidance", type=float, default=0.75)
    p.add_argument("--method", default="ddim", choices=("ddim", "ddpm"))
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("complete", help="masked completion against a reference")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--mask", required=True, help="inbetween:H,T or infill:S,E")
    p.add_argument("--pose", default=None)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--guidance", type=float, default=0.75)
    p.add_argument("--method", default="ddim", choices=("ddim", "ddpm"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("stylize", help="train a zero-conv style adapter")
    p.add_argument("--backbone", required=True)
    p.add_argument("--style-data", required=True)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--length", type=int, default=150)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stylize)

    p = sub.add_parser("eval", help="metric report for generated vs reference motions")
    p.add_argument("--gen", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--music", default=None)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="stick-figure frames from a motion file")
    p.add_argument("--motion", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--azimuth", type=float, default=40.0)
    p.add_argument("--elevation", type=float, default=15.0)
    p.add_argument("--distance", type=float, default=3.5)
    p.add_argument("--focal", type=float, default=500.0)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--mode", default="perspective", choices=("perspective", "orthographic"))
    p.add_argument("--overlay", default=None)
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _emit_error(exc)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        _emit_error(exc)
        return EXIT_DATA
    except NumericsError as exc:
        _emit_error(exc)
        return EXIT_NUMERIC
    except VimoError as exc:  # anything else from the package
        _emit_error(exc)
        return EXIT_CONFIG


def _emit_error(exc: Exception) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if getattr(exc, "field", None):
        payload["field"] = exc.field
    diagnostics = getattr(exc, "diagnostics", None)
    if diagnostics:
        payload["diagnostics"] = diagnostics
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
