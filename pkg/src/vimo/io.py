"""Versioned JSON file formats shared across the pipeline.

All writers produce canonical JSON (sorted keys) so identical inputs yield
byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .skeleton import MOTION_DIM, Motion

MOTION_LAYOUT = "rot6d24+contact4+root3"


def save_json(data: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(data, sort_keys=True, indent=1))


def load_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc


def motion_to_dict(motion: Motion) -> dict:
    return {
        "format": "motion-v1",
        "fps": motion.fps,
        "layout": MOTION_LAYOUT,
        "frames": motion.frames.tolist(),
    }


def motion_from_dict(data: dict) -> Motion:
    if data.get("format", "motion-v1") != "motion-v1":
        raise SchemaError(f"unsupported motion format {data.get('format')!r}")
    if data.get("layout", MOTION_LAYOUT) != MOTION_LAYOUT:
        raise SchemaError(f"unsupported motion layout {data.get('layout')!r}")
    frames = np.asarray(data.get("frames", []), dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != MOTION_DIM:
        raise SchemaError(f"motion frames must be (S, {MOTION_DIM}), got {frames.shape}")
    return Motion(frames=frames, fps=float(data.get("fps", 30.0)))


def save_motion_json(motion: Motion, path: str | Path) -> None:
    save_json(motion_to_dict(motion), path)


def load_motion_json(path: str | Path) -> Motion:
    return motion_from_dict(load_json(path))


# -- deterministic tensor archives ------------------------------------------
#
# torch.save embeds non-reproducible bytes in its container, so checkpoints
# use a flat format: magic, length-prefixed canonical-JSON header, then raw
# little-endian tensor blobs. Identical contents give identical bytes.

_ARCHIVE_MAGIC = b"VIMOTNSR1\n"

_DTYPE_NAMES = {
    "float32": np.float32, "float64": np.float64, "float16": np.float16,
    "int64": np.int64, "int32": np.int32, "uint8": np.uint8, "bool": np.bool_,
}


def save_tensor_archive(path: str | Path, header: dict, tensors: dict) -> None:
    """Write a deterministic archive of named tensors plus a JSON header."""
    import torch

    entries = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        tensor = tensors[name]
        arr = tensor.detach().cpu().numpy() if torch.is_tensor(tensor) else np.asarray(tensor)
        if arr.dtype.name not in _DTYPE_NAMES:
            raise SchemaError(f"unsupported tensor dtype {arr.dtype} for {name!r}")
        blob = np.ascontiguousarray(arr).tobytes()
        entries.append({
            "name": name, "dtype": arr.dtype.name, "shape": list(arr.shape),
            "offset": offset, "nbytes": len(blob),
        })
        blobs.append(blob)
        offset += len(blob)
    full_header = dict(header, tensors=entries)
    header_bytes = json.dumps(full_header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_ARCHIVE_MAGIC)
        fh.write(len(header_bytes).to_bytes(8, "little"))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def load_tensor_archive(path: str | Path) -> tuple[dict, dict]:
    """Read an archive; returns (header, name -> torch.Tensor)."""
    import torch

    with open(path, "rb") as fh:
        magic = fh.read(len(_ARCHIVE_MAGIC))
        if magic != _ARCHIVE_MAGIC:
            raise SchemaError(f"{path}: not a tensor archive")
        header_len = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(header_len).decode())
        data = fh.read()
    tensors = {}
    for entry in header.pop("tensors", []):
        dtype = _DTYPE_NAMES[entry["dtype"]]
        blob = data[entry["offset"] : entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(blob, dtype=dtype).reshape(entry["shape"]).copy()
        tensors[entry["name"]] = torch.from_numpy(arr)
    return header, tensors


def save_beats_json(beats, path: str | Path) -> None:
    save_json({"format": "beats-v1", "beats": [float(b) for b in beats]}, path)


def load_beats_json(path: str | Path) -> np.ndarray:
    data = load_json(path)
    if isinstance(data, list):
        beats = data
    else:
        if data.get("format", "beats-v1") != "beats-v1":
            raise SchemaError(f"unsupported beats format {data.get('format')!r}")
        beats = data.get("beats", [])
    return np.asarray([float(b) for b in beats], dtype=np.float64)
