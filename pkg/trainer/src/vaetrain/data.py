"""Frame-dataset reader (the planner-side collection format).

A dataset directory holds ``index.json`` plus one binary file per frame:
u32 height, u32 width (little-endian), then height*width float32 values in
[0, 1], row-major.  The index carries the frame list and the 95/5
train/validation split.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

__all__ = ["read_frame", "load_dataset"]


def read_frame(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ValueError(f"{path}: truncated frame file")
    h, w = struct.unpack_from("<II", raw, 0)
    if len(raw) != 8 + 4 * h * w:
        raise ValueError(f"{path}: payload does not match {h}x{w} header")
    return np.frombuffer(raw, dtype="<f4", count=h * w, offset=8).reshape(h, w).copy()


def load_dataset(root: str | Path) -> tuple[torch.Tensor, torch.Tensor, dict]:
    """Returns (train, val) stacks shaped (N, 1, H, W) plus the raw index."""
    root = Path(root)
    with open(root / "index.json") as fh:
        index = json.load(fh)
    frames = index["frames"]
    if not frames:
        raise ValueError("dataset is empty")
    split = index["split"]["train"]
    stack = np.stack([read_frame(root / name) for name in frames])
    tensor = torch.from_numpy(stack).unsqueeze(1).float()
    return tensor[:split], tensor[split:], index
