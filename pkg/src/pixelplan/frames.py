"""Preprocessed frame storage: single-frame files and the dataset index.

Frames are grayscale float32 arrays in [0, 1] at a declared input size.  They
are stored post-preprocessing so the planner-side encoder and the trainer
consume identical bytes.

Frame file layout: u32 height, u32 width (little-endian), then height*width
float32 little-endian values, row-major.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sim import Screen

__all__ = [
    "screen_to_frame",
    "write_frame",
    "read_frame",
    "split_point",
    "FrameDataset",
]


def screen_to_frame(screen: Screen, out_hw: tuple[int, int] | None = None) -> np.ndarray:
    """Grayscale [0, 1] frame from a palette screen, optionally resized.

    Gray level = palette index / (palette_size - 1).  Integer-factor
    downsampling averages blocks; any other resize uses nearest neighbor.
    """
    denom = max(screen.palette_size - 1, 1)
    gray = screen.pixels.astype(np.float32) / denom
    if out_hw is None or out_hw == (screen.height, screen.width):
        return gray
    oh, ow = out_hw
    h, w = gray.shape
    if h % oh == 0 and w % ow == 0:
        fh, fw = h // oh, w // ow
        return gray.reshape(oh, fh, ow, fw).mean(axis=(1, 3), dtype=np.float32)
    rows = (np.arange(oh) * h // oh).astype(np.intp)
    cols = (np.arange(ow) * w // ow).astype(np.intp)
    return gray[np.ix_(rows, cols)]


def frame_to_screen(frame: np.ndarray, palette_size: int) -> Screen:
    """Invert :func:`screen_to_frame` for unresized frames (exact at desk scale)."""
    idx = np.rint(frame * (palette_size - 1)).astype(np.uint8)
    h, w = idx.shape
    return Screen(width=w, height=h, palette_size=palette_size, pixels=idx)


def write_frame(path: str | Path, frame: np.ndarray) -> None:
    frame = np.ascontiguousarray(frame, dtype="<f4")
    if frame.ndim != 2:
        raise ValueError("frame must be a 2-D array")
    h, w = frame.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", h, w))
        fh.write(frame.tobytes())


def read_frame(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ValueError(f"{path}: truncated frame file")
    h, w = struct.unpack_from("<II", raw, 0)
    if len(raw) != 8 + 4 * h * w:
        raise ValueError(f"{path}: size does not match {h}x{w} header")
    return np.frombuffer(raw, dtype="<f4", count=h * w, offset=8).reshape(h, w).copy()


def split_point(n_frames: int) -> int:
    """Training-set size for an n-frame dataset: 95/5, both halves non-empty."""
    if n_frames < 2:
        raise ValueError("need at least 2 frames to split into train/validation")
    return min(n_frames - 1, max(1, round(n_frames * 0.95)))


@dataclass
class FrameDataset:
    """A directory of frame files plus its JSON index."""

    root: Path
    env_name: str
    input_size: tuple[int, int]
    palette_size: int
    frames: list[str] = field(default_factory=list)
    episode_starts: list[int] = field(default_factory=list)
    feature_counts: list[int] = field(default_factory=list)

    INDEX_NAME = "index.json"

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def train_count(self) -> int:
        return split_point(self.frame_count)

    @property
    def val_count(self) -> int:
        return self.frame_count - self.train_count

    def frame_path(self, i: int) -> Path:
        return self.root / self.frames[i]

    def load_frame(self, i: int) -> np.ndarray:
        return read_frame(self.frame_path(i))

    def iter_frames(self):
        for i in range(self.frame_count):
            yield self.load_frame(i)

    def train_indices(self) -> range:
        return range(0, self.train_count)

    def val_indices(self) -> range:
        return range(self.train_count, self.frame_count)

    def save_index(self) -> None:
        index = {
            "frame_count": self.frame_count,
            "input_size": list(self.input_size),
            "env": self.env_name,
            "palette_size": self.palette_size,
            "split": {"train": self.train_count, "val": self.val_count},
            "frames": self.frames,
            "episode_starts": self.episode_starts,
            "feature_counts": self.feature_counts,
        }
        with open(self.root / self.INDEX_NAME, "w") as fh:
            json.dump(index, fh, indent=1)

    @classmethod
    def load(cls, root: str | Path) -> "FrameDataset":
        root = Path(root)
        with open(root / cls.INDEX_NAME) as fh:
            index = json.load(fh)
        ds = cls(
            root=root,
            env_name=index["env"],
            input_size=tuple(index["input_size"]),
            palette_size=index["palette_size"],
            frames=list(index["frames"]),
            episode_starts=list(index.get("episode_starts", [])),
            feature_counts=list(index.get("feature_counts", [])),
        )
        if index["frame_count"] != ds.frame_count:
            raise ValueError("index frame_count does not match frame list")
        missing = [f for f in ds.frames if not (root / f).exists()]
        if missing:
            raise ValueError(f"index lists missing frame files: {missing[:3]}")
        if index["split"] != {"train": ds.train_count, "val": ds.val_count}:
            raise ValueError("index split does not match the 95/5 rule")
        return ds
