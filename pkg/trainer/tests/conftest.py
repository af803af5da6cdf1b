"""Shared helpers: synthetic two-sprite frame datasets in the on-disk format."""

import json
import struct

import numpy as np
import pytest


def write_frame(path, frame):
    frame = np.ascontiguousarray(frame, dtype="<f4")
    h, w = frame.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", h, w))
        fh.write(frame.tobytes())


def two_sprite_frame(rng, size=32, sprite=6):
    frame = np.zeros((size, size), np.float32)
    for intensity in (0.5, 1.0):
        r = int(rng.integers(0, size - sprite))
        c = int(rng.integers(0, size - sprite))
        frame[r : r + sprite, c : c + sprite] = intensity
    return frame


def make_dataset(root, n_frames=200, size=32, seed=0, sprite=6):
    """Synthetic dataset directory with the standard 95/5 split index."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    names = []
    for i in range(n_frames):
        name = f"frame_{i:05d}.bin"
        write_frame(root / name, two_sprite_frame(rng, size=size, sprite=sprite))
        names.append(name)
    train = min(n_frames - 1, max(1, round(n_frames * 0.95)))
    index = {
        "frame_count": n_frames,
        "input_size": [size, size],
        "env": "synthetic",
        "palette_size": 4,
        "split": {"train": train, "val": n_frames - train},
        "frames": names,
        "episode_starts": [0],
        "feature_counts": [],
    }
    (root / "index.json").write_text(json.dumps(index))
    return root


@pytest.fixture(scope="session")
def sprite_dataset(tmp_path_factory):
    return make_dataset(tmp_path_factory.mktemp("ds") / "sprites", n_frames=200)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    return make_dataset(
        tmp_path_factory.mktemp("ds") / "tiny", n_frames=40, size=8, sprite=3
    )
