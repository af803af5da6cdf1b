"""B-PROST boolean features over a tiled palette screen.

Three feature families share one dense id space, laid out as contiguous
blocks ``[Basic | B-PROS | B-PROT]``:

- Basic ``(i, j, c)``: color c occurs somewhere in tile (i, j).
- B-PROS ``(di, dj, c, c')``: colors c and c' occur in two tiles whose
  relative offset is (di, dj), within the same frame.  The pair is symmetric,
  ``(di, dj, c, c') == (-di, -dj, c', c)``, and each class is stored once
  under its lexicographically smallest form.
- B-PROT ``(di, dj, c, c')``: color c occurs in a tile of the *previous*
  decision point and c' in a tile of the current one at relative offset
  (di, dj).  The temporal direction breaks the symmetry, so no reduction.

Offsets range over all ``(2*tiles_y - 1) * (2*tiles_x - 1)`` displacements.
For the Atari reference geometry (14 x 16 tiles of 15 x 10 pixels, 128
colors) the three blocks hold 28,672 + 6,856,768 + 13,713,408 = 20,598,848
features.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .features import Extractor, FeatureSet, FeatureSpace
from .sim import Screen

__all__ = [
    "BprostConfig",
    "atari_config",
    "bprost_count",
    "encode_basic",
    "encode_pros",
    "encode_prot",
    "decode_feature",
    "basic_features",
    "pros_features",
    "prot_features",
    "extract_bprost",
    "BprostExtractor",
]


@dataclass(frozen=True)
class BprostConfig:
    """Tile grid geometry and palette for one screen shape."""

    tiles_x: int
    tiles_y: int
    tile_w: int
    tile_h: int
    palette_size: int

    def __post_init__(self) -> None:
        for field in ("tiles_x", "tiles_y", "tile_w", "tile_h", "palette_size"):
            if getattr(self, field) < 1:
                raise ValueError(f"{field} must be >= 1")

    @property
    def screen_width(self) -> int:
        return self.tiles_x * self.tile_w

    @property
    def screen_height(self) -> int:
        return self.tiles_y * self.tile_h

    @property
    def tile_count(self) -> int:
        return self.tiles_x * self.tiles_y

    @property
    def offset_count(self) -> int:
        return (2 * self.tiles_y - 1) * (2 * self.tiles_x - 1)

    @classmethod
    def for_screen(cls, screen: Screen, tile_w: int = 4, tile_h: int = 4) -> "BprostConfig":
        if screen.width % tile_w or screen.height % tile_h:
            raise ValueError("screen dimensions must be divisible by the tile size")
        return cls(
            tiles_x=screen.width // tile_w,
            tiles_y=screen.height // tile_h,
            tile_w=tile_w,
            tile_h=tile_h,
            palette_size=screen.palette_size,
        )


def atari_config() -> BprostConfig:
    """Reference geometry: 210x160 screen, 14x16 tiles of 15x10, 128 colors."""
    return BprostConfig(tiles_x=16, tiles_y=14, tile_w=10, tile_h=15, palette_size=128)


def bprost_count(cfg: BprostConfig) -> tuple[int, int, int, int]:
    """Feature counts (basic, pros, prot, total) for a geometry.

    Pure arithmetic: basic = T*C; with O relative offsets, the PROS symmetry
    pairs classes two-to-one except the C self-pairs at offset (0, 0), giving
    (O*C^2 + C) / 2; PROT keeps all O*C^2 directed tuples.
    """
    t, c, o = cfg.tile_count, cfg.palette_size, cfg.offset_count
    basic = t * c
    pros = (o * c * c + c) // 2
    prot = o * c * c
    return basic, pros, prot, basic + pros + prot


def _offset_index(cfg: BprostConfig, dy: int, dx: int):
    return (dy + cfg.tiles_y - 1) * (2 * cfg.tiles_x - 1) + (dx + cfg.tiles_x - 1)


def encode_basic(cfg: BprostConfig, ty: int, tx: int, c: int) -> int:
    return (ty * cfg.tiles_x + tx) * cfg.palette_size + c


def encode_pros(cfg: BprostConfig, dy: int, dx: int, c: int, c2: int) -> int:
    """Dense id of a PROS tuple; symmetric forms map to the same id."""
    c_n = cfg.palette_size
    o = _offset_index(cfg, dy, dx)
    center = (cfg.offset_count - 1) // 2
    if o > center or (o == center and c > c2):
        o = cfg.offset_count - 1 - o
        c, c2 = c2, c
    basic, _, _, _ = bprost_count(cfg)
    if o < center:
        rel = o * c_n * c_n + c * c_n + c2
    else:
        rel = center * c_n * c_n + c * c_n - c * (c - 1) // 2 + (c2 - c)
    return basic + rel


def encode_prot(cfg: BprostConfig, dy: int, dx: int, c_prev: int, c_now: int) -> int:
    c_n = cfg.palette_size
    basic, pros, _, _ = bprost_count(cfg)
    o = _offset_index(cfg, dy, dx)
    return basic + pros + o * c_n * c_n + c_prev * c_n + c_now


def decode_feature(cfg: BprostConfig, fid: int) -> tuple[str, tuple[int, ...]]:
    """Inverse of the encoders: id -> (family, parameter tuple)."""
    basic, pros, prot, total = bprost_count(cfg)
    c_n = cfg.palette_size
    if not 0 <= fid < total:
        raise ValueError(f"feature id {fid} outside [0, {total})")
    if fid < basic:
        tile, c = divmod(fid, c_n)
        ty, tx = divmod(tile, cfg.tiles_x)
        return "basic", (ty, tx, c)
    center = (cfg.offset_count - 1) // 2
    if fid < basic + pros:
        rel = fid - basic
        if rel < center * c_n * c_n:
            o, pair = divmod(rel, c_n * c_n)
            c, c2 = divmod(pair, c_n)
        else:
            o = center
            r = rel - center * c_n * c_n
            c = 0
            while c * c_n - c * (c - 1) // 2 + (c_n - 1 - c) < r:
                c += 1
            c2 = c + r - (c * c_n - c * (c - 1) // 2)
        dy = o // (2 * cfg.tiles_x - 1) - (cfg.tiles_y - 1)
        dx = o % (2 * cfg.tiles_x - 1) - (cfg.tiles_x - 1)
        return "pros", (dy, dx, c, c2)
    rel = fid - basic - pros
    o, pair = divmod(rel, c_n * c_n)
    c, c2 = divmod(pair, c_n)
    dy = o // (2 * cfg.tiles_x - 1) - (cfg.tiles_y - 1)
    dx = o % (2 * cfg.tiles_x - 1) - (cfg.tiles_x - 1)
    return "prot", (dy, dx, c, c2)


def _check_screen(screen: Screen, cfg: BprostConfig) -> None:
    if (screen.width, screen.height) != (cfg.screen_width, cfg.screen_height):
        raise ValueError(
            f"screen {screen.width}x{screen.height} does not match tile grid "
            f"{cfg.screen_width}x{cfg.screen_height}"
        )
    if screen.palette_size > cfg.palette_size:
        raise ValueError("screen palette exceeds configured palette")


def basic_features(screen: Screen, cfg: BprostConfig) -> FeatureSet:
    """Ids of every (tile, color) pair present on the screen."""
    _check_screen(screen, cfg)
    px = screen.pixels.astype(np.int64)
    rows = np.arange(screen.height) // cfg.tile_h
    cols = np.arange(screen.width) // cfg.tile_w
    tiles = rows[:, None] * cfg.tiles_x + cols[None, :]
    ids = np.unique(tiles * cfg.palette_size + px)
    return FeatureSet.from_sorted_array(ids)


def _basic_coords(cfg: BprostConfig, basic: FeatureSet):
    tiles, cs = np.divmod(basic.arr, cfg.palette_size)
    tys, txs = np.divmod(tiles, cfg.tiles_x)
    return tys, txs, cs


def _pros_rel_ids(cfg: BprostConfig, dy, dx, c, c2) -> np.ndarray:
    """Vectorized canonical PROS encoding, relative to the PROS block."""
    c_n = cfg.palette_size
    span = 2 * cfg.tiles_x - 1
    o = (dy + cfg.tiles_y - 1) * span + (dx + cfg.tiles_x - 1)
    center = (cfg.offset_count - 1) // 2
    flip = (o > center) | ((o == center) & (c > c2))
    o = np.where(flip, cfg.offset_count - 1 - o, o)
    lo = np.where(flip, c2, c)
    hi = np.where(flip, c, c2)
    tri = center * c_n * c_n + lo * c_n - lo * (lo - 1) // 2 + (hi - lo)
    return np.where(o == center, tri, o * c_n * c_n + lo * c_n + hi)


def pros_features(basic_now: FeatureSet, cfg: BprostConfig) -> FeatureSet:
    """PROS ids over every unordered pair of present basic features."""
    n = len(basic_now)
    if n == 0:
        return FeatureSet()
    basic, _, _, _ = bprost_count(cfg)
    tys, txs, cs = _basic_coords(cfg, basic_now)
    i, j = np.triu_indices(n)
    rel = _pros_rel_ids(cfg, tys[j] - tys[i], txs[j] - txs[i], cs[i], cs[j])
    return FeatureSet.from_sorted_array(np.unique(rel) + basic)


def prot_features(
    basic_prev: FeatureSet, basic_now: FeatureSet, cfg: BprostConfig
) -> FeatureSet:
    """Directed PROT ids from previous-frame to current-frame basic features."""
    if len(basic_prev) == 0 or len(basic_now) == 0:
        return FeatureSet()
    basic, pros, _, _ = bprost_count(cfg)
    c_n = cfg.palette_size
    span = 2 * cfg.tiles_x - 1
    pys, pxs, pcs = _basic_coords(cfg, basic_prev)
    nys, nxs, ncs = _basic_coords(cfg, basic_now)
    dy = nys[None, :] - pys[:, None]
    dx = nxs[None, :] - pxs[:, None]
    o = (dy + cfg.tiles_y - 1) * span + (dx + cfg.tiles_x - 1)
    rel = o * c_n * c_n + pcs[:, None] * c_n + ncs[None, :]
    return FeatureSet.from_sorted_array(np.unique(rel) + basic + pros)


def extract_bprost(
    screen: Screen, prev_basic: FeatureSet | None, cfg: BprostConfig
) -> tuple[FeatureSet, FeatureSet]:
    """Full B-PROST set for one frame plus this frame's basic set.

    The returned basic set is what the caller threads into the next call as
    ``prev_basic``; a None ``prev_basic`` (first decision point) emits no
    PROT features.
    """
    now = basic_features(screen, cfg)
    pros = pros_features(now, cfg)
    if prev_basic is None:
        prot_arr = np.empty(0, dtype=np.int64)
    else:
        prot_arr = prot_features(prev_basic, now, cfg).arr
    merged = np.concatenate([now.arr, pros.arr, prot_arr])
    return FeatureSet.from_sorted_array(np.sort(merged)), now


class BprostExtractor(Extractor):
    """Extractor backend over B-PROST ids; context threads the basic set.

    Per-screen basic and PROS results are memoized (keyed by screen bytes)
    since tree search revisits screens heavily; PROT depends on the previous
    frame and is computed per call.
    """

    def __init__(self, cfg: BprostConfig, cache: bool = True):
        self.cfg = cfg
        _, _, _, total = bprost_count(cfg)
        self.space = FeatureSpace(size=total, descriptor="bprost")
        self._cache: dict[bytes, tuple[FeatureSet, FeatureSet]] | None = (
            {} if cache else None
        )

    def _static_parts(self, screen: Screen) -> tuple[FeatureSet, FeatureSet]:
        if self._cache is None:
            now = basic_features(screen, self.cfg)
            return now, pros_features(now, self.cfg)
        key = screen.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            now = basic_features(screen, self.cfg)
            hit = (now, pros_features(now, self.cfg))
            self._cache[key] = hit
        return hit

    def extract(self, screen: Screen, ctx: Any = None) -> tuple[FeatureSet, Any]:
        now, pros = self._static_parts(screen)
        if ctx is None:
            prot_arr = np.empty(0, dtype=np.int64)
        else:
            prot_arr = prot_features(ctx, now, self.cfg).arr
        merged = np.concatenate([now.arr, pros.arr, prot_arr])
        return FeatureSet.from_sorted_array(np.sort(merged)), now
