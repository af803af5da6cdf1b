"""Boolean feature spaces, sparse feature sets and the extractor interface."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable

import numpy as np

from .sim import Screen

__all__ = ["FeatureSpace", "FeatureSet", "Extractor", "RawExtractor"]


@dataclass(frozen=True)
class FeatureSpace:
    """Declared universe of boolean feature ids for one backend."""

    size: int
    descriptor: str

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError("feature space must contain at least one feature")


_EMPTY = np.empty(0, dtype=np.int64)


class FeatureSet:
    """Immutable sorted sparse set of feature ids with exact membership.

    Backed by a sorted, duplicate-free int64 array (``arr``); ``ids`` exposes
    the same content as a plain tuple for convenience.
    """

    __slots__ = ("arr", "_ids", "_members")

    def __init__(self, ids: Iterable[int] = ()):
        arr = np.unique(np.fromiter(ids, dtype=np.int64))
        if arr.size and arr[0] < 0:
            raise ValueError("feature ids must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "arr", arr)
        object.__setattr__(self, "_ids", None)
        object.__setattr__(self, "_members", None)

    @classmethod
    def from_sorted_array(cls, arr: np.ndarray) -> "FeatureSet":
        """Fast path for an already sorted, duplicate-free int array."""
        fs = cls.__new__(cls)
        arr = np.asarray(arr, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(fs, "arr", arr)
        object.__setattr__(fs, "_ids", None)
        object.__setattr__(fs, "_members", None)
        return fs

    @property
    def ids(self) -> tuple[int, ...]:
        if self._ids is None:
            object.__setattr__(self, "_ids", tuple(int(i) for i in self.arr))
        return self._ids

    def __setattr__(self, name, value):
        raise AttributeError("FeatureSet is immutable")

    def __contains__(self, fid: int) -> bool:
        if self._members is None:
            object.__setattr__(self, "_members", frozenset(self.ids))
        return fid in self._members

    def __iter__(self):
        return iter(self.ids)

    def __len__(self) -> int:
        return int(self.arr.size)

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureSet) and np.array_equal(self.arr, other.arr)

    def __hash__(self) -> int:
        return hash(self.arr.tobytes())

    def __repr__(self) -> str:
        return f"FeatureSet({list(self.arr)!r})"


class Extractor:
    """Maps a screen (plus backend context) to a FeatureSet.

    ``extract`` returns the features and an opaque context object the caller
    threads into the extraction of the successor frame (used by backends with
    temporal features; stateless backends return None).
    """

    space: FeatureSpace

    def extract(self, screen: Screen, ctx: Any = None) -> tuple[FeatureSet, Any]:
        raise NotImplementedError


class RawExtractor(Extractor):
    """One boolean per (pixel, color) pair: f_{y,x,c} is 1 iff pixel (y,x)
    has color c.  Feature id = (y * width + x) * palette + c."""

    def __init__(self, width: int, height: int, palette_size: int):
        self.width = width
        self.height = height
        self.palette_size = palette_size
        self.space = FeatureSpace(
            size=width * height * palette_size, descriptor="raw"
        )

    def extract(self, screen: Screen, ctx: Any = None) -> tuple[FeatureSet, Any]:
        if (screen.width, screen.height) != (self.width, self.height):
            raise ValueError("screen dimensions do not match extractor")
        if screen.palette_size != self.palette_size:
            raise ValueError("screen palette does not match extractor")
        flat = screen.pixels.reshape(-1).astype(np.int64)
        ids = np.arange(flat.size, dtype=np.int64) * self.palette_size + flat
        return FeatureSet.from_sorted_array(ids), None
