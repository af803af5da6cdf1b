"""Depth-indexed novelty table and plain width-k novelty.

The table maps each feature id to the smallest search-tree depth at which the
feature has been observed true during the current planning step.  Absent
entries mean "never seen" and compare as depth +infinity.  Two checks back
the two rollout novelty cases:

- ``check_new``   (fresh state):    novel iff some feature's recorded depth is
  strictly greater than the state's depth.
- ``check_cached`` (revisited state): novel iff some feature's recorded depth
  is greater than or equal to the state's depth, i.e. the revisited state may
  itself be the depth-minimal holder.

``iw_novel`` implements the breadth-first variant: a state is novel iff some
k-subset of its true features has never been seen before.

Spaces up to ``DENSE_SPACE_LIMIT`` ids use a vectorized dense depth array
(planning does thousands of checks per step); larger spaces, like full-scale
B-PROST with tens of millions of ids, fall back to a sparse dict so memory
stays proportional to the features actually seen.  Both paths expose the
same absence semantics.
"""

from __future__ import annotations

from itertools import combinations
from typing import Set, Tuple

import numpy as np

from .features import FeatureSet, FeatureSpace

__all__ = ["NoveltyTable", "iw_novel", "iw_register", "TUPLE_WIDTH_CAP"]

# Tuple-space guard: |F|^k explodes quickly; widths above this are refused.
TUPLE_WIDTH_CAP = 2

# Dense tables cost 4 bytes per feature id; 2^22 ids = 16 MiB per step.
DENSE_SPACE_LIMIT = 1 << 22

_UNSEEN = np.iinfo(np.int32).max


class NoveltyTable:
    """Minimum observed depth per feature for one planning step.

    Single-writer: each planning step owns its table exclusively.  Depths
    only ever decrease across updates.
    """

    def __init__(self, space: FeatureSpace, k: int = 1):
        if k < 1:
            raise ValueError("width must be >= 1")
        self.space = space
        self.k = k
        if space.size <= DENSE_SPACE_LIMIT:
            self._dense: np.ndarray | None = np.full(space.size, _UNSEEN, np.int32)
            self._sparse: dict[int, int] | None = None
        else:
            self._dense = None
            self._sparse = {}

    @property
    def depth_of(self) -> dict[int, int]:
        """Seen entries as a plain dict (absence = never seen)."""
        if self._sparse is not None:
            return dict(self._sparse)
        seen = np.flatnonzero(self._dense != _UNSEEN)
        return {int(f): int(self._dense[f]) for f in seen}

    def _validate(self, feats: FeatureSet, depth: int) -> None:
        if depth < 0:
            raise ValueError("depth must be >= 0")
        if feats.arr.size and int(feats.arr[-1]) >= self.space.size:
            raise ValueError(
                f"feature id {int(feats.arr[-1])} outside space of size {self.space.size}"
            )

    def check_new(self, feats: FeatureSet, depth: int) -> bool:
        """Novelty for a state not previously in the tree.  No mutation."""
        self._validate(feats, depth)
        if self._dense is not None:
            return bool((self._dense[feats.arr] > depth).any())
        table = self._sparse
        return any(table.get(f, _UNSEEN) > depth for f in feats.ids)

    def check_cached(self, feats: FeatureSet, depth: int) -> bool:
        """Novelty for a state already in the tree.  No mutation."""
        self._validate(feats, depth)
        if self._dense is not None:
            return bool((self._dense[feats.arr] >= depth).any())
        table = self._sparse
        return any(table.get(f, _UNSEEN) >= depth for f in feats.ids)

    def update(self, feats: FeatureSet, depth: int) -> None:
        """Record ``feats`` as seen at ``depth``: per-feature minimum."""
        self._validate(feats, depth)
        if self._dense is not None:
            arr = feats.arr
            current = self._dense[arr]
            lower = current > depth
            if lower.any():
                self._dense[arr[lower]] = depth
            return
        table = self._sparse
        for f in feats.ids:
            if table.get(f, _UNSEEN) > depth:
                table[f] = depth


def iw_novel(
    seen: Set[Tuple[int, ...]],
    feats: FeatureSet,
    k: int,
    cap: int = TUPLE_WIDTH_CAP,
) -> bool:
    """True iff some k-subset of ``feats`` is absent from ``seen``.

    The caller inserts the state's k-subsets into ``seen`` when the state is
    kept (see :func:`iw_register`).  Widths above ``cap`` are refused.
    """
    if k < 1:
        raise ValueError("width must be >= 1")
    if k > cap:
        raise ValueError(f"width {k} exceeds tuple-space cap {cap}")
    if k == 1:
        return any((f,) not in seen for f in feats.ids)
    return any(t not in seen for t in combinations(feats.ids, k))


def iw_register(seen: Set[Tuple[int, ...]], feats: FeatureSet, k: int) -> None:
    """Insert all k-subsets of ``feats`` into ``seen``."""
    if k == 1:
        seen.update((f,) for f in feats.ids)
    else:
        seen.update(combinations(feats.ids, k))
