"""Brute-force reference semantics.

Everything here evaluates the definition of the induced map directly with
numpy index arithmetic and shares no code with the evaluation path in
:mod:`axislayout.core`, so it can be used to check that path and every
algebraic operation built on top of it.
"""

from __future__ import annotations

import numpy as np

from .core import Coordinate, Layout
from .errors import OracleLimitError

DEFAULT_LIMIT = 65536
# bound on |coordinate| so int64 sums of digit * stride cannot wrap
_INT64_SAFE = 2**62


def _digits(extents: list[int], count: int) -> list[np.ndarray]:
    if not extents:
        return []
    return list(np.unravel_index(np.arange(count, dtype=np.int64), extents))


class Oracle:
    """Exhaustive evaluator bounded by ``limit`` = max ``domain_size * replica_size``."""

    def __init__(self, limit: int = DEFAULT_LIMIT):
        self.limit = limit

    def _check(self, layout: Layout) -> None:
        n = layout.domain_size * layout.replica_size
        if n > self.limit:
            raise OracleLimitError(f"enumeration of {n} coordinates exceeds limit {self.limit}")
        reach = sum(abs(v) for v in layout.offset.values())
        reach += sum((it.extent - 1) * abs(it.stride) for it in layout.shard + layout.replica)
        if reach >= _INT64_SAFE:
            raise OracleLimitError("coordinates may exceed the int64 range of the oracle")

    def table(self, layout: Layout, axes: list[str] | None = None) -> tuple[list[str], np.ndarray]:
        """Array ``T[x, r, k]`` = component on ``axes[k]`` of the r-th coordinate of ``x``."""
        self._check(layout)
        if axes is None:
            axes = sorted(set(layout.axes()))
        col = {a: k for k, a in enumerate(axes)}
        n_d, n_r = layout.domain_size, layout.replica_size
        base = np.zeros((n_d, len(axes)), dtype=np.int64)
        for it, d in zip(layout.shard, _digits([i.extent for i in layout.shard], n_d)):
            base[:, col[it.axis]] += d * it.stride
        rep = np.zeros((n_r, len(axes)), dtype=np.int64)
        for it, d in zip(layout.replica, _digits([i.extent for i in layout.replica], n_r)):
            rep[:, col[it.axis]] += d * it.stride
        off = np.array([layout.offset[a] for a in axes], dtype=np.int64)
        return axes, base[:, None, :] + rep[None, :, :] + off

    def enumerate(self, layout: Layout) -> list[frozenset[Coordinate]]:
        """``[f_L(0), f_L(1), ...]`` as coordinate sets."""
        axes, t = self.table(layout)
        return [
            frozenset(Coordinate(zip(axes, (int(v) for v in row))) for row in t[x])
            for x in range(t.shape[0])
        ]

    def _image_rows(self, layout: Layout, axes: list[str]) -> np.ndarray:
        _, t = self.table(layout, axes)
        n_d, n_r, n_a = t.shape
        xs = np.repeat(np.arange(n_d, dtype=np.int64), n_r)[:, None]
        return np.unique(np.hstack([xs, t.reshape(n_d * n_r, n_a)]), axis=0)

    def equivalent(self, a: Layout, b: Layout) -> bool:
        """Pointwise equality of coordinate sets; false when domain sizes differ."""
        if a.domain_size != b.domain_size:
            return False
        axes = sorted(set(a.axes()) | set(b.axes()))
        return np.array_equal(self._image_rows(a, axes), self._image_rows(b, axes))

    def span(self, layout: Layout) -> Coordinate:
        """``max - min + 1`` per axis over the whole image; spans of 1 are omitted."""
        axes, t = self.table(layout)
        flat = t.reshape(-1, len(axes))
        width = flat.max(axis=0) - flat.min(axis=0) + 1 if len(axes) else []
        return Coordinate({a: int(w) for a, w in zip(axes, width) if w != 1})


def enumerate_layout(layout: Layout, limit: int = DEFAULT_LIMIT) -> list[frozenset[Coordinate]]:
    return Oracle(limit).enumerate(layout)


def oracle_equivalent(a: Layout, b: Layout, limit: int = DEFAULT_LIMIT) -> bool:
    return Oracle(limit).equivalent(a, b)


def oracle_span(layout: Layout, limit: int = DEFAULT_LIMIT) -> Coordinate:
    return Oracle(limit).span(layout)
