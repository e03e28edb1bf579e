"""Grouping, tiling, tile-of decomposition, direct sum and axiswise scaling."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

from .canon import canonicalize, normalize_replica, normalize_shard
from .core import ZERO, Coordinate, Iter, Layout, as_shape, scale_lookup, span
from .errors import GroupingError, InvalidLayoutError, TilingError


@dataclass(frozen=True)
class GroupedLayout:
    """A layout whose shard list is cut into consecutive blocks, one per shape dim.

    ``blocks[i]`` is a half-open ``(start, stop)`` range into ``layout.shard``
    and the extents inside it multiply to ``shape[i]``.
    """

    layout: Layout
    shape: tuple[int, ...]
    blocks: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "shape", as_shape(self.shape))
        object.__setattr__(self, "blocks", tuple((int(a), int(b)) for a, b in self.blocks))
        if len(self.blocks) != len(self.shape):
            raise InvalidLayoutError("one block per shape dimension is required")
        pos = 0
        for (start, stop), dim in zip(self.blocks, self.shape):
            if start != pos or stop < start:
                raise InvalidLayoutError(f"blocks {self.blocks} are not consecutive")
            if math.prod(it.extent for it in self.layout.shard[start:stop]) != dim:
                raise InvalidLayoutError(f"block {start}:{stop} does not multiply to {dim}")
            pos = stop
        if pos != len(self.layout.shard):
            raise InvalidLayoutError("blocks do not cover the shard list")

    @property
    def rank(self) -> int:
        return len(self.shape)

    def block(self, i: int) -> tuple[Iter, ...]:
        start, stop = self.blocks[i]
        return self.layout.shard[start:stop]

    def block_iters(self) -> list[tuple[Iter, ...]]:
        return [self.block(i) for i in range(self.rank)]


def _assemble(layout_blocks: list[list[Iter]], shape, replica, offset) -> GroupedLayout:
    shard: list[Iter] = []
    ranges = []
    for blk in layout_blocks:
        ranges.append((len(shard), len(shard) + len(blk)))
        shard.extend(blk)
    if not shard:
        # every block is empty (all dims 1); keep the mandatory unit iter in block 0
        shard = [Iter(1, 1)]
        ranges = [(0, 1)] + [(1, 1)] * (len(ranges) - 1)
    return GroupedLayout(Layout(tuple(shard), tuple(replica), offset), tuple(shape), tuple(ranges))


def group_by_shape(layout: Layout, shape: Sequence[int], fuse: bool = True) -> GroupedLayout:
    """Split the (normalized) shard list into consecutive blocks realizing ``shape``.

    With ``fuse=False`` only extent-1 iters are dropped beforehand; adjacent
    fusable iters stay separate.

    Scans left to right; each iter contributes ``gcd(extent, remaining)`` to the
    current block and, if it is not used up, its tail ``(extent/g, stride)``
    continues into the next block. Replica and offset are carried unchanged.

    Raises:
        GroupingError: element counts differ or a block cannot make progress.
    """
    shape = as_shape(shape)
    if fuse:
        src = list(normalize_shard(layout.shard))
    else:
        src = [it for it in layout.shard if it.extent != 1]
    total = math.prod(it.extent for it in src)
    if total != math.prod(shape):
        raise GroupingError(f"shape {shape} has {math.prod(shape)} elements, layout has {total}")
    j = 0
    out_blocks: list[list[Iter]] = []
    for target in shape:
        cur = 1
        blk: list[Iter] = []
        while cur < target:
            if j >= len(src):
                raise GroupingError(f"ran out of iters while grouping by {shape}")
            it = src[j]
            rem = target // cur
            g = math.gcd(it.extent, rem)
            if g == 1:
                raise GroupingError(f"iter {it} cannot contribute to a block of size {target} (gcd 1)")
            tail = it.extent // g
            blk.append(Iter(g, tail * it.stride, it.axis))
            cur *= g
            if tail > 1:
                src[j] = Iter(tail, it.stride, it.axis)
            else:
                j += 1
        out_blocks.append(blk)
    # anything left has extent 1 (products agree) and is dropped
    return _assemble(out_blocks, shape, layout.replica, layout.offset)


def _scale_iter(it: Iter, scale: Mapping[str, int]) -> Iter:
    return Iter(it.extent, it.stride * scale_lookup(scale, it.axis), it.axis)


def _scale_coord(c: Coordinate, scale: Mapping[str, int]) -> Coordinate:
    return Coordinate((a, v * scale_lookup(scale, a)) for a, v in c.items())


def scale_by(layout: Layout, scale: Mapping[str, int]) -> Layout:
    """Multiply every stride and offset component on axis ``a`` by ``scale[a]``.

    Axes missing from ``scale`` are left alone (factor 1).
    """
    for axis in layout.axes():
        if axis in scale and scale[axis] == 0:
            raise InvalidLayoutError(f"zero scale on used axis {axis!r}")
    return Layout(
        tuple(_scale_iter(it, scale) for it in layout.shard),
        tuple(_scale_iter(it, scale) for it in layout.replica),
        _scale_coord(layout.offset, scale),
    )


def _interleave(shape_a, shape_b) -> tuple[int, ...]:
    return tuple(d for pair in zip(shape_a, shape_b) for d in pair)


def _check_ranks(shape_a, shape_b) -> None:
    if len(shape_a) != len(shape_b):
        raise TilingError(f"shape ranks differ: {len(shape_a)} vs {len(shape_b)}")


def tile(a: Layout, shape_a: Sequence[int], b: Layout, shape_b: Sequence[int]) -> GroupedLayout:
    """Kronecker-style tiling ``A (x) B``.

    The result is grouped by ``(S_A[0], S_B[0], S_A[1], S_B[1], ...)`` and
    satisfies ``f(x || y) = f_A(x) * span(B) + f_B(y)`` (axiswise product).
    """
    _check_ranks(shape_a, shape_b)
    ga, gb = group_by_shape(a, shape_a), group_by_shape(b, shape_b)
    w = span(gb.layout)
    blocks: list[list[Iter]] = []
    for blk_a, blk_b in zip(ga.block_iters(), gb.block_iters()):
        blocks.append([_scale_iter(it, w) for it in blk_a])
        blocks.append(list(blk_b))
    replica = [_scale_iter(it, w) for it in a.replica] + list(b.replica)
    offset = _scale_coord(a.offset, w) + b.offset
    return _assemble(blocks, _interleave(ga.shape, gb.shape), replica, offset)


def direct_sum(a: Layout, shape_a: Sequence[int], b: Layout, shape_b: Sequence[int]) -> GroupedLayout:
    """Unscaled superposition on the interleaved domain: ``f(x || y) = f_A(x) + f_B(y)``."""
    _check_ranks(shape_a, shape_b)
    ga, gb = group_by_shape(a, shape_a), group_by_shape(b, shape_b)
    blocks: list[list[Iter]] = []
    for blk_a, blk_b in zip(ga.block_iters(), gb.block_iters()):
        blocks.append(list(blk_a))
        blocks.append(list(blk_b))
    return _assemble(
        blocks, _interleave(ga.shape, gb.shape), list(a.replica) + list(b.replica), a.offset + b.offset
    )


def _expose(x: Iter, y: Iter) -> list[Iter] | None:
    """Split ``x`` so that ``y`` appears as one of its pieces, if the split rule allows it.

    ``x = (e, s)`` is refined into ``(e/(t*e_y), t*e_y*s), (e_y, t*s), (t, s)``
    where ``t = s_y / s``; leading/trailing pieces of extent 1 are omitted.
    """
    if x.axis != y.axis or x.extent <= y.extent or y.stride % x.stride:
        return None
    t = y.stride // x.stride
    if t < 1 or x.extent % (t * y.extent):
        return None
    head = x.extent // (t * y.extent)
    pieces = []
    if head > 1:
        pieces.append(Iter(head, t * y.extent * x.stride, x.axis))
    pieces.append(y)
    if t > 1:
        pieces.append(Iter(t, x.stride, x.axis))
    return pieces


def _descale(it: Iter, w: Coordinate) -> Iter:
    k = scale_lookup(w, it.axis)
    if it.stride % k:
        raise TilingError(f"residual iter {it} is not divisible by the inner span {k}@{it.axis}")
    return Iter(it.extent, it.stride // k, it.axis)


def _split_block(blk_a: Sequence[Iter], blk_b: Sequence[Iter], w: Coordinate) -> list[Iter]:
    work = list(blk_a)
    q = 0
    outer: list[Iter] = []
    while work:
        x = work.pop(0)
        y = blk_b[q] if q < len(blk_b) else None
        if y is not None and x == y:
            q += 1
            continue
        if y is not None and (pieces := _expose(x, y)) is not None:
            work[:0] = pieces
            continue
        outer.append(_descale(x, w))
    if q != len(blk_b):
        raise TilingError(f"inner block {list(map(str, blk_b))} is not a subsequence of {list(map(str, blk_a))}")
    return outer


def _unmerge(x: Iter, y: Iter, w: Coordinate) -> Iter | None:
    # x == C2-merge of inner (e_y, s) with a scaled outer (e_c, q*s); recover the outer part
    if x.axis != y.axis or x.stride != y.stride or x.extent <= y.extent:
        return None
    k = scale_lookup(w, x.axis)
    for q in range(1, y.extent + 1):
        if (q * x.stride) % k == 0 and (x.extent - y.extent) % q == 0:
            return Iter((x.extent - y.extent) // q + 1, q * x.stride, x.axis)
    return None


def _split_replica(rep_a: Sequence[Iter], rep_b: Sequence[Iter], w: Coordinate) -> list[Iter]:
    remaining = list(rep_a)
    unmatched = []
    for y in rep_b:
        if y in remaining:
            remaining.remove(y)
        else:
            unmatched.append(y)
    for y in unmatched:
        for k, x in enumerate(remaining):
            if (piece := _unmerge(x, y, w)) is not None:
                remaining[k] = piece
                break
        else:
            raise TilingError(f"replica iter {y} of the inner layout is missing from the outer replica")
    outer = [_descale(x, w) for x in remaining]
    rebuilt = normalize_replica(ZERO, [_scale_iter(it, w) for it in outer] + list(rep_b))
    if rebuilt != (ZERO, tuple(rep_a)):
        raise TilingError("replica set does not decompose as scaled outer plus inner replicas")
    return outer


def tile_of(
    a: Layout, shape_a: Sequence[int], b: Layout, shape_b: Sequence[int]
) -> tuple[GroupedLayout, tuple[int, ...]]:
    """Decide whether ``A = C (x) B`` and recover ``C`` with shape ``S_A / S_B``.

    Both layouts are canonicalized and grouped. In each rank block, the
    iters of ``B`` must occur in order inside ``A``'s block (an ``A`` iter may
    be split to expose a ``B`` iter that was fused with a neighbour); every
    other iter must have a stride divisible by ``span(B)`` on its axis and
    becomes an iter of ``C``. Offsets and replicas are decomposed as well.

    Raises:
        TilingError: any of the checks fails.
        GroupingError: either layout cannot be grouped by its shape.
    """
    _check_ranks(shape_a, shape_b)
    shape_a, shape_b = as_shape(shape_a), as_shape(shape_b)
    if any(sa % sb for sa, sb in zip(shape_a, shape_b)):
        raise TilingError(f"shape {shape_b} does not divide {shape_a}")
    shape_c = tuple(sa // sb for sa, sb in zip(shape_a, shape_b))
    ca, cb = canonicalize(a), canonicalize(b)
    ga, gb = group_by_shape(ca, shape_a), group_by_shape(cb, shape_b)
    w = span(gb.layout)

    blocks = []
    for dim, blk_a, blk_b in zip(shape_c, ga.block_iters(), gb.block_iters()):
        # the unit iter standing in for an empty shard carries no digit
        blk_a = [it for it in blk_a if it.extent > 1]
        blk_b = [it for it in blk_b if it.extent > 1]
        outer = _split_block(blk_a, blk_b, w)
        if math.prod(it.extent for it in outer) != dim:
            raise TilingError(f"outer block {list(map(str, outer))} does not multiply to {dim}")
        blocks.append(outer)

    diff = ca.offset - cb.offset
    off: dict[str, int] = {}
    for axis, v in diff.items():
        k = scale_lookup(w, axis)
        if v % k:
            raise TilingError(f"offset difference {v}@{axis} is not divisible by span {k}")
        off[axis] = v // k
    replica = _split_replica(ca.replica, cb.replica, w)
    return _assemble(blocks, shape_c, replica, Coordinate(off)), shape_c
