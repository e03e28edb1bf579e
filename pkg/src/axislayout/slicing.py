"""Rectangular sub-region views of grouped layouts.

Each block of the grouped shard list is sliced on its own. Trailing digits
that start at zero and whose extent divides what is left of the region are
peeled off unchanged; the remaining length must then fit either inside the
pivot digit (no wrap) or straddle exactly one carry into the digit to its
left with equal halves on both sides (symmetric one-wrap). Both forms are
sufficient only, so failure just means "no single layout found this way".
"""

from __future__ import annotations

from collections.abc import Sequence

from .algebra import group_by_shape
from .core import ZERO, Coordinate, Iter, Layout, Region, unflatten
from .errors import GroupingError, SliceError


def slice_block(
    block: Sequence[Iter], begin: int, length: int, origin: Coordinate = ZERO
) -> tuple[list[Iter], Coordinate]:
    """Iters enumerating positions ``[begin, begin + length)`` of ``block``.

    Returns the new iters together with ``origin`` plus the block's value at
    ``begin``.

    Raises:
        SliceError: neither the no-wrap nor the symmetric one-wrap form applies.
    """
    block = list(block)
    extents = [it.extent for it in block]
    size = 1
    for e in extents:
        size *= e
    if length < 1 or begin < 0 or begin + length > size:
        raise SliceError(f"range [{begin}, {begin + length}) outside block of size {size}")
    digits = unflatten(extents, begin)
    for it, d in zip(block, digits):
        origin = origin + it.at(d)

    rem = length
    k = len(block) - 1
    while k >= 0 and digits[k] == 0 and rem % extents[k] == 0:
        rem //= extents[k]
        k -= 1
    peeled = block[k + 1:]
    if k < 0:
        return peeled, origin

    piv, d = block[k], digits[k]
    if d + rem <= piv.extent:
        return [Iter(rem, piv.stride, piv.axis)] + peeled, origin
    half, odd = divmod(rem, 2)
    if odd or d + half != piv.extent or k == 0:
        raise SliceError(f"no sufficient form for length {rem} at digit {d} of {piv}")
    left = block[k - 1]
    if digits[k - 1] + 1 >= left.extent:
        raise SliceError(f"carry out of {left} would leave the block")
    delta = left.at(1) - piv.at(piv.extent - half)
    if len(delta) != 1:
        raise SliceError(f"wrap step {delta} is not a single nonzero axis component")
    (axis, step), = delta.items()
    return [Iter(2, step, axis), Iter(half, piv.stride, piv.axis)] + peeled, origin


def slice_layout(layout: Layout, shape: Sequence[int], region: Region) -> Layout:
    """Layout ``L'`` on the region extents with ``f_L'(u) = f_L(u + begin)``.

    Raises:
        SliceError: some block admits neither sufficient form.
        GroupingError: ``layout`` cannot be grouped by ``shape``.
        DomainError: the region does not fit in ``shape``.
    """
    region.check_within(shape)
    try:
        return _slice_grouped(layout, group_by_shape(layout, shape, fuse=False), region)
    except (SliceError, GroupingError):
        # fusing adjacent iters first can turn a wrapping range into a contiguous one
        return _slice_grouped(layout, group_by_shape(layout, shape), region)


def _slice_grouped(layout: Layout, grouped, region: Region) -> Layout:
    shard: list[Iter] = []
    offset = layout.offset
    for blk, b, t in zip(grouped.block_iters(), region.begin, region.extent):
        iters, offset = slice_block(blk, b, t, offset)
        shard.extend(iters)
    return Layout(tuple(shard) or (Iter(1, 1),), layout.replica, offset)

