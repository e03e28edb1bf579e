"""Semantics-preserving normalization and equivalence of layouts.

Shard rules (applied left to right until nothing changes):

* D0 drops extent-1 iters.
* D1 fuses ``(e0, s0@a), (e1, s1@a)`` into ``(e0*e1, s1@a)`` when ``s0 == e1*s1``.

Replica/offset rules (per axis):

* C0 drops extent-1 iters.
* C1 turns ``(e, -s)`` into ``(e, s)`` and adds ``(e-1)*(-s)`` to the offset.
* C2 absorbs ``(E2, q*s)`` into ``(E1, s)`` when ``1 <= q <= E1``, giving
  ``(E1 + q*(E2-1), s)``.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence

from .core import DEFAULT_AXIS, Coordinate, Iter, Layout
from .errors import InvalidLayoutError, OracleLimitError, UndecidableError

DEFAULT_ORACLE_THRESHOLD = 65536

_UNIT = Iter(1, 1, DEFAULT_AXIS)


def _fusable(outer: Iter, inner: Iter) -> bool:
    return outer.axis == inner.axis and outer.stride == inner.extent * inner.stride


def normalize_shard(shard: Sequence[Iter]) -> tuple[Iter, ...]:
    """Fixpoint of D0/D1. An all-unit list collapses to ``((1, 1@m),)``."""
    out = list(shard)
    changed = True
    while changed:
        changed = False
        kept = [it for it in out if it.extent != 1]
        changed = len(kept) != len(out)
        merged: list[Iter] = []
        for it in kept:
            if merged and _fusable(merged[-1], it):
                prev = merged.pop()
                merged.append(Iter(prev.extent * it.extent, it.stride, it.axis))
                changed = True
            else:
                merged.append(it)
        out = merged
    return tuple(out) if out else (_UNIT,)


def _c2_partner(its: list[Iter]) -> tuple[int, int, int] | None:
    # its is sorted by (stride, extent); the first hit uses the smallest absorber
    for i, a in enumerate(its):
        for j, b in enumerate(its):
            if i == j or b.stride % a.stride:
                continue
            q = b.stride // a.stride
            if 1 <= q <= a.extent:
                return i, j, q
    return None


def _saturate_axis(its: list[Iter]) -> list[Iter]:
    its = sorted(its, key=lambda it: (it.stride, it.extent))
    while (hit := _c2_partner(its)) is not None:
        i, j, q = hit
        a, b = its[i], its[j]
        merged = Iter(a.extent + q * (b.extent - 1), a.stride, a.axis)
        its = [it for k, it in enumerate(its) if k not in (i, j)] + [merged]
        its.sort(key=lambda it: (it.stride, it.extent))
    return its


def normalize_replica(offset: Coordinate, replica: Sequence[Iter]) -> tuple[Coordinate, tuple[Iter, ...]]:
    """C0, then C1, then C2 to saturation. Output is sorted by (axis, stride, extent)."""
    shift: dict[str, int] = {}
    by_axis: dict[str, list[Iter]] = {}
    for it in replica:
        if it.extent == 1:
            continue
        if it.stride < 0:
            shift[it.axis] = shift.get(it.axis, 0) + (it.extent - 1) * it.stride
            it = Iter(it.extent, -it.stride, it.axis)
        by_axis.setdefault(it.axis, []).append(it)
    out: list[Iter] = []
    for axis in sorted(by_axis):
        out.extend(_saturate_axis(by_axis[axis]))
    return offset + Coordinate(shift), tuple(out)


def gap_condition(replica: Sequence[Iter]) -> bool:
    """``sigma[k+1] > E[k] * sigma[k]`` for consecutive strides on every axis."""
    by_axis: dict[str, list[Iter]] = {}
    for it in replica:
        if it.stride < 0:
            raise InvalidLayoutError("gap condition needs sign-normalized replica strides")
        by_axis.setdefault(it.axis, []).append(it)
    for its in by_axis.values():
        its.sort(key=lambda it: (it.stride, it.extent))
        for lo, hi in zip(its, its[1:]):
            if not hi.stride > lo.extent * lo.stride:
                return False
    return True


def canonicalize(layout: Layout) -> Layout:
    offset, replica = normalize_replica(layout.offset, layout.replica)
    return Layout(normalize_shard(layout.shard), replica, offset)


def is_canonical(layout: Layout) -> bool:
    return canonicalize(layout) == layout


def equivalent(a: Layout, b: Layout, threshold: int = DEFAULT_ORACLE_THRESHOLD) -> bool:
    """Whether two layouts induce the same set-valued map.

    Canonical forms are compared structurally when both replica lists satisfy
    the gap condition. Otherwise the layouts are enumerated, provided
    ``domain_size * replica_size`` stays within ``threshold`` for both.

    Raises:
        UndecidableError: the gap condition fails and enumeration is too large.
    """
    ca, cb = canonicalize(a), canonicalize(b)
    if gap_condition(ca.replica) and gap_condition(cb.replica):
        return ca == cb
    if ca.domain_size != cb.domain_size:
        return False
    from .oracle import oracle_equivalent

    try:
        return oracle_equivalent(ca, cb, limit=threshold)
    except OracleLimitError as exc:
        raise UndecidableError(
            "replicas violate the gap condition and the layouts are too large to enumerate"
        ) from exc


def shard_rewrite_steps(shard: Sequence[Iter]) -> Iterator[tuple[str, tuple[Iter, ...]]]:
    """Every single D0/D1 application available on ``shard``."""
    shard = tuple(shard)
    if len(shard) > 1:
        for k, it in enumerate(shard):
            if it.extent == 1:
                yield "D0", shard[:k] + shard[k + 1:]
    elif shard[0].extent == 1 and shard[0] != _UNIT:
        # a lone unit iter is kept but normalized to the standard one
        yield "D0", (_UNIT,)
    for k in range(len(shard) - 1):
        if _fusable(shard[k], shard[k + 1]):
            fused = Iter(shard[k].extent * shard[k + 1].extent, shard[k + 1].stride, shard[k].axis)
            yield "D1", shard[:k] + (fused,) + shard[k + 2:]


def replica_rewrite_steps(
    offset: Coordinate, replica: Sequence[Iter]
) -> Iterator[tuple[str, Coordinate, tuple[Iter, ...]]]:
    """Every single C0/C1/C2 application available on ``(offset, replica)``."""
    replica = tuple(replica)
    for k, it in enumerate(replica):
        rest = replica[:k] + replica[k + 1:]
        if it.extent == 1:
            yield "C0", offset, rest
        elif it.stride < 0:
            flipped = Iter(it.extent, -it.stride, it.axis)
            yield "C1", offset + Coordinate({it.axis: (it.extent - 1) * it.stride}), rest + (flipped,)
    for i, a in enumerate(replica):
        for j, b in enumerate(replica):
            if i == j or a.axis != b.axis or a.stride <= 0 or b.stride <= 0 or b.stride % a.stride:
                continue
            q = b.stride // a.stride
            if 1 <= q <= a.extent:
                rest = tuple(it for k, it in enumerate(replica) if k not in (i, j))
                yield "C2", offset, rest + (Iter(a.extent + q * (b.extent - 1), a.stride, a.axis),)
