"""Box-copy (TMA-style) planning between a global and a shared-memory layout.

Both layouts address a single memory axis ``m``. The shared region is cut
into copy atoms (row-major boxes of shape ``(1, .., 1, 8, swizzle/dtype)``)
by asking for a tiler ``T`` with ``shared = T (x) atom``; every point of
``T`` is one box. The global side must split into an outer part and an
atom-shaped inner part along every dim so each box is a regular strided
access.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .algebra import group_by_shape, scale_by, tile_of
from .core import DEFAULT_AXIS, Layout, Region, as_shape, evaluate, flatten, span, unflatten
from .errors import GroupingError, LayoutError, PlanError
from .oracle import Oracle
from .slicing import slice_layout

DTYPE_SIZES = (1, 2, 4, 8)
SWIZZLE_MODES = (32, 64, 128)


@dataclass(frozen=True)
class CopyAtomSpec:
    dtype_size: int
    swizzle_mode: int
    rank: int

    def __post_init__(self):
        if self.dtype_size not in DTYPE_SIZES:
            raise PlanError(f"dtype_size must be one of {DTYPE_SIZES}")
        if self.swizzle_mode not in SWIZZLE_MODES:
            raise PlanError(f"swizzle_mode must be one of {SWIZZLE_MODES}")
        if self.rank < 2:
            raise PlanError("copy atoms need rank >= 2")

    @property
    def shape(self) -> tuple[int, ...]:
        return (1,) * (self.rank - 2) + (8, self.swizzle_mode // self.dtype_size)

    def layout(self) -> Layout:
        """Row-major box on ``m``; the swizzle permutation itself is not modeled."""
        shape = self.shape
        strides = [math.prod(shape[i + 1:]) for i in range(len(shape))]
        return Layout.of(shape, strides)


@dataclass(frozen=True)
class CopyAtom:
    index: tuple[int, ...]
    shared_base: int
    global_origin: tuple[int, ...]


@dataclass(frozen=True)
class CopyPlan:
    """One box copy per atom plus the global tensor descriptor.

    ``global_dims[i]`` lists the ``(extent, stride)`` iters of dim ``i`` of
    the global tensor; a global multi-index addresses
    ``global_offset + sum_i f_i(g_i)``.
    """

    atom: CopyAtomSpec
    box_shape: tuple[int, ...]
    tiler: Layout
    tiler_shape: tuple[int, ...]
    atoms: tuple[CopyAtom, ...]
    global_shape: tuple[int, ...]
    global_dims: tuple[tuple[tuple[int, int], ...], ...]
    global_offset: int
    global_check: str

    @property
    def atom_count(self) -> int:
        return len(self.atoms)

    def global_address(self, index: Sequence[int]) -> int:
        addr = self.global_offset
        for dim, g in zip(self.global_dims, index):
            digits = unflatten([e for e, _ in dim], g) if dim else ()
            addr += sum(d * s for d, (_, s) in zip(digits, dim))
        return addr

    def to_dict(self) -> dict:
        return {
            "kind": "copy",
            "atom": {
                "dtype_size": self.atom.dtype_size,
                "swizzle_mode": self.atom.swizzle_mode,
                "box_shape": list(self.box_shape),
            },
            "tiler": {"layout": str(self.tiler), "shape": list(self.tiler_shape)},
            "global": {
                "shape": list(self.global_shape),
                "dims": [[list(p) for p in dim] for dim in self.global_dims],
                "offset": self.global_offset,
                "check": self.global_check,
            },
            "atom_count": self.atom_count,
            "atoms": [
                {"index": list(a.index), "shared_base": a.shared_base, "global_origin": list(a.global_origin)}
                for a in self.atoms
            ],
        }

    def format(self) -> str:
        box = ",".join(map(str, self.box_shape))
        lines = [
            "copy-plan",
            f"  atom dtype_size={self.atom.dtype_size} swizzle={self.atom.swizzle_mode} box=({box})",
            f"  tiler {self.tiler} shape=({','.join(map(str, self.tiler_shape))})",
            f"  global check={self.global_check} offset={self.global_offset}",
        ]
        for i, dim in enumerate(self.global_dims):
            desc = " ".join(f"({e}:{s})" for e, s in dim) or "(1:1)"
            lines.append(f"    dim {i}: {desc}")
        lines.append(f"  atoms {self.atom_count}")
        for a in self.atoms:
            origin = ",".join(map(str, a.global_origin))
            lines.append(f"    atom {','.join(map(str, a.index))}: shared={a.shared_base} global=({origin})")
        return "\n".join(lines)


def _memory_only(layout: Layout, name: str) -> None:
    if layout.replica:
        raise PlanError(f"{name} layout must not carry replicas")
    if set(layout.axes()) - {DEFAULT_AXIS}:
        raise PlanError(f"{name} layout must only address axis {DEFAULT_AXIS!r}")


def is_injective(layout: Layout, limit: int = 65536) -> bool:
    """Whether distinct logical indices reach distinct coordinates (replicas ignored).

    Per axis, iters sorted by ``|stride|`` whose every stride exceeds the reach
    of the smaller ones cannot collide; otherwise the layout is enumerated.
    """
    its = [it for it in layout.shard if it.extent > 1]
    if len({it.axis for it in its}) <= 1:
        reach = 0
        for it in sorted(its, key=lambda it: abs(it.stride)):
            if abs(it.stride) <= reach:
                break
            reach += (it.extent - 1) * abs(it.stride)
        else:
            return True
    try:
        _, table = Oracle(limit).table(layout.replace(replica=()))
    except LayoutError as exc:
        raise PlanError("layout too large to check for aliasing") from exc
    return len(np.unique(table[:, 0, :], axis=0)) == layout.domain_size


def _global_split(lg: Layout, outer: Sequence[int], box: Sequence[int]) -> str:
    inter = tuple(d for pair in zip(outer, box) for d in pair)
    try:
        g = group_by_shape(lg, inter)
    except GroupingError as exc:
        raise PlanError(f"global region does not split into boxes of {tuple(box)}: {exc}") from exc
    # suffix: every inner block is made of whole original iters
    original = set(group_by_shape(lg, tuple(o * b for o, b in zip(outer, box))).layout.shard)
    whole = all(it in original for i in range(1, len(inter), 2) for it in g.block(i))
    return "suffix" if whole else "direct-sum"


def plan_copy(
    lg: Layout,
    eg: Sequence[int],
    rg: Region,
    ls: Layout,
    es: Sequence[int],
    rs: Region,
    atom: CopyAtomSpec,
) -> CopyPlan:
    """Plan box copies moving ``lg[rg]`` into ``ls[rs]``; element ``u`` of one region goes to ``u`` of the other.

    Raises:
        PlanError: region mismatch, slice or tiling failure, a non-injective
            shared layout, or a global layout that does not split into boxes.
    """
    eg, es = as_shape(eg), as_shape(es)
    if rg.volume != rs.volume:
        raise PlanError(f"region volumes differ: global {rg.volume} vs shared {rs.volume}")
    if rg.extent != rs.extent:
        raise PlanError(f"region extents differ: global {rg.extent} vs shared {rs.extent}")
    if atom.rank != rs.rank:
        raise PlanError(f"atom rank {atom.rank} does not match tensor rank {rs.rank}")
    _memory_only(lg, "global")
    _memory_only(ls, "shared")
    ext = rs.extent
    try:
        lg_v = slice_layout(lg, eg, rg)
        ls_v = slice_layout(ls, es, rs)
    except LayoutError as exc:
        raise PlanError(f"slice failed: {exc}") from exc
    if not is_injective(ls_v):
        raise PlanError("shared region maps two elements to the same address")

    box = atom.shape
    try:
        grouped_c, outer = tile_of(ls_v, ext, atom.layout(), box)
    except LayoutError as exc:
        raise PlanError(f"shared region is not tiled by the copy atom: {exc}") from exc
    check = _global_split(lg_v, outer, box)

    scaled = scale_by(grouped_c.layout, span(atom.layout()))
    atoms = []
    for x in itertools.product(*(range(o) for o in outer)):
        (base,) = evaluate(scaled, flatten(outer, x))
        origin = tuple(b + xi * bi for b, xi, bi in zip(rg.begin, x, box))
        atoms.append(CopyAtom(tuple(x), base[DEFAULT_AXIS], origin))

    gg = group_by_shape(lg, eg)
    dims = tuple(tuple((it.extent, it.stride) for it in gg.block(i)) for i in range(len(eg)))
    return CopyPlan(
        atom, box, grouped_c.layout, outer, tuple(atoms), eg, dims, lg.offset[DEFAULT_AXIS], check
    )


def interpret_copy_plan(plan: CopyPlan) -> list[tuple[tuple[int, ...], int, int]]:
    """Expand every box row-major into ``(global index, global address, shared offset)`` triples."""
    atom_strides = [math.prod(plan.box_shape[i + 1:]) for i in range(len(plan.box_shape))]
    out = []
    for a in plan.atoms:
        for y in itertools.product(*(range(b) for b in plan.box_shape)):
            g = tuple(o + yi for o, yi in zip(a.global_origin, y))
            shared = a.shared_base + sum(yi * s for yi, s in zip(y, atom_strides))
            out.append((g, plan.global_address(g), shared))
    return out


def verify_copy_plan(
    plan: CopyPlan, lg: Layout, eg: Sequence[int], rg: Region, ls: Layout, es: Sequence[int], rs: Region
) -> None:
    """Check that the plan is a bijection region->region consistent with both layouts.

    Raises:
        PlanError: describing the first violated property.
    """
    pairs = interpret_copy_plan(plan)
    globals_seen = {g for g, _, _ in pairs}
    shared_seen = {s for _, _, s in pairs}
    if len(globals_seen) != len(pairs):
        raise PlanError("two copies read the same global element")
    if len(shared_seen) != len(pairs):
        raise PlanError("two copies write the same shared offset")
    want = set(itertools.product(*(range(b, b + e) for b, e in zip(rg.begin, rg.extent))))
    if globals_seen != want:
        raise PlanError("boxes do not cover the global region exactly")
    g_idx = np.array([g for g, _, _ in pairs], dtype=np.int64).reshape(len(pairs), -1)
    got_g = np.array([a for _, a, _ in pairs], dtype=np.int64)
    got_s = np.array([s for _, _, s in pairs], dtype=np.int64)
    s_idx = g_idx - np.array(rg.begin, dtype=np.int64) + np.array(rs.begin, dtype=np.int64)
    for name, layout, shape, idx, got in (("global", lg, eg, g_idx, got_g), ("shared", ls, es, s_idx, got_s)):
        _, table = Oracle(limit=max(layout.domain_size, 1)).table(layout, [DEFAULT_AXIS])
        want = table[np.ravel_multi_index(tuple(idx.T), tuple(shape)), 0, 0]
        if (bad := np.flatnonzero(want != got)).size:
            k = int(bad[0])
            raise PlanError(
                f"{name} address {int(got[k])} at {tuple(idx[k].tolist())} differs from layout value {int(want[k])}"
            )
