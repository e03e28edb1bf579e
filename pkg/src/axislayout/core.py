"""Core value types and the induced map of a layout.

A layout sends a logical index ``x`` to a *set* of coordinates in a free
integer module over named axes::

    L(x) = { D(x) + r + O  |  r in R }

``D`` (the shard list) factors ``x`` into digits, ``R`` (the replica list)
enumerates extra offsets independent of ``x`` and ``O`` is a constant.
"""

from __future__ import annotations

import itertools
import math
import re
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field

from .errors import (
    AdmissionError,
    DomainError,
    IntegerOverflowError,
    InvalidLayoutError,
)

DEFAULT_AXIS = "m"

_AXIS_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_I64_MIN = -(1 << 63)
_I64_MAX = (1 << 63) - 1


def check_axis(name: str) -> str:
    if not isinstance(name, str) or not _AXIS_RE.match(name):
        raise InvalidLayoutError(f"invalid axis name {name!r}")
    return name


def check_int(value: int, what: str = "value") -> int:
    # bool is an int subclass; reject it explicitly
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidLayoutError(f"{what} must be an integer, got {value!r}")
    if not _I64_MIN <= value <= _I64_MAX:
        raise IntegerOverflowError(f"{what} {value} does not fit in 64 bits")
    return value


class Coordinate(Mapping):
    """Sparse element of the integer module over axes; absent axes are 0.

    ``c[a]`` returns 0 for axes that are not stored, while ``a in c`` and
    iteration only see the nonzero entries.
    """

    __slots__ = ("_d", "_items")

    def __init__(self, entries: Mapping[str, int] | Iterable[tuple[str, int]] | None = None, /, **kwargs: int):
        acc: dict[str, int] = {}
        if entries is not None:
            pairs = entries.items() if isinstance(entries, Mapping) else entries
            for axis, v in pairs:
                acc[check_axis(axis)] = acc.get(axis, 0) + check_int(v)
        for axis, v in kwargs.items():
            acc[check_axis(axis)] = acc.get(axis, 0) + check_int(v)
        items = tuple(sorted((a, check_int(v)) for a, v in acc.items() if v != 0))
        object.__setattr__(self, "_items", items)
        object.__setattr__(self, "_d", dict(items))

    def __setattr__(self, name, value):
        raise AttributeError("Coordinate is immutable")

    @classmethod
    def unit(cls, axis: str, value: int = 1) -> Coordinate:
        return cls({axis: value})

    def __getitem__(self, axis: str) -> int:
        return self._d.get(axis, 0)

    def get(self, axis: str, default: int = 0) -> int:
        return self._d.get(axis, default)

    def __contains__(self, axis: object) -> bool:
        return axis in self._d

    def __iter__(self) -> Iterator[str]:
        return iter(self._d)

    def __len__(self) -> int:
        return len(self._items)

    def items(self):
        return self._items

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Coordinate):
            return self._items == other._items
        if isinstance(other, Mapping):
            return self == Coordinate(other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._items)

    def __lt__(self, other: Coordinate) -> bool:
        return self._items < other._items

    def __add__(self, other: Coordinate) -> Coordinate:
        if not isinstance(other, Coordinate):
            return NotImplemented
        return Coordinate(itertools.chain(self._items, other._items))

    def __neg__(self) -> Coordinate:
        return Coordinate((a, -v) for a, v in self._items)

    def __sub__(self, other: Coordinate) -> Coordinate:
        if not isinstance(other, Coordinate):
            return NotImplemented
        return self + (-other)

    def __mul__(self, k: int) -> Coordinate:
        if isinstance(k, bool) or not isinstance(k, int):
            return NotImplemented
        return Coordinate((a, v * k) for a, v in self._items)

    __rmul__ = __mul__

    def hadamard(self, other: Coordinate) -> Coordinate:
        """Componentwise product; axes missing on either side give 0."""
        return Coordinate((a, v * other[a]) for a, v in self._items)

    def __repr__(self) -> str:
        inner = ", ".join(f"{a}={v}" for a, v in self._items)
        return f"Coordinate({inner})"

    def __str__(self) -> str:
        if not self._items:
            return "0"
        return " + ".join(f"{v}@{a}" for a, v in self._items)


ZERO = Coordinate()


@dataclass(frozen=True)
class Iter:
    """``(extent, stride, axis)``: digit ``d`` in ``[0, extent)`` maps to ``d*stride@axis``."""

    extent: int
    stride: int
    axis: str = DEFAULT_AXIS

    def __post_init__(self):
        check_int(self.extent, "extent")
        check_int(self.stride, "stride")
        check_axis(self.axis)
        if self.extent < 1:
            raise InvalidLayoutError(f"iter extent must be >= 1, got {self.extent}")
        if self.stride == 0:
            raise InvalidLayoutError("iter stride must be nonzero")
        check_int(self.stride * (self.extent - 1), "iter reach")

    def at(self, digit: int) -> Coordinate:
        return Coordinate({self.axis: digit * self.stride})

    def with_stride(self, stride: int) -> Iter:
        return Iter(self.extent, stride, self.axis)

    def __str__(self) -> str:
        return f"({self.extent}, {self.stride}@{self.axis})"


def _as_iter(it) -> Iter:
    if isinstance(it, Iter):
        return it
    return Iter(*it)


def _iter_key(it: Iter) -> tuple[str, int, int]:
    return (it.axis, it.stride, it.extent)


@dataclass(frozen=True, eq=False)
class Layout:
    """Shard list, replica collection and offset.

    Equality compares the shard list in order and the replica collection as a
    multiset.
    """

    shard: tuple[Iter, ...]
    replica: tuple[Iter, ...] = ()
    offset: Coordinate = field(default=ZERO)

    def __post_init__(self):
        object.__setattr__(self, "shard", tuple(_as_iter(i) for i in self.shard))
        object.__setattr__(self, "replica", tuple(_as_iter(i) for i in self.replica))
        if not isinstance(self.offset, Coordinate):
            object.__setattr__(self, "offset", Coordinate(self.offset))
        if not self.shard:
            raise InvalidLayoutError("shard list must contain at least one iter")

    @classmethod
    def of(cls, extents: Sequence[int], strides: Sequence, replica: Iterable = (), offset=None) -> Layout:
        """Build from parallel extent/stride lists; a stride is ``s`` or ``(s, axis)``."""
        if len(extents) != len(strides):
            raise InvalidLayoutError("extent and stride lists differ in length")
        shard = []
        for e, s in zip(extents, strides):
            if isinstance(s, tuple):
                shard.append(Iter(e, *s))
            else:
                shard.append(Iter(e, s))
        return cls(tuple(shard), tuple(replica), Coordinate(offset or {}))

    @classmethod
    def unit(cls) -> Layout:
        return cls((Iter(1, 1),))

    @property
    def domain_size(self) -> int:
        return math.prod(i.extent for i in self.shard)

    @property
    def replica_size(self) -> int:
        return math.prod(i.extent for i in self.replica)

    @property
    def extents(self) -> tuple[int, ...]:
        return tuple(i.extent for i in self.shard)

    def axes(self) -> list[str]:
        seen = dict.fromkeys(i.axis for i in self.shard + self.replica)
        seen.update(dict.fromkeys(self.offset))
        return list(seen)

    def replace(self, shard=None, replica=None, offset=None) -> Layout:
        return Layout(
            self.shard if shard is None else tuple(shard),
            self.replica if replica is None else tuple(replica),
            self.offset if offset is None else offset,
        )

    def _replica_sorted(self) -> tuple[tuple[str, int, int], ...]:
        return tuple(sorted(_iter_key(i) for i in self.replica))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Layout):
            return NotImplemented
        return (
            self.shard == other.shard
            and self._replica_sorted() == other._replica_sorted()
            and self.offset == other.offset
        )

    def __hash__(self) -> int:
        return hash((self.shard, self._replica_sorted(), self.offset))

    def __call__(self, x: int) -> tuple[Coordinate, ...]:
        return evaluate(self, x)

    def __str__(self) -> str:
        from .text import format_layout

        return format_layout(self)


def as_shape(dims: Iterable[int]) -> tuple[int, ...]:
    shape = tuple(check_int(d, "shape dim") for d in dims)
    if not shape:
        raise InvalidLayoutError("shape must have rank >= 1")
    if any(d < 1 for d in shape):
        raise InvalidLayoutError(f"shape dims must be >= 1, got {shape}")
    return shape


@dataclass(frozen=True)
class Region:
    """Axis-aligned box ``prod_i [begin_i, begin_i + extent_i)``."""

    begin: tuple[int, ...]
    extent: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "begin", tuple(check_int(b, "region begin") for b in self.begin))
        object.__setattr__(self, "extent", tuple(check_int(e, "region extent") for e in self.extent))
        if len(self.begin) != len(self.extent) or not self.begin:
            raise InvalidLayoutError("region begin/extent must be nonempty and of equal rank")
        if any(b < 0 for b in self.begin) or any(e < 1 for e in self.extent):
            raise InvalidLayoutError(f"invalid region {self.begin}/{self.extent}")

    @classmethod
    def from_bounds(cls, bounds: Iterable[tuple[int, int]]) -> Region:
        """From half-open ``(begin, end)`` pairs."""
        bounds = list(bounds)
        return cls(tuple(b for b, _ in bounds), tuple(e - b for b, e in bounds))

    @classmethod
    def full(cls, shape: Sequence[int]) -> Region:
        return cls(tuple(0 for _ in shape), tuple(shape))

    @property
    def rank(self) -> int:
        return len(self.begin)

    @property
    def volume(self) -> int:
        return math.prod(self.extent)

    def check_within(self, shape: Sequence[int]) -> None:
        if len(shape) != self.rank:
            raise DomainError(f"region rank {self.rank} does not match shape rank {len(shape)}")
        for b, e, s in zip(self.begin, self.extent, shape):
            if b + e > s:
                raise DomainError(f"region [{b}, {b + e}) exceeds dimension of size {s}")

    def __str__(self) -> str:
        return ",".join(f"{b}:{b + e}" for b, e in zip(self.begin, self.extent))


def flatten(shape: Sequence[int], index: Sequence[int]) -> int:
    """Row-major linearization of ``index`` within ``shape``."""
    if len(index) != len(shape):
        raise DomainError(f"index {tuple(index)} has rank {len(index)}, shape has rank {len(shape)}")
    x = 0
    for i, s in zip(index, shape):
        if not 0 <= i < s:
            raise DomainError(f"index {tuple(index)} out of bounds for shape {tuple(shape)}")
        x = x * s + i
    return x


def unflatten(extents: Sequence[int], x: int) -> tuple[int, ...]:
    """Lexicographic digits of ``x``; the last digit varies fastest."""
    total = math.prod(extents)
    if not 0 <= x < total:
        raise DomainError(f"{x} out of range [0, {total})")
    digits = []
    for e in reversed(extents):
        x, d = divmod(x, e)
        digits.append(d)
    return tuple(reversed(digits))


def shard_value(shard: Sequence[Iter], x: int) -> Coordinate:
    """``f_D(x)`` for a bare iter list."""
    digits = unflatten([i.extent for i in shard], x)
    acc: dict[str, int] = {}
    for it, d in zip(shard, digits):
        if d:
            acc[it.axis] = acc.get(it.axis, 0) + d * it.stride
    return Coordinate(acc)


def replica_offsets(replica: Sequence[Iter]) -> Iterator[Coordinate]:
    """All ``f_R(r)`` in lexicographic digit order (duplicates kept)."""
    for digits in itertools.product(*(range(i.extent) for i in replica)):
        acc: dict[str, int] = {}
        for it, d in zip(replica, digits):
            if d:
                acc[it.axis] = acc.get(it.axis, 0) + d * it.stride
        yield Coordinate(acc)


def evaluate(layout: Layout, x: int) -> tuple[Coordinate, ...]:
    """Coordinates of logical index ``x``: exactly ``replica_size`` entries.

    The result is a multiset in replica-digit order; callers that want set
    semantics wrap it in ``frozenset``.
    """
    if not 0 <= x < layout.domain_size:
        raise DomainError(f"index {x} outside layout domain [0, {layout.domain_size})")
    base = shard_value(layout.shard, x) + layout.offset
    return tuple(base + r for r in replica_offsets(layout.replica))


def admits(layout: Layout, shape: Sequence[int]) -> bool:
    return math.prod(shape) == layout.domain_size


def evaluate_shaped(layout: Layout, shape: Sequence[int], index: Sequence[int]) -> tuple[Coordinate, ...]:
    if not admits(layout, shape):
        raise AdmissionError(f"shape {tuple(shape)} not admitted by a layout of size {layout.domain_size}")
    return evaluate(layout, flatten(shape, index))


def span(layout: Layout) -> Coordinate:
    """Per-axis ``max - min + 1`` of the image, in closed form.

    Axes whose span is 1 (including axes the layout never touches) are
    omitted from the result, so look values up with ``span(L).get(a, 1)``.
    """
    acc: dict[str, int] = {}
    for it in layout.shard + layout.replica:
        acc[it.axis] = acc.get(it.axis, 1) + abs(it.stride) * (it.extent - 1)
    return Coordinate({a: v for a, v in acc.items() if v != 1})


def scale_lookup(scale: Mapping[str, int], axis: str) -> int:
    """Scale factor for ``axis``; absent axes scale by 1."""
    return scale[axis] if axis in scale else 1
