"""Textual layout notation.

    (8,2,4,2):(4@lane,1@warp,1@lane,1@reg) + [(2):(4@warp)] + 5@warp

A shard list, an optional bracketed replica list and any number of offset
terms. Strides without ``@axis`` live on ``m``; so do bare offset integers.
Whitespace is ignored.
"""

from __future__ import annotations

import re
from collections.abc import Sequence

from .core import DEFAULT_AXIS, Coordinate, Iter, Layout, Region, as_shape
from .errors import InvalidLayoutError, ParseError

_INT = re.compile(r"[+-]?\d+")
_AXIS = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str, pos: int | None = None) -> ParseError:
        return ParseError(msg, self.pos if pos is None else pos)

    def skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos: self.pos + 1]

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            found = self.peek() or "end of input"
            raise self.error(f"expected {ch!r}, found {found!r}")
        self.pos += 1

    def accept(self, ch: str) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def match(self, pattern: re.Pattern, what: str) -> str:
        self.skip()
        m = pattern.match(self.text, self.pos)
        if not m:
            raise self.error(f"expected {what}")
        self.pos = m.end()
        return m.group()

    def integer(self) -> int:
        return int(self.match(_INT, "integer"))

    def int_list(self) -> list[int]:
        self.expect("(")
        vals = [self.integer()]
        while self.accept(","):
            vals.append(self.integer())
        self.expect(")")
        return vals

    def term(self) -> tuple[int, str]:
        v = self.integer()
        axis = self.match(_AXIS, "axis name") if self.accept("@") else DEFAULT_AXIS
        return v, axis

    def term_list(self) -> list[tuple[int, str]]:
        self.expect("(")
        vals = [self.term()]
        while self.accept(","):
            vals.append(self.term())
        self.expect(")")
        return vals

    def iters(self) -> list[Iter]:
        start = self.pos
        extents = self.int_list()
        self.expect(":")
        strides = self.term_list()
        if len(extents) != len(strides):
            raise self.error(f"{len(extents)} extents but {len(strides)} strides", start)
        try:
            return [Iter(e, s, a) for e, (s, a) in zip(extents, strides)]
        except InvalidLayoutError as exc:
            raise self.error(str(exc), start) from exc

    def layout(self) -> Layout:
        shard = self.iters()
        replica: list[Iter] = []
        offset: dict[str, int] = {}
        seen_replica = False
        while self.accept("+"):
            if self.peek() == "[":
                if seen_replica or offset:
                    raise self.error("replica list must come once, before offsets")
                self.pos += 1
                replica = self.iters()
                self.expect("]")
                seen_replica = True
            else:
                v, a = self.term()
                offset[a] = offset.get(a, 0) + v
        self.skip()
        if self.pos != len(self.text):
            raise self.error(f"unexpected {self.text[self.pos]!r}")
        return Layout(tuple(shard), tuple(replica), Coordinate(offset))


def parse_layout(text: str) -> Layout:
    """Parse the layout notation.

    Raises:
        ParseError: with ``position`` set to the offending character offset.
    """
    return _Parser(text).layout()


def _fmt_stride(it: Iter) -> str:
    return str(it.stride) if it.axis == DEFAULT_AXIS else f"{it.stride}@{it.axis}"


def format_iters(iters: Sequence[Iter]) -> str:
    return "({}):({})".format(",".join(str(it.extent) for it in iters), ",".join(map(_fmt_stride, iters)))


def format_layout(layout: Layout) -> str:
    parts = [format_iters(layout.shard)]
    if layout.replica:
        parts.append(f"[{format_iters(layout.replica)}]")
    parts.extend(f"{v}@{a}" for a, v in layout.offset.items())
    return " + ".join(parts)


def _int_fields(text: str, what: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",")]
    except ValueError:
        raise ParseError(f"invalid {what} {text!r}") from None


def parse_shape(text: str) -> tuple[int, ...]:
    """``"16,24"`` -> ``(16, 24)``."""
    try:
        return as_shape(_int_fields(text, "shape"))
    except InvalidLayoutError as exc:
        raise ParseError(str(exc)) from exc


def parse_index(text: str) -> tuple[int, ...]:
    return tuple(_int_fields(text, "index"))


def parse_region(text: str) -> Region:
    """``"0:8,8:24"`` (half-open bounds per dimension) -> :class:`Region`."""
    bounds = []
    for field in text.split(","):
        lo, sep, hi = field.partition(":")
        if not sep:
            raise ParseError(f"region bound {field!r} is not begin:end")
        bounds.append(tuple(_int_fields(f"{lo},{hi}", "region")))
    try:
        return Region.from_bounds(bounds)
    except InvalidLayoutError as exc:
        raise ParseError(str(exc)) from exc


def format_shape(shape: Sequence[int]) -> str:
    return ",".join(map(str, shape))
