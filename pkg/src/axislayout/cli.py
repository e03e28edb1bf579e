"""Command-line front end.

Exit status: 0 on success, 1 when an operation fails (including a negative
``equiv`` answer), 2 for unparsable input or bad usage.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from pathlib import Path

from .algebra import GroupedLayout, direct_sum, group_by_shape, tile, tile_of
from .canon import DEFAULT_ORACLE_THRESHOLD, canonicalize, equivalent
from .copy_plan import CopyAtomSpec, plan_copy
from .core import Coordinate, Layout, Region, admits, evaluate, flatten, span, unflatten
from .errors import AdmissionError, LayoutError, ParseError
from .matmul_plan import plan_matmul
from .slicing import slice_layout
from .text import format_iters, parse_index, parse_layout, parse_region, parse_shape

SCHEMA_VERSION = 1
RENDER_LIMIT = 4096


class UsageError(Exception):
    pass


def _layout_arg(text: str) -> Layout:
    if text.startswith("@"):
        try:
            text = Path(text[1:]).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {text[1:]}: {exc.strerror}") from exc
    return parse_layout(text.strip())


def _iters_json(iters) -> list[list]:
    return [[it.extent, it.stride, it.axis] for it in iters]


def _layout_json(layout: Layout) -> dict:
    return {
        "layout": str(layout),
        "shard": _iters_json(layout.shard),
        "replica": _iters_json(layout.replica),
        "offset": dict(layout.offset.items()),
    }


def _grouped_json(g: GroupedLayout) -> dict:
    return {**_layout_json(g.layout), "shape": list(g.shape), "blocks": [list(b) for b in g.blocks]}


def _grouped_text(g: GroupedLayout) -> str:
    blocks = " ".join(format_iters(g.block(i)) if g.block(i) else "()" for i in range(g.rank))
    return f"{g.layout}\nshape {','.join(map(str, g.shape))}\nblocks {blocks}"


def _coord_json(c: Coordinate) -> dict:
    return dict(c.items())


def _coord_set_text(coords) -> str:
    return "{" + ", ".join(str(c) for c in sorted(set(coords))) + "}"


def _two_shapes(args) -> tuple[tuple[int, ...], tuple[int, ...]]:
    if not args.shape or len(args.shape) != 2:
        raise UsageError("expected exactly two --shape options, one per layout")
    return args.shape[0], args.shape[1]


def _one_shape(args, required: bool = True):
    if not args.shape:
        if required:
            raise UsageError("--shape is required")
        return None
    if len(args.shape) != 1:
        raise UsageError("expected a single --shape")
    return args.shape[0]


def cmd_eval(args):
    layout = _layout_arg(args.layout)
    shape = _one_shape(args, required=False)
    index = parse_index(args.index)
    if shape is None:
        if len(index) != 1:
            raise UsageError("a multi-index needs --shape")
        x = index[0]
    else:
        if not admits(layout, shape):
            raise AdmissionError(f"shape {shape} not admitted by a layout of size {layout.domain_size}")
        x = flatten(shape, index)
    coords = evaluate(layout, x)
    return {"x": x, "coords": [_coord_json(c) for c in coords]}, _coord_set_text(coords), 0


def cmd_canon(args):
    c = canonicalize(_layout_arg(args.layout))
    return _layout_json(c), str(c), 0


def cmd_equiv(args):
    eq = equivalent(_layout_arg(args.a), _layout_arg(args.b), threshold=args.threshold)
    return {"equivalent": eq}, "equivalent" if eq else "not equivalent", 0 if eq else 1


def cmd_span(args):
    s = span(_layout_arg(args.layout))
    return {"span": _coord_json(s)}, str(s) if s else "1", 0


def cmd_group(args):
    g = group_by_shape(_layout_arg(args.layout), _one_shape(args))
    return _grouped_json(g), _grouped_text(g), 0


def _binary(op):
    def run(args):
        sa, sb = _two_shapes(args)
        g = op(_layout_arg(args.a), sa, _layout_arg(args.b), sb)
        return _grouped_json(g), str(g.layout), 0

    return run


def cmd_tileof(args):
    sa, sb = _two_shapes(args)
    g, _ = tile_of(_layout_arg(args.a), sa, _layout_arg(args.b), sb)
    return _grouped_json(g), f"{g.layout}\nshape {','.join(map(str, g.shape))}", 0


def cmd_slice(args):
    layout = slice_layout(_layout_arg(args.layout), _one_shape(args), args.region)
    return _layout_json(layout), str(layout), 0


def cmd_render(args):
    layout = _layout_arg(args.layout)
    shape = _one_shape(args, required=False)
    if shape is not None and not admits(layout, shape):
        raise AdmissionError(f"shape {shape} not admitted by a layout of size {layout.domain_size}")
    axes = sorted(set(layout.axes())) or ["m"]
    rows, lines = [], []
    header = ["x"] + (["index"] if shape else []) + ["r"] + axes
    lines.append("\t".join(header))
    total = layout.domain_size * layout.replica_size
    for x in range(layout.domain_size):
        if len(rows) >= args.limit:
            break
        idx = list(unflatten(shape, x)) if shape else None
        for r, c in enumerate(evaluate(layout, x)):
            if len(rows) >= args.limit:
                break
            rows.append({"x": x, "index": idx, "r": r, "coord": _coord_json(c)})
            cells = [str(x)] + ([",".join(map(str, idx))] if shape else []) + [str(r)] + [str(c[a]) for a in axes]
            lines.append("\t".join(cells))
    truncated = total > len(rows)
    if truncated:
        lines.append(f"... truncated: showing {len(rows)} of {total} rows")
    return {"axes": axes, "rows": rows, "truncated": truncated, "total_rows": total}, "\n".join(lines), 0


def cmd_plan_copy(args):
    rank = len(args.shared_shape)
    plan = plan_copy(
        _layout_arg(args.global_layout),
        args.global_shape,
        args.global_region or Region.full(args.global_shape),
        _layout_arg(args.shared_layout),
        args.shared_shape,
        args.shared_region or Region.full(args.shared_shape),
        CopyAtomSpec(args.dtype_size, args.swizzle, rank),
    )
    return {"plan": plan.to_dict()}, plan.format(), 0


def cmd_plan_matmul(args):
    plan = plan_matmul(
        _layout_arg(args.a), args.a_shape, _layout_arg(args.b), args.b_shape, _layout_arg(args.c), args.c_shape
    )
    return {"plan": plan.to_dict()}, plan.format(), 0


def _shape_type(text: str):
    try:
        return parse_shape(text)
    except ParseError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _region_type(text: str):
    try:
        return parse_region(text)
    except ParseError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="structured output")
    parser = argparse.ArgumentParser(prog="axislayout", description="Layout algebra over named hardware axes.")
    parser.add_argument("--json", action="store_true", default=False, help="structured output")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    def shape_opt(p, help_="logical shape, e.g. 16,24"):
        p.add_argument("--shape", action="append", type=_shape_type, help=help_)

    p = add("eval", cmd_eval, "evaluate a layout at a logical index")
    p.add_argument("layout")
    p.add_argument("index", help="flat index x, or a multi-index i,j,... with --shape")
    shape_opt(p)

    p = add("canon", cmd_canon, "canonical form")
    p.add_argument("layout")

    p = add("equiv", cmd_equiv, "decide equivalence of two layouts")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--threshold", type=int, default=DEFAULT_ORACLE_THRESHOLD)

    p = add("span", cmd_span, "axis-wise span")
    p.add_argument("layout")

    p = add("group", cmd_group, "group a layout by a shape")
    p.add_argument("layout")
    shape_opt(p)

    for name, func, help_ in (
        ("tile", _binary(tile), "tile A by B"),
        ("tileof", cmd_tileof, "recover C with A = C tiled by B"),
        ("dsum", _binary(direct_sum), "direct sum of A and B"),
    ):
        p = add(name, func, help_)
        p.add_argument("a")
        p.add_argument("b")
        shape_opt(p, "shape of A, then shape of B")

    p = add("slice", cmd_slice, "layout of a rectangular region")
    p.add_argument("layout")
    shape_opt(p)
    p.add_argument("--region", type=_region_type, required=True, help="b0:e0,b1:e1,... (half-open)")

    p = add("render", cmd_render, "table of logical index to coordinates")
    p.add_argument("layout")
    shape_opt(p)
    p.add_argument("--limit", type=int, default=RENDER_LIMIT, help=argparse.SUPPRESS)

    p = add("plan-copy", cmd_plan_copy, "plan box copies from global into shared memory")
    p.add_argument("--global", dest="global_layout", required=True)
    p.add_argument("--global-shape", type=_shape_type, required=True)
    p.add_argument("--global-region", type=_region_type)
    p.add_argument("--shared", dest="shared_layout", required=True)
    p.add_argument("--shared-shape", type=_shape_type, required=True)
    p.add_argument("--shared-region", type=_region_type)
    p.add_argument("--dtype-size", type=int, default=2)
    p.add_argument("--swizzle", type=int, default=128)

    p = add("plan-matmul", cmd_plan_matmul, "plan systolic matmul dispatch")
    for op, dims in (("a", "K,M"), ("b", "K,N"), ("c", "M,N")):
        p.add_argument(f"--{op}", required=True, help=f"layout of {op.upper()} [{dims}]")
        p.add_argument(f"--{op}-shape", type=_shape_type, required=True)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage and 0 after --help
        return int(exc.code or 0)
    try:
        payload, text, code = args.func(args)
    except (ParseError, UsageError, LayoutError) as exc:
        code = 1 if isinstance(exc, LayoutError) and not isinstance(exc, ParseError) else 2
        print(f"error: {exc}", file=sys.stderr)
        if args.json:
            _emit({"error": {"type": type(exc).__name__, "message": str(exc)}}, args.command, False)
        return code
    if args.json:
        _emit(payload, args.command, code == 0)
    else:
        print(text)
    return code


def _emit(payload: dict, command: str, ok: bool) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "ok": ok, **payload}
    print(json.dumps(doc, sort_keys=True, indent=2))


if __name__ == "__main__":
    sys.exit(main())
