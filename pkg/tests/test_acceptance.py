"""Acceptance suite. Each test is one criterion; a PASS/FAIL line per criterion
is printed in the terminal summary (see conftest.py)."""

import functools
import itertools
import json
import math
import random
import subprocess
import sys
import time

import pytest

from axislayout import (
    ZERO,
    ConstraintError,
    Coordinate,
    CopyAtomSpec,
    GroupingError,
    Iter,
    Layout,
    LayoutError,
    PlanError,
    Region,
    SliceError,
    TilingError,
    canonicalize,
    direct_sum,
    enumerate_layout,
    equivalent,
    evaluate,
    group_by_shape,
    iter_intersect,
    oracle_equivalent,
    plan_copy,
    plan_matmul,
    scale_by,
    slice_layout,
    span,
    tile,
    tile_of,
    verify_copy_plan,
    verify_matmul_plan,
)
from axislayout.core import flatten
from layout_gen import (
    aligned_region,
    factorizations,
    perturb,
    rand_canonical_gc,
    rand_layout,
    rand_region,
    rand_shape,
    rand_tileable,
)
from test_copy_plan import random_copy_case
from test_matmul_plan import random_problem

GOLDEN = Layout.of((2, 8, 3, 8), (192, 8, 64, 1))
A23 = Layout.of((2, 3), (3, 1))
B88 = Layout.of((8, 8), (8, 1))
TC = Layout(
    (Iter(8, 4, "lane"), Iter(2, 1, "warp"), Iter(4, 1, "lane"), Iter(2, 1, "reg")),
    (Iter(2, 4, "warp"),),
    Coordinate(warp=5),
)


def _region_points(region):
    return itertools.product(*(range(e) for e in region.extent))


def _slice_matches_oracle(lay, shape, region, sliced):
    full, part = enumerate_layout(lay), enumerate_layout(sliced)
    for u in _region_points(region):
        g = tuple(b + x for b, x in zip(region.begin, u))
        if part[flatten(region.extent, u)] != full[flatten(shape, g)]:
            return False
    return True


def test_criterion_01_tile_golden():
    """tile golden (2,3):(3,1) x (8,8):(8,1) == (2,8,3,8):(192,8,64,1) in < 1 ms"""
    assert tile(A23, (2, 3), B88, (8, 8)).layout == GOLDEN
    best = min(_timed(lambda: tile(A23, (2, 3), B88, (8, 8))) for _ in range(50))
    assert best < 1e-3, best


def _timed(fn):
    t = time.perf_counter()
    fn()
    return time.perf_counter() - t


def test_criterion_02_slice_golden():
    """slice golden [0:8)x[8:24) == (1,8,2,8):(192,8,64,1) + 64@m, 128 points oracle-checked"""
    region = Region.from_bounds([(0, 8), (8, 24)])
    sliced = slice_layout(GOLDEN, (16, 24), region)
    assert sliced == Layout.of((1, 8, 2, 8), (192, 8, 64, 1), offset=Coordinate(m=64))
    assert region.volume == 128
    assert _slice_matches_oracle(GOLDEN, (16, 24), region, sliced)


def test_criterion_03_direct_sum_golden():
    """direct-sum golden canonicalizes to (16):(1), tile_of counterexample fails, span == 6"""
    b = Layout.of((2, 2), (4, 1))
    d = direct_sum(Layout.of((2, 2), (8, 2)), (2, 2), b, (2, 2))
    assert canonicalize(d.layout) == Layout.of((16,), (1,))
    with pytest.raises(TilingError):
        tile_of(Layout.of((16,), (1,)), (4, 4), b, (2, 2))
    assert span(b) == Coordinate(m=6)


def test_criterion_04_non_bit_linear_golden():
    """(24,24):(1@m,24@m) gives 24, 48, 72 at x = 1, 2, 3 and 24 ^ 48 == 40 != 72"""
    lay = Layout.of((24, 24), (1, 24))
    got = [evaluate(lay, x) for x in (1, 2, 3)]
    assert got == [(Coordinate(m=v),) for v in (24, 48, 72)]
    assert 24 ^ 48 == 40 and 40 != 72


def test_criterion_05_tensor_core_golden():
    """tensor-core layout: x = 0 reaches warps {5, 9}; 128 cells, each twice, warps in {5,6,9,10}"""
    assert {c["warp"] for c in evaluate(TC, 0)} == {5, 9}
    cmd = [sys.executable, "-m", "axislayout", "--json", "render", str(TC)]
    doc = json.loads(subprocess.run(cmd, capture_output=True, check=True).stdout)
    cells = {}
    for row in doc["rows"]:
        cells.setdefault(row["x"], []).append(tuple(sorted(row["coord"].items())))
    assert len(cells) == 128 and not doc["truncated"]
    assert all(len(c) == 2 and len(set(c)) == 2 for c in cells.values())
    assert {dict(c)["warp"] for cs in cells.values() for c in cs} == {5, 6, 9, 10}


def test_criterion_06_canonicalization_soundness():
    """1000 random layouts are oracle-equivalent to their canonical form in < 10 s"""
    rng = random.Random(601)
    layouts = [rand_layout(rng) for _ in range(1000)]
    t = time.perf_counter()
    bad = [lay for lay in layouts if not oracle_equivalent(lay, canonicalize(lay))]
    elapsed = time.perf_counter() - t
    assert not bad, bad[:3]
    assert elapsed < 10, elapsed


def test_criterion_07_canonical_uniqueness_under_gc():
    """1000 perturbed canonical GC layouts re-canonicalize to the identical structure"""
    rng = random.Random(701)
    bad = []
    for _ in range(1000):
        lay = rand_canonical_gc(rng)
        moved = perturb(rng, lay, rng.randint(1, 5))
        if canonicalize(moved) != lay:
            bad.append((lay, moved))
    assert not bad, bad[:3]


def test_criterion_08_tile_roundtrip():
    """500 (C, B) pairs: tile_of(tile(C, B), B) recovers C and its shape"""
    rng = random.Random(801)
    done, bad = 0, []
    while done < 500:
        c, b = rand_tileable(rng), rand_tileable(rng)
        rank = rng.randint(1, 3)
        sc, sb = factorizations(c.domain_size, rank, rng), factorizations(b.domain_size, rank, rng)
        try:
            t = tile(c, sc, b, sb)
        except LayoutError:
            continue
        done += 1
        try:
            got, got_shape = tile_of(t.layout, tuple(x * y for x, y in zip(sc, sb)), b, sb)
        except LayoutError as exc:
            bad.append((c, sc, b, sb, exc))
            continue
        if got_shape != sc or not equivalent(got.layout, c):
            bad.append((c, sc, b, sb, got.layout))
    assert not bad, bad[:3]


def test_criterion_09_scaled_composition():
    """200 (A, B) pairs: direct_sum(scale_by(A, span(B)), B) is equivalent to tile(A, B)"""
    rng = random.Random(901)
    done, bad = 0, []
    while done < 200:
        a, b = rand_tileable(rng), rand_tileable(rng)
        rank = rng.randint(1, 3)
        sa, sb = factorizations(a.domain_size, rank, rng), factorizations(b.domain_size, rank, rng)
        try:
            lhs = direct_sum(scale_by(a, span(b)), sa, b, sb).layout
            rhs = tile(a, sa, b, sb).layout
        except LayoutError:
            continue
        done += 1
        if not equivalent(lhs, rhs):
            bad.append((a, sa, b, sb))
    assert not bad, bad[:3]


def test_criterion_10_slice_property():
    """500 successful slices agree with the oracle on every region point"""
    rng = random.Random(1001)
    done, bad = 0, []
    while done < 500:
        lay = rand_layout(rng, max_points=1024)
        shape = rand_shape(rng, lay)
        region = (aligned_region if rng.random() < 0.5 else rand_region)(rng, shape)
        try:
            sliced = slice_layout(lay, shape, region)
        except (SliceError, GroupingError):
            continue
        done += 1
        if not _slice_matches_oracle(lay, shape, region, sliced):
            bad.append((lay, shape, region, sliced))
    assert not bad, bad[:3]


def _split_fuse_moves(state):
    for k, it in enumerate(state):
        for d in range(2, it.extent):
            if it.extent % d == 0:
                yield state[:k] + (Iter(it.extent // d, it.stride * d, it.axis), Iter(d, it.stride, it.axis)) + state[k + 1:]
    for k in range(len(state) - 1):
        a, b = state[k], state[k + 1]
        if a.axis == b.axis and a.stride == b.extent * b.stride:
            yield state[:k] + (Iter(a.extent * b.extent, b.stride, a.axis),) + state[k + 2:]


@functools.lru_cache(maxsize=None)
def _reachable(start):
    seen, todo = {start}, [start]
    while todo:
        for nxt in _split_fuse_moves(todo.pop()):
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return frozenset(seen)


def _cuttable(state, shape):
    pos = 0
    for dim in shape:
        p = 1
        while p < dim and pos < len(state):
            p *= state[pos].extent
            pos += 1
        if p != dim:
            return False
    return pos == len(state)


def _ordered_factorizations(n, rank):
    if rank == 1:
        yield (n,)
        return
    for d in range(1, n + 1):
        if n % d == 0:
            for rest in _ordered_factorizations(n // d, rank - 1):
                yield (d,) + rest


def test_criterion_11_grouping_minimality():
    """grouping is never beaten on iter count by an exhaustive split/fuse search (<= 3 iters, extents <= 6)"""
    strides = [(1, "m"), (2, "m"), (3, "m"), (6, "m"), (1, "n")]
    options = [Iter(e, s, a) for e in range(1, 7) for s, a in strides]
    cases = succeeded = 0
    beaten = []
    for k in (1, 2, 3):
        for shard in itertools.product(options, repeat=k):
            reach = _reachable(tuple(it for it in shard if it.extent > 1))
            total = math.prod(it.extent for it in shard)
            for rank in (1, 2, 3):
                for shape in _ordered_factorizations(total, rank):
                    cases += 1
                    try:
                        g = group_by_shape(Layout(shard), shape)
                    except GroupingError:
                        continue
                    succeeded += 1
                    mine = sum(1 for it in g.layout.shard if it.extent > 1)
                    best = min((len(s) for s in reach if _cuttable(s, shape)), default=None)
                    if best is None or mine > best:
                        beaten.append((shard, shape, mine, best))
    assert succeeded > 0.5 * cases
    assert not beaten, beaten[:3]


def test_criterion_12_iter_intersect_exhaustive():
    """iter_intersect equals the set intersection for extents <= 64, strides <= 16"""
    masks = {(e, s): sum(1 << (k * s) for k in range(e)) for e in range(1, 65) for s in range(1, 17)}
    bad = []
    for (e1, s1), m1 in masks.items():
        for (e2, s2), m2 in masks.items():
            got = iter_intersect(Iter(e1, s1, "P"), Iter(e2, s2, "P"))
            if masks.get((got.extent, got.stride), _mask(got)) != m1 & m2:
                bad.append(((e1, s1), (e2, s2), got))
    assert not bad, bad[:3]


def _mask(it):
    return sum(1 << (k * it.stride) for k in range(it.extent))


def test_criterion_13_matmul_plans():
    """matmul examples give their instruction shapes; 200 random plans cover once within caps; K on F fails"""
    sq = Layout.of((128, 128), ((1, "P"), (1, "F")))
    plan = plan_matmul(sq, (128, 128), sq, (128, 128), sq, (128, 128))
    assert plan.instruction_shape == (128, 128, 128) and plan.loops == ()
    verify_matmul_plan(plan, sq, (128, 128), sq, (128, 128), sq, (128, 128))
    with pytest.raises(ConstraintError):
        plan_matmul(Layout.of((128, 128), ((1, "F"), (1, "P"))), (128, 128), sq, (128, 128), sq, (128, 128))
    a = Layout.of((128, 2, 128), ((1, "P"), (128, "F"), (1, "F")))
    c = Layout.of((256, 128), ((1, "P"), (1, "F")))
    plan = plan_matmul(a, (128, 256), sq, (128, 128), c, (256, 128))
    assert plan.instruction_shape == (128, 128, 128)
    assert [(f.dim, f.extent) for f in plan.loops] == [("M", 2)]
    verify_matmul_plan(plan, a, (128, 256), sq, (128, 128), c, (256, 128))

    rng = random.Random(1301)
    ok = 0
    for _ in range(200):
        prob = random_problem(rng)
        try:
            plan = plan_matmul(*prob)
        except PlanError:
            continue
        ok += 1
        verify_matmul_plan(plan, *prob)
    assert ok >= 100

    for _ in range(100):
        a, sa, b, sb, c, sc = random_problem(rng, k_axes=("F",))
        if sa[0] > 1:
            with pytest.raises(ConstraintError):
                plan_matmul(a, sa, b, sb, c, sc)


def test_criterion_14_copy_plans():
    """100 random copy plans are bijections consistent with both layouts; column-major shared fails"""
    rng = random.Random(1401)
    ok = 0
    for _ in range(100):
        lg, eg, rg, ls, es, rs, atom = random_copy_case(rng)
        try:
            plan = plan_copy(lg, eg, rg, ls, es, rs, atom)
        except PlanError:
            continue
        ok += 1
        verify_copy_plan(plan, lg, eg, rg, ls, es, rs)
    assert ok >= 50
    row, full = Layout.of((16, 64), (64, 1)), Region.full((16, 64))
    with pytest.raises(PlanError):
        plan_copy(row, (16, 64), full, Layout.of((16, 64), (1, 16)), (16, 64), full, CopyAtomSpec(2, 128, 2))


def _cli(*argv):
    proc = subprocess.run([sys.executable, "-m", "axislayout", *argv], capture_output=True)
    return proc.returncode, proc.stdout.decode()


def test_criterion_15_cli():
    """CLI reproduces goldens 1-3, --json is byte-stable, exit codes follow 0/1/2"""
    tile_args = ["tile", "(2,3):(3,1)", "--shape", "2,3", "(8,8):(8,1)", "--shape", "8,8"]
    slice_args = ["slice", str(GOLDEN), "--shape", "16,24", "--region", "0:8,8:24"]
    dsum_args = ["dsum", "(2,2):(8,2)", "--shape", "2,2", "(2,2):(4,1)", "--shape", "2,2"]
    assert _cli(*tile_args) == (0, "(2,8,3,8):(192,8,64,1)\n")
    assert _cli(*slice_args) == (0, "(1,8,2,8):(192,8,64,1) + 64@m\n")
    assert _cli(*dsum_args) == (0, "(2,2,2,2):(8,4,2,1)\n")
    assert _cli("canon", "(2,2,2,2):(8,4,2,1)") == (0, "(16):(1)\n")
    assert _cli("span", "(2,2):(4,1)") == (0, "6@m\n")
    assert _cli("tileof", "(16):(1)", "--shape", "4,4", "(2,2):(4,1)", "--shape", "2,2")[0] == 1

    for args in (tile_args, slice_args, dsum_args):
        first, second = _cli("--json", *args), _cli("--json", *args)
        assert first == second and first[0] == 0
        assert json.loads(first[1])["schema_version"] == 1

    assert _cli("equiv", "(2,8):(8,1)", "(16):(1)") == (0, "equivalent\n")
    assert _cli("equiv", "(2,2):(4,1)", "(4):(1)")[0] == 1
    assert _cli("canon", "(2,3):(3,0)")[0] == 2
    assert _cli("nonsense")[0] == 2
