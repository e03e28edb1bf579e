import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from axislayout import (
    ZERO,
    AdmissionError,
    Coordinate,
    DomainError,
    IntegerOverflowError,
    InvalidLayoutError,
    Iter,
    Layout,
    Region,
    admits,
    evaluate,
    evaluate_shaped,
    flatten,
    oracle_span,
    parse_layout,
    span,
    unflatten,
)

TENSOR_CORE = Layout(
    (Iter(8, 4, "lane"), Iter(2, 1, "warp"), Iter(4, 1, "lane"), Iter(2, 1, "reg")),
    (Iter(2, 4, "warp"),),
    Coordinate(warp=5),
)
SHARDED_64x128 = Layout.of((2, 32, 2, 64), ((1, "gpuid"), 128, (2, "gpuid"), 1))


def test_coordinate_is_sparse():
    c = Coordinate(m=3, n=0)
    assert dict(c.items()) == {"m": 3}
    assert c["lane"] == 0
    assert "n" not in c
    assert Coordinate(m=1) + Coordinate(m=-1) == ZERO
    assert str(Coordinate(m=64, gpuid=2)) == "2@gpuid + 64@m"
    assert str(ZERO) == "0"


def test_coordinate_arithmetic():
    a, b = Coordinate(m=2, n=3), Coordinate(n=-3, lane=1)
    assert a + b == Coordinate(m=2, lane=1)
    assert a - a == ZERO
    assert a * 3 == Coordinate(m=6, n=9)
    assert a.hadamard(Coordinate(m=5)) == Coordinate(m=10)


def test_iter_validation():
    with pytest.raises(InvalidLayoutError):
        Iter(0, 1)
    with pytest.raises(InvalidLayoutError):
        Iter(2, 0)
    with pytest.raises(InvalidLayoutError):
        Iter(2, 1, "bad axis")
    with pytest.raises(IntegerOverflowError):
        Iter(2, 2**63)
    assert Iter(3, -2).at(2) == Coordinate(m=-4)


def test_layout_requires_shard():
    with pytest.raises(InvalidLayoutError):
        Layout(())


def test_replica_is_a_multiset():
    a = Layout((Iter(2, 1),), (Iter(2, 4, "warp"), Iter(3, 1, "lane")))
    b = Layout((Iter(2, 1),), (Iter(3, 1, "lane"), Iter(2, 4, "warp")))
    assert a == b and hash(a) == hash(b)
    assert sorted(evaluate(a, 1)) == sorted(evaluate(b, 1))


@pytest.mark.parametrize(
    "shape,index,x", [((16, 24), (0, 0), 0), ((16, 24), (1, 0), 24), ((2, 3, 4), (1, 2, 3), 23)]
)
def test_flatten_examples(shape, index, x):
    assert flatten(shape, index) == x


@pytest.mark.parametrize("extents,x,digits", [((2, 4), 0, (0, 0)), ((2, 4), 5, (1, 1)), ((24, 24), 25, (1, 1))])
def test_unflatten_examples(extents, x, digits):
    assert unflatten(extents, x) == digits


def test_flatten_rejects_out_of_bounds():
    with pytest.raises(DomainError):
        flatten((2, 3), (2, 0))
    with pytest.raises(DomainError):
        unflatten((2, 3), 6)


def test_flatten_unflatten_inverse_exhaustive():
    for shape in [(4,), (2, 3), (3, 1, 4), (2, 2, 2, 2), (16, 24)]:
        for x, idx in enumerate(itertools.product(*map(range, shape))):
            assert flatten(shape, idx) == x
            assert unflatten(shape, x) == idx


def test_eval_tensor_core():
    assert set(evaluate(TENSOR_CORE, 0)) == {Coordinate(warp=5), Coordinate(warp=9)}


def test_eval_unit_layout():
    assert evaluate(Layout.unit(), 0) == (ZERO,)


def test_eval_non_bit_linear():
    lay = Layout.of((24, 24), (1, 24))
    assert [evaluate(lay, x) for x in (1, 2, 3)] == [(Coordinate(m=24),), (Coordinate(m=48),), (Coordinate(m=72),)]


def test_eval_out_of_domain():
    with pytest.raises(DomainError):
        evaluate(Layout.of((4,), (1,)), 4)


def test_eval_shaped_examples():
    assert evaluate_shaped(SHARDED_64x128, (64, 128), (0, 64)) == (Coordinate(gpuid=2),)
    assert evaluate_shaped(SHARDED_64x128, (64, 128), (32, 0)) == (Coordinate(gpuid=1),)
    with pytest.raises(AdmissionError):
        evaluate_shaped(SHARDED_64x128, (64, 64), (0, 0))


def test_admits():
    lay = Layout.of((16, 24), (24, 1))
    assert admits(lay, (16, 24)) and not admits(lay, (16, 25))
    assert admits(Layout.unit(), (1, 1, 1))


def test_span_examples():
    assert span(Layout.of((2, 2), (4, 1))) == Coordinate(m=6)
    assert span(Layout.of((8,), (1,))) == Coordinate(m=8)
    assert span(TENSOR_CORE) == Coordinate(lane=32, warp=6, reg=2)
    assert span(Layout.unit()) == ZERO


def test_region():
    r = Region.from_bounds([(0, 8), (8, 24)])
    assert r.begin == (0, 8) and r.extent == (8, 16) and r.volume == 128
    assert str(r) == "0:8,8:24"
    with pytest.raises(DomainError):
        r.check_within((8, 16))
    with pytest.raises(InvalidLayoutError):
        Region((0,), (0,))


iters = st.builds(
    Iter,
    st.integers(1, 6),
    st.integers(1, 20).flatmap(lambda s: st.sampled_from([s, -s])),
    st.sampled_from(["m", "n", "lane"]),
)
layouts = st.builds(
    Layout,
    st.lists(iters, min_size=1, max_size=4).map(tuple),
    st.lists(iters, max_size=2).map(tuple),
    st.dictionaries(st.sampled_from(["m", "n"]), st.integers(-9, 9)).map(Coordinate),
)


@settings(max_examples=200, deadline=None)
@given(layouts)
def test_span_matches_oracle(lay):
    assert span(lay) == oracle_span(lay)


@settings(max_examples=200, deadline=None)
@given(layouts, st.randoms(use_true_random=False))
def test_eval_cardinality_and_replica_permutation(lay, rnd):
    perm = list(lay.replica)
    rnd.shuffle(perm)
    other = lay.replace(replica=perm)
    for x in range(min(lay.domain_size, 32)):
        out = evaluate(lay, x)
        assert len(out) == lay.replica_size == math.prod(it.extent for it in lay.replica)
        assert sorted(out) == sorted(evaluate(other, x))


def test_str_uses_text_notation():
    assert str(TENSOR_CORE) == "(8,2,4,2):(4@lane,1@warp,1@lane,1@reg) + [(2):(4@warp)] + 5@warp"
    assert parse_layout(str(TENSOR_CORE)) == TENSOR_CORE
