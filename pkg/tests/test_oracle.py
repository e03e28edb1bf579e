import pytest

from axislayout import (
    ZERO,
    Coordinate,
    Iter,
    Layout,
    Oracle,
    OracleLimitError,
    canonicalize,
    enumerate_layout,
    oracle_equivalent,
    oracle_span,
)
from test_core import TENSOR_CORE


def test_enumerate_examples():
    assert enumerate_layout(Layout.unit()) == [frozenset({ZERO})]
    got = enumerate_layout(Layout.of((2, 2), (4, 1)))
    assert got == [frozenset({Coordinate(m=v)}) for v in (0, 1, 4, 5)]
    got = enumerate_layout(Layout.of((24, 24), (1, 24)))
    assert got[:4] == [frozenset({Coordinate(m=v)}) for v in (0, 24, 48, 72)]


def test_enumerate_cardinalities():
    sets = enumerate_layout(TENSOR_CORE)
    assert len(sets) == 128
    assert all(len(s) == 2 for s in sets)


def test_oracle_equivalent_examples():
    assert oracle_equivalent(Layout.of((2, 8), (8, 1)), Layout.of((16,), (1,)))
    assert not oracle_equivalent(Layout.of((2, 2), (4, 1)), Layout.of((4,), (1,)))
    assert oracle_equivalent(TENSOR_CORE, canonicalize(TENSOR_CORE))
    assert not oracle_equivalent(Layout.of((4,), (1,)), Layout.of((8,), (1,)))


def test_oracle_compares_replica_images_as_sets():
    # replicas that alias collapse: {0,1,2} + {0,1} has 4 distinct values, not 6
    a = Layout((Iter(2, 8),), (Iter(3, 1), Iter(2, 1)))
    b = Layout((Iter(2, 8),), (Iter(4, 1),))
    assert oracle_equivalent(a, b)


def test_oracle_span_examples():
    assert oracle_span(Layout.of((2, 2), (4, 1))) == Coordinate(m=6)
    assert oracle_span(Layout.unit()) == ZERO
    assert oracle_span(TENSOR_CORE) == Coordinate(lane=32, warp=6, reg=2)


def test_oracle_limit():
    with pytest.raises(OracleLimitError):
        Oracle(limit=100).enumerate(Layout.of((101,), (1,)))
    axes, table = Oracle().table(Layout.of((3,), ((2, "n"),)), ["m", "n"])
    assert axes == ["m", "n"] and table[:, 0, 1].tolist() == [0, 2, 4]


def test_oracle_refuses_int64_overflow():
    with pytest.raises(OracleLimitError):
        enumerate_layout(Layout.of((4,), (2**61,)))
