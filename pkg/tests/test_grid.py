from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qscarpet.grid import (
    ConfigError,
    GridParams,
    IndexClass,
    as_fraction,
    cell_of_index,
    class_counts,
    classify,
    first_stop,
    index_from_cell,
    is_prefix,
    locate_point,
    square_bounds,
    stopping_state,
)


def brute_class(i, j, M):
    # distance from the nearest edge, 1-based
    ring = min(i, j, M + 1 - i, M + 1 - j)
    return {1: IndexClass.RING1, 2: IndexClass.RING2}.get(ring, IndexClass.CENTER)


@pytest.mark.parametrize("M", [5, 9, 13])
def test_classes_partition_the_grid(M):
    counts = class_counts(M)
    assert sum(counts.values()) == M * M
    assert counts[IndexClass.CENTER] == (M - 4) ** 2
    assert counts[IndexClass.RING1] == 4 * M - 4
    for i in range(1, M + 1):
        for j in range(1, M + 1):
            assert classify(i, j, M) is brute_class(i, j, M)


def test_classify_examples():
    assert classify(1, 3, 5) is IndexClass.RING1
    assert classify(2, 3, 5) is IndexClass.RING2
    assert classify(3, 3, 5) is IndexClass.CENTER
    with pytest.raises(ValueError):
        classify(0, 1, 5)


def test_center_fraction():
    assert GridParams().center_fraction == Fraction(1, 25)
    assert GridParams(M=9, r=Fraction(1, 1000)).center_fraction == Fraction(25, 81)


def test_level_one_ring_cell_stops_at_once():
    assert stopping_state(((1, 1),), 5).stopped_at == 1
    assert stopping_state(((2, 3),), 5).stopped_at == 1
    assert not stopping_state(((3, 3),), 5).stopped


def test_first_stop_uses_strict_inequality():
    assert first_stop([0, 0, 1]) is None  # 3 * 1 == 3 is not > 3
    assert first_stop([0, 1]) == 2
    assert first_stop([0, 0, 0, 1, 0, 1]) is None
    assert first_stop([0, 0, 0, 1, 1]) == 5
    assert first_stop([]) is None


def test_stopping_ledger_partial_sums():
    ledger = stopping_state(((3, 3), (3, 3), (1, 3)), 5)
    assert ledger.partial_sums == (0, 0, 1)
    assert ledger.stopped_at is None


def test_params_validation():
    with pytest.raises(ConfigError):
        GridParams(M=6)
    with pytest.raises(ConfigError):
        GridParams(M=3)
    with pytest.raises(ConfigError):
        GridParams(M=5, r=Fraction(1, 125))
    with pytest.raises(ConfigError):
        GridParams(M=77, r=Fraction(1, 10**6), mode="strict")
    with pytest.raises(ConfigError):
        GridParams(M=5, r=0.005)
    assert GridParams(M=5, r="1/126").r == Fraction(1, 126)
    strict = GridParams.strict_default()
    assert strict.M == 79 and strict.r == Fraction(1, 2 * 79**3)


def test_as_fraction():
    assert as_fraction("3/7") == Fraction(3, 7)
    assert as_fraction(2) == 2
    for bad in ("x", "1/0", 0.5, True, None):
        with pytest.raises(ConfigError):
            as_fraction(bad)


def test_locate_point_boundaries():
    assert locate_point((0, 0), 2, 5) == ((1, 1), (1, 1))
    assert locate_point((1, 1), 2, 5) == ((5, 5), (5, 5))
    # half-open cells: the left edge of the second cell belongs to it
    assert locate_point((Fraction(1, 5), 0), 1, 5) == ((2, 1),)
    with pytest.raises(ValueError):
        locate_point((Fraction(6, 5), 0), 1, 5)


def test_cell_roundtrip():
    for cx in range(25):
        for cy in range(0, 25, 7):
            idx = index_from_cell(cx, cy, 2, 5)
            assert cell_of_index(idx, 5) == (cx, cy)


coords = st.fractions(min_value=0, max_value=1, max_denominator=10**6)
index_pairs = st.tuples(st.integers(1, 5), st.integers(1, 5))


@given(coords, coords, st.integers(0, 5))
def test_locate_point_nests_across_levels(x, y, m):
    coarse = locate_point((x, y), m, 5)
    fine = locate_point((x, y), m + 1, 5)
    assert is_prefix(coarse, fine)
    x0, y0, side = square_bounds(fine, 5)
    assert x0 <= x <= x0 + side and y0 <= y <= y0 + side


@given(st.lists(index_pairs, min_size=1, max_size=6), st.lists(index_pairs, max_size=6))
@settings(max_examples=200)
def test_stopping_is_monotone(idx, tail):
    idx, tail = tuple(idx), tuple(tail)
    first = stopping_state(idx, 5)
    longer = stopping_state(idx + tail, 5)
    if first.stopped:
        assert longer.stopped_at == first.stopped_at
    assert longer.partial_sums[: len(idx)] == first.partial_sums
