from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qscarpet.carpet import (
    CarpetParams,
    columns_for_row,
    continuity_violations,
    endpoint_numerators,
    enumerate_table,
    eval_f,
    eval_h,
    fiber_census,
    glued_f,
    linear_row,
    row_counts,
    sawtooth_row,
    stop_level,
)
from qscarpet.grid import GridParams, IndexClass, classify

G = GridParams()
P2 = CarpetParams(G, 2)
P3 = CarpetParams(G, 3)


def test_sawtooth_examples():
    assert sawtooth_row(0, False, 5) == (0, False)
    assert sawtooth_row(5, False, 5) == (4, True)
    assert sawtooth_row(24, False, 5) == (4, False)
    # reflected pattern flips rows and orientations
    assert sawtooth_row(0, True, 5) == (4, True)
    assert linear_row(3, False, 5) == (3, False)


@pytest.mark.parametrize("params", [P2, P3, CarpetParams(GridParams(M=7, r=Fraction(1, 400)), 2)])
def test_uniform_fibers(params):
    assert np.all(row_counts(params) == params.M ** (params.n - 1))


@given(st.integers(0, 4), st.booleans(), st.integers(2, 3))
def test_columns_for_row_inverts_the_pattern(row, desc, n):
    cols = columns_for_row(row, desc, 5, n)
    assert len(cols) == 5 ** (n - 1)
    assert all(sawtooth_row(int(c), desc, 5)[0] == row for c in cols)


def test_one_row_per_column():
    table = enumerate_table(2, P2)
    # every column address has exactly one row string
    assert len(np.unique(table.column_index())) == len(table) == 25**2


def test_eval_h_examples():
    assert eval_h(0, 4, P2) == (0, 0)
    assert eval_h(Fraction(1, 25), 4, P2) == (Fraction(1, 5), Fraction(1, 5))
    assert eval_h(1, 4, P2) == (1, 1)
    iv = eval_h(Fraction(1, 3), 3, P2)
    assert iv.width == Fraction(1, 125)


@given(st.fractions(0, 1, max_denominator=10**5), st.integers(1, 4))
@settings(max_examples=150, deadline=None)
def test_intervals_nest(x, m):
    for fn in (eval_h, eval_f):
        outer, inner = fn(x, m, P2), fn(x, m + 1, P2)
        assert outer.contains(inner)
        assert 0 <= inner.lo <= inner.hi <= 1


@pytest.mark.parametrize("params,depth", [(P2, 1), (P2, 2), (P2, 3), (P3, 1), (P3, 2)])
def test_continuity(params, depth):
    assert continuity_violations(depth, params, stopped=False) == 0
    assert continuity_violations(depth, params, stopped=True) == 0


def test_f_agrees_with_h_off_the_stopped_set():
    table = enumerate_table(3, P2)
    lh, rh, _ = endpoint_numerators(table, stopped=False)
    lf, rf, _ = endpoint_numerators(table, stopped=True)
    alive = table.survivors()
    assert alive.any()
    assert np.array_equal(lh[alive], lf[alive]) and np.array_equal(rh[alive], rf[alive])


def test_f_is_affine_on_a_level_one_stop():
    # column 0 is in a ring square, so f_2 is the diagonal of [0, 1/25] x [0, 1/5]
    assert stop_level(Fraction(1, 100), 3, P2) == 1
    for x in (Fraction(1, 100), Fraction(1, 77), Fraction(3, 100)):
        v = eval_f(x, 3, P2)
        assert v.exact and v.lo == 5 * x


def test_glued_examples():
    assert glued_f(Fraction(1, 2), 3, G) == (Fraction(1, 2), Fraction(1, 2))
    assert glued_f(1, 3, G) == (1, 1)
    assert glued_f(0, 3, G) == (0, 0)
    for b in range(1, 11):
        assert glued_f(Fraction(1, 2**b), 2, G).lo == Fraction(1, 2**b)


def test_census_level_one_matches_grid_classes():
    fc = fiber_census(P2, 1)
    table = enumerate_table(1, P2)
    expect = sum(
        classify(int(x) + 1, int(r) + 1, 5) is IndexClass.CENTER
        for x, r in zip(table.xdigits[:, 0], table.rows[:, 0])
    )
    assert fc.exhaustive and int(fc.survivors.sum()) == expect == 1


@pytest.mark.parametrize("m", [1, 2, 3])
def test_census_totals(m):
    fc = fiber_census(P2, m)
    assert np.all(fc.total == 5**m) and fc.total.sum() == 25**m
    assert np.all((0 <= fc.survivors) & (fc.survivors <= fc.total))


def test_census_csv(tmp_path):
    fc = fiber_census(P2, 2)
    fc.write_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "j,total,survivors" and len(lines) == 26


def test_strict_census_is_seeded():
    strict = CarpetParams(GridParams.strict_default(), 2)
    a = fiber_census(strict, 3, seed=5, rows=20, per_row=50, samples=2000)
    b = fiber_census(strict, 3, seed=5, rows=20, per_row=50, samples=2000)
    assert a.summary() == b.summary()
    assert not a.exhaustive
