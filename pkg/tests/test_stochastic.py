from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qscarpet.carpet import CarpetParams
from qscarpet.grid import GridParams
from qscarpet.stochastic import (
    WalkSpec,
    exit_bound,
    exit_probability_dp,
    exit_time,
    geometric_step,
    independence_check,
    j_violation,
    joint_survival_mc,
    trial_rng,
    up_times,
    walk_exit_mc,
)

P2 = CarpetParams(GridParams(), 2)


def brute_exit(ups, horizon):
    """Explicit +-1 path and barrier test, the reference for ``exit_time``."""
    z = 0
    ups = set(ups)
    for t in range(1, horizon + 1):
        z += 1 if t in ups else -1
        if 5 * z > -3 * t:
            return t
    return None


def test_geometric_step_examples():
    # x digit 2 and row digit 2 at level 2: the center cell on both axes
    assert geometric_step([2, 2], 1, 1, P2) == -1
    assert geometric_step([2, 2], 1, 2, P2) == -1
    # column 0 sits in the outer ring of x
    assert geometric_step([0, 2], 1, 1, P2) == 1
    with pytest.raises(ValueError):
        geometric_step([2], 1, 1, P2)


def test_independence_at_demo_scale():
    rep = independence_check(P2, 2)
    assert rep.ok
    assert rep.p_down_x == rep.p_down_y == [Fraction(1, 5)] * 2
    assert independence_check(P2, 1).ok


def test_exit_bound_examples():
    b = exit_bound(Fraction(74, 78))
    assert b.bound < Fraction(1, 4) and b.informative
    assert float(b.bound) == pytest.approx(0.2471, abs=5e-5)
    half = exit_bound(Fraction(1, 2))
    assert half.bound == 30 and not half.informative
    assert float(exit_bound(Fraction(999, 1000)).bound) < 0.01
    for bad in (0, 1, Fraction(3, 2)):
        with pytest.raises(ValueError):
            exit_bound(bad)


@given(st.fractions(Fraction(1, 100), Fraction(99, 100)))
def test_quadratic_root_structure(p):
    b = exit_bound(p)
    assert Fraction(1) in b.roots
    for root in b.roots:
        assert b.quadratic(root) == 0
    lo, hi = b.roots
    assert b.quadratic(lo - Fraction(1, 10)) > 0
    assert b.quadratic(hi + Fraction(1, 10)) > 0
    if lo < hi:
        assert b.quadratic((lo + hi) / 2) < 0


@given(st.lists(st.integers(1, 60), unique=True, max_size=20))
def test_exit_time_matches_explicit_path(ups):
    ups = np.array(sorted(ups), dtype=np.int64)
    assert exit_time(ups) == brute_exit(ups.tolist(), 60)


@given(
    st.lists(st.integers(1, 40), unique=True, max_size=10),
    st.lists(st.integers(1, 40), unique=True, max_size=10),
)
def test_j_violation_matches_explicit_sum(ux, uy):
    J = [int(t in ux or t in uy) for t in range(1, 41)]
    s = np.cumsum(J)
    expect = any(3 * s[m - 1] > m for m in range(1, 41) if J[m - 1])
    assert j_violation(np.array(sorted(ux)), np.array(sorted(uy))) == expect


def test_two_surviving_walks_can_break_the_j_bound():
    ux, uy = np.array([5, 10]), np.array([6, 11])
    assert exit_time(ux) is None and exit_time(uy) is None
    assert j_violation(ux, uy)


def test_trial_streams_are_isolated():
    a = trial_rng(7, 123).random(5)
    b = trial_rng(7, 123).random(5)
    c = trial_rng(7, 123, 1).random(5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_up_times_cover_the_horizon():
    ups = up_times(trial_rng(0, 0), 0.5, 1000)
    assert ups.max() <= 1000 and np.all(np.diff(ups) > 0)
    assert len(up_times(trial_rng(0, 0), 0.0, 1000)) == 0


def test_walk_mc_is_deterministic_and_matches_dp():
    spec = WalkSpec(Fraction(74, 78), horizon=500, trials=4000, seed=3)
    a, b = walk_exit_mc(spec), walk_exit_mc(spec)
    assert a.exit_times == b.exit_times
    exact = exit_probability_dp(spec.p, 500)
    assert abs(a.exits.estimate - exact) <= 4 * a.exits.stderr
    assert a.exits.estimate <= float(a.bound.bound) + 3 * a.exits.stderr


def test_always_down_walk_never_exits():
    res = walk_exit_mc(WalkSpec(1, horizon=100, trials=50))
    assert res.exits.successes == 0 and res.bound is None
    joint = joint_survival_mc(WalkSpec(1, horizon=100, trials=50))
    assert joint.both.estimate == 1 and joint.j_violations == []


def test_bound_dominance_for_several_p():
    for p in (Fraction(74, 78), Fraction(75, 79), Fraction(9, 10)):
        res = walk_exit_mc(WalkSpec(p, horizon=300, trials=3000, seed=1))
        assert res.exits.estimate <= float(exit_bound(p).bound) + 3 * res.exits.stderr


def test_exit_times_csv(tmp_path):
    res = walk_exit_mc(WalkSpec(Fraction(1, 2), horizon=50, trials=10))
    res.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "trial,exit_time" and len(lines) == 11


def test_walk_spec_validation():
    with pytest.raises(ValueError):
        WalkSpec(0)
    with pytest.raises(ValueError):
        WalkSpec(Fraction(1, 2), horizon=0)
    assert WalkSpec.for_grid(78).p == Fraction(74, 78)
