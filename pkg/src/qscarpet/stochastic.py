"""Coordinate step variables on the carpet and the barrier random walks.

A walk steps down with probability p and up with probability 1 - p. It stays
in the barrier region while ``5 * Z_N <= -3 * N``. With k up-steps by time
t_k that reads ``t_k >= 5 k``, so a walk is fully described by its up-step
times, which are drawn as geometric gaps.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np
from scipy.stats import binomtest

from .carpet import CarpetParams, enumerate_table, is_center_digit

# ---------------------------------------------------------------------------
# geometric step variables


def geometric_step(columns, m: int, axis: int, params: CarpetParams) -> int:
    """-1 when the level-(m+1) rectangle projects into the center band G_m.

    ``columns`` are 0-based column digits with at least m+1 levels.
    """
    if len(columns) < m + 1:
        raise ValueError(f"need a rectangle address of depth {m + 1}")
    table = _table_for(columns, params)
    if axis == 1:
        digit = table.xdigits[0, m]
    elif axis == 2:
        digit = table.rows[0, m]
    else:
        raise ValueError("axis must be 1 or 2")
    return -1 if is_center_digit(int(digit), params.M) else 1


def _table_for(columns, params):
    from .carpet import trace_columns

    return trace_columns(np.asarray([list(columns)], dtype=np.int64), params)


def step_matrix(params: CarpetParams, m: int):
    """Exhaustive (X_1..X_m) and (Y_1..Y_m) over all depth-(m+1) rectangles."""
    table = enumerate_table(m + 1, params)
    M = params.M
    X = np.where(is_center_digit(table.xdigits[:, 1 : m + 1], M), -1, 1)
    Y = np.where(is_center_digit(table.rows[:, 1 : m + 1], M), -1, 1)
    return X, Y


@dataclass
class IndependenceReport:
    m: int
    p_down_x: list[Fraction]
    p_down_y: list[Fraction]
    joint_x_ok: bool
    joint_y_ok: bool
    cross: dict = field(default_factory=dict)  # (X_1, Y_1) table, reported only

    @property
    def ok(self) -> bool:
        return self.joint_x_ok and self.joint_y_ok


def _joint_equals_product(V: np.ndarray) -> bool:
    N, m = V.shape
    joint = Counter(map(tuple, V.tolist()))
    marg = [Counter(V[:, k].tolist()) for k in range(m)]
    for combo in product((-1, 1), repeat=m):
        expect = Fraction(1)
        for k, v in enumerate(combo):
            expect *= Fraction(marg[k][v], N)
        if Fraction(joint.get(combo, 0), N) != expect:
            return False
    return True


def independence_check(params: CarpetParams, m: int) -> IndependenceReport:
    X, Y = step_matrix(params, m)
    N = X.shape[0]
    px = [Fraction(int((X[:, k] == -1).sum()), N) for k in range(m)]
    py = [Fraction(int((Y[:, k] == -1).sum()), N) for k in range(m)]
    cross = Counter(zip(X[:, 0].tolist(), Y[:, 0].tolist()))
    cross = {f"{a},{b}": Fraction(c, N) for (a, b), c in sorted(cross.items())}
    return IndependenceReport(m, px, py, _joint_equals_product(X), _joint_equals_product(Y), cross)


# ---------------------------------------------------------------------------
# closed-form bound


@dataclass(frozen=True)
class ExitBound:
    p: Fraction
    bound: Fraction  # (1 - p**4) / p**5
    roots: tuple[Fraction, Fraction]

    @property
    def informative(self) -> bool:
        return self.bound < 1

    def quadratic(self, r) -> Fraction:
        """``p^5 r^2 + (p^4 (1-p) - 1) r + (1 - p^4)``; nonnegative exactly outside the roots."""
        p = self.p
        return p**5 * r * r + (p**4 * (1 - p) - 1) * r + (1 - p**4)


def exit_bound(p) -> ExitBound:
    p = Fraction(p)
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    bound = (1 - p**4) / p**5
    # the recursion's quadratic has roots 1 and (1 - p^4)/p^5 (their product)
    return ExitBound(p, bound, tuple(sorted((Fraction(1), bound))))


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class WalkSpec:
    p: Fraction
    horizon: int = 10_000
    trials: int = 100_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "p", Fraction(self.p))
        if not 0 < self.p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if self.horizon < 1 or self.trials < 1:
            raise ValueError("horizon and trials must be positive")

    @classmethod
    def for_grid(cls, M: int, **kw) -> "WalkSpec":
        return cls(Fraction(M - 4, M), **kw)


def trial_rng(seed: int, trial: int, walk: int = 0) -> np.random.Generator:
    """Counter-based stream for one walk of one trial."""
    return np.random.Generator(np.random.Philox(key=(seed << 64) | (trial << 1) | walk))


def up_times(rng: np.random.Generator, q: float, horizon: int) -> np.ndarray:
    """Times (1-based) of the up-steps up to ``horizon``."""
    if q <= 0:
        return np.zeros(0, dtype=np.int64)
    chunk = int(q * horizon * 1.2) + 16
    times = np.cumsum(rng.geometric(q, size=chunk))
    while times[-1] <= horizon:
        more = times[-1] + np.cumsum(rng.geometric(q, size=chunk))
        times = np.concatenate([times, more])
    return times[times <= horizon]


def exit_time(ups: np.ndarray) -> int | None:
    """First time the walk leaves the barrier region, or None."""
    k = np.arange(1, len(ups) + 1)
    bad = ups < 5 * k
    if not bad.any():
        return None
    return int(ups[bad.argmax()])


def j_violation(ups_x: np.ndarray, ups_y: np.ndarray) -> bool:
    """Whether sum_{k<=m} J_k > m/3 for some m, with J_k = 1 iff X_k or Y_k steps up."""
    events = np.union1d(ups_x, ups_y)
    k = np.arange(1, len(events) + 1)
    return bool(np.any(3 * k > events))


@dataclass
class MCEstimate:
    successes: int
    trials: int

    @property
    def estimate(self) -> float:
        return self.successes / self.trials

    @property
    def stderr(self) -> float:
        p = self.estimate
        return math.sqrt(p * (1 - p) / self.trials)

    def ci(self, level: float = 0.99) -> tuple[float, float]:
        res = binomtest(self.successes, self.trials).proportion_ci(confidence_level=level)
        return float(res.low), float(res.high)

    def lower_bound(self, confidence: float = 0.99) -> float:
        """One-sided lower confidence bound."""
        return self.ci(2 * confidence - 1)[0]


@dataclass
class WalkResult:
    spec: WalkSpec
    exits: MCEstimate
    exit_times: list  # per trial, None when the walk never left
    bound: ExitBound | None

    def exits_before(self, horizon: int) -> MCEstimate:
        k = sum(1 for t in self.exit_times if t is not None and t <= horizon)
        return MCEstimate(k, self.spec.trials)

    def summary(self) -> dict:
        lo, hi = self.exits.ci(0.99)
        return {
            "p": str(self.spec.p),
            "bound": None if self.bound is None else float(self.bound.bound),
            "estimate": self.exits.estimate,
            "stderr": self.exits.stderr,
            "ci99": [lo, hi],
            "trials": self.spec.trials,
            "horizon": self.spec.horizon,
            "seed": self.spec.seed,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["trial", "exit_time"])
            for i, t in enumerate(self.exit_times):
                out.writerow([i, "" if t is None else t])


def walk_exit_mc(spec: WalkSpec) -> WalkResult:
    q = float(1 - spec.p)
    times = []
    for i in range(spec.trials):
        ups = up_times(trial_rng(spec.seed, i), q, spec.horizon)
        t = exit_time(ups)
        if t is None:
            # inside the region: at least four down-steps per up-step so far
            k = np.arange(1, len(ups) + 1)
            assert np.all(ups - k >= 4 * k)
        times.append(t)
    exits = sum(t is not None for t in times)
    bound = exit_bound(spec.p) if spec.p < 1 else None
    return WalkResult(spec, MCEstimate(exits, spec.trials), times, bound)


@dataclass
class JointResult:
    spec: WalkSpec
    both: MCEstimate
    j_violations: list[int]  # trial ids of surviving pairs breaking the J bound

    def summary(self) -> dict:
        lo, hi = self.both.ci(0.99)
        return {
            "p": str(self.spec.p),
            "both_survive": self.both.estimate,
            "stderr": self.both.stderr,
            "ci99": [lo, hi],
            "lower99": self.both.lower_bound(0.99),
            "j_violations": len(self.j_violations),
            "j_violation_trials": list(self.j_violations[:50]),
            "trials": self.spec.trials,
            "horizon": self.spec.horizon,
            "seed": self.spec.seed,
        }


def joint_survival_mc(spec: WalkSpec) -> JointResult:
    """Both coordinate walks Z and W (independent streams) stay in the region."""
    q = float(1 - spec.p)
    both = 0
    violations = []
    for i in range(spec.trials):
        ux = up_times(trial_rng(spec.seed, i, 0), q, spec.horizon)
        if exit_time(ux) is not None:
            continue
        uy = up_times(trial_rng(spec.seed, i, 1), q, spec.horizon)
        if exit_time(uy) is not None:
            continue
        both += 1
        if j_violation(ux, uy):
            violations.append(i)
    return JointResult(spec, MCEstimate(both, spec.trials), violations)


def exit_probability_dp(p, horizon: int) -> float:
    """Exact probability of leaving the region within ``horizon`` steps.

    Forward recursion over the number of up-steps; only states still inside
    the region are carried.
    """
    p = float(p)
    q = 1 - p
    alive = np.zeros(horizon // 5 + 2)
    alive[0] = 1.0
    left = 0.0
    for t in range(1, horizon + 1):
        nxt = alive * p
        nxt[1:] += alive[:-1] * q
        kmax = t // 5
        left += nxt[kmax + 1 :].sum()
        nxt[kmax + 1 :] = 0.0
        alive = nxt
    return left
