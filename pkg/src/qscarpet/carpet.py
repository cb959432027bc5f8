"""Sawtooth carpet graphs h_n, their stopped versions f_n, and the glued f.

Level-k rectangles have size ``M**(-n*k)`` by ``M**-k``. A rectangle is
addressed by its column digits ``K_1..K_k`` (each in ``0..M**n - 1``, 0-based
internally); the sawtooth pattern fixes one row digit per column digit.
Every rectangle carries an orientation: ascending rectangles hold a piece of
graph running from bottom-left to top-right, descending ones from top-left
to bottom-right.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .grid import GridParams, first_stop


@dataclass(frozen=True)
class CarpetParams:
    grid: GridParams
    n: int = 2

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")

    @property
    def M(self) -> int:
        return self.grid.M

    @property
    def columns(self) -> int:
        return self.M**self.n

    @property
    def dimension(self) -> Fraction:
        return 2 - Fraction(1, self.n)


class Interval(NamedTuple):
    lo: Fraction
    hi: Fraction

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def exact(self) -> bool:
        return self.lo == self.hi

    def contains(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


def sawtooth_row(c: int, descending: bool, M: int) -> tuple[int, bool]:
    """Row (0-based) and orientation of the rectangle in column ``c``.

    Columns come in groups of M; even groups climb from the bottom row to the
    top, odd groups fall back. Under a descending parent the whole pattern is
    reflected top to bottom.
    """
    g, o = divmod(c, M)
    odd = g % 2 == 1
    row = M - 1 - o if odd else o
    if descending:
        return M - 1 - row, not odd
    return row, odd


def linear_row(c: int, descending: bool, M: int) -> tuple[int, bool]:
    """The diagonal pattern on an M by M grid, used after stopping."""
    return (M - 1 - c if descending else c), descending


def columns_for_row(row: int, descending: bool, M: int, n: int) -> np.ndarray:
    """All column digits whose sawtooth rectangle sits in ``row``."""
    base = M - 1 - row if descending else row
    g = np.arange(M ** (n - 1))
    o = np.where(g % 2 == 1, M - 1 - base, base)
    return g * M + o


def is_center_digit(d, M: int):
    """Digit (0-based) lies in the middle M-4 of its level, i.e. class Center on that axis."""
    return (d >= 2) & (d <= M - 3)


# ---------------------------------------------------------------------------
# exact scalar evaluation


def _column_digits(x: Fraction, depth: int, params: CarpetParams) -> list[int]:
    N = params.columns**depth
    c = min(math.floor(x * N), N - 1)
    digits = []
    for _ in range(depth):
        c, d = divmod(c, params.columns)
        digits.append(d)
    return digits[::-1]


def x_digits_from_columns(cols, n: int, M: int, count: int) -> list[int]:
    """First ``count`` base-M digits of the left end of a column address."""
    out = []
    for K in cols:
        for t in range(n - 1, -1, -1):
            out.append(K // M**t % M)
            if len(out) == count:
                return out
    return out


def _endpoint_depth(x: Fraction, params: CarpetParams, cap: int = 64) -> int | None:
    """Least k with ``x * M**(n k)`` an integer, if any up to ``cap``."""
    q = x.denominator
    for k in range(cap + 1):
        if params.columns**k % q == 0:
            return k
    return None


@dataclass
class _Trace:
    depth: int
    columns: list[int]
    rows: list[int]
    descending: list[bool]
    stop: int | None


def trace_point(x: Fraction, depth: int, params: CarpetParams) -> _Trace:
    M = params.M
    cols = _column_digits(x, depth, params)
    rows, desc = [], []
    d = False
    for K in cols:
        row, d = sawtooth_row(K, d, M)
        rows.append(row)
        desc.append(d)
    xd = x_digits_from_columns(cols, params.n, M, depth)
    j = [0 if (is_center_digit(a, M) and is_center_digit(b, M)) else 1 for a, b in zip(xd, rows)]
    return _Trace(depth, cols, rows, desc, first_stop(j))


def _rect(tr: _Trace, level: int, params: CarpetParams):
    """Lower-left corner, width, height and orientation of the level rectangle."""
    M = params.M
    x0 = Fraction(0)
    y0 = Fraction(0)
    for k in range(level):
        x0 += Fraction(tr.columns[k], params.columns ** (k + 1))
        y0 += Fraction(tr.rows[k], M ** (k + 1))
    w = Fraction(1, params.columns**level)
    h = Fraction(1, M**level)
    desc = tr.descending[level - 1] if level else False
    return x0, y0, w, h, desc


def _diagonal(x: Fraction, x0, y0, w, h, desc) -> Fraction:
    t = (x - x0) / w
    return y0 + h * (1 - t) if desc else y0 + h * t


def _evaluate(x, depth: int, params: CarpetParams, stopped: bool) -> Interval:
    x = Fraction(x)
    if not 0 <= x <= 1:
        raise ValueError(f"x={x} outside [0, 1]")
    k = _endpoint_depth(x, params)
    exact_depth = depth if k is None else max(depth, k, 1)
    tr = trace_point(x, exact_depth, params)
    if stopped and tr.stop is not None:
        x0, y0, w, h, desc = _rect(tr, tr.stop, params)
        v = _diagonal(x, x0, y0, w, h, desc)
        return Interval(v, v)
    if k is not None:
        # endpoint of a column: the graph passes through a rectangle corner
        x0, y0, w, h, desc = _rect(tr, exact_depth, params)
        v = _diagonal(x, x0, y0, w, h, desc)
        return Interval(v, v)
    x0, y0, w, h, desc = _rect(tr, depth, params)
    return Interval(y0, y0 + h)


def eval_h(x, depth: int, params: CarpetParams) -> Interval:
    """Enclosure of ``h_n(x)`` from the depth-level rectangle over ``x``.

    At M**n-adic points the returned interval is the exact value.
    """
    return _evaluate(x, depth, params, stopped=False)


def eval_f(x, depth: int, params: CarpetParams) -> Interval:
    """Enclosure of ``f_n(x)``; exact once the point lies in a stopped rectangle."""
    return _evaluate(x, depth, params, stopped=True)


def stop_level(x, depth: int, params: CarpetParams) -> int | None:
    return trace_point(Fraction(x), depth, params).stop


# ---------------------------------------------------------------------------
# glued function


def glued_block(x) -> int:
    """Block index b with ``x`` in ``[2**-b, 2**(1-b))``; x = 1 belongs to block 1."""
    x = Fraction(x)
    if not 0 < x <= 1:
        raise ValueError(f"x={x} outside (0, 1]")
    b = 1
    while x < Fraction(1, 2**b):
        b += 1
    return b


def glued_f_block(x, block: int, depth: int, grid: GridParams) -> Interval:
    """Value of the glued function computed through a given block's formula."""
    x = Fraction(x)
    scale = Fraction(1, 2**block)
    if not scale <= x <= 2 * scale:
        raise ValueError(f"x={x} not in block {block}")
    inner = eval_f(x / scale - 1, depth, CarpetParams(grid, block))
    return Interval(scale + scale * inner.lo, scale + scale * inner.hi)


def glued_f(x, depth: int, grid: GridParams) -> Interval:
    x = Fraction(x)
    if x == 0:
        return Interval(Fraction(0), Fraction(0))
    return glued_f_block(x, glued_block(x), depth, grid)


# ---------------------------------------------------------------------------
# vectorized traces over many columns


@dataclass
class ColumnTable:
    """Rows, orientations, x digits and stop levels for a batch of addresses.

    ``columns`` has shape (N, depth). ``stop`` is 0 where no stop occurs
    within ``depth`` levels. Stop detection needs x digits up to ``depth``.
    """

    params: CarpetParams
    columns: np.ndarray
    rows: np.ndarray
    descending: np.ndarray
    xdigits: np.ndarray
    stop: np.ndarray

    @property
    def depth(self) -> int:
        return self.columns.shape[1]

    def __len__(self) -> int:
        return self.columns.shape[0]

    def row_index(self, level: int | None = None) -> np.ndarray:
        """Row strip index ``0..M**level - 1`` of each rectangle."""
        level = self.depth if level is None else level
        out = np.zeros(len(self), dtype=np.int64)
        for k in range(level):
            out = out * self.params.M + self.rows[:, k]
        return out

    def column_index(self) -> np.ndarray:
        out = np.zeros(len(self), dtype=np.int64)
        for k in range(self.depth):
            out = out * self.params.columns + self.columns[:, k]
        return out

    def survivors(self, level: int | None = None) -> np.ndarray:
        level = self.depth if level is None else level
        return (self.stop == 0) | (self.stop > level)


def trace_columns(columns: np.ndarray, params: CarpetParams) -> ColumnTable:
    columns = np.asarray(columns, dtype=np.int64)
    N, depth = columns.shape
    M, n = params.M, params.n
    rows = np.empty_like(columns)
    desc = np.empty(columns.shape, dtype=bool)
    d = np.zeros(N, dtype=bool)
    for k in range(depth):
        g, o = np.divmod(columns[:, k], M)
        odd = g % 2 == 1
        row = np.where(odd, M - 1 - o, o)
        rows[:, k] = np.where(d, M - 1 - row, row)
        d = odd ^ d
        desc[:, k] = d
    xdig = np.empty((N, depth), dtype=np.int64)
    for t in range(depth):
        k, pos = divmod(t, n)
        xdig[:, t] = columns[:, k] // M ** (n - 1 - pos) % M
    J = ~(is_center_digit(xdig, M) & is_center_digit(rows, M))
    s = np.cumsum(J, axis=1)
    tripped = 3 * s > np.arange(1, depth + 1)
    stop = np.where(tripped.any(axis=1), tripped.argmax(axis=1) + 1, 0)
    return ColumnTable(params, columns, rows, desc, xdig, stop)


def all_columns(depth: int, params: CarpetParams) -> np.ndarray:
    C = params.columns
    idx = np.arange(C**depth, dtype=np.int64)
    out = np.empty((idx.size, depth), dtype=np.int64)
    for k in range(depth - 1, -1, -1):
        idx, out[:, k] = np.divmod(idx, C)
    return out


def enumerate_table(depth: int, params: CarpetParams) -> ColumnTable:
    return trace_columns(all_columns(depth, params), params)


def sample_table(depth: int, params: CarpetParams, size: int, rng) -> ColumnTable:
    cols = rng.integers(0, params.columns, size=(size, depth), dtype=np.int64)
    return trace_columns(cols, params)


def sample_in_row(row_digits, params: CarpetParams, size: int, rng) -> ColumnTable:
    """Uniform sample of the rectangles lying in a given row strip."""
    M, n = params.M, params.n
    groups = M ** (n - 1)
    cols = np.empty((size, len(row_digits)), dtype=np.int64)
    d = np.zeros(size, dtype=bool)
    for k, row in enumerate(row_digits):
        base = np.where(d, M - 1 - row, row)
        g = rng.integers(0, groups, size=size)
        odd = g % 2 == 1
        cols[:, k] = g * M + np.where(odd, M - 1 - base, base)
        d = odd ^ d
    return trace_columns(cols, params)


def endpoint_numerators(table: ColumnTable, stopped: bool) -> tuple[np.ndarray, np.ndarray, int]:
    """Left/right endpoint values of each column as integers over a common denominator.

    Returns ``(left, right, denom)`` with ``denom = M**(n*depth)``. With
    ``stopped`` the values follow f_n (affine on stopped rectangles).
    """
    params = table.params
    M, n, depth = params.M, params.n, table.depth
    denom = M ** (n * depth)
    if denom >= 2**62:
        raise OverflowError("depth too large for integer endpoint tables")
    C = params.columns
    N = len(table)
    ylo = np.zeros(N, dtype=np.int64)  # in units of M**-depth
    for k in range(depth):
        ylo = ylo * M + table.rows[:, k]
    up = M ** ((n - 1) * depth)
    desc = table.descending[:, -1]
    left = np.where(desc, ylo + 1, ylo) * up
    right = np.where(desc, ylo, ylo + 1) * up
    if not stopped:
        return left, right, denom
    cidx = table.column_index()
    for s in range(1, depth + 1):
        hit = table.stop == s
        if not hit.any():
            continue
        span = C ** (depth - s)
        cs = cidx[hit] // span  # stopped ancestor column index at level s
        y0 = np.zeros(hit.sum(), dtype=np.int64)  # units of M**-s
        for k in range(s):
            y0 = y0 * M + table.rows[hit, k]
        dsc = table.descending[hit, s - 1]
        off = cidx[hit] - cs * span  # offset within ancestor in depth-columns
        base = y0 * M ** (n * depth - s)
        unit = M ** ((n - 1) * s)  # M**(n*depth - s) / span
        lo_t = off * unit
        hi_t = (off + 1) * unit
        top = base + M ** (n * depth - s)
        left[hit] = np.where(dsc, top - lo_t, base + lo_t)
        right[hit] = np.where(dsc, top - hi_t, base + hi_t)
    return left, right, denom


def continuity_violations(depth: int, params: CarpetParams, stopped: bool) -> int:
    """Count adjacent column pairs whose shared endpoint values disagree."""
    table = enumerate_table(depth, params)
    left, right, denom = endpoint_numerators(table, stopped)
    bad = int(np.count_nonzero(right[:-1] != left[1:]))
    # the graph runs from (0, 0) to (1, 1)
    bad += int(left[0] != 0) + int(right[-1] != denom)
    return bad


def row_counts(params: CarpetParams) -> np.ndarray:
    """Rectangles per row in the (ascending) base pattern."""
    rows = [sawtooth_row(c, False, params.M)[0] for c in range(params.columns)]
    return np.bincount(rows, minlength=params.M)


# ---------------------------------------------------------------------------
# fiber census


@dataclass
class FiberCensus:
    """Survivor counts per row strip.

    In Monte Carlo mode ``total``/``survivors`` hold the sampled counts of the
    sampled strips, and ``fraction`` comes from a separate uniform sample of
    all rectangles.
    """

    params: CarpetParams
    m: int
    total: np.ndarray
    survivors: np.ndarray
    exhaustive: bool
    fraction: float
    fraction_stderr: float
    strips: np.ndarray

    @property
    def per_row_full(self) -> int:
        return self.params.M ** (self.m * (self.params.n - 1))

    def certified(self) -> np.ndarray:
        """Strips whose survivor share is at least 1/4 (these make up A_m)."""
        return 4 * self.survivors >= self.total

    @property
    def measure_A(self) -> float:
        return float(self.certified().mean())

    @property
    def measure_A_stderr(self) -> float:
        if self.exhaustive:
            return 0.0
        p = self.measure_A
        return math.sqrt(p * (1 - p) / len(self.total))

    def summary(self) -> dict:
        return {
            "M": self.params.M,
            "n": self.params.n,
            "m": self.m,
            "exhaustive": self.exhaustive,
            "survivor_fraction": self.fraction,
            "survivor_fraction_stderr": self.fraction_stderr,
            "measure_A": self.measure_A,
            "measure_A_stderr": self.measure_A_stderr,
            "strips": int(len(self.total)),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["j", "total", "survivors"])
            for j, t, s in zip(self.strips, self.total, self.survivors):
                out.writerow([int(j) + 1, int(t), int(s)])


def fiber_census(
    params: CarpetParams,
    m: int,
    budget: int = 2_000_000,
    seed: int = 0,
    rows: int = 400,
    per_row: int = 400,
    samples: int = 200_000,
) -> FiberCensus:
    """Survivor counts per row strip at level m.

    Exhaustive when ``M**(n m)`` fits the budget; otherwise a seeded Monte
    Carlo census: ``samples`` uniform rectangles for the overall survivor
    fraction and ``rows`` random strips with ``per_row`` rectangles each for
    the measure of A_m.
    """
    if params.columns**m <= budget:
        table = enumerate_table(m, params)
        strip = table.row_index()
        ok = table.survivors()
        total = np.bincount(strip, minlength=params.M**m)
        surv = np.bincount(strip, weights=ok, minlength=params.M**m).astype(np.int64)
        frac = float(surv.sum() / total.sum())
        return FiberCensus(
            params, m, total, surv, True, frac, 0.0, np.arange(params.M**m)
        )
    rng = np.random.default_rng(seed)
    overall = sample_table(m, params, samples, rng)
    frac = float(overall.survivors().mean())
    frac_se = math.sqrt(frac * (1 - frac) / samples)
    digits = rng.integers(0, params.M, size=(rows, m))
    surv = np.empty(rows, dtype=np.int64)
    for i in range(rows):
        surv[i] = int(sample_in_row(digits[i], params, per_row, rng).survivors().sum())
    labels = np.zeros(rows, dtype=np.int64)
    for k in range(m):
        labels = labels * params.M + digits[:, k]
    totals = np.full(rows, per_row, dtype=np.int64)
    return FiberCensus(params, m, totals, surv, False, frac, frac_se, labels)
