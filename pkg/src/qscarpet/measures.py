"""Box-counting dimension estimates and the Frostman measures on fibers.

Counts come from rectangle-cover combinatorics rather than rasterization, so
every ``N(eps)`` here is an exact integer.
"""

from __future__ import annotations

import csv
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .carpet import (
    CarpetParams,
    all_columns,
    columns_for_row,
    endpoint_numerators,
    sawtooth_row,
    trace_columns,
)


@dataclass
class BoxCountSeries:
    label: str
    log_base: float  # natural log of 1/eps_k divided by k
    ks: list[int]
    counts: list[int]
    slope: float
    stderr: float
    residual: float

    @property
    def scales(self) -> list[float]:
        return [math.exp(-k * self.log_base) for k in self.ks]

    def summary(self) -> dict:
        return {
            "label": self.label,
            "slope": self.slope,
            "stderr": self.stderr,
            "residual": self.residual,
            "window": [self.ks[0], self.ks[-1]],
            "counts": list(self.counts),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["k", "N", "logN"])
            for k, N in zip(self.ks, self.counts):
                out.writerow([k, N, repr(math.log(N))])


def fit_slope(label: str, ks, counts, log_base: float) -> BoxCountSeries:
    """Least squares of log N against k*log_base (k = 0 excluded)."""
    ks = list(ks)
    counts = [int(c) for c in counts]
    x = np.array(ks, dtype=float) * log_base
    y = np.log(np.array(counts, dtype=float))
    if len(ks) == 1:
        return BoxCountSeries(label, log_base, ks, counts, float(y[0] / x[0]), 0.0, 0.0)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(ks) - 2, 1)
    s2 = float(resid @ resid) / dof
    stderr = math.sqrt(s2 / float(((x - x.mean()) ** 2).sum()))
    return BoxCountSeries(
        label, log_base, ks, counts, float(coef[0]), stderr, float(np.abs(resid).max())
    )


# ---------------------------------------------------------------------------
# graph box counts


def graph_box_count_h(params: CarpetParams, k: int) -> int:
    """Number of level-k M-adic squares met by the depth-k rectangles of h_n.

    A square is fixed by the first k base-M digits of x and the row digits
    l_1..l_k. Walking down the levels, the x digits that fall inside the
    square address are summed over, while the free ones are merged: the state
    is the set of orientations that can produce the row string so far.
    """
    M, n = params.M, params.n
    if k == 0:
        return 1
    states: dict[frozenset, int] = {frozenset([False]): 1}
    for j in range(1, k + 1):
        fixed = min(max(k - n * (j - 1), 0), n)
        free = n - fixed
        nxt: dict[frozenset, int] = defaultdict(int)
        for prefix in range(M**fixed):
            cols = range(prefix * M**free, (prefix + 1) * M**free)
            for S, count in states.items():
                by_row: dict[int, set] = defaultdict(set)
                for d in S:
                    for c in cols:
                        row, child = sawtooth_row(c, d, M)
                        by_row[row].add(child)
                for children in by_row.values():
                    nxt[frozenset(children)] += count
        states = dict(nxt)
    return sum(states.values())


def graph_box_count_enumerated(params: CarpetParams, k: int, stopped: bool = False) -> int:
    """Brute-force square count from every depth-k column (h_n or f_n)."""
    table = trace_columns(all_columns(k, params), params)
    left, right, denom = endpoint_numerators(table, stopped)
    unit = params.M ** ((params.n - 1) * k)  # height of a level-k square in numerator units
    lo = np.minimum(left, right)
    hi = np.maximum(left, right)
    r0 = lo // unit
    r1 = np.maximum((hi - 1) // unit, r0)
    sq_col = table.column_index() // params.M ** ((params.n - 1) * k)
    side = params.M**k
    keys = set()
    span = r1 - r0
    for extra in range(int(span.max()) + 1):
        sel = span >= extra
        keys.update((sq_col[sel] * side + r0[sel] + extra).tolist())
    return len(keys)


def box_count(params: CarpetParams, max_depth: int, kind: str = "h", budget: int = 4_000_000):
    if kind == "h":
        counts = [graph_box_count_h(params, k) for k in range(1, max_depth + 1)]
    elif kind == "f":
        if params.columns**max_depth > budget:
            raise ValueError("f_n box count exceeds the enumeration budget")
        counts = [graph_box_count_enumerated(params, k, stopped=True) for k in range(1, max_depth + 1)]
    elif kind == "line":
        counts = [params.M**k for k in range(1, max_depth + 1)]
    else:
        raise ValueError(f"unknown kind {kind!r}")
    label = f"{kind}_{params.n}"
    return fit_slope(label, range(1, max_depth + 1), counts, math.log(params.M))


def glued_box_count(grid, max_depth: int, blocks: int = 3, budget: int = 4_000_000):
    """Dyadic box counts of the glued graph over its first few blocks.

    Block b is a copy of f_b scaled by 2**-b; its squares are counted at the
    matching depth and summed. Scales are M-adic within each block.
    """
    counts = []
    for k in range(1, max_depth + 1):
        total = 0
        for b in range(1, blocks + 1):
            p = CarpetParams(grid, b)
            depth = max(1, min(k, int(math.log(budget) / math.log(p.columns))))
            total += graph_box_count_enumerated(p, depth, stopped=True)
        counts.append(total)
    return fit_slope("glued", range(1, max_depth + 1), counts, math.log(grid.M))


# ---------------------------------------------------------------------------
# fibers and level sets


def row_digits(a, depth: int, M: int) -> list[int]:
    """0-based row digits of height ``a``; grid ordinates are rejected."""
    a = Fraction(a)
    if not 0 < a < 1:
        raise ValueError(f"fiber height {a} must lie strictly inside (0, 1)")
    digits = []
    for k in range(1, depth + 1):
        scaled = a * M**k
        if scaled.denominator == 1:
            raise ValueError(f"height {a} is a grid ordinate at level {k}")
        digits.append(int(scaled) % M)
    return digits


def generic_height(prefix, depth: int, M: int, seed: int) -> list[int]:
    """Extend a row-digit prefix with seeded uniform digits up to ``depth``."""
    rng = np.random.default_rng(seed)
    prefix = list(prefix)
    rest = rng.integers(0, M, size=max(depth - len(prefix), 0)).tolist()
    return (prefix + rest)[:depth]


def strip_columns(digits, params: CarpetParams) -> np.ndarray:
    """Every column address whose rectangle follows the row digits (exhaustive)."""
    M, n = params.M, params.n
    g = np.arange(M ** (n - 1))
    odd = g % 2 == 1
    cols = np.zeros((1, 0), dtype=np.int64)
    desc = np.zeros(1, dtype=bool)
    for row in digits:
        base = np.where(desc, M - 1 - row, row)[:, None]
        c = g * M + np.where(odd, M - 1 - base, base)  # (paths, groups)
        cols = np.concatenate(
            [np.repeat(cols, len(g), axis=0), c.reshape(-1, 1)], axis=1
        )
        desc = (desc[:, None] ^ odd).ravel()
    return cols


def strip_count_h(digits, params: CarpetParams) -> int:
    """Number of h_n rectangles following the row digits, by orientation counts."""
    M = params.M
    counts = {False: 1, True: 0}
    for row in digits:
        nxt = {False: 0, True: 0}
        for d, c in counts.items():
            if not c:
                continue
            for col in columns_for_row(row, d, M, params.n).tolist():
                nxt[sawtooth_row(col, d, M)[1]] += c
        counts = nxt
    return counts[False] + counts[True]


def fiber_count(digits, params: CarpetParams, stopped: bool = False) -> int:
    """Number of depth-k boxes of width M**(-n k) meeting the fiber.

    For h_n this is the number of strip rectangles. For f_n it is the number
    of surviving strip rectangles plus one for each stopped ancestor crossing
    the strip, where the graph is a single segment.
    """
    if not stopped:
        return strip_count_h(digits, params)
    cols = strip_columns(digits, params)
    table = trace_columns(cols, params)
    k = len(digits)
    count = int(table.survivors(k).sum())
    hit = table.stop > 0
    ancestors = {tuple(c[:s]) for c, s in zip(table.columns[hit].tolist(), table.stop[hit].tolist())}
    return count + len(ancestors)


def level_set_boxcount(params: CarpetParams, digits, kind: str = "h") -> BoxCountSeries:
    counts = [fiber_count(digits[:k], params, stopped=(kind == "f")) for k in range(1, len(digits) + 1)]
    return fit_slope(
        f"level_{kind}_{params.n}", range(1, len(digits) + 1), counts, params.n * math.log(params.M)
    )


@dataclass
class FiberMeasure:
    """Mass ``M**(-k(n-1))`` on every level-k rectangle of a row strip.

    ``restricted`` keeps only rectangles untouched by the stopping rule, which
    gives the restriction to the f_n fiber.
    """

    params: CarpetParams
    digits: list[int]
    restricted: bool = False

    def __post_init__(self):
        self._tables = {}

    @property
    def depth(self) -> int:
        return len(self.digits)

    def rect_mass(self, k: int) -> Fraction:
        return Fraction(1, self.params.M ** (k * (self.params.n - 1)))

    def columns(self, k: int) -> np.ndarray:
        """Column indices (0..M**(n k) - 1) of the level-k strip rectangles carrying mass."""
        if k not in self._tables:
            table = trace_columns(strip_columns(self.digits[:k], self.params), self.params)
            cidx = table.column_index()
            if self.restricted:
                cidx = cidx[table.survivors(k)]
            self._tables[k] = np.sort(cidx)
        return self._tables[k]

    def total(self, k: int | None = None) -> Fraction:
        k = self.depth if k is None else k
        return len(self.columns(k)) * self.rect_mass(k)

    def refinement_consistent(self) -> bool:
        """Every level-k strip rectangle holds exactly M**(n-1) strip children."""
        C, share = self.params.columns, self.params.M ** (self.params.n - 1)
        for k in range(1, self.depth):
            parents = self.columns(k + 1) // C
            _, counts = np.unique(parents, return_counts=True)
            if not self.restricted and not np.all(counts == share):
                return False
            if not set(parents.tolist()) <= set(self.columns(k).tolist()):
                return False
        return True

    def interval_mass(self, u, v, k: int | None = None) -> tuple[Fraction, Fraction]:
        """Lower and upper bounds on the mass of ``[u, v]`` from level-k rectangles."""
        k = self.depth if k is None else k
        u, v = Fraction(u), Fraction(v)
        N = self.params.columns**k
        cols = self.columns(k)
        lo_c = math.floor(u * N)
        hi_c = math.ceil(v * N)  # columns [lo_c, hi_c) overlap [u, v] with positive length
        overlap = cols[(cols >= lo_c) & (cols < hi_c)]
        inside = overlap[(overlap >= math.ceil(u * N)) & (overlap + 1 <= math.floor(v * N))]
        m = self.rect_mass(k)
        return len(inside) * m, len(overlap) * m


@dataclass
class BallReport:
    aligned_checked: int
    aligned_violations: int
    aligned_equalities: int
    C_offgrid: float
    offgrid_checked: int
    offgrid_over_M: int  # samples with mass > M * r**(D-1)

    @property
    def ok(self) -> bool:
        return self.aligned_violations == 0 and self.offgrid_over_M == 0


def fiber_measure_ball_check(fm: FiberMeasure, samples: int, seed: int, margin: int = 2) -> BallReport:
    """Ball-mass bounds ``mu(B(x, r)) <= C r**(D-1)`` on a fiber.

    Aligned check: every level-k column interval of length ``M**(-n k)`` has
    mass at most ``(M**(-n k))**((n-1)/n)``, with equality on strip columns;
    compared exactly through n-th powers. Off-grid check: balls around sampled
    fiber points with radii ``M**(-n k)`` and random radii, masses bounded
    from above using rectangles ``margin`` levels deeper.
    """
    n, M = fm.params.n, fm.params.M
    C = fm.params.columns
    aligned = viol = equal = 0
    for k in range(1, fm.depth + 1):
        r = Fraction(1, C**k)
        cols = fm.columns(k)
        bound = r ** (n - 1)
        for c in cols.tolist():
            lo, hi = fm.interval_mass(Fraction(c, C**k), Fraction(c + 1, C**k), k)
            aligned += 1
            if hi**n > bound:
                viol += 1
            if lo == hi and hi**n == bound:
                equal += 1
    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = over = 0
    top = fm.depth - margin
    if top >= 1:
        deep = fm.columns(fm.depth)
        for _ in range(samples):
            k = int(rng.integers(1, top + 1))
            if rng.random() < 0.5:
                r = Fraction(1, C**k)
            else:
                r = Fraction(int(rng.integers(1, 10**6)), 10**6 * C ** (k - 1))
            c = int(deep[rng.integers(len(deep))])
            x = Fraction(c, C**fm.depth) + Fraction(int(rng.integers(0, 10**6)), 10**6 * C**fm.depth)
            _, hi = fm.interval_mass(x - r, x + r)
            checked += 1
            if hi**n > M**n * r ** (n - 1):
                over += 1
            worst = max(worst, float(hi) / float(r) ** ((n - 1) / n))
    return BallReport(aligned, viol, equal, worst, checked, over)


def sigma_share(fm_mu: FiberMeasure, fm_sigma: FiberMeasure) -> list[Fraction]:
    """Ratio sigma/mu at each level of a fiber."""
    return [fm_sigma.total(k) / fm_mu.total(k) for k in range(1, fm_mu.depth + 1)]


def product_digits(M: int, depth: int):
    return itertools.product(range(M), repeat=depth)
