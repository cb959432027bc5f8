"""Shortest-path surrogate for the deformed length metric, and its audits.

The level-m metric lives on the ``(M**m + 1)**2`` grid corners. An edge of
length ``M**-m`` costs that length times the mean weight of the one or two
level-m cells it borders.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra

from .grid import index_from_cell
from .weights import WeightHierarchy

DEFAULT_MAX_VERTICES = 400_000


class BudgetError(RuntimeError):
    """Requested construction exceeds the configured resource budget."""


class GridMetric:
    def __init__(
        self,
        M: int,
        m: int,
        cell_weights: np.ndarray,
        level_weights: Callable[[int], np.ndarray] | None = None,
        max_vertices: int = DEFAULT_MAX_VERTICES,
    ):
        n = M**m
        if cell_weights.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} weight table, got {cell_weights.shape}")
        if (n + 1) ** 2 > max_vertices:
            raise BudgetError(f"{(n + 1) ** 2} vertices exceed the budget of {max_vertices}")
        if not np.all(cell_weights > 0):
            raise ValueError("cell weights must be positive")
        self.M, self.m, self.n = M, m, n
        self.cell_weights = cell_weights
        self._level_weights = level_weights
        self.graph = _build_graph(cell_weights)

    @classmethod
    def from_hierarchy(cls, hierarchy: WeightHierarchy, m: int, **kw) -> "GridMetric":
        return cls(hierarchy.M, m, hierarchy.cell_weights(m), hierarchy.cell_weights, **kw)

    @classmethod
    def uniform(cls, M: int, m: int, value: float = 1.0, **kw) -> "GridMetric":
        n = M**m
        w = np.full((n, n), float(value))
        return cls(M, m, w, lambda k: np.full((M**k, M**k), float(value)), **kw)

    def scaled(self, factor: float) -> "GridMetric":
        lw = self._level_weights
        return GridMetric(
            self.M,
            self.m,
            self.cell_weights * factor,
            None if lw is None else (lambda k: lw(k) * factor),
        )

    @property
    def num_vertices(self) -> int:
        return (self.n + 1) ** 2

    def vertex(self, x: int, y: int) -> int:
        return x * (self.n + 1) + y

    def coords(self, v) -> np.ndarray:
        v = np.asarray(v)
        return np.stack([v // (self.n + 1), v % (self.n + 1)], axis=-1) / self.n

    def level_weights(self, k: int) -> np.ndarray:
        if self._level_weights is None:
            raise ValueError("metric was built without coarser-level weights")
        return self._level_weights(k)

    def distances_from(self, sources) -> np.ndarray:
        return dijkstra(self.graph, directed=False, indices=np.atleast_1d(sources))

    def distance(self, p: tuple[int, int], q: tuple[int, int]) -> float:
        """Distance between lattice corners given as integer grid coordinates."""
        d = self.distances_from([self.vertex(*p)])
        return float(d[0, self.vertex(*q)])


def _build_graph(w: np.ndarray) -> sparse.csr_matrix:
    n = w.shape[0]
    h = 1.0 / n
    side = n + 1
    idx = np.arange(side * side).reshape(side, side)
    rows, cols, vals = [], [], []

    # horizontal edges (x, y) -> (x + 1, y) border cells (x, y - 1) and (x, y)
    below = np.full((n, side), np.nan)
    above = np.full((n, side), np.nan)
    below[:, 1:] = w
    above[:, :-1] = w
    rows.append(idx[:-1, :].ravel())
    cols.append(idx[1:, :].ravel())
    vals.append(h * np.nanmean(np.stack([below, above]), axis=0).ravel())

    # vertical edges (x, y) -> (x, y + 1) border cells (x - 1, y) and (x, y)
    left = np.full((side, n), np.nan)
    right = np.full((side, n), np.nan)
    left[1:, :] = w
    right[:-1, :] = w
    rows.append(idx[:, :-1].ravel())
    cols.append(idx[:, 1:].ravel())
    vals.append(h * np.nanmean(np.stack([left, right]), axis=0).ravel())

    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    return sparse.csr_matrix((v, (r, c)), shape=(side * side, side * side))


class EuclideanMetric:
    """Plain Euclidean distance on the same lattice; oracle for the audits."""

    def __init__(self, M: int, m: int):
        self.M, self.m, self.n = M, m, M**m

    num_vertices = GridMetric.num_vertices
    vertex = GridMetric.vertex
    coords = GridMetric.coords

    def distances_from(self, sources) -> np.ndarray:
        sources = np.atleast_1d(sources)
        allp = self.coords(np.arange(self.num_vertices))
        src = self.coords(sources)
        return np.linalg.norm(allp[None, :, :] - src[:, None, :], axis=-1)


@dataclass
class DiameterAudit:
    m: int
    M: int
    diameters: dict[int, np.ndarray]  # level -> diam table indexed [cx, cy]
    rhos: dict[int, np.ndarray]

    def ratios(self, k: int) -> np.ndarray:
        return self.diameters[k] / (self.rhos[k] * float(self.M) ** -k)

    @property
    def C1(self) -> float:
        return max(float(self.ratios(k).max()) for k in self.diameters)

    def level_max(self) -> dict[int, float]:
        return {k: float(self.ratios(k).max()) for k in self.diameters}

    def rows(self) -> Iterator[tuple]:
        for k in sorted(self.diameters):
            ratio = self.ratios(k)
            size = self.M**k
            for cx in range(size):
                for cy in range(size):
                    idx = index_from_cell(cx, cy, k, self.M)
                    yield (
                        k,
                        _index_label(idx),
                        repr(float(self.rhos[k][cx, cy])),
                        repr(float(self.diameters[k][cx, cy])),
                        repr(float(ratio[cx, cy])),
                    )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["level", "index", "rho", "diam", "ratio"])
            out.writerows(self.rows())


def _index_label(idx) -> str:
    return "".join(f"({i},{j})" for i, j in idx) or "()"


def diameter_audit(metric: GridMetric, levels=None, batch: int = 256) -> DiameterAudit:
    """Diameter of every level-k square (k <= m) in the level-m metric.

    The diameter of a square is taken over all lattice corners lying in the
    closed square; at level m that is just its four corners.
    """
    M, m, n = metric.M, metric.m, metric.n
    levels = list(range(m + 1)) if levels is None else list(levels)
    side = n + 1
    diam = {k: np.zeros((M**k, M**k)) for k in levels}
    steps = {k: M ** (m - k) for k in levels}
    for start in range(0, side * side, batch):
        sources = np.arange(start, min(start + batch, side * side))
        dist = metric.distances_from(sources)
        for row, v in zip(dist, sources):
            grid = row.reshape(side, side)
            x, y = divmod(int(v), side)
            for k in levels:
                s = steps[k]
                table = diam[k]
                for cx in _owners(x, s, M**k):
                    for cy in _owners(y, s, M**k):
                        d = grid[cx * s : (cx + 1) * s + 1, cy * s : (cy + 1) * s + 1].max()
                        if d > table[cx, cy]:
                            table[cx, cy] = d
    rhos = {k: metric.level_weights(k) for k in levels}
    return DiameterAudit(m, M, diam, rhos)


def _owners(x: int, s: int, count: int) -> list[int]:
    c = x // s
    out = [c] if c < count else []
    if x % s == 0 and c - 1 >= 0:
        out.append(c - 1)
    return out


@dataclass
class QSEnvelope:
    edges: np.ndarray  # bin edges in t
    bin_max: np.ndarray  # max metric ratio seen per bin (nan when empty)
    counts: np.ndarray
    envelope: np.ndarray  # running max of bin_max over increasing t

    def as_dict(self) -> dict:
        def clean(a):
            return [None if not np.isfinite(v) else float(v) for v in a]

        return {
            "edges": clean(self.edges),
            "bin_max": clean(self.bin_max),
            "counts": [int(c) for c in self.counts],
            "envelope": clean(self.envelope),
        }


def qs_ratio_audit(
    metric, triples: int, seed: int, bins: int = 24, t_range=(1e-3, 1e3), per_source: int = 500
) -> QSEnvelope:
    """Empirical distortion envelope over sampled triples of lattice corners.

    For each triple (x, y, z), ``t = |x - y| / |x - z|`` is binned on a log
    scale against ``d(x, y) / d(x, z)``.
    """
    rng = np.random.default_rng(seed)
    V = metric.num_vertices
    n_src = max(1, -(-triples // per_source))
    edges = np.geomspace(t_range[0], t_range[1], bins + 1)
    bin_max = np.full(bins, -np.inf)
    counts = np.zeros(bins, dtype=np.int64)
    remaining = triples
    for _ in range(n_src):
        k = min(per_source, remaining)
        remaining -= k
        x = int(rng.integers(V))
        y = rng.integers(V, size=k)
        z = rng.integers(V, size=k)
        keep = (y != x) & (z != x)
        y, z = y[keep], z[keep]
        d = metric.distances_from([x])[0]
        px = metric.coords(x)
        t = np.linalg.norm(metric.coords(y) - px, axis=1) / np.linalg.norm(
            metric.coords(z) - px, axis=1
        )
        ratio = d[y] / d[z]
        b = np.searchsorted(edges, t, side="right") - 1
        inside = (b >= 0) & (b < bins)
        np.maximum.at(bin_max, b[inside], ratio[inside])
        np.add.at(counts, b[inside], 1)
    bin_max = np.where(counts > 0, bin_max, np.nan)
    envelope = np.fmax.accumulate(bin_max)
    return QSEnvelope(edges, bin_max, counts, envelope)
