"""Weight hierarchy on the square grid, survivor sets, content bounds.

All weights are exact ``Fraction`` values of the form ``(M-3)**a * r**b``.
Floats appear only when a weight table is handed to the shortest-path code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

import numpy as np

from .grid import (
    GridParams,
    IndexClass,
    MultiIndex,
    cell_of_index,
    classes_of,
    classify,
    index_from_cell,
    stopping_from_classes,
    validate_index,
)


def exponents(classes: Iterable[IndexClass]) -> tuple[int, int]:
    """Counts (a, b) of Ring2 and Center entries."""
    a = b = 0
    for cls in classes:
        if cls is IndexClass.RING2:
            a += 1
        elif cls is IndexClass.CENTER:
            b += 1
    return a, b


@dataclass(frozen=True)
class WeightHierarchy:
    params: GridParams
    # test hook: replace the weight of specific indices to exercise failing checks
    overrides: Mapping[MultiIndex, Fraction] = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.params.M

    def effective_prefix(self, idx: MultiIndex, variant: str = "stopped") -> MultiIndex:
        if variant == "plain":
            return idx
        if variant != "stopped":
            raise ValueError(f"unknown variant {variant!r}")
        ledger = stopping_from_classes(classes_of(idx, self.M))
        if ledger.stopped_at is None:
            return idx
        return idx[: ledger.stopped_at - 1]

    def rho(self, idx: MultiIndex, variant: str = "stopped") -> Fraction:
        validate_index(idx, self.M)
        idx = tuple(idx)
        if variant == "stopped" and idx in self.overrides:
            return Fraction(self.overrides[idx])
        a, b = exponents(classes_of(self.effective_prefix(idx, variant), self.M))
        return Fraction(self.M - 3) ** a * self.params.r**b

    def is_stopped(self, idx: MultiIndex) -> bool:
        return stopping_from_classes(classes_of(idx, self.M)).stopped

    def children(self, idx: MultiIndex) -> Iterator[MultiIndex]:
        for i in range(1, self.M + 1):
            for j in range(1, self.M + 1):
                yield idx + ((i, j),)

    def survivors(self, m: int) -> list[MultiIndex]:
        """Unstopped level-m indices, i.e. the squares making up E_m."""
        level = [()]
        for _ in range(m):
            level = [c for idx in level for c in self.children(idx) if not self.is_stopped(c)]
        return level

    def cell_weights(self, m: int) -> np.ndarray:
        """Float table ``w[cx, cy] = rho_m`` of every level-m cell (stopped variant)."""
        M = self.M
        n = M**m
        a = np.zeros((n, n), dtype=np.int64)
        b = np.zeros((n, n), dtype=np.int64)
        s = np.zeros((n, n), dtype=np.int64)
        frozen = np.zeros((n, n), dtype=bool)
        cx, cy = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        digit_class = np.empty((M, M), dtype=np.int64)
        for i in range(M):
            for j in range(M):
                digit_class[i, j] = classify(i + 1, j + 1, M).value
        for k in range(1, m + 1):
            d = M ** (m - k)
            cls = digit_class[cx // d % M, cy // d % M]
            s += cls != IndexClass.CENTER.value
            frozen |= 3 * s > k
            live = ~frozen
            a += live & (cls == IndexClass.RING2.value)
            b += live & (cls == IndexClass.CENTER.value)
        w = (float(M - 3) ** a) * (float(self.params.r) ** b)
        for idx, value in self.overrides.items():
            if len(idx) == m:
                w[cell_of_index(idx, M)] = float(value)
        return w


@dataclass(frozen=True)
class SurvivorSet:
    hierarchy: WeightHierarchy
    m: int
    members: frozenset

    @classmethod
    def build(cls, hierarchy: WeightHierarchy, m: int) -> "SurvivorSet":
        return cls(hierarchy, m, frozenset(hierarchy.survivors(m)))

    def __len__(self) -> int:
        return len(self.members)

    def contains_point(self, x) -> bool:
        # E_m is a union of closed squares: a point on a grid line belongs
        # to E_m when any adjacent square survives.
        M, n = self.hierarchy.M, self.hierarchy.M**self.m
        cands = [_adjacent_cells(Fraction(c), n) for c in x]
        return any(
            index_from_cell(i, j, self.m, M) in self.members
            for i in cands[0]
            for j in cands[1]
        )

    def is_nested_in(self, coarser: "SurvivorSet") -> bool:
        k = coarser.m
        return all(idx[:k] in coarser.members for idx in self.members)


def _adjacent_cells(c: Fraction, n: int) -> list[int]:
    if not 0 <= c <= 1:
        return []
    t = c * n
    if t.denominator == 1:
        k = int(t)
        return [v for v in (k - 1, k) if 0 <= v < n]
    return [int(t)]


@dataclass
class WeightBoundReport:
    m: int
    checked: int
    violations: list
    max_ratio_cubed: Fraction  # max of rho**3 / r**m

    @property
    def max_ratio(self) -> float:
        return float(self.max_ratio_cubed) ** (1.0 / 3.0)

    @property
    def ok(self) -> bool:
        return not self.violations


def survivor_weight_bound_check(
    hierarchy: WeightHierarchy, m: int, sample: Iterable[MultiIndex]
) -> WeightBoundReport:
    """Check ``rho_m <= r**(m/3)`` exactly on unstopped level-m indices.

    The comparison is done on cubes, ``rho**3 <= r**m``, so no root is taken.
    """
    r_m = hierarchy.params.r**m
    checked = 0
    worst = Fraction(0)
    violations = []
    for idx in sample:
        if len(idx) != m:
            raise ValueError(f"index {idx} is not at level {m}")
        if hierarchy.is_stopped(idx):
            raise ValueError(f"index {idx} is stopped; the bound only covers survivors")
        ratio = hierarchy.rho(idx) ** 3 / r_m
        worst = max(worst, ratio)
        if ratio > 1:
            violations.append(idx)
        checked += 1
    return WeightBoundReport(m, checked, violations, worst)


@dataclass(frozen=True)
class ContentBound:
    """Upper bound ``C1 * (r**(1/3) * M)**m`` on the 1-content of g(E_m).

    The value is irrational in general, so exact work goes through its cube
    ``C1**3 * r**m * M**(3m)``.
    """

    params: GridParams
    C1: Fraction

    def cube(self, m: int) -> Fraction:
        if m < 0:
            raise ValueError("m must be nonnegative")
        return self.C1**3 * self.params.r**m * Fraction(self.params.M) ** (3 * m)

    def __call__(self, m: int) -> float:
        return float(self.C1) * (float(self.params.r) ** (1.0 / 3.0) * self.params.M) ** m

    def ratio(self) -> float:
        """Ratio of consecutive terms, ``r**(1/3) * M``."""
        return float(self.params.r * self.params.M**3) ** (1.0 / 3.0)

    def strictly_decreasing(self, m_max: int, m_min: int = 0) -> bool:
        cubes = [self.cube(m) for m in range(m_min, m_max + 1)]
        return all(b < a for a, b in zip(cubes, cubes[1:]))


def hausdorff_content_upper(params: GridParams, m: int, C1) -> float:
    return ContentBound(params, Fraction(C1))(m)
