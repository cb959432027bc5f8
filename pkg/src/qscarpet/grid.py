"""M-adic square hierarchy: multi-indices, ring classes and the stopping rule.

A level-m multi-index is a tuple of 1-based pairs ``((i_1, j_1), ..., (i_m, j_m))``
naming the square of side ``M**-m`` reached by choosing column ``i_k`` and row
``j_k`` at every subdivision step. The empty tuple is the unit square.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

MultiIndex = tuple[tuple[int, int], ...]

STRICT_MIN_M = 78


class ConfigError(ValueError):
    """Raised for parameters outside the admissible range."""


class IndexClass(enum.Enum):
    RING1 = 1
    RING2 = 2
    CENTER = 3


def as_fraction(value) -> Fraction:
    """Parse ints, Fractions and ``"p/q"`` strings exactly (floats are refused)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool) or isinstance(value, float):
        raise ConfigError(f"refusing inexact value {value!r}; pass 'p/q'")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot parse rational {value!r}") from exc
    raise ConfigError(f"cannot parse rational {value!r}")


@dataclass(frozen=True)
class GridParams:
    M: int = 5
    r: Fraction = field(default=Fraction(1, 126))
    mode: str = "demo"

    def __post_init__(self):
        object.__setattr__(self, "r", as_fraction(self.r))
        if self.mode not in ("demo", "strict"):
            raise ConfigError(f"mode must be 'demo' or 'strict', got {self.mode!r}")
        if not isinstance(self.M, int) or isinstance(self.M, bool):
            raise ConfigError("M must be an integer")
        if self.M % 2 == 0:
            raise ConfigError(f"M must be odd, got {self.M}")
        if self.M < 5:
            raise ConfigError(f"M must be at least 5, got {self.M}")
        if self.mode == "strict" and self.M < STRICT_MIN_M:
            raise ConfigError(f"strict mode needs M >= {STRICT_MIN_M}, got {self.M}")
        if not 0 < self.r < Fraction(1, self.M**3):
            raise ConfigError(f"r must satisfy 0 < r < M^-3 = 1/{self.M**3}, got {self.r}")

    @classmethod
    def strict_default(cls) -> "GridParams":
        M = 79
        return cls(M=M, r=Fraction(1, 2 * M**3), mode="strict")

    @property
    def center_fraction(self) -> Fraction:
        return Fraction((self.M - 4) ** 2, self.M**2)


def classify(i: int, j: int, M: int) -> IndexClass:
    if not (1 <= i <= M and 1 <= j <= M):
        raise ValueError(f"cell ({i}, {j}) outside 1..{M}")
    if i in (1, M) or j in (1, M):
        return IndexClass.RING1
    if i in (2, M - 1) or j in (2, M - 1):
        return IndexClass.RING2
    return IndexClass.CENTER


def j_value(cls: IndexClass) -> int:
    return 0 if cls is IndexClass.CENTER else 1


def class_counts(M: int) -> dict[IndexClass, int]:
    counts = {c: 0 for c in IndexClass}
    for i in range(1, M + 1):
        for j in range(1, M + 1):
            counts[classify(i, j, M)] += 1
    return counts


def validate_index(idx: MultiIndex, M: int) -> None:
    for i, j in idx:
        if not (1 <= i <= M and 1 <= j <= M):
            raise ValueError(f"cell ({i}, {j}) outside 1..{M}")


def classes_of(idx: MultiIndex, M: int) -> tuple[IndexClass, ...]:
    return tuple(classify(i, j, M) for i, j in idx)


@dataclass(frozen=True)
class StoppingLedger:
    partial_sums: tuple[int, ...]
    stopped_at: int | None

    @property
    def stopped(self) -> bool:
        return self.stopped_at is not None


def stopping_from_classes(classes: Iterable[IndexClass]) -> StoppingLedger:
    sums = []
    s = 0
    stopped_at = None
    for m, cls in enumerate(classes, start=1):
        s += j_value(cls)
        sums.append(s)
        # strict inequality s > m/3, kept in integers
        if stopped_at is None and 3 * s > m:
            stopped_at = m
    return StoppingLedger(tuple(sums), stopped_at)


def stopping_state(idx: MultiIndex, M: int) -> StoppingLedger:
    return stopping_from_classes(classes_of(idx, M))


def first_stop(j_values: Sequence[int]) -> int | None:
    """Level of the first stop for a bare 0/1 sequence, or None."""
    s = 0
    for m, jv in enumerate(j_values, start=1):
        s += jv
        if 3 * s > m:
            return m
    return None


def _cell(coord: Fraction, n_cells: int) -> int:
    k = int(coord * n_cells)  # floor for nonnegative values
    return min(k, n_cells - 1)


def locate_point(x: Sequence, m: int, M: int) -> MultiIndex:
    """Level-m index of the square containing ``x``.

    Cells are half-open ``[a, b)`` except the last cell of each row and
    column, which is closed so that coordinate 1 is covered.
    """
    px, py = (Fraction(c) if isinstance(c, float) else as_fraction(c) for c in x)
    if not (0 <= px <= 1 and 0 <= py <= 1):
        raise ValueError(f"point {x} outside the unit square")
    n = M**m
    cx, cy = _cell(px, n), _cell(py, n)
    return index_from_cell(cx, cy, m, M)


def index_from_cell(cx: int, cy: int, m: int, M: int) -> MultiIndex:
    """Multi-index of the level-m cell with 0-based lattice position (cx, cy)."""
    pairs = []
    for k in range(m - 1, -1, -1):
        d = M**k
        pairs.append((cx // d % M + 1, cy // d % M + 1))
    return tuple(pairs)


def cell_of_index(idx: MultiIndex, M: int) -> tuple[int, int]:
    cx = cy = 0
    for i, j in idx:
        cx = cx * M + (i - 1)
        cy = cy * M + (j - 1)
    return cx, cy


def square_bounds(idx: MultiIndex, M: int) -> tuple[Fraction, Fraction, Fraction]:
    """Lower-left corner and side length of the square ``Q(idx)``."""
    cx, cy = cell_of_index(idx, M)
    side = Fraction(1, M ** len(idx))
    return cx * side, cy * side, side


def is_prefix(short: MultiIndex, long: MultiIndex) -> bool:
    return len(short) <= len(long) and long[: len(short)] == short
