"""Exact arithmetic for the standard dyadic grid and its 3^n shifted copies.

A cube of level ``k`` in the grid with shift ``t`` (each entry in {-1, 0, 1},
read as multiples of 1/3) is

    2^k ([0,1)^n + m + (-1)^k t/3).

The alternating sign keeps every shifted family nested across levels: the two
(or 2^n) children of a level-k cube are level-(k-1) cubes of the same grid.
At level 0 the offset is exactly ``t/3``.  All geometry is carried out with
integers and :class:`fractions.Fraction`; floats only enter at evaluation time.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

__all__ = [
    "DyadicCube",
    "all_shifts",
    "level_sign",
    "locate",
    "children",
    "parent",
    "one_third_cover",
    "enumerate_cubes",
    "count_cubes",
    "parse_cube",
    "WindowError",
]

GridShift = tuple  # tuple of ints in {-1, 0, 1}


class WindowError(ValueError):
    """Raised when level or index arithmetic leaves the supported window."""


def all_shifts(n: int) -> list[tuple[int, ...]]:
    """The 3^n shifts, with the standard grid (all zeros) first."""
    if n < 1:
        raise ValueError("dimension must be positive")
    vals = (0, 1, -1)
    return [tuple(t) for t in itertools.product(vals, repeat=n)]


def level_sign(k: int) -> int:
    return 1 if k % 2 == 0 else -1


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        if x != x or x in (float("inf"), float("-inf")):
            raise ValueError("coordinates must be finite")
        return Fraction(x)
    return Fraction(x)


def _pow2(k: int) -> Fraction:
    return Fraction(2) ** k


@dataclass(frozen=True, order=True)
class DyadicCube:
    k: int
    m: tuple[int, ...]
    t: tuple[int, ...]

    def __post_init__(self):
        if len(self.m) != len(self.t):
            raise ValueError("index and shift must have equal length")
        if any(s not in (-1, 0, 1) for s in self.t):
            raise ValueError("shift entries must lie in {-1, 0, 1}")

    @property
    def n(self) -> int:
        return len(self.m)

    @property
    def side(self) -> Fraction:
        return _pow2(self.k)

    @property
    def volume(self) -> Fraction:
        return _pow2(self.k * self.n)

    @property
    def lower(self) -> tuple[Fraction, ...]:
        s = level_sign(self.k)
        h = _pow2(self.k)
        return tuple(h * (mi + Fraction(s * ti, 3)) for mi, ti in zip(self.m, self.t))

    @property
    def upper(self) -> tuple[Fraction, ...]:
        h = _pow2(self.k)
        return tuple(a + h for a in self.lower)

    def bounds(self) -> list[tuple[Fraction, Fraction]]:
        return list(zip(self.lower, self.upper))

    def contains_point(self, x: Sequence) -> bool:
        return all(a <= _as_fraction(xi) < b for xi, (a, b) in zip(x, self.bounds()))

    def contains(self, other: "DyadicCube") -> bool:
        """Set inclusion other ⊆ self (works across grids)."""
        return all(a <= c and d <= b for (a, b), (c, d) in zip(self.bounds(), other.bounds()))

    def intersects(self, other: "DyadicCube") -> bool:
        return all(max(a, c) < min(b, d) for (a, b), (c, d) in zip(self.bounds(), other.bounds()))

    def __str__(self) -> str:
        return format_cube(self)


def format_cube(q: DyadicCube) -> str:
    t = ",".join(str(v) for v in q.t)
    m = ",".join(str(v) for v in q.m)
    return f"t=({t});k={q.k};m=({m})"


_CUBE_RE = re.compile(r"^t=\(([-\d,\s]+)\);k=(-?\d+);m=\(([-\d,\s]+)\)$")


def parse_cube(text: str) -> DyadicCube:
    mt = _CUBE_RE.match(text.strip())
    if not mt:
        raise ValueError(f"malformed cube text: {text!r}")
    t = tuple(int(v) for v in mt.group(1).split(","))
    m = tuple(int(v) for v in mt.group(3).split(","))
    return DyadicCube(int(mt.group(2)), m, t)


def _floor_frac(x: Fraction) -> int:
    return x.numerator // x.denominator


def locate(x: Sequence, k: int, t: Sequence[int]) -> DyadicCube:
    """The unique level-k cube of grid ``t`` containing the point ``x``."""
    t = tuple(int(v) for v in t)
    if len(x) != len(t):
        raise ValueError("point and shift dimension differ")
    if abs(k) > 4096:
        raise WindowError("level outside supported window")
    s = level_sign(k)
    h = _pow2(k)
    m = tuple(_floor_frac(_as_fraction(xi) / h - Fraction(s * ti, 3)) for xi, ti in zip(x, t))
    return DyadicCube(k, m, t)


def children(q: DyadicCube) -> list[DyadicCube]:
    s = level_sign(q.k)
    base = [2 * mi + s * ti for mi, ti in zip(q.m, q.t)]
    out = []
    for e in itertools.product((0, 1), repeat=q.n):
        out.append(DyadicCube(q.k - 1, tuple(b + ei for b, ei in zip(base, e)), q.t))
    return out


def parent(q: DyadicCube) -> DyadicCube:
    sp = level_sign(q.k + 1)
    return DyadicCube(q.k + 1, tuple((mi - sp * ti) // 2 for mi, ti in zip(q.m, q.t)), q.t)


def _cover_level(side: Fraction) -> int:
    """Unique j with 2^j <= 3*side < 2^(j+1)."""
    v = 3 * side
    j = v.numerator.bit_length() - v.denominator.bit_length()
    while _pow2(j) > v:
        j -= 1
    while _pow2(j + 1) <= v:
        j += 1
    return j


def one_third_cover(lower: Sequence, side) -> tuple[tuple[int, ...], DyadicCube]:
    """Shifted dyadic cube P with Q ⊆ P and side(P) <= 3 side(Q).

    ``Q = prod [lower_i, lower_i + side)``.  The level is the unique j with
    2^j/3 <= side < 2^(j+1)/3; the shift is chosen coordinate by coordinate
    among the three level-j offsets, at least one of which has no boundary
    strictly inside the coordinate interval.
    """
    side = _as_fraction(side)
    if side <= 0:
        raise ValueError("side length must be positive")
    lo = [_as_fraction(a) for a in lower]
    j = _cover_level(side)
    h = _pow2(j)
    s = level_sign(j)
    t, m = [], []
    for a in lo:
        for ti in (0, 1, -1):
            off = Fraction(s * ti, 3)
            mi = _floor_frac(a / h - off)
            if h * (mi + 1 + off) >= a + side:
                t.append(ti)
                m.append(mi)
                break
        else:  # pragma: no cover - excluded by the pigeonhole argument
            raise RuntimeError("no shifted cube covers the interval")
    cube = DyadicCube(j, tuple(m), tuple(t))
    return cube.t, cube


def _index_range(k: int, ti: int, lo: Fraction, hi: Fraction) -> range:
    """Indices m whose level-k interval (grid offset ti) meets [lo, hi)."""
    h = _pow2(k)
    off = Fraction(level_sign(k) * ti, 3)
    m0 = _floor_frac(lo / h - off)
    # last m with lower endpoint < hi
    m1 = -_floor_frac(-(hi / h - off)) - 1
    return range(m0, m1 + 1)


def enumerate_cubes(
    window: tuple[int, int],
    box: Sequence[tuple],
    shifts: Sequence[Sequence[int]] | None = None,
) -> Iterator[DyadicCube]:
    """Every cube of the given shifts with level in ``window`` meeting ``box``.

    ``box`` is a sequence of half-open coordinate intervals ``(lo, hi)``.
    Cubes are produced shift by shift, coarse to fine, in lexicographic index
    order.  An empty window (k_min > k_max) yields nothing.
    """
    kmin, kmax = window
    n = len(box)
    bx = [(_as_fraction(a), _as_fraction(b)) for a, b in box]
    if shifts is None:
        shifts = all_shifts(n)
    for t in shifts:
        t = tuple(int(v) for v in t)
        for k in range(kmax, kmin - 1, -1):
            ranges = [_index_range(k, ti, a, b) for ti, (a, b) in zip(t, bx)]
            for m in itertools.product(*ranges):
                yield DyadicCube(k, tuple(m), t)


def count_cubes(window: tuple[int, int], box: Sequence[tuple], shifts=None) -> int:
    kmin, kmax = window
    n = len(box)
    bx = [(_as_fraction(a), _as_fraction(b)) for a, b in box]
    if shifts is None:
        shifts = all_shifts(n)
    total = 0
    for t in shifts:
        for k in range(kmin, kmax + 1):
            c = 1
            for ti, (a, b) in zip(t, bx):
                c *= len(_index_range(k, int(ti), a, b))
            total += c
    return total
