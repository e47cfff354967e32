"""Piecewise-constant functions and weights on a fine dyadic mesh.

A :class:`MeshFunction` lives on the box ``[-2^K, 2^K)^n`` with cells of side
``2^-L`` and carries a symbolic description of its values outside the box (the
tail).  All cube integrals are computed from cell values with exact overlap
lengths: shifted cubes of level ``k >= -L`` have corners at integer multiples of
a third of a cell, so their overlaps with cells are 1/3, 2/3 or whole cells.

Per-grid *level tables* hold the integral of a function over every cube of one
level of one grid that meets the box.  They are built bottom-up by summing
children, which keeps the floating-point error pairwise and keeps exact zeros
exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .grid import DyadicCube, _index_range, level_sign

__all__ = [
    "Tail",
    "MeshFunction",
    "WeightPair",
    "DomainCoverageError",
    "LevelTable",
    "average",
    "weighted_average",
    "measure",
    "lp_norm",
    "weight_from_spec",
]


class DomainCoverageError(ValueError):
    """A cube leaves the mesh box and the function has no usable tail."""


@dataclass(frozen=True)
class Tail:
    """Values outside the box: ``c_left |x|^s_left`` for x < -2^K, likewise right.

    In two dimensions only constant tails are supported (``c_left == c_right``,
    exponents 0).  ``Tail()`` is the zero tail.
    """

    c_left: float = 0.0
    s_left: float = 0.0
    c_right: float = 0.0
    s_right: float = 0.0

    @classmethod
    def zero(cls) -> "Tail":
        return cls()

    @classmethod
    def constant(cls, c: float) -> "Tail":
        return cls(float(c), 0.0, float(c), 0.0)

    @classmethod
    def power(cls, s: float, c_left: float = 1.0, c_right: float = 1.0) -> "Tail":
        return cls(float(c_left), float(s), float(c_right), float(s))

    @property
    def is_zero(self) -> bool:
        return self.c_left == 0.0 and self.c_right == 0.0

    @property
    def is_constant(self) -> bool:
        cl = self.c_left if self.c_left != 0 else None
        cr = self.c_right if self.c_right != 0 else None
        if self.is_zero:
            return True
        return (cl is None or self.s_left == 0) and (cr is None or self.s_right == 0) and self.c_left == self.c_right

    def __mul__(self, other: "Tail") -> "Tail":
        cl = self.c_left * other.c_left
        cr = self.c_right * other.c_right
        return Tail(cl, (self.s_left + other.s_left) if cl else 0.0, cr, (self.s_right + other.s_right) if cr else 0.0)

    def scale(self, c: float) -> "Tail":
        return Tail(self.c_left * c, self.s_left if self.c_left * c else 0.0, self.c_right * c, self.s_right if self.c_right * c else 0.0)

    def pow(self, e: float) -> "Tail":
        def one(c, s):
            if c == 0.0:
                if e > 0:
                    return 0.0, 0.0
                if e == 0:
                    return 1.0, 0.0
                return math.inf, 0.0
            return abs(c) ** e, s * e

        cl, sl = one(self.c_left, self.s_left)
        cr, sr = one(self.c_right, self.s_right)
        return Tail(cl, sl, cr, sr)

    def add(self, other: "Tail") -> "Tail":
        def one(c1, s1, c2, s2):
            if c1 == 0:
                return c2, s2
            if c2 == 0:
                return c1, s1
            if s1 != s2:
                raise ValueError("cannot add power tails with different exponents")
            return c1 + c2, s1

        cl, sl = one(self.c_left, self.s_left, other.c_left, other.s_left)
        cr, sr = one(self.c_right, self.s_right, other.c_right, other.s_right)
        return Tail(cl, sl, cr, sr)

    # one-dimensional integrals ------------------------------------------------
    @staticmethod
    def _pow_int(c, s, a, b):
        """∫_a^b c y^s dy for 0 < a <= b (vectorized)."""
        if c == 0.0:
            return np.zeros_like(a)
        if math.isinf(c):
            return np.where(b > a, math.inf, 0.0)
        if s == -1.0:
            return c * (np.log(b) - np.log(a))
        return c * (b ** (s + 1) - a ** (s + 1)) / (s + 1)

    def integral_1d(self, a, b, R: float) -> np.ndarray:
        """∫ over ([a,b) minus [-R,R)) of the tail, vectorized in a, b."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        out = np.zeros(np.broadcast(a, b).shape)
        # right part: [max(a,R), b)
        ra = np.maximum(a, R)
        mask = b > ra
        if np.any(mask) and self.c_right != 0.0:
            out = out + np.where(mask, self._pow_int(self.c_right, self.s_right, np.where(mask, ra, R), np.where(mask, b, R)), 0.0)
        # left part: [a, min(b,-R)) mirrored to (max(-b,R), -a]
        lb = np.minimum(b, -R)
        mask = lb > a
        if np.any(mask) and self.c_left != 0.0:
            out = out + np.where(mask, self._pow_int(self.c_left, self.s_left, np.where(mask, -lb, R), np.where(mask, -a, R)), 0.0)
        return out

    def extreme_1d(self, a, b, R: float, op: str) -> np.ndarray:
        """Infimum ('min') or supremum ('max') of the tail over [a,b) outside the box."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        worst = math.inf if op == "min" else -math.inf
        red = np.minimum if op == "min" else np.maximum
        out = np.full(np.broadcast(a, b).shape, worst)
        for c, s, lo, hi in (
            (self.c_right, self.s_right, np.maximum(a, R), b),
            (self.c_left, self.s_left, np.maximum(-b, R), -a),
        ):
            mask = hi > lo
            if not np.any(mask):
                continue
            lo_ = np.where(mask, lo, R)
            hi_ = np.where(mask, hi, R)
            with np.errstate(over="ignore", invalid="ignore"):
                v1 = c * lo_ ** s if c else np.zeros_like(lo_)
                v2 = c * hi_ ** s if c else np.zeros_like(hi_)
            v = red(v1, v2)
            out = np.where(mask, red(out, v), out)
        return out

    def to_json(self) -> dict:
        return {"c_left": self.c_left, "s_left": self.s_left, "c_right": self.c_right, "s_right": self.s_right}


@dataclass
class LevelTable:
    """Integrals (or extrema) over all cubes of one level of one grid meeting the box."""

    k: int
    t: tuple[int, ...]
    m_lo: tuple[int, ...]
    data: np.ndarray

    def lookup(self, m: Sequence[int]) -> float:
        idx = tuple(mi - lo for mi, lo in zip(m, self.m_lo))
        if any(i < 0 or i >= s for i, s in zip(idx, self.data.shape)):
            raise KeyError("cube not in table")
        return float(self.data[idx])

    def cubes(self):
        for idx in np.ndindex(*self.data.shape):
            yield DyadicCube(self.k, tuple(i + lo for i, lo in zip(idx, self.m_lo)), self.t)


class MeshFunction:
    """A piecewise-constant function on ``[-2^K, 2^K)^n`` with cells of side ``2^-L``."""

    def __init__(self, values, K: int, L: int, tail: Tail | None = None):
        v = np.array(values, dtype=float)
        n = v.ndim
        N = 2 ** (K + 1 + L)
        if n not in (1, 2):
            raise ValueError("only dimensions 1 and 2 are supported")
        if v.shape != (N,) * n:
            raise ValueError(f"expected shape {(N,) * n}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("cell values must be finite")
        tail = tail or Tail.zero()
        if n == 2 and not tail.is_constant:
            raise ValueError("two-dimensional tails must be zero or constant")
        v.setflags(write=False)
        self.values = v
        self.K, self.L, self.n, self.N = int(K), int(L), n, N
        self.h = 2.0 ** (-L)
        self.R = 2.0 ** K
        self.tail = tail
        self._cache: dict = {}

    # construction helpers ------------------------------------------------------
    @classmethod
    def constant(cls, c: float, K: int, L: int, n: int = 1) -> "MeshFunction":
        N = 2 ** (K + 1 + L)
        return cls(np.full((N,) * n, float(c)), K, L, Tail.constant(c))

    @classmethod
    def zeros(cls, K: int, L: int, n: int = 1) -> "MeshFunction":
        return cls(np.zeros((2 ** (K + 1 + L),) * n), K, L)

    @classmethod
    def from_callable(cls, func: Callable, K: int, L: int, n: int = 1, tail: Tail | None = None, order: int = 0) -> "MeshFunction":
        """Sample ``func`` at cell centers (order=0) or average it with an
        ``order``-point Gauss rule per cell and axis."""
        N = 2 ** (K + 1 + L)
        h = 2.0 ** (-L)
        edges = -(2.0 ** K) + h * np.arange(N)
        if order <= 0:
            nodes, weights = np.array([0.5]), np.array([1.0])
        else:
            g, w = np.polynomial.legendre.leggauss(order)
            nodes, weights = (g + 1) / 2, w / 2
        if n == 1:
            pts = edges[:, None] + h * nodes[None, :]
            vals = (func(pts) * weights[None, :]).sum(axis=1)
        else:
            px = (edges[:, None] + h * nodes[None, :]).ravel()
            X, Y = np.meshgrid(px, px, indexing="ij")
            F = func(X, Y).reshape(N, len(nodes), N, len(nodes))
            vals = np.einsum("iajb,a,b->ij", F, weights, weights)
        return cls(vals, K, L, tail)

    @classmethod
    def indicator(cls, box: Sequence[tuple], K: int, L: int, value: float = 1.0) -> "MeshFunction":
        """Exact cell averages of ``value * χ_box`` (box: list of (lo, hi) per axis)."""
        n = len(box)
        N = 2 ** (K + 1 + L)
        h = 2.0 ** (-L)
        edges = -(2.0 ** K) + h * np.arange(N + 1)
        facs = []
        for lo, hi in box:
            lo, hi = float(lo), float(hi)
            ov = np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo), 0.0, None) / h
            facs.append(ov)
        vals = facs[0] if n == 1 else np.outer(facs[0], facs[1])
        R = 2.0 ** K
        tail = Tail.zero()
        if n == 1:
            lo, hi = float(box[0][0]), float(box[0][1])
            if hi > R or lo < -R:
                raise DomainCoverageError("indicator support must lie in the box")
        return cls(value * vals, K, L, tail)

    @classmethod
    def power_weight(cls, exponent: float, K: int, L: int, support: str = "all", coef: float = 1.0) -> "MeshFunction":
        """Exact cell averages of ``coef |x|^s`` restricted to a support.

        support: 'all', 'abs_gt_1' (|x| > 1), 'positive' (x >= 0), 'abs_lt_1'.
        """
        s = float(exponent)
        N = 2 ** (K + 1 + L)
        h = 2.0 ** (-L)
        edges = -(2.0 ** K) + h * np.arange(N + 1)

        def F(y):  # antiderivative of |y|^s on y>0
            if s == -1.0:
                return np.log(y)
            return y ** (s + 1) / (s + 1)

        def seg(a, b):  # ∫_a^b |y|^s over 0 <= a <= b
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(b > a, F(np.maximum(b, 1e-300)) - np.where(a > 0, F(np.maximum(a, 1e-300)), 0.0 if s > -1 else -np.inf), 0.0)
            return out

        lo_all, hi_all = edges[:-1], edges[1:]
        pieces = []
        if support == "all":
            pieces = [(-np.inf, np.inf)]
        elif support == "abs_gt_1":
            pieces = [(-np.inf, -1.0), (1.0, np.inf)]
        elif support == "positive":
            pieces = [(0.0, np.inf)]
        elif support == "abs_lt_1":
            pieces = [(-1.0, 1.0)]
        else:
            raise ValueError(f"unknown support {support!r}")
        total = np.zeros(N)
        for plo, phi in pieces:
            a = np.maximum(lo_all, plo)
            b = np.minimum(hi_all, phi)
            m = b > a
            a, b = np.where(m, a, 0.0), np.where(m, b, 0.0)
            # positive part
            pa, pb = np.maximum(a, 0.0), np.maximum(b, 0.0)
            part = np.where(pb > pa, seg(pa, pb), 0.0)
            # negative part mirrored
            na, nb = np.maximum(-b, 0.0), np.maximum(-a, 0.0)
            part = part + np.where(nb > na, seg(na, nb), 0.0)
            total += np.where(m, part, 0.0)
        vals = coef * total / h
        cl = coef if support in ("all", "abs_gt_1") else 0.0
        cr = coef if support in ("all", "abs_gt_1", "positive") else 0.0
        return cls(vals, K, L, Tail(cl, s if cl else 0.0, cr, s if cr else 0.0))

    # basic structure -------------------------------------------------------------
    @property
    def box(self) -> list[tuple[Fraction, Fraction]]:
        R = Fraction(2) ** self.K
        return [(-R, R)] * self.n

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    def cell_centers(self) -> np.ndarray:
        return -self.R + self.h * (np.arange(self.N) + 0.5)

    def with_values(self, values, tail: Tail | None = None) -> "MeshFunction":
        return MeshFunction(values, self.K, self.L, self.tail if tail is None else tail)

    def _check_same(self, other: "MeshFunction"):
        if (self.K, self.L, self.n) != (other.K, other.L, other.n):
            raise ValueError("mesh functions live on different meshes")

    def __mul__(self, other):
        if isinstance(other, MeshFunction):
            self._check_same(other)
            return MeshFunction(self.values * other.values, self.K, self.L, self.tail * other.tail)
        return MeshFunction(self.values * float(other), self.K, self.L, self.tail.scale(float(other)))

    __rmul__ = __mul__

    def __add__(self, other: "MeshFunction"):
        self._check_same(other)
        return MeshFunction(self.values + other.values, self.K, self.L, self.tail.add(other.tail))

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other: "MeshFunction"):
        return self + (-other)

    def abs(self) -> "MeshFunction":
        t = self.tail
        return MeshFunction(np.abs(self.values), self.K, self.L, Tail(abs(t.c_left), t.s_left, abs(t.c_right), t.s_right))

    def power(self, e: float) -> "MeshFunction":
        """Cellwise |f|^e; non-positive cells raised to a negative power become
        ``inf``, which is reported by the callers as an infinite constant."""
        a = np.abs(self.values)
        with np.errstate(divide="ignore"):
            v = np.where(a > 0, a ** e, 0.0 if e > 0 else (1.0 if e == 0 else np.inf))
        return _unchecked(v, self, self.tail.pow(e))

    def restrict(self, cube: DyadicCube) -> "MeshFunction":
        """``χ_Q f`` with the exact cell overlap fractions of Q."""
        fr = self.cube_overlap_fractions(cube)
        return MeshFunction(self.values * fr, self.K, self.L, Tail.zero())

    def cube_overlap_fractions(self, cube: DyadicCube) -> np.ndarray:
        """Array of |Q ∩ cell| / |cell| for every cell."""
        edges = -self.R + self.h * np.arange(self.N + 1)
        facs = []
        for a, b in cube.bounds():
            a, b = float(a), float(b)
            facs.append(np.clip(np.minimum(edges[1:], b) - np.maximum(edges[:-1], a), 0.0, None) / self.h)
        return facs[0] if self.n == 1 else np.outer(facs[0], facs[1])

    def center_slices(self, cube: DyadicCube) -> tuple[slice, ...]:
        """Slices of the cells whose centers lie in the cube."""
        sl = []
        R = Fraction(2) ** self.K
        h = Fraction(1, 2 ** self.L)
        for a, b in cube.bounds():
            lo = math.ceil((a + R) / h - Fraction(1, 2))
            hi = math.ceil((b + R) / h - Fraction(1, 2))
            sl.append(slice(max(lo, 0), min(max(hi, 0), self.N)))
        return tuple(sl)

    # exact single-cube integrals ------------------------------------------------
    def _axis_weights(self, a: Fraction, b: Fraction):
        """Cell range and overlap lengths of [a,b) on one axis (inside the box)."""
        R = Fraction(2) ** self.K
        h = Fraction(1, 2 ** self.L)
        a_in, b_in = max(a, -R), min(b, R)
        if b_in <= a_in:
            return 0, np.zeros(0)
        c0 = math.floor((a_in + R) / h)
        c1 = math.ceil((b_in + R) / h)
        w = np.ones(c1 - c0) * float(h)
        first_lo = -R + c0 * h
        w[0] -= float(a_in - first_lo)
        last_hi = -R + c1 * h
        w[-1] -= float(last_hi - b_in)
        return c0, w

    def integral(self, cube: DyadicCube) -> float:
        return self.integral_box(cube.bounds())

    def integral_box(self, bounds: Sequence[tuple]) -> float:
        bounds = [(Fraction(a), Fraction(b)) for a, b in bounds]
        if self.n == 1:
            (a, b), = bounds
            c0, w = self._axis_weights(a, b)
            inside = float(np.dot(self.values[c0:c0 + len(w)], w)) if len(w) else 0.0
            outside = 0.0
            if a < -self.R or b > self.R:
                outside = float(self.tail.integral_1d(float(a), float(b), self.R))
            return inside + outside
        (ax, bx), (ay, by) = bounds
        cx, wx = self._axis_weights(ax, bx)
        cy, wy = self._axis_weights(ay, by)
        inside = 0.0
        if len(wx) and len(wy):
            inside = float(wx @ self.values[cx:cx + len(wx), cy:cy + len(wy)] @ wy)
        c = self.tail.c_right
        if c:
            vol = float((bx - ax) * (by - ay))
            vol_in = float(wx.sum() * wy.sum()) if len(wx) and len(wy) else 0.0
            inside += c * (vol - vol_in)
        return inside

    def extreme(self, cube: DyadicCube, op: str = "min") -> float:
        """Essential infimum/supremum over the cube (cells with positive overlap)."""
        vals = []
        sl = []
        R = Fraction(2) ** self.K
        h = Fraction(1, 2 ** self.L)
        outside = False
        for a, b in cube.bounds():
            if a < -R or b > R:
                outside = True
            a_in, b_in = max(a, -R), min(b, R)
            if b_in <= a_in:
                sl.append(slice(0, 0))
                continue
            sl.append(slice(math.floor((a_in + R) / h), math.ceil((b_in + R) / h)))
        block = self.values[tuple(sl)]
        if block.size:
            vals.append(block.min() if op == "min" else block.max())
        if outside:
            if self.n == 1:
                (a, b), = cube.bounds()
                vals.append(float(self.tail.extreme_1d(float(a), float(b), self.R, op)))
            else:
                vals.append(self.tail.c_right)
        return float(min(vals) if op == "min" else max(vals))

    # level tables ---------------------------------------------------------------
    def m_range(self, k: int, t: Sequence[int]) -> list[range]:
        R = Fraction(2) ** self.K
        return [_index_range(k, int(ti), -R, R) for ti in t]

    def level_tables(self, t: Sequence[int], kmax: int, kmin: int | None = None, op: str = "sum") -> dict[int, LevelTable]:
        """Tables for levels kmin..kmax (default kmin = -L) of grid ``t``."""
        t = tuple(int(v) for v in t)
        if len(t) != self.n:
            raise ValueError("shift dimension mismatch")
        kmin = -self.L if kmin is None else kmin
        if kmin < -self.L:
            raise ValueError("levels finer than the mesh are not tabulated")
        key = ("tables", t, kmax, op)
        if key in self._cache:
            tabs = self._cache[key]
            return {k: v for k, v in tabs.items() if k >= kmin}
        tabs: dict[int, LevelTable] = {}
        tabs[-self.L] = self._finest_table(t, op)
        for k in range(-self.L + 1, kmax + 1):
            tabs[k] = self._coarsen(tabs[k - 1], k, t, op)
        self._cache[key] = tabs
        return {k: v for k, v in tabs.items() if k >= kmin}

    def _finest_table(self, t, op) -> LevelTable:
        k = -self.L
        s = level_sign(k)
        ranges = self.m_range(k, t)
        axis_data = []
        for ti, rg in zip(t, ranges):
            m = np.arange(rg.start, rg.stop)
            # start of the cube in third-cell units from the box's left edge
            i0 = 3 * m + s * ti + 3 * 2 ** (self.K + self.L)
            c = np.floor_divide(i0, 3)
            r = i0 - 3 * c
            axis_data.append((m, c, r))
        pad = 1
        if self.n == 1:
            padded = np.zeros(self.N + 2 * pad)
            padded[pad:-pad] = self.values
            m, c, r = axis_data[0]
            v0 = padded[c + pad]
            v1 = padded[np.minimum(c + 1 + pad, self.N + 2 * pad - 1)]
            a = self.h * (m + s * t[0] / 3.0)
            b = a + self.h
            out_mask = (a < -self.R) | (b > self.R)
            if op == "sum":
                data = self.h * ((3 - r) * v0 + r * v1) / 3.0
                if np.any(out_mask):
                    data = data + np.where(out_mask, self.tail.integral_1d(a, b, self.R), 0.0)
            else:
                red = np.minimum if op == "min" else np.maximum
                in0 = (c >= 0) & (c < self.N)
                in1 = (r > 0) & (c + 1 >= 0) & (c + 1 < self.N)
                worst = np.inf if op == "min" else -np.inf
                data = np.where(in0, v0, worst)
                data = np.where(in1, red(data, v1), data)
                if np.any(out_mask):
                    data = np.where(out_mask, red(data, self.tail.extreme_1d(a, b, self.R, op)), data)
            return LevelTable(k, t, (int(ranges[0].start),), data)
        padded = np.full((self.N + 2 * pad,) * 2, self.tail.c_right)
        padded[pad:-pad, pad:-pad] = self.values
        (mx, cx, rx), (my, cy, ry) = axis_data
        top = self.N + 2 * pad - 1
        v00 = padded[np.ix_(cx + pad, cy + pad)]
        v10 = padded[np.ix_(np.minimum(cx + 1 + pad, top), cy + pad)]
        v01 = padded[np.ix_(cx + pad, np.minimum(cy + 1 + pad, top))]
        v11 = padded[np.ix_(np.minimum(cx + 1 + pad, top), np.minimum(cy + 1 + pad, top))]
        if op == "sum":
            wx0, wx1 = (3 - rx) / 3.0, rx / 3.0
            wy0, wy1 = (3 - ry) / 3.0, ry / 3.0
            data = self.h ** 2 * (
                np.outer(wx0, wy0) * v00 + np.outer(wx1, wy0) * v10 + np.outer(wx0, wy1) * v01 + np.outer(wx1, wy1) * v11
            )
        else:
            red = np.minimum if op == "min" else np.maximum
            px = (rx > 0)[:, None]
            py = (ry > 0)[None, :]
            data = v00
            data = np.where(px, red(data, v10), data)
            data = np.where(py, red(data, v01), data)
            data = np.where(px & py, red(data, v11), data)
        return LevelTable(k, t, (int(ranges[0].start), int(ranges[1].start)), data)

    def _child_fill(self, kc: int, t, idx: np.ndarray, axis_ti: int, op: str):
        """Tail values for children outside the previous table (1D only)."""
        s = level_sign(kc)
        hk = 2.0 ** kc
        a = hk * (idx + s * axis_ti / 3.0)
        b = a + hk
        if op == "sum":
            return self.tail.integral_1d(a, b, self.R)
        return self.tail.extreme_1d(a, b, self.R, op)

    def _coarsen(self, prev: LevelTable, k: int, t, op: str) -> LevelTable:
        s = level_sign(k)
        ranges = self.m_range(k, t)
        red = (lambda x, y: x + y) if op == "sum" else (np.minimum if op == "min" else np.maximum)
        if self.n == 1:
            m = np.arange(ranges[0].start, ranges[0].stop)
            c0 = 2 * m + s * t[0]
            out = None
            for e in (0, 1):
                ci = c0 + e
                j = ci - prev.m_lo[0]
                ok = (j >= 0) & (j < prev.data.shape[0])
                vals = np.where(ok, prev.data[np.clip(j, 0, prev.data.shape[0] - 1)], 0.0)
                if not np.all(ok):
                    fill = self._child_fill(k - 1, t, ci, t[0], op)
                    vals = np.where(ok, vals, fill)
                out = vals if out is None else red(out, vals)
            return LevelTable(k, t, (int(ranges[0].start),), out)
        mx = np.arange(ranges[0].start, ranges[0].stop)
        my = np.arange(ranges[1].start, ranges[1].stop)
        child_vol = 2.0 ** (2 * (k - 1))
        c = self.tail.c_right
        fill = c * child_vol if op == "sum" else c
        out = None
        for ex in (0, 1):
            jx = 2 * mx + s * t[0] + ex - prev.m_lo[0]
            okx = (jx >= 0) & (jx < prev.data.shape[0])
            for ey in (0, 1):
                jy = 2 * my + s * t[1] + ey - prev.m_lo[1]
                oky = (jy >= 0) & (jy < prev.data.shape[1])
                vals = prev.data[np.ix_(np.clip(jx, 0, prev.data.shape[0] - 1), np.clip(jy, 0, prev.data.shape[1] - 1))]
                ok = np.outer(okx, oky)
                vals = np.where(ok, vals, fill)
                out = vals if out is None else red(out, vals)
        return LevelTable(k, t, (int(ranges[0].start), int(ranges[1].start)), out)

    def center_indices(self, k: int, t: Sequence[int]) -> list[np.ndarray]:
        """Per axis, the index m of the level-k cube of grid t containing each cell center."""
        if k < -self.L:
            raise ValueError("level finer than the mesh")
        s = level_sign(k)
        W = 2 ** (k + self.L)
        X = 6 * (np.arange(self.N, dtype=np.int64) - 2 ** (self.K + self.L)) + 3
        return [np.floor_divide(X - 2 * W * s * int(ti), 6 * W) for ti in t]

    def at_centers(self, table: LevelTable) -> np.ndarray:
        """Broadcast a level table to the cell centers."""
        idx = self.center_indices(table.k, table.t)
        if self.n == 1:
            return table.data[idx[0] - table.m_lo[0]]
        return table.data[np.ix_(idx[0] - table.m_lo[0], idx[1] - table.m_lo[1])]

    def cube_rows(self, k: int, t: Sequence[int]) -> "CubeRows":
        """All level-k cubes of grid t meeting the box, as cell distributions.

        Cells outside the box are dropped (their weight is still counted in
        the normalization by |Q|), so the rows describe ``χ_box f`` exactly.
        """
        if k < -self.L:
            raise ValueError("level finer than the mesh")
        key = ("rows", k, tuple(t))
        if key in self._cache:
            return self._cache[key]
        s = level_sign(k)
        W = 2 ** (k + self.L)
        axes = []
        for ti, rg in zip(t, self.m_range(k, t)):
            m = np.arange(rg.start, rg.stop, dtype=np.int64)
            i0 = 3 * W * m + W * s * int(ti) + 3 * 2 ** (self.K + self.L)
            c = np.floor_divide(i0, 3)
            r = i0 - 3 * c
            span = min(W + 1, self.N)
            start = np.clip(c, 0, max(self.N - span, 0))
            cells = start[:, None] + np.arange(span, dtype=np.int64)[None, :]
            w = np.where((cells > c[:, None]) & (cells < (c + W)[:, None]), 1.0, 0.0)
            w = np.where(cells == c[:, None], (3 - r[:, None]) / 3.0, w)
            w = np.where(cells == (c + W)[:, None], r[:, None] / 3.0, w)
            inside = (cells >= 0) & (cells < self.N)
            w = np.where(inside, w, 0.0) / W
            cells = np.clip(cells, 0, self.N - 1)
            # cells whose centres lie in the cube: W consecutive cells
            c_first = -np.floor_divide(-(2 * i0 - 3), 6)
            cspan = min(W, self.N)
            cstart = np.clip(c_first, 0, max(self.N - cspan, 0))
            ccols = cstart[:, None] + np.arange(cspan, dtype=np.int64)[None, :]
            cin = (ccols >= c_first[:, None]) & (ccols < (c_first + W)[:, None]) & (ccols < self.N)
            axes.append((m, cells, w, np.clip(ccols, 0, self.N - 1), cin))
        rows = CubeRows(self, k, tuple(int(v) for v in t), axes)
        self._cache[key] = rows
        return rows

    def __repr__(self) -> str:
        return f"MeshFunction(n={self.n}, K={self.K}, L={self.L}, tail={self.tail})"


class CubeRows:
    """Per-level cell distributions of cubes (see :meth:`MeshFunction.cube_rows`).

    ``gather(values)`` returns an array of shape (cubes, cells-per-cube) with
    matching ``weights``; ``inside_box`` marks cubes contained in the box.
    """

    def __init__(self, mesh: MeshFunction, k, t, axes):
        self.mesh, self.k, self.t, self._axes = mesh, k, t, axes
        self.m = [a[0] for a in axes]
        if mesh.n == 1:
            _, cells, w, ccols, cin = axes[0]
            self.cells = cells
            self.weights = w
            self.center_cells = ccols
            self.center_mask = cin
        else:
            (_, cx, wx, ccx, cinx), (_, cy, wy, ccy, ciny) = axes
            nx, sx = cx.shape
            ny, sy = cy.shape
            N = mesh.N
            self.cells = (cx[:, None, :, None] * N + cy[None, :, None, :]).reshape(nx * ny, sx * sy)
            self.weights = (wx[:, None, :, None] * wy[None, :, None, :]).reshape(nx * ny, sx * sy)
            wc = ccx.shape[1]
            self.center_cells = (ccx[:, None, :, None] * N + ccy[None, :, None, :]).reshape(nx * ny, wc * wc)
            self.center_mask = (cinx[:, None, :, None] & ciny[None, :, None, :]).reshape(nx * ny, wc * wc)
        self.shape = tuple(len(m) for m in self.m)

    @property
    def inside_box(self) -> np.ndarray:
        R = Fraction(2) ** self.mesh.K
        ok = None
        for m, ti in zip(self.m, self.t):
            s = level_sign(self.k)
            lo = (m + s * ti / 3.0) * 2.0 ** self.k
            v = (lo >= -float(R)) & (lo + 2.0 ** self.k <= float(R))
            ok = v if ok is None else (ok[:, None] & v[None, :]).ravel()
        return ok

    def gather(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values).ravel()[self.cells]

    def cube(self, row: int) -> DyadicCube:
        idx = np.unravel_index(row, self.shape)
        return DyadicCube(self.k, tuple(int(m[i]) for m, i in zip(self.m, idx)), self.t)

    def row_of_centers(self) -> np.ndarray:
        """Row index of the cube containing each cell centre (flattened cells)."""
        idx = self.mesh.center_indices(self.k, self.t)
        if self.mesh.n == 1:
            return idx[0] - self.m[0][0]
        ix = idx[0] - self.m[0][0]
        iy = idx[1] - self.m[1][0]
        return (ix[:, None] * self.shape[1] + iy[None, :]).ravel()


def _unchecked(values: np.ndarray, like: MeshFunction, tail: Tail) -> MeshFunction:
    """Mesh function that may hold ``inf`` cells (negative powers of zero)."""
    out = object.__new__(MeshFunction)
    out.__dict__.update(like.__dict__)
    v = np.array(values, dtype=float)
    v.setflags(write=False)
    out.values = v
    out.tail = tail
    out._cache = {}
    return out


@dataclass
class WeightPair:
    u: MeshFunction
    sigma: MeshFunction

    def __post_init__(self):
        for name, w in (("u", self.u), ("sigma", self.sigma)):
            if np.any(w.values < 0):
                raise ValueError(f"weight {name} has negative values")
        self.u._check_same(self.sigma)


# module-level operations ------------------------------------------------------------
def average(f: MeshFunction, Q: DyadicCube) -> float:
    """⟨f⟩_Q with exact overlap fractions; tail integrals outside the box."""
    return f.integral(Q) / float(Q.volume)


def weighted_average(f: MeshFunction, sigma: MeshFunction, Q: DyadicCube) -> float:
    """(∫_Q f σ)/σ(Q), defined as 0 when σ(Q) = 0."""
    s = sigma.integral(Q)
    if s == 0.0:
        return 0.0
    return (f * sigma).integral(Q) / s


def measure(sigma: MeshFunction, S) -> float:
    """σ(S) for a cube or a boolean cell mask."""
    if isinstance(S, DyadicCube):
        return sigma.integral(S)
    mask = np.asarray(S, dtype=bool)
    return float(np.sum(sigma.values[mask]) * sigma.cell_volume)


def lp_norm(f: MeshFunction, w: MeshFunction | None, p: float, mode: str = "measure") -> float:
    """L^p norm on the box.

    mode='measure': (∫|f|^p w dx)^{1/p};  mode='multiplier': (∫|f w|^p dx)^{1/p}.
    ``w=None`` means Lebesgue measure.  Tails are not integrated; the product
    must vanish outside the box.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    fv = np.abs(f.values)
    if w is None:
        wv = np.ones_like(fv)
    else:
        f._check_same(w)
        wv = w.values
    if not (np.all(np.isfinite(fv)) and np.all(np.isfinite(wv))):
        raise ValueError("non-finite cell values")
    if mode == "measure":
        integrand = fv ** p * wv
    elif mode == "multiplier":
        integrand = (fv * np.abs(wv)) ** p
    else:
        raise ValueError("mode must be 'measure' or 'multiplier'")
    return float(np.sum(integrand) * f.cell_volume) ** (1.0 / p)


def weight_from_spec(spec: dict, K: int, L: int, n: int = 1) -> MeshFunction:
    """Build a weight from the JSON mini-language.

    {"kind":"power","exponent":s,"support":"abs_gt_1"|"all"|"positive"|"abs_lt_1"}
    {"kind":"indicator","interval":[a,b]}  (n=1) or {"kind":"indicator","box":[[a,b],[c,d]]}
    {"kind":"samples","level":L,"values":[...]}  cell values on the box, n=1
    {"kind":"constant","value":c}
    {"kind":"factored",...} is handled by the gallery module.
    """
    kind = spec.get("kind")
    if kind == "power":
        if n != 1:
            raise ValueError("power weights are one-dimensional")
        return MeshFunction.power_weight(float(spec["exponent"]), K, L, spec.get("support", "all"), float(spec.get("coef", 1.0)))
    if kind == "indicator":
        if "interval" in spec:
            a, b = spec["interval"]
            return MeshFunction.indicator([(a, b)], K, L, float(spec.get("value", 1.0)))
        return MeshFunction.indicator([tuple(x) for x in spec["box"]], K, L, float(spec.get("value", 1.0)))
    if kind == "constant":
        return MeshFunction.constant(float(spec["value"]), K, L, n)
    if kind == "samples":
        vals = np.asarray(spec["values"], dtype=float)
        lev = int(spec.get("level", L))
        if lev != L:
            raise ValueError("sample level must equal the mesh level")
        return MeshFunction(vals, K, L)
    if kind == "factored":
        raise ValueError("factored specs describe a weight pair; use gallery.pair_from_spec")
    raise ValueError(f"unknown weight kind {kind!r}")
