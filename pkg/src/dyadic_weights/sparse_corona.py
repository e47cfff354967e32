"""Stopping-time constructions: CZ cubes, sparse families and corona forests.

All selections run top-down over the level tables of one grid: a cube is
selected when it exceeds its threshold and no strict ancestor in the window
does.  Thresholds are compared strictly (``>``).

E-sets are described by cubes (``E(Q) = Q`` minus the maximal strictly smaller
members) and exported as run-length encodings on the third-cell lattice, on
which every shifted cube of level ``>= -L`` has integer corners.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .grid import DyadicCube, children, format_cube, level_sign, parent
from .mesh import MeshFunction

__all__ = [
    "SparseFamily",
    "CoronaForest",
    "WindowTooSmall",
    "CertificationError",
    "NoParentError",
    "cz_cubes",
    "cz_family",
    "sparse_from_maximal",
    "sparse_from_averages",
    "manual_family",
    "certify_sparse",
    "corona_build",
    "parent_in",
    "default_roots",
]


class WindowTooSmall(ValueError):
    """A coarsest-level average exceeds the threshold (⟨f⟩_Q ↛ 0 in the window)."""


class CertificationError(ValueError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class NoParentError(KeyError):
    pass


# --- table plumbing -----------------------------------------------------------------------
class _Levels:
    """Per-level value arrays of one grid plus the child-to-parent index maps."""

    def __init__(self, f: MeshFunction, t, kmin: int, kmax: int):
        self.f, self.t, self.kmin, self.kmax = f, tuple(t), kmin, kmax
        self.tabs = f.level_tables(self.t, kmax, kmin=kmin)
        self.parent_idx = {}
        for k in range(kmin, kmax):
            ch, pa = self.tabs[k], self.tabs[k + 1]
            sp = level_sign(k + 1)
            maps = []
            for ax, ti in enumerate(self.t):
                m = ch.m_lo[ax] + np.arange(ch.data.shape[ax])
                maps.append(np.floor_divide(m - sp * ti, 2) - pa.m_lo[ax])
            self.parent_idx[k] = maps

    def lift(self, arr_parent: np.ndarray, k: int) -> np.ndarray:
        """Values of the level-(k+1) array at the parents of level-k cubes."""
        maps = self.parent_idx[k]
        if len(maps) == 1:
            return arr_parent[maps[0]]
        return arr_parent[np.ix_(maps[0], maps[1])]

    def cube(self, k: int, idx) -> DyadicCube:
        tab = self.tabs[k]
        return DyadicCube(k, tuple(int(i) + lo for i, lo in zip(idx, tab.m_lo)), self.t)


def _maximal(levels: _Levels, values: dict, thresholds: dict, below_top_only: bool = False, read: dict | None = None) -> list:
    """Maximal cubes with values[k] > thresholds[k] (arrays or scalars).

    With ``read`` the result is a list of (cube, read[k][idx]) pairs."""
    out = []
    covered = np.zeros(levels.tabs[levels.kmax].data.shape, dtype=bool)
    if below_top_only:
        covered[:] = False
    for k in range(levels.kmax, levels.kmin - 1, -1):
        if k < levels.kmax:
            covered = levels.lift(covered_next, k)
        exceed = values[k] > thresholds[k]
        if below_top_only and k == levels.kmax:
            exceed = np.zeros_like(exceed)
        sel = exceed & ~covered
        for idx in zip(*np.nonzero(sel)):
            q = levels.cube(k, idx)
            out.append(q if read is None else (q, float(read[k][idx])))
        covered_next = covered | exceed
    return out


def _root_ids(levels: _Levels) -> dict:
    top = levels.tabs[levels.kmax].data
    ids = {levels.kmax: np.arange(top.size).reshape(top.shape)}
    for k in range(levels.kmax - 1, levels.kmin - 1, -1):
        ids[k] = levels.lift(ids[k + 1], k)
    return ids


# --- families ----------------------------------------------------------------------------
@dataclass
class SparseFamily:
    grid: tuple[int, ...]
    cubes: tuple[DyadicCube, ...]
    generator: str
    K: int
    L: int
    n: int
    params: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    certified: bool = False
    certificate: dict | None = None

    def __post_init__(self):
        self.cubes = tuple(sorted(set(self.cubes), key=lambda q: (-q.k, q.m)))
        for q in self.cubes:
            if q.t != tuple(self.grid):
                raise ValueError("all cubes of a sparse family must belong to its grid")
        self._structure()

    def _structure(self):
        key = {(q.k, q.m): q for q in self.cubes}
        t = tuple(self.grid)
        self.parent_of: dict = {}
        self.children_of: dict = {q: [] for q in self.cubes}
        top = max((q.k for q in self.cubes), default=0)
        nearest: dict = {}  # (k, m) -> nearest member ancestor-or-self (None: none)
        for q in self.cubes:
            path, k, m, anc = [], q.k, q.m, None
            while k < top:
                sp = level_sign(k + 1)
                k, m = k + 1, tuple((mi - sp * ti) // 2 for mi, ti in zip(m, t))
                if (k, m) in nearest:
                    anc = nearest[(k, m)]
                    break
                path.append((k, m))
                if (k, m) in key:
                    anc = key[(k, m)]
                    break
            for c in path:
                nearest[c] = key.get(c, anc)
            nearest[(q.k, q.m)] = q
            self.parent_of[q] = anc
            if anc is not None:
                self.children_of[anc].append(q)
        self.roots = [q for q in self.cubes if self.parent_of[q] is None]

    def __len__(self):
        return len(self.cubes)

    def e_cells(self, Q: DyadicCube) -> tuple[int, int]:
        """(|E(Q)|, |Q|) as integer counts of finest-level cells."""
        n, L = self.n, self.L
        full = 1 << (n * (Q.k + L))
        return full - sum(1 << (n * (c.k + L)) for c in self.children_of[Q]), full

    def e_measure(self, Q: DyadicCube) -> Fraction:
        """|E(Q)| exactly: |Q| minus the maximal strictly smaller members."""
        e, full = self.e_cells(Q)
        return Fraction(e, full) * Q.volume

    def owner_of_centers(self, mesh: MeshFunction) -> np.ndarray:
        """Index into ``cubes`` of the deepest member containing each cell centre (-1: none)."""
        out = np.full(mesh.values.shape, -1, dtype=np.int64)
        for i, Q in enumerate(self.cubes):  # coarse first, finer overwrite
            out[mesh.center_slices(Q)] = i
        return out

    def e_runs(self, Q: DyadicCube) -> list[list[int]]:
        return _e_runs(Q, self.children_of[Q], self.L)

    def to_json(self) -> dict:
        return {
            "kind": "sparse_family",
            "generator": self.generator,
            "grid": list(self.grid),
            "mesh": {"K": self.K, "L": self.L, "n": self.n},
            "params": self.params,
            "certified": self.certified,
            "nodes": [
                {
                    "cube": format_cube(q),
                    "label": self.labels.get(q),
                    "value": self.values.get(q),
                    "parent": format_cube(self.parent_of[q]) if self.parent_of[q] else None,
                    "E_measure": float(self.e_measure(q)),
                    "E_rle": self.e_runs(q),
                }
                for q in self.cubes
            ],
        }


def _third_range(Q: DyadicCube, L: int, axis: int) -> tuple[int, int]:
    """[start, stop) of Q on one axis in units of a third of a cell (origin 0)."""
    W = 2 ** (Q.k + L) if Q.k + L >= 0 else None
    if W is None:
        raise ValueError("cube finer than the mesh")
    s = level_sign(Q.k)
    start = 3 * W * Q.m[axis] + W * s * Q.t[axis]
    return start, start + 3 * W


def _e_runs(Q: DyadicCube, subs: Sequence[DyadicCube], L: int) -> list[list[int]]:
    """Runs [offset, length] of E(Q) in the third-cell lattice of Q (row-major in 2D)."""
    if Q.n == 1:
        a, b = _third_range(Q, L, 0)
        cuts = sorted(_third_range(c, L, 0) for c in subs)
        runs, pos = [], a
        for lo, hi in cuts:
            if lo > pos:
                runs.append([pos - a, lo - pos])
            pos = max(pos, hi)
        if pos < b:
            runs.append([pos - a, b - pos])
        return runs
    (ax, bx), (ay, by) = _third_range(Q, L, 0), _third_range(Q, L, 1)
    mask = np.ones((bx - ax, by - ay), dtype=bool)
    for c in subs:
        (cx0, cx1), (cy0, cy1) = _third_range(c, L, 0), _third_range(c, L, 1)
        mask[cx0 - ax:cx1 - ax, cy0 - ay:cy1 - ay] = False
    flat = np.concatenate([[False], mask.ravel(), [False]])
    d = np.diff(flat.astype(np.int8))
    starts = np.nonzero(d == 1)[0]
    stops = np.nonzero(d == -1)[0]
    return [[int(s), int(e - s)] for s, e in zip(starts, stops)]


def default_roots(f: MeshFunction, grid, kmax: int | None = None) -> list[DyadicCube]:
    kmax = f.K if kmax is None else kmax
    tab = f.level_tables(tuple(grid), kmax, kmin=kmax)[kmax]
    return list(tab.cubes())


def _averages(f: MeshFunction, levels: _Levels, alpha: float = 0.0) -> dict:
    n = f.n
    return {k: levels.tabs[k].data * 2.0 ** (k * (alpha - n)) for k in range(levels.kmin, levels.kmax + 1)}


def _check_nonneg(f: MeshFunction):
    if np.any(f.values < 0):
        raise ValueError("the construction needs f >= 0")
    if not f.tail.is_zero:
        raise ValueError("the construction needs f with a zero tail")


def cz_cubes(f: MeshFunction, lam: float, grid=None, kmax: int | None = None) -> list[DyadicCube]:
    """Maximal cubes of one grid (levels -L..kmax) with ⟨f⟩_Q > λ."""
    _check_nonneg(f)
    t = tuple([0] * f.n) if grid is None else tuple(grid)
    kmax = f.K if kmax is None else kmax
    levels = _Levels(f, t, -f.L, kmax)
    avg = _averages(f, levels)
    if np.any(avg[kmax] > lam):
        raise WindowTooSmall(f"average {float(avg[kmax].max())} at the coarsest level exceeds λ={lam}")
    return _maximal(levels, avg, {k: lam for k in avg})


def cz_family(f: MeshFunction, grid=None, kmax: int | None = None, a: float | None = None) -> SparseFamily:
    """⋃_k {Q_j^k}: CZ cubes at the thresholds a^k (a >= 2^{n+1}) above the
    largest coarsest-level average."""
    _check_nonneg(f)
    n = f.n
    a = 2.0 ** (n + 1) if a is None else float(a)
    if a < 2.0 ** (n + 1):
        raise ValueError("the CZ family needs a >= 2^{n+1}")
    t = tuple([0] * n) if grid is None else tuple(grid)
    kmax = f.K if kmax is None else kmax
    levels = _Levels(f, t, -f.L, kmax)
    avg = _averages(f, levels)
    top = float(avg[kmax].max())
    vmax = max(float(v.max()) for v in avg.values())
    cubes, labels, vals = [], {}, {}
    if vmax > 0:
        km = math.ceil(math.log(top, a)) if top > 0 else math.floor(math.log(vmax, a))
        while a ** km < top:
            km += 1
        k = km
        while a ** k < vmax:
            sel = _maximal(levels, avg, {j: a ** k for j in avg}, read=avg)
            for q, val in sel:
                cubes.append(q)
                labels.setdefault(q, k)
                vals[q] = val
            k += 1
    fam = SparseFamily(t, tuple(cubes), "cz", f.K, f.L, n, {"a": a, "kmax": kmax}, labels, vals)
    certify_sparse(fam)
    return fam


def sparse_from_maximal(f: MeshFunction, alpha: float, grid=None, kmax: int | None = None) -> SparseFamily:
    """Family for L_α^S with a = 2^{n+1-α}.

    Each coarsest-level cube R with v(R) = |R|^{α/n}⟨f⟩_R > 0 is a member;
    inside R the members of band j >= 1 are the maximal cubes with
    v > v(R) a^j.  Non-root members satisfy θ < v <= 2^{n-α} θ for their
    band threshold θ.
    """
    _check_nonneg(f)
    n = f.n
    if not 0 <= alpha < n:
        raise ValueError("alpha must lie in [0, n)")
    a = 2.0 ** (n + 1 - alpha)
    t = tuple([0] * n) if grid is None else tuple(grid)
    kmax = f.K if kmax is None else kmax
    levels = _Levels(f, t, -f.L, kmax)
    v = _averages(f, levels, alpha)
    rid = _root_ids(levels)
    root_v = v[kmax].ravel()
    cubes, labels, values = [], {}, {}
    for idx in zip(*np.nonzero(v[kmax] > 0)):
        q = levels.cube(kmax, idx)
        cubes.append(q)
        labels[q] = 0
        values[q] = float(v[kmax][idx])
    vmax = max(float(x.max()) for x in v.values())
    j = 1
    pos_roots = root_v > 0
    while np.any(pos_roots) and np.any(root_v[pos_roots] * a ** j < vmax):
        thr = {}
        for k in v:
            th = np.where(root_v > 0, root_v * a ** j, np.inf)
            thr[k] = th[rid[k]]
        for q, val in _maximal(levels, v, thr, below_top_only=True, read=v):
            cubes.append(q)
            labels[q] = j
            values[q] = val
        j += 1
    fam = SparseFamily(t, tuple(cubes), "maximal-levels", f.K, f.L, n, {"a": a, "alpha": alpha, "kmax": kmax}, labels, values)
    certify_sparse(fam)
    return fam


def sparse_from_averages(f: MeshFunction, grid=None, kmax: int | None = None) -> SparseFamily:
    """Family for I_α^S with a = 2^{n+1} and the global bands a^k < ⟨f⟩_Q <= a^{k+1}.

    Coarsest-level cubes with positive average are members (labelled by their
    band).  Inside a root R the members labelled k are the maximal cubes with
    ⟨f⟩ > a^k, for every k with a^k >= 2⟨f⟩_R.
    """
    _check_nonneg(f)
    n = f.n
    a = 2.0 ** (n + 1)
    t = tuple([0] * n) if grid is None else tuple(grid)
    kmax = f.K if kmax is None else kmax
    levels = _Levels(f, t, -f.L, kmax)
    avg = _averages(f, levels)
    rid = _root_ids(levels)
    root_avg = avg[kmax].ravel()
    cubes, labels, values = [], {}, {}
    pos = root_avg > 0
    if not np.any(pos):
        fam = SparseFamily(t, (), "average-levels", f.K, f.L, n, {"a": a, "kmax": kmax})
        certify_sparse(fam)
        return fam
    k0 = np.full(root_avg.shape, np.iinfo(np.int64).max)
    for i in np.nonzero(pos)[0]:
        r = float(root_avg[i])
        k = math.floor(math.log(2 * r, a))
        while a ** k < 2 * r:
            k += 1
        while a ** (k - 1) >= 2 * r:
            k -= 1
        k0[i] = k
        q = levels.cube(kmax, np.unravel_index(i, avg[kmax].shape))
        cubes.append(q)
        labels[q] = _band(r, a)
        values[q] = r
    vmax = max(float(x.max()) for x in avg.values())
    kk = int(k0[pos].min())
    while a ** kk < vmax:
        thr = {}
        th = np.where(pos & (k0 <= kk), a ** kk, np.inf)
        for k in avg:
            thr[k] = th[rid[k]]
        for q, val in _maximal(levels, avg, thr, below_top_only=True, read=avg):
            cubes.append(q)
            labels.setdefault(q, kk)
            values[q] = val
        kk += 1
    fam = SparseFamily(t, tuple(cubes), "average-levels", f.K, f.L, n, {"a": a, "kmax": kmax}, labels, values)
    certify_sparse(fam)
    return fam


def _band(avg: float, a: float) -> int:
    """The k with a^k < avg <= a^{k+1}."""
    k = math.floor(math.log(avg, a))
    while a ** k >= avg:
        k -= 1
    while a ** (k + 1) < avg:
        k += 1
    return k


def manual_family(cubes: Iterable[DyadicCube], K: int, L: int, certify: bool = True) -> SparseFamily:
    cubes = list(cubes)
    if not cubes:
        raise ValueError("empty manual family")
    fam = SparseFamily(cubes[0].t, tuple(cubes), "manual", K, L, cubes[0].n)
    if certify:
        certify_sparse(fam)
    return fam


def certify_sparse(S: SparseFamily, raise_on_failure: bool = True) -> dict:
    """Recompute E-sets, check disjointness and |E(Q)| >= |Q|/2 exactly.

    For maximal-levels families the stronger bound |⋃ children| <= 2^{-α-1}|P|
    is checked as well.
    """
    S._structure()
    violations = []
    worst = Fraction(1)
    strong = S.generator == "maximal-levels"
    alpha = S.params.get("alpha", 0.0)
    strong_worst = 0.0
    for Q in S.cubes:
        e, full = S.e_cells(Q)
        if Fraction(e, full) < worst:
            worst = Fraction(e, full)
        ratio = Fraction(e, full)
        if 2 * e < full:
            violations.append({"cube": format_cube(Q), "E_ratio": float(ratio), "rule": "|E(Q)| >= |Q|/2"})
        if strong:
            used = 1 - float(ratio)
            strong_worst = max(strong_worst, used)
            if used > 2.0 ** (-alpha - 1) * (1 + 1e-12):
                violations.append({"cube": format_cube(Q), "union_ratio": used, "rule": "|union| <= 2^{-α-1}|P|"})
    disjoint = _disjointness(S)
    if not disjoint:
        violations.append({"cube": None, "rule": "E-sets pairwise disjoint"})
    report = {
        "ok": not violations,
        "members": len(S.cubes),
        "min_E_ratio": float(worst),
        "disjoint": disjoint,
        "violations": violations,
    }
    if strong:
        report["max_union_ratio"] = strong_worst
        report["strong_bound"] = 2.0 ** (-alpha - 1)
    S.certificate = report
    S.certified = report["ok"]
    if violations and raise_on_failure:
        raise CertificationError(f"sparsity certificate failed at {violations[0]}", report)
    return report


def _disjointness(S: SparseFamily) -> bool:
    """Count E-set coverage on the third-cell lattice; every point at most once."""
    if not S.cubes:
        return True
    if S.n == 1:
        rngs = [_third_range(q, S.L, 0) for q in S.cubes]
        lo = min(r[0] for r in rngs)
        hi = max(r[1] for r in rngs)
        diff = np.zeros(hi - lo + 1, dtype=np.int64)
        for q, (a, b) in zip(S.cubes, rngs):
            diff[a - lo] += 1
            diff[b - lo] -= 1
            for c in S.children_of[q]:
                ca, cb = _third_range(c, S.L, 0)
                diff[ca - lo] -= 1
                diff[cb - lo] += 1
        cover = np.cumsum(diff)[:-1]
        return bool(cover.max() <= 1 and cover.min() >= 0)
    rx = [_third_range(q, S.L, 0) for q in S.cubes]
    ry = [_third_range(q, S.L, 1) for q in S.cubes]
    x0, x1 = min(r[0] for r in rx), max(r[1] for r in rx)
    y0, y1 = min(r[0] for r in ry), max(r[1] for r in ry)
    diff = np.zeros((x1 - x0 + 1, y1 - y0 + 1), dtype=np.int64)

    def add(q, s):
        (a, b), (c, d) = _third_range(q, S.L, 0), _third_range(q, S.L, 1)
        diff[a - x0, c - y0] += s
        diff[b - x0, c - y0] -= s
        diff[a - x0, d - y0] -= s
        diff[b - x0, d - y0] += s

    for q in S.cubes:
        add(q, 1)
        for c in S.children_of[q]:
            add(c, -1)
    cover = np.cumsum(np.cumsum(diff, axis=0), axis=1)[:-1, :-1]
    return bool(cover.max() <= 1 and cover.min() >= 0)


# --- corona ------------------------------------------------------------------------------
@dataclass
class CoronaForest:
    grid: tuple[int, ...]
    roots: list[DyadicCube]
    nodes: list[DyadicCube]
    parent: dict
    children: dict
    averages: dict
    sigma_mass: dict
    sigma_E: dict
    K: int
    L: int
    n: int

    def certificate(self) -> dict:
        worst = math.inf
        bad = []
        for F in self.nodes:
            m = self.sigma_mass[F]
            if m <= 0:
                continue
            r = self.sigma_E[F] / m
            worst = min(worst, r)
            if self.sigma_E[F] < 0.5 * m * (1 - 1e-12):
                bad.append(format_cube(F))
        return {"ok": not bad, "min_ratio": worst if worst < math.inf else None, "violations": bad, "nodes": len(self.nodes)}

    def to_json(self) -> dict:
        return {
            "kind": "corona_forest",
            "grid": list(self.grid),
            "mesh": {"K": self.K, "L": self.L, "n": self.n},
            "certificate": self.certificate(),
            "nodes": [
                {
                    "cube": format_cube(F),
                    "average": self.averages[F],
                    "sigma": self.sigma_mass[F],
                    "sigma_E": self.sigma_E[F],
                    "parent": format_cube(self.parent[F]) if self.parent[F] else None,
                    "children": [format_cube(c) for c in self.children[F]],
                    "E_rle": _e_runs(F, self.children[F], self.L),
                }
                for F in self.nodes
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1)


def _descendant_block(k: int, m: tuple, t: tuple, depth: int) -> list[tuple[int, int]]:
    """Index ranges (per axis) of the descendants of cube (k, m) ``depth`` levels down."""
    out = []
    for mi, ti in zip(m, t):
        lo, w = mi, 1
        for d in range(depth):
            lo = 2 * lo + level_sign(k - d) * ti
            w *= 2
        out.append((lo, lo + w))
    return out


def corona_build(f: MeshFunction, sigma: MeshFunction, roots: Sequence[DyadicCube] | None = None, grid=None) -> CoronaForest:
    """Corona cubes of f with respect to σ below the given disjoint roots.

    The children of a node F are the maximal strict subcubes Q with
    ⟨f⟩_{Q,σ} > 2⟨f⟩_{F,σ}; cubes with σ(Q) = 0 are never selected.
    """
    if np.any(f.values < 0):
        raise ValueError("corona construction needs f >= 0")
    f._check_same(sigma)
    t = tuple([0] * f.n) if grid is None else tuple(grid)
    if roots is None:
        roots = default_roots(f, t)
    roots = sorted(roots, key=lambda q: (-q.k, q.m))
    for r in roots:
        if r.t != t:
            raise ValueError("roots must belong to the chosen grid")
    for i, a in enumerate(roots):
        for b in roots[i + 1:]:
            if a.intersects(b):
                raise ValueError("corona roots must be disjoint")
    kmax = max(r.k for r in roots)
    fs = f * sigma
    num = fs.level_tables(t, kmax)
    den = sigma.level_tables(t, kmax)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = {k: np.where(den[k].data > 0, num[k].data / np.where(den[k].data > 0, den[k].data, 1.0), 0.0) for k in den}

    def val(q):
        tab = den[q.k]
        idx = tuple(mi - lo for mi, lo in zip(q.m, tab.m_lo))
        return float(ratio[q.k][idx]), float(tab.data[idx])

    nodes, par, chi, avgs, mass, massE = [], {}, {}, {}, {}, {}
    stack = [(r, None) for r in reversed(roots)]
    while stack:
        F, P = stack.pop()
        vF, sF = val(F)
        nodes.append(F)
        par[F], avgs[F], mass[F] = P, vF, sF
        kids = []
        if sF > 0:
            thr = 2.0 * vF
            covered = None
            for depth in range(1, F.k + f.L + 1):
                k = F.k - depth
                block = _descendant_block(F.k, F.m, t, depth)
                tab = den[k]
                sl = tuple(slice(lo - off, hi - off) for (lo, hi), off in zip(block, tab.m_lo))
                # descendants may leave the tabulated range only when F sticks out of the box
                rb = _clip_block(ratio[k], sl)
                exceed = rb > thr
                if covered is None:
                    cov = np.zeros(exceed.shape, dtype=bool)
                else:
                    cov = covered
                    for ax in range(f.n):
                        cov = np.repeat(cov, 2, axis=ax)
                sel = exceed & ~cov
                for idx in zip(*np.nonzero(sel)):
                    kids.append(DyadicCube(k, tuple(int(i) + lo for i, (lo, _) in zip(idx, block)), t))
                covered = cov | exceed
                if covered.all():
                    break
        kids.sort(key=lambda q: (-q.k, q.m))
        chi[F] = kids
        massE[F] = sF - sum(val(c)[1] for c in kids)
        for c in reversed(kids):
            stack.append((c, F))
    return CoronaForest(t, list(roots), nodes, par, chi, avgs, mass, massE, f.K, f.L, f.n)


def _clip_block(arr: np.ndarray, sl: tuple) -> np.ndarray:
    """arr[sl] with zeros where the slice leaves the array."""
    shape = tuple(s.stop - s.start for s in sl)
    out = np.zeros(shape)
    src, dst = [], []
    for s, size in zip(sl, arr.shape):
        a, b = max(s.start, 0), min(s.stop, size)
        if b <= a:
            return out
        src.append(slice(a, b))
        dst.append(slice(a - s.start, b - s.start))
    out[tuple(dst)] = arr[tuple(src)]
    return out


def parent_in(Q: DyadicCube, forest: CoronaForest) -> DyadicCube:
    """Smallest forest node containing Q."""
    members = set(forest.nodes)
    top = max(r.k for r in forest.roots)
    if Q.t == forest.grid:
        p = Q
        while True:
            if p in members:
                return p
            if p.k >= top:
                break
            p = parent(p)
        raise NoParentError(f"{Q} lies outside every root")
    best = None
    for F in forest.nodes:
        if F.contains(Q) and (best is None or F.k < best.k):
            best = F
    if best is None:
        raise NoParentError(f"{Q} lies outside every root")
    return best
