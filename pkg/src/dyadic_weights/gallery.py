"""Named weight constructions: factored pairs and three counter-example families.

Each example returns the realized weights (on a mesh when that is meaningful)
together with curves of the quantity that stays bounded or diverges, indexed
by a truncation parameter.  Quantities that live far outside any desk-sized
mesh (blocks near e^k, integrals up to T = 2^30) are evaluated from their
closed piecewise description instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, stats

from .grid import all_shifts
from .mesh import MeshFunction, WeightPair, weight_from_spec
from .orlicz import YoungFunction, luxemburg_rows, power, power_log

__all__ = [
    "NamedExample",
    "factored_gamma",
    "cell_sup_maximal",
    "factored_pair",
    "pair_from_spec",
    "example_strong_failure",
    "example_weak_failure",
    "example_separated_vs_conjoined",
    "maximal_of_blocks",
    "linear_fit",
    "doubling_increments",
]


@dataclass
class NamedExample:
    id: str
    params: dict
    pair: WeightPair | None = None
    f: MeshFunction | None = None
    expected: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)  # quantity -> list[(parameter, value)]
    info: dict = field(default_factory=dict)

    def csv_rows(self) -> list[tuple[float, str, float]]:
        rows = []
        for name in sorted(self.curves):
            for par, val in self.curves[name]:
                rows.append((float(par), name, float(val)))
        return rows


# --- fits ----------------------------------------------------------------------------------------
def linear_fit(x: Sequence[float], y: Sequence[float]) -> dict:
    r = stats.linregress(np.asarray(x, float), np.asarray(y, float))
    return {"slope": float(r.slope), "intercept": float(r.intercept), "r2": float(r.rvalue ** 2)}


def doubling_increments(values: Sequence[float]) -> list[float]:
    return [b - a for a, b in zip(values, values[1:])]


# --- factored weights -------------------------------------------------------------------------
def factored_gamma(n: int, alpha: float, p: float, q: float) -> float:
    """γ = (α/n + 1/q - 1/p) / ((1/n)(1 + 1/q - 1/p)); requires 1/p - 1/q ≤ α/n."""
    if 1.0 / p - 1.0 / q > alpha / n + 1e-15:
        raise ValueError("factored weights need 1/p - 1/q <= α/n")
    return (alpha / n + 1.0 / q - 1.0 / p) / ((1.0 / n) * (1.0 + 1.0 / q - 1.0 / p))


def cell_sup_maximal(w: MeshFunction, gamma: float, kmin: int | None = None, kmax: int | None = None) -> np.ndarray:
    """Per cell, the sup of |P|^{γ/n} ⟨w⟩_P over window cubes P of all 3^n grids
    that meet the open cell.

    This dominates M_γ w at every point of the cell, so the factored pair built
    from it keeps the lemma's bound exactly on the mesh."""
    kmin = -w.L if kmin is None else kmin
    kmax = w.K if kmax is None else kmax
    n = w.n
    out = np.zeros(w.values.size)
    flat = w.values.ravel()
    for t in all_shifts(n):
        for k in range(kmin, kmax + 1):
            rows = w.cube_rows(k, t)
            vals = rows.gather(flat) if n == 1 else rows.gather(flat)
            avg = (rows.weights * vals).sum(axis=1) * 2.0 ** (k * gamma)
            meet = rows.weights > 0
            cells = np.where(meet, rows.cells, -1)
            contrib = np.where(meet, avg[:, None], 0.0)
            ok = cells >= 0
            np.maximum.at(out, cells[ok], contrib[ok])
    return out.reshape(w.values.shape)


def factored_pair(w1: MeshFunction, w2: MeshFunction, p: float, q: float, alpha: float) -> tuple[WeightPair, dict]:
    """u = w1 (M_γ w2)^{-q/p'}, σ = w2 (M_γ w1)^{-p'/q}, with M_γ realized per cell
    by :func:`cell_sup_maximal`.  Cells where the maximal function vanishes carry
    a zero weight (the corresponding w is zero there)."""
    n = w1.n
    gamma = factored_gamma(n, alpha, p, q)
    pp = p / (p - 1)
    m2 = cell_sup_maximal(w2, gamma)
    m1 = cell_sup_maximal(w1, gamma)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(m2 > 0, w1.values * np.where(m2 > 0, m2, 1.0) ** (-q / pp), 0.0)
        s = np.where(m1 > 0, w2.values * np.where(m1 > 0, m1, 1.0) ** (-pp / q), 0.0)
    pair = WeightPair(MeshFunction(u, w1.K, w1.L), MeshFunction(s, w1.K, w1.L))
    return pair, {"gamma": gamma}


def pair_from_spec(spec: dict, K: int, L: int, n: int = 1) -> tuple[WeightPair, dict]:
    """{"kind":"factored","w1":<weight>,"w2":<weight>,"p":..,"q":..,"alpha":..}
    or {"u":<weight>,"sigma":<weight>}."""
    if spec.get("kind") == "factored":
        w1 = weight_from_spec(spec["w1"], K, L, n)
        w2 = weight_from_spec(spec["w2"], K, L, n)
        return factored_pair(w1, w2, float(spec["p"]), float(spec["q"]), float(spec["alpha"]))
    return WeightPair(weight_from_spec(spec["u"], K, L, n), weight_from_spec(spec["sigma"], K, L, n)), {}


# --- strong-type failure ------------------------------------------------------------------------
def _block_endpoints(gamma: float, J: int) -> tuple[np.ndarray, np.ndarray]:
    j = np.arange(J, dtype=float)
    return j, (j + 1.0) ** (-gamma)


def _block_mass(y: np.ndarray, gamma: float, J: int) -> np.ndarray:
    """|E ∩ (-∞, y]| for E = ⋃_{j<J} [j, j+(j+1)^{-γ})."""
    starts, lens = _block_endpoints(gamma, J)
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    y = np.asarray(y, dtype=float)
    jj = np.clip(np.floor(y), 0, J - 1).astype(int)
    part = np.clip(y - jj, 0.0, lens[jj])
    full = cum[np.clip(np.floor(y), 0, J).astype(int)]
    out = np.where(y < 0, 0.0, np.where(y >= J, cum[J], full + part))
    return out


def maximal_of_blocks(x: Sequence[float], gamma: float, J: int = 4096) -> np.ndarray:
    """M_γ(χ_E)(x) for E = ⋃_{j≥0}[j, j+(j+1)^{-γ}), 0 ≤ x < J/4.

    For fixed a, |[a,b]∩E|/(b-a)^{1-γ} has no interior maximum in b on a block
    or a gap, so the sup runs over block endpoints (and x itself); intervals
    reaching past block J are represented by their limit 1/(1-γ)."""
    starts, lens = _block_endpoints(gamma, J)
    ends = np.concatenate([starts, starts + lens])
    out = []
    for xv in np.asarray(x, dtype=float):
        a = np.concatenate([ends[ends <= xv], [xv]])
        b = np.concatenate([ends[ends >= xv], [xv]])
        A, B = np.meshgrid(a, b, indexing="ij")
        L = B - A
        ok = L > 0
        mass = _block_mass(B, gamma, J) - _block_mass(A, gamma, J)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(ok, mass * np.where(ok, L, 1.0) ** (gamma - 1.0), 0.0)
        out.append(max(float(val.max()), 1.0 / (1.0 - gamma)))
    return np.array(out)


def _increment_integral(fn, a: float, b: float) -> float:
    """∫_a^b fn(x) dx in the variable log x."""
    return integrate.quad(lambda u: fn(math.exp(u)) * math.exp(u), math.log(a), math.log(b), limit=200, epsrel=1e-11, epsabs=0)[0]


def example_strong_failure(
    p: float,
    q: float,
    alpha: float,
    Ts: Sequence[float] | None = None,
    K: int = 5,
    L: int = 6,
    realize: bool = True,
) -> NamedExample:
    """A^α_{p,q} pair whose M_α(·σ) fails the strong (p,q) bound, n = 1.

    Case 1/p - 1/q > α: f = σ = χ_[-2,-1], u = x^t χ_[0,∞), t = q(1-α) - 1.  Here
    M_α(χ_[-2,-1])(x) = (x+2)^{α-1} exactly for x > -1, so the functional
    ∫_1^T M_α(fσ)^q u dx is an explicit one-dimensional integral.

    Case 1/p - 1/q ≤ α: blocks E = ⋃[j, j+(j+1)^{-γ}), w1 = χ_E, w2 = χ_[0,1],
    factored pair; for x ≥ 1 u = χ_E x^{(1-γ)q/p'} exactly and
    M_α(fσ)(x) = max_a (x-a)^{α-1} σ([a,1]) with f = χ_[0,1]."""
    if not (1 < p <= q) or not (0 < alpha < 1):
        raise ValueError("need 1 < p <= q and 0 < α < 1")
    Ts = list(Ts) if Ts is not None else [2.0 ** j for j in range(5, 21)]
    pp = p / (p - 1)
    ex = NamedExample("apq_insufficient_strong", {"p": p, "q": q, "alpha": alpha, "K": K, "L": L})
    if 1.0 / p - 1.0 / q > alpha:
        t = q * (1 - alpha) - 1
        ex.params.update(case=1, t=t)

        def integrand(x):
            return (x + 2.0) ** (q * (alpha - 1)) * x ** t

        F, acc = [], 0.0
        prev = 1.0
        for T in Ts:
            acc += _increment_integral(integrand, prev, T)
            prev = T
            F.append(acc)
        ex.curves["functional"] = list(zip(Ts, F))
        ex.info["prediction_per_doubling"] = math.log(2.0)
        ex.expected = {"functional": "log"}
        if realize:
            u = MeshFunction.power_weight(t, K, L, support="positive")
            s = MeshFunction.indicator([(-2, -1)], K, L)
            ex.pair = WeightPair(u, s)
            ex.f = s
        return ex

    gamma = factored_gamma(1, alpha, p, q)
    ex.params.update(case=2, gamma=gamma)
    J = 4096
    # σ on [0,1]
    xs = (np.arange(2048) + 0.5) / 2048
    Mg = maximal_of_blocks(xs, gamma, J)
    sig = Mg ** (-pp / q)
    S = np.concatenate([np.cumsum(sig[::-1])[::-1] / 2048, [0.0]])  # σ([a_i, 1]) at a_i = i/2048
    a_grid = np.arange(2049) / 2048
    rho = sig.max() / sig.min()
    X0 = max(2.0, (1 - alpha) * rho)
    uexp = (1 - gamma) * q / pp

    def Mfs(x):
        return float(np.max((x - a_grid) ** (alpha - 1) * S)) if x > 1 else float("nan")

    def block_piece(lo, hi):
        """∫_lo^hi M_α(fσ)^q u for [lo,hi] inside a block."""
        if lo >= X0:
            e = gamma  # (α-1)q + (1-γ)q/p' = γ - 1
            return S[0] ** q * (hi ** e - lo ** e) / e
        g, w = np.polynomial.legendre.leggauss(12)
        xx = lo + (hi - lo) * (g + 1) / 2
        vals = np.array([Mfs(v) ** q * v ** uexp for v in xx])
        return float((hi - lo) / 2 * (w * vals).sum())

    F, acc, j = [], 0.0, 2
    for T in Ts:
        while j < T:
            lo, hi = float(j), min(j + (j + 1.0) ** (-gamma), T)
            if lo >= X0:
                # sum the closed form for all remaining blocks below T at once
                jj = np.arange(j, int(math.ceil(T)))
                hi_v = np.minimum(jj + (jj + 1.0) ** (-gamma), T)
                acc += float(S[0] ** q * ((hi_v ** gamma - jj ** gamma) / gamma).sum())
                j = int(jj[-1]) + 1
                break
            acc += block_piece(lo, hi)
            j += 1
        F.append(acc)
    ex.curves["functional"] = list(zip(Ts, F))
    ex.info.update(prediction_per_doubling=S[0] ** q * math.log(2.0), sigma_mass=float(S[0]), X0=X0)
    ex.expected = {"functional": "log"}
    if realize:
        R = 2 ** K
        blocks = sum(
            (MeshFunction.indicator([(j, j + (j + 1.0) ** (-gamma))], K, L) for j in range(R)),
            MeshFunction.zeros(K, L),
        )
        w2 = MeshFunction.indicator([(0, 1)], K, L)
        ex.pair, extra = factored_pair(blocks, w2, p, q, alpha)
        ex.f = w2
        ex.info.update(extra)
    return ex


# --- weak-type failure --------------------------------------------------------------------------
def example_weak_failure(
    p: float,
    q: float,
    alpha: float,
    Ts: Sequence[float] | None = None,
    xs: Sequence[float] = (0.25, 0.5, 0.75),
    K: int = 5,
    L: int = 6,
    realize: bool = True,
) -> NamedExample:
    """u = χ_[-1,1], σ = |x|^{-r} χ_{|x|>1} with α - 1/p = r/p', and
    f = x^{r-α}/log(ex) χ_(1,∞).  ‖f‖_{L^p(σ)} is finite while the kernel
    integral ∫_1^T y^{-α}(y-x)^{α-1}/log(ey) dy at x ∈ (0,1) grows like log log T."""
    if not p > 1:
        raise ValueError("need p > 1")
    pp = p / (p - 1)
    r = (alpha - 1.0 / p) * pp
    Ts = list(Ts) if Ts is not None else [2.0 ** j for j in range(2, 31, 2)]
    ex = NamedExample("apq_insufficient_weak", {"p": p, "q": q, "alpha": alpha, "r": r, "K": K, "L": L})
    # ‖f‖_p^p partial integrals: ∫_1^T dx/(x log(ex)^p), in u = log x
    norm_q = []
    for T in Ts:
        v = integrate.quad(lambda u: (1.0 + u) ** (-p), 0.0, math.log(T), limit=200, epsrel=1e-12)[0]
        norm_q.append(v)
    ex.curves["f_norm_p"] = list(zip(Ts, norm_q))
    ex.info["f_norm_p_closed"] = [(1.0 - (1.0 + math.log(T)) ** (1 - p)) / (p - 1) for T in Ts]
    for x in xs:
        vals = []

        def ker(s, x=x):
            y = math.exp(s)
            return y ** (1 - alpha) * (y - x) ** (alpha - 1) / (1.0 + s)

        acc, prev = 0.0, 0.0
        for T in Ts:
            sT = math.log(T)
            acc += integrate.quad(ker, prev, sT, limit=400, epsrel=1e-11, epsabs=0)[0]
            prev = sT
            vals.append(acc)
        ex.curves[f"kernel_integral_x={x:g}"] = list(zip(Ts, vals))
    ex.curves["loglog_reference"] = [(T, math.log(1.0 + math.log(T))) for T in Ts]
    ex.expected = {"f_norm_p": "bounded", "kernel_integral": "loglog"}
    if realize:
        u = MeshFunction.indicator([(-1, 1)], K, L)
        s = MeshFunction.power_weight(-r, K, L, support="abs_gt_1")
        ex.pair = WeightPair(u, s)
    return ex


# --- separated vs conjoined bumps ---------------------------------------------------------------
def _rescaled(q: float, pp: float) -> tuple[YoungFunction, YoungFunction]:
    """Ψ(t) = t log(e+t)^q acting on u and Φ(t) = t log(e+t)^{p'} acting on σ."""
    return power_log(1.0, q, family="phi", extra={"s": q}), power_log(1.0, pp, family="phi", extra={"s": pp})


class _Blocks:
    """u = Σ K_k^q χ_{I_k}, σ = Σ χ_{J_k}, I_k = (e^k+k-1, e^k+k), J_k = (e^k, e^k+1).

    Endpoints are kept as (k, integer offset) so interval lengths are formed
    as (e^{k2} - e^{k1}) + (o2 - o1)."""

    def __init__(self, alpha: float, q: float, kmax: int):
        if kmax > 30:
            kmax = 30
        self.kmax = kmax
        self.ks = np.arange(2, kmax + 1)
        self.Kk = self.ks ** (1 - alpha) * np.log(math.e + self.ks) ** (-1.5)
        self.uval = self.Kk ** q
        self.q = q
        # blocks: (anchor k, lo offset, hi offset, kind)
        self.u_blocks = [(int(k), k - 1, k) for k in self.ks]
        self.s_blocks = [(int(k), 0, 1) for k in self.ks]
        pts = set()
        for k in self.ks:
            for off in (0, 1, k - 1, k):
                pts.add((int(k), int(off)))
        self.points = sorted(pts, key=lambda z: (math.exp(z[0]) + z[1]))

    @staticmethod
    def pos(pt):
        return math.exp(pt[0]) + pt[1]

    def length(self, a, b) -> float:
        return (math.exp(b[0]) - math.exp(a[0])) + (b[1] - a[1])

    def contained(self, a, b, blk) -> bool:
        k, lo, hi = blk
        return self.pos(a) <= self.pos((k, lo)) + 1e-12 * self.pos((k, lo)) and self.pos((k, hi)) <= self.pos(b) * (1 + 1e-15) + 1e-9


def _dist_rows(values_list, weights_list):
    m = max(len(v) for v in values_list) + 1
    V = np.zeros((len(values_list), m))
    W = np.zeros((len(values_list), m))
    for i, (v, w) in enumerate(zip(values_list, weights_list)):
        V[i, : len(v)] = v
        W[i, : len(w)] = w
        W[i, -1] = max(0.0, 1.0 - float(np.sum(w)))
    return V, W


def example_separated_vs_conjoined(p: float, q: float, alpha: float, k_max: int = 20) -> NamedExample:
    """Separated bump constants stay bounded while the conjoined one grows.

    Norms are computed from the exact distributions of the block functions on
    each interval (the Luxemburg norm depends only on the distribution); the
    bumped norms of u^{1/q}, σ^{1/p'} are replaced by Ψ, Φ norms of u, σ and
    the L^q, L^{p'} norms by L^1 averages.  Separated constants take the sup
    over intervals whose endpoints are block endpoints."""
    if not (0 < alpha < 1 and 1 < p <= q):
        raise ValueError("need 0 < α < 1 and 1 < p <= q")
    pp = p / (p - 1)
    e = alpha + 1.0 / q - 1.0 / p
    Psi, Phi = _rescaled(q, pp)
    k_max = min(int(k_max), 30)
    blk = _Blocks(alpha, q, k_max)
    ex = NamedExample("separated_vs_conjoined", {"p": p, "q": q, "alpha": alpha, "k_max": k_max})

    # conjoined on Q_k = (e^k, e^k + k)
    ks = blk.ks
    Vu, Wu = _dist_rows([[v] for v in blk.uval], [[1.0 / k] for k in ks])
    Vs, Ws = _dist_rows([[1.0] for _ in ks], [[1.0 / k] for k in ks])
    nu = luxemburg_rows(Vu, Wu, Psi)
    ns = luxemburg_rows(Vs, Ws, Phi)
    conj = ks ** e * nu ** (1.0 / q) * ns ** (1.0 / pp)
    ex.curves["conjoined_Qk"] = list(zip(ks.tolist(), conj.tolist()))
    # the Q_k norms depend on k only, so the curve extends past the e^k cap
    kx = 2.0 ** np.arange(1, 61)
    ux = (kx ** (1 - alpha) * np.log(math.e + kx) ** (-1.5)) ** q
    Vu, Wu = _dist_rows([[v] for v in ux], [[1.0 / k] for k in kx])
    Vs, Ws = _dist_rows([[1.0] for _ in kx], [[1.0 / k] for k in kx])
    cx = kx ** e * luxemburg_rows(Vu, Wu, Psi) ** (1.0 / q) * luxemburg_rows(Vs, Ws, Phi) ** (1.0 / pp)
    ex.curves["conjoined_Qk_extended"] = list(zip(kx.tolist(), cx.tolist()))
    ex.curves["building_block_L1"] = list(zip(ks.tolist(), ((blk.uval / ks) ** (1.0 / q)).tolist()))
    ex.info["building_block_closed"] = (blk.Kk / ks ** (1.0 / q)).tolist()

    # separated over intervals with block endpoints, for each window kmax
    pts = blk.points
    P = len(pts)
    pos = np.array([blk.pos(z) for z in pts])
    rows_u, rows_s, lens, tags = [], [], [], []
    for i in range(P):
        for j in range(i + 1, P):
            a, b = pts[i], pts[j]
            ln = blk.length(a, b)
            uv, uw, sm = [], [], 0.0
            for kk, (k, lo, hi) in enumerate(blk.u_blocks):
                if pos[i] <= blk.pos((k, lo)) and blk.pos((k, hi)) <= pos[j]:
                    uv.append(blk.uval[kk])
                    uw.append(1.0 / ln)
            for (k, lo, hi) in blk.s_blocks:
                if pos[i] <= blk.pos((k, lo)) and blk.pos((k, hi)) <= pos[j]:
                    sm += 1.0
            if not uv or sm == 0.0:
                continue
            rows_u.append((uv, uw))
            rows_s.append(sm / ln)
            lens.append(ln)
            tags.append(max(a[0], b[0]))
    lens = np.array(lens)
    tags = np.array(tags)
    Vu, Wu = _dist_rows([r[0] for r in rows_u], [r[1] for r in rows_u])
    u_psi = luxemburg_rows(Vu, Wu, Psi)
    u_l1 = (Vu * Wu).sum(axis=1)
    s_l1 = np.array(rows_s)
    s_phi = luxemburg_rows(np.stack([np.ones_like(s_l1), np.zeros_like(s_l1)], 1), np.stack([s_l1, 1 - s_l1], 1), Phi)
    left = lens ** e * u_psi ** (1.0 / q) * s_l1 ** (1.0 / pp)   # bump on u only
    right = lens ** e * u_l1 ** (1.0 / q) * s_phi ** (1.0 / pp)  # bump on σ only
    sep_l, sep_r = [], []
    for k in ks:
        m = tags <= k
        sep_l.append(float(left[m].max()) if m.any() else 0.0)
        sep_r.append(float(right[m].max()) if m.any() else 0.0)
    ex.curves["separated_left"] = list(zip(ks.tolist(), sep_l))
    ex.curves["separated_right"] = list(zip(ks.tolist(), sep_r))
    ex.expected = {"conjoined_Qk": "sqrt-log", "separated_left": "bounded", "separated_right": "bounded"}
    return ex


def rescaling_ratio(u_vals, u_weights, q: float) -> float:
    """‖u^{1/q}‖_{A,Q} / ‖u‖_{Ψ,Q}^{1/q} for A = t^q log(e+t)^q, Ψ = t log(e+t)^q."""
    A = power_log(q, q)
    Psi = power_log(1.0, q, family="phi", extra={"s": q})
    V = np.asarray(u_vals, float)[None, :]
    W = np.asarray(u_weights, float)[None, :]
    a = luxemburg_rows(V ** (1.0 / q), W, A)[0]
    b = luxemburg_rows(V, W, Psi)[0]
    return float(a / b ** (1.0 / q))
