"""Supremum-type weight constants and testing constants over a window of cubes.

The supremum over all cubes is replaced by the supremum over every cube of the
3^n shifted grids with level in the window that meets the box.  When a weight
has a nonzero tail, Orlicz-norm and testing terms are restricted to cubes
contained in the box.  Every report carries the witness cube; ``recompute``
re-evaluates the term on that single cube through an independent code path
(direct cube integrals instead of level tables).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import DyadicCube, all_shifts, format_cube
from .mesh import MeshFunction, WeightPair
from .operators import commutator_continuum, dyadic_maximal, frac_integral, frac_maximal
from .orlicz import YoungFunction, luxemburg_norm, luxemburg_rows

__all__ = [
    "ConstantReport",
    "one_weight_apq",
    "two_weight_apq",
    "bump_constant",
    "sawyer_testing_maximal",
    "testing_frac",
    "testing_commutator",
    "dyadic_out_operator",
    "growth_verdict",
    "window_sweep",
    "norm_ratio",
]


@dataclass
class ConstantReport:
    name: str
    value: float
    witness: DyadicCube | None
    window: tuple[int, int]
    mode: str = "dyadic-only"
    verdict: str = "finite"
    inflation: float | None = None
    notes: str = ""
    recompute: Callable[[DyadicCube], float] | None = field(default=None, repr=False)
    extra: dict = field(default_factory=dict)

    def check_witness(self, rtol: float = 1e-9) -> bool:
        if self.witness is None or self.recompute is None:
            return self.value == 0.0 or math.isinf(self.value)
        r = self.recompute(self.witness)
        if math.isinf(self.value) or math.isinf(r):
            return math.isinf(self.value) and math.isinf(r)
        return abs(r - self.value) <= rtol * max(abs(self.value), 1e-300)

    def csv_row(self) -> list[str]:
        return [
            self.name,
            repr(float(self.value)),
            format_cube(self.witness) if self.witness is not None else "",
            f"[{self.window[0]},{self.window[1]}]",
            self.verdict,
        ]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "value": float(self.value),
            "witness": format_cube(self.witness) if self.witness is not None else None,
            "window": list(self.window),
            "mode": self.mode,
            "verdict": self.verdict,
            "inflation": self.inflation,
            "notes": self.notes,
        }


CSV_HEADER = ["name", "value", "witness", "window", "verdict"]


def _window(f: MeshFunction, window):
    if window is None:
        return (-f.L, f.K)
    return (int(window[0]), int(window[1]))


def _inside_mask(f: MeshFunction, k: int, t, shape) -> np.ndarray:
    R = 2.0 ** f.K
    masks = []
    from .grid import level_sign

    for ax, ti in enumerate(t):
        rg = f.m_range(k, t)[ax]
        m = np.arange(rg.start, rg.stop)
        lo = (m + level_sign(k) * ti / 3.0) * 2.0 ** k
        masks.append((lo >= -R) & (lo + 2.0 ** k <= R))
    if len(masks) == 1:
        return masks[0]
    return masks[0][:, None] & masks[1][None, :]


def _sup(f: MeshFunction, window, term_arrays: Callable, shifts=None):
    """Maximise term_arrays(t, k) (arrays over the level table) over the window."""
    kmin, kmax = window
    best, wit = -math.inf, None
    for t in shifts or all_shifts(f.n):
        m_lo = None
        for k in range(kmax, kmin - 1, -1):
            arr = term_arrays(t, k)
            if arr is None or arr.size == 0:
                continue
            arr = np.where(np.isnan(arr), -math.inf, arr)
            idx = np.unravel_index(int(np.argmax(arr)), arr.shape)
            v = float(arr[idx])
            if v > best:
                rg = f.m_range(k, t)
                best = v
                wit = DyadicCube(k, tuple(int(r.start + i) for r, i in zip(rg, idx)), tuple(t))
    if best == -math.inf:
        best = 0.0
    return best, wit


def _mean_tables(g: MeshFunction, t, window):
    kmin, kmax = window
    tabs = g.level_tables(t, kmax, kmin=kmin)
    return {k: tabs[k].data / 2.0 ** (k * g.n) for k in tabs}


def _apq_inflation(n, alpha, p, q):
    e = alpha / n + 1.0 / q - 1.0 / p
    pp = p / (p - 1) if p > 1 else math.inf
    base = 3.0 ** (n * (1.0 / q + (1.0 / pp if pp < math.inf else 1.0)))
    return base * max(1.0, 3.0 ** (-n * e))


# --- A_{p,q} ------------------------------------------------------------------------------
def one_weight_apq(w: MeshFunction, p: float, q: float, alpha: float, window=None) -> ConstantReport:
    """[w]_{A_{p,q}} = sup_Q (⨍ w^q)^{1/q} (⨍ w^{-p'})^{1/p'}; p=1 uses ess sup w^{-1}."""
    n = w.n
    if not (1 <= p and (alpha == 0 or p < n / alpha)):
        raise ValueError("need 1 <= p < n/α")
    if abs(1.0 / p - 1.0 / q - alpha / n) > 1e-12:
        raise ValueError("one-weight exponents must satisfy 1/p - 1/q = α/n")
    win = _window(w, window)
    wq = w.power(q)
    wq_tabs = {}
    if p > 1:
        pp = p / (p - 1)
        wneg = w.power(-pp)

        def terms(t, k):
            A = _mean_tables(wq, t, (k, k))[k]
            B = _mean_tables(wneg, t, (k, k))[k]
            with np.errstate(invalid="ignore", over="ignore"):
                return A ** (1.0 / q) * B ** (1.0 / pp)

        def single(Q):
            A = wq.integral(Q) / float(Q.volume)
            B = wneg.integral(Q) / float(Q.volume)
            return A ** (1.0 / q) * B ** (1.0 / pp)
    else:

        def terms(t, k):
            A = _mean_tables(wq, t, (k, k))[k]
            mn = w.level_tables(t, k, kmin=k, op="min")[k].data
            with np.errstate(divide="ignore", invalid="ignore"):
                return A ** (1.0 / q) * np.where(mn > 0, 1.0 / np.where(mn > 0, mn, 1.0), np.inf)

        def single(Q):
            A = wq.integral(Q) / float(Q.volume)
            mn = w.extreme(Q, "min")
            return A ** (1.0 / q) * (1.0 / mn if mn > 0 else math.inf)

    val, wit = _sup(w, win, terms)
    verdict = "infinite" if math.isinf(val) else "finite"
    return ConstantReport("A_pq", val, wit, win, "dyadic-only", verdict, _apq_inflation(n, alpha, p, q), recompute=single)


def _exp(n, alpha, p, q):
    return alpha / n + 1.0 / q - 1.0 / p


def two_weight_apq(pair: WeightPair, p: float, q: float, alpha: float, window=None) -> ConstantReport:
    """[u,σ]_{A^α_{p,q}} = sup_Q |Q|^{α/n+1/q-1/p} (⨍u)^{1/q} (⨍σ)^{1/p'}."""
    if not (1 < p <= q):
        raise ValueError("need 1 < p <= q")
    u, s = pair.u, pair.sigma
    n = u.n
    win = _window(u, window)
    e = _exp(n, alpha, p, q)
    pp = p / (p - 1)

    def terms(t, k):
        A = _mean_tables(u, t, (k, k))[k]
        B = _mean_tables(s, t, (k, k))[k]
        return 2.0 ** (k * n * e) * A ** (1.0 / q) * B ** (1.0 / pp)

    def single(Q):
        A = u.integral(Q) / float(Q.volume)
        B = s.integral(Q) / float(Q.volume)
        return float(Q.volume) ** e * A ** (1.0 / q) * B ** (1.0 / pp)

    val, wit = _sup(u, win, terms)
    return ConstantReport("A_pq_alpha", val, wit, win, "dyadic-only", "finite" if math.isfinite(val) else "infinite", _apq_inflation(n, alpha, p, q), recompute=single)


def _rows_norm(g_vals: np.ndarray, rows, Y: YoungFunction | None, expo: float) -> np.ndarray:
    """Row-wise ‖g^{expo}‖ in the Luxemburg norm of Y (Y=None: L^{1/expo})."""
    vals = rows.gather(g_vals) ** expo
    if Y is None:
        r = 1.0 / expo
        return ((rows.weights * vals ** r).sum(axis=1)) ** expo
    return luxemburg_rows(vals, rows.weights, Y)


def bump_constant(
    pair: WeightPair,
    p: float,
    q: float,
    alpha: float,
    A: YoungFunction | None = None,
    B: YoungFunction | None = None,
    placement: str = "conjoined",
    window=None,
) -> ConstantReport:
    """Bumped A^α_{p,q} constants.

    placement='right':     |Q|^e ‖u^{1/q}‖_{q,Q}  ‖σ^{1/p'}‖_{B,Q}
    placement='left':      |Q|^e ‖u^{1/q}‖_{A,Q}  ‖σ^{1/p'}‖_{p',Q}
    placement='conjoined': |Q|^e ‖u^{1/q}‖_{A,Q}  ‖σ^{1/p'}‖_{B,Q}
    A or B equal to None means the unbumped power norm.
    """
    if placement not in ("right", "left", "conjoined"):
        raise ValueError("placement must be right, left or conjoined")
    u, s = pair.u, pair.sigma
    n = u.n
    win = _window(u, window)
    e = _exp(n, alpha, p, q)
    pp = p / (p - 1)
    Au = A if placement in ("left", "conjoined") else None
    Bs = B if placement in ("right", "conjoined") else None
    restrict = not (u.tail.is_zero and s.tail.is_zero)

    def terms(t, k):
        rows = u.cube_rows(k, t)
        nu = _rows_norm(u.values, rows, Au, 1.0 / q)
        ns = _rows_norm(s.values, rows, Bs, 1.0 / pp)
        out = (2.0 ** (k * n * e) * nu * ns).reshape(rows.shape)
        if restrict:
            out = np.where(_inside_mask(u, k, t, rows.shape), out, -math.inf)
        return out

    def single(Q):
        from .orlicz import power

        uq = u.power(1.0 / q)
        sp = s.power(1.0 / pp)
        nu = luxemburg_norm(uq, Au or power(q), Q, method="bisect")
        ns = luxemburg_norm(sp, Bs or power(pp), Q, method="bisect")
        return float(Q.volume) ** e * nu * ns

    val, wit = _sup(u, win, terms)
    rep = ConstantReport(f"bump_{placement}", val, wit, win, "dyadic-only", "finite" if math.isfinite(val) else "infinite", recompute=single)
    rep.extra = {"A": A.to_json() if A else None, "B": B.to_json() if B else None}
    return rep


# --- testing constants -----------------------------------------------------------------------
def _cube_integral_centres(g: np.ndarray, w: MeshFunction, Q: DyadicCube | None) -> float:
    """∫_Q g w with g sampled at cell centres (Q=None: the whole box)."""
    vals = g * w.values
    if Q is None:
        return float(vals.sum() * w.cell_volume)
    fr = w.cube_overlap_fractions(Q)
    return float((vals * fr).sum() * w.cell_volume)


def _testing_terms(
    outer: MeshFunction,  # σ: the measure of the tested indicator
    inner: MeshFunction,  # u: the measure of the integral
    p: float,
    q: float,
    op: Callable[[MeshFunction, DyadicCube], np.ndarray],
    window,
    over_space: bool = False,
    shifts=None,
    name: str = "testing",
):
    """sup_Q outer(Q)^{-1/p} (∫_Q op(χ_Q outer)^q inner)^{1/q}; 0 when outer(Q)=0."""
    f = outer
    win = _window(f, window)
    restrict = not (outer.tail.is_zero and inner.tail.is_zero)
    o_tabs = {}

    def single(Q):
        mass = outer.integral(Q)
        if mass <= 0:
            return 0.0
        if not over_space and inner.integral(Q) <= 0:
            return 0.0
        g = op(outer.restrict(Q), Q)
        tot = _cube_integral_centres(np.abs(g) ** q, inner, None if over_space else Q)
        return mass ** (-1.0 / p) * tot ** (1.0 / q)

    def terms(t, k):
        tab_o = outer.level_tables(t, k, kmin=k)[k].data
        tab_i = inner.level_tables(t, k, kmin=k)[k].data
        out = np.zeros(tab_o.shape)
        live = tab_o > 0
        if not over_space:
            live &= tab_i > 0
        if restrict:
            live &= _inside_mask(f, k, t, tab_o.shape)
        rg = f.m_range(k, t)
        for idx in zip(*np.nonzero(live)):
            Q = DyadicCube(k, tuple(int(r.start + i) for r, i in zip(rg, idx)), tuple(t))
            out[idx] = single(Q)
        return out

    val, wit = _sup(f, win, terms, shifts)
    return ConstantReport(name, val, wit, win, "dyadic-only", "finite" if math.isfinite(val) else "infinite", recompute=single)


def sawyer_testing_maximal(pair: WeightPair, p: float, q: float, alpha: float, window=None) -> ConstantReport:
    """sup_Q σ(Q)^{-1/p} (∫_Q M_α(χ_Q σ)^q u)^{1/q} with M_α over all 3^n grids."""
    if not (1 < p <= q):
        raise ValueError("need 1 < p <= q")

    def op(g, Q):
        return frac_maximal(g, alpha, mode="all_cubes").values

    rep = _testing_terms(pair.sigma, pair.u, p, q, op, window, name="testing_M")
    rep.mode = "3^n-grid-inflated"
    rep.inflation = 3.0 ** (pair.u.n - alpha)
    return rep


def dyadic_out_operator(g: MeshFunction, Q: DyadicCube, alpha: float, kmax: int | None = None) -> np.ndarray:
    """Σ_{P ⊋ Q, P ∈ D} |P|^{α/n} ⟨g⟩_P χ_P at cell centres, levels up to kmax,
    for g supported in Q (so ⟨g⟩_P = g(Q)/|P|)."""
    n = g.n
    kmax = g.K if kmax is None else kmax
    mass = g.integral(Q)
    out = np.zeros(g.values.shape)
    P = Q
    from .grid import parent

    while P.k < kmax:
        P = parent(P)
        sl = g.center_slices(P)
        out[sl] += 2.0 ** (P.k * (alpha - n)) * mass
    return out


def _dyadic_in_operator(g: MeshFunction, Q: DyadicCube, alpha: float) -> np.ndarray:
    """Σ_{P ⊆ Q} |P|^{α/n} ⟨g⟩_P χ_P at centres (levels -L..k(Q), plus the
    closed-form levels below the mesh)."""
    from .operators import dyadic_frac_integral

    r = dyadic_frac_integral(g, alpha, Q.t, kmax=Q.k)
    mask = np.zeros(g.values.shape, dtype=bool)
    mask[g.center_slices(Q)] = True
    return np.where(mask, r.values, 0.0)


def testing_frac(
    pair: WeightPair,
    p: float,
    q: float,
    alpha: float,
    side: str = "forward",
    locality: str = "full",
    window=None,
    kmax_out: int | None = None,
) -> ConstantReport:
    """Testing constants for I_α.

    forward: sup_Q σ(Q)^{-1/p} (∫_Q T(χ_Q σ)^q u)^{1/q}
    dual:    sup_Q u(Q)^{-1/q'} (∫_Q T(χ_Q u)^{p'} σ)^{1/p'}
    T is I_α (locality='full'), the localized dyadic operator over P ⊆ Q
    ('dyadic_in'), or the sum over P ⊋ Q integrated over the whole box
    ('dyadic_out').  Dyadic forms take the supremum over each grid with its
    own cubes.
    """
    if side not in ("forward", "dual") or locality not in ("full", "dyadic_in", "dyadic_out"):
        raise ValueError("bad side or locality")
    u, s = pair.u, pair.sigma
    if side == "forward":
        outer, inner, P, Qx = s, u, p, q
    else:
        outer, inner, P, Qx = u, s, q / (q - 1), p / (p - 1)
    if locality == "full":
        op = lambda g, Q: frac_integral(g, alpha).values
        over = False
    elif locality == "dyadic_in":
        op = lambda g, Q: _dyadic_in_operator(g, Q, alpha)
        over = False
    else:
        op = lambda g, Q: dyadic_out_operator(g, Q, alpha, kmax_out)
        over = True
    rep = _testing_terms(outer, inner, P, Qx, op, window, over_space=over, name=f"testing_I_{side}_{locality}")
    return rep


def testing_commutator(pair: WeightPair, b: MeshFunction, p: float, q: float, alpha: float, side: str = "forward", window=None) -> ConstantReport:
    """Testing constants for [b, I_α] (one dimension).

    forward: sup_Q σ(Q)^{-1/p} (∫_Q |[b,I_α](χ_Q σ)|^q u)^{1/q}
    dual:    sup_Q u(Q)^{-1/q'} (∫_Q |[b,I_α](χ_Q u)|^{p'} σ)^{1/p'}
    Computed for comparison with empirical norm ratios only; no bound is implied.
    """
    if side not in ("forward", "dual"):
        raise ValueError("side must be forward or dual")
    if not (1 < p <= q):
        raise ValueError("need 1 < p <= q")
    u, s = pair.u, pair.sigma
    if side == "forward":
        outer, inner, P, Qx = s, u, p, q
    else:
        outer, inner, P, Qx = u, s, q / (q - 1), p / (p - 1)
    op = lambda g, Q: commutator_continuum(b, g, alpha).values
    rep = _testing_terms(outer, inner, P, Qx, op, window, name=f"testing_C_{side}")
    rep.notes = "empirical only: sufficiency of these conditions is not known"
    return rep


# --- window sweeps -----------------------------------------------------------------------------
def growth_verdict(values: Sequence[float], threshold: float = 0.10) -> str:
    """'growing' when two consecutive doublings each raise the value by > 10%."""
    vals = [float(v) for v in values]
    if any(math.isinf(v) for v in vals):
        return "infinite"
    run = 0
    for a, b in zip(vals, vals[1:]):
        if a > 0 and b > a * (1 + threshold):
            run += 1
            if run >= 2:
                return "growing"
        else:
            run = 0
    return "finite"


def window_sweep(build: Callable[[int], float], Ks: Sequence[int]) -> tuple[list[float], str]:
    vals = [float(build(K)) for K in Ks]
    return vals, growth_verdict(vals)


def norm_ratio(op_values: np.ndarray, f: MeshFunction, u: MeshFunction, sigma: MeshFunction, p: float, q: float) -> float:
    """‖T(fσ)‖_{L^q(u)} / ‖f‖_{L^p(σ)} with T(fσ) sampled at cell centres."""
    num = float((np.abs(op_values) ** q * u.values).sum() * u.cell_volume) ** (1.0 / q)
    den = float((np.abs(f.values) ** p * sigma.values).sum() * sigma.cell_volume) ** (1.0 / p)
    return num / den if den > 0 else 0.0
