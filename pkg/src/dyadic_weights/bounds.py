"""Frozen constants for the pointwise comparisons and the bump sufficiency bounds.

Each constant is derived once from the corresponding domination argument and
then used as a fixed ceiling by the tests and the CLI suites.  The derivation
of every number is recorded next to it.
"""
from __future__ import annotations

import math

from scipy import integrate

from .orlicz import YoungFunction, bp_integral


def maximal_sandwich(n: int, alpha: float) -> float:
    """M_α ≤ 3^{n-α} sup_t M^{D^t}: a cube Q sits in a shifted cube P with ℓ(P) ≤ 3ℓ(Q)."""
    return 3.0 ** (n - alpha)


def dyadic_over_continuum(n: int, alpha: float) -> float:
    """I^D f ≤ C' I_α f: on Q ∋ x, |x-y| ≤ √n ℓ(Q), summed over the levels ≥ k."""
    return n ** ((n - alpha) / 2.0) / (1.0 - 2.0 ** (alpha - n))


def continuum_over_dyadic(n: int, alpha: float) -> float:
    """I_α f ≤ C'' sup_t I^{D^t} f (also used for the commutator comparison).

    Split |x-y| into annuli 2^{j-1} < |x-y| ≤ 2^j; each ball of radius 2^j sits
    in a cube of side 2^{j+1} which is covered by a shifted cube of side ≤ 3·2^{j+1};
    summing over annuli and the 3^n grids gives 3^n 2^{3(n-α)}."""
    return 3.0 ** n * 2.0 ** (3 * (n - alpha))


def sparse_maximal(n: int, alpha: float) -> float:
    """M^D f ≤ 2^{n+1-α} L^S f for the maximal-level sparse family."""
    return 2.0 ** (n + 1 - alpha)


def sparse_integral(n: int, alpha: float) -> float:
    """I^D f ≤ C I^S f for the average-level family with ratio a = 2^{n+1}.

    A cube with ⟨f⟩ in band [a^k, a^{k+1}) is charged to the smallest selected
    ancestor; the resulting geometric sums give at most 2a/(1 - 2^{-α}) and the
    extra 2^{n-1} absorbs the parent step at the band switch."""
    a = 2.0 ** (n + 1)
    return a * 2.0 ** n / (1.0 - 2.0 ** (-alpha))


def out_over_maximal(n: int, alpha: float) -> float:
    """I^{D,out}_Q(σχ_Q) ≤ C M_α(σχ_Q): the ancestors of Q form a geometric series."""
    return 1.0 / (1.0 - 2.0 ** (alpha - n))


def orlicz_beta(Y: YoungFunction, p: float) -> float:
    """β = ∫_{c}^∞ Y(s) s^{-p-1} ds with c = Y^{-1}(1/2).

    Weak-type splitting at c·t gives ‖M^D_Y F‖_p^p ≤ 2p β ‖F‖_p^p."""
    c = float(Y.inverse(0.5))
    head, tail = bp_integral(Y, p)
    if c < 1.0:
        lo = integrate.quad(lambda s: float(Y(s)) * s ** (-p - 1), c, 1.0, limit=200)[0]
    else:
        lo = -integrate.quad(lambda s: float(Y(s)) * s ** (-p - 1), 1.0, c, limit=200)[0]
    return head + tail + lo


def orlicz_maximal_bound(Y: YoungFunction, p: float) -> float:
    return (2.0 * p * orlicz_beta(Y, p)) ** (1.0 / p)


def maximal_bump(n: int, alpha: float, p: float, q: float, Bbar: YoungFunction) -> float:
    """‖M_α(fσ)‖_{L^q(u)} ≤ C [u,σ]_{A^α_{p,q,B}} ‖f‖_{L^p(σ)}.

    M_α ≤ 3^{n-α} max_t M^{D^t}, the max over 3^n grids costs 3^{n/q} in L^q,
    M^D ≤ 2^{n+1-α} L^S, the Orlicz Hölder step costs 2, and
    Σ|Q|‖fσ^{1/p}‖^p_{B̄,Q} ≤ 2‖M_{B̄}(fσ^{1/p})‖_p^p ≤ 4pβ ‖f‖^p."""
    return (
        maximal_sandwich(n, alpha)
        * 3.0 ** (n / q)
        * sparse_maximal(n, alpha)
        * 2.0
        * (4.0 * p * orlicz_beta(Bbar, p)) ** (1.0 / p)
    )


def _sparse_dual(p: float, q: float, Abar: YoungFunction, Bbar: YoungFunction) -> float:
    """‖I^S(fσ)‖_{L^q(u)} ≤ K [u,σ]_{A,B} ‖f‖_{L^p(σ)} by duality against g ∈ L^{q'}(u)."""
    qq = q / (q - 1)
    return 4.0 * (4.0 * p * orlicz_beta(Bbar, p)) ** (1.0 / p) * (4.0 * qq * orlicz_beta(Abar, qq)) ** (1.0 / qq)


def frac_bump(n: int, alpha: float, p: float, q: float, Abar: YoungFunction, Bbar: YoungFunction) -> float:
    """‖I_α(fσ)‖_{L^q(u)} ≤ C [u,σ]_{A^α_{p,q,A,B}} ‖f‖_{L^p(σ)}.

    I_α ≤ C'' max_t I^{D^t} (levels below the mesh cost 1/(1-2^{-α})), the max
    over grids costs 3^{n/q}, I^D ≤ C_S I^S, then the sparse duality bound."""
    return (
        continuum_over_dyadic(n, alpha)
        / (1.0 - 2.0 ** (-alpha))
        * 3.0 ** (n / q)
        * sparse_integral(n, alpha)
        * _sparse_dual(p, q, Abar, Bbar)
    )


def commutator_bump(n: int, alpha: float, p: float, q: float, Abar: YoungFunction, Bbar: YoungFunction) -> float:
    """‖C^D_b(fσ)‖_{L^q(u)} ≤ C osc(b) [u,σ]_{A,B} ‖f‖_{L^p(σ)} for bounded b.

    |b(x)-b(y)| ≤ osc(b) = sup b - inf b gives C^D_b ≤ osc(b) I^D on one grid."""
    return sparse_integral(n, alpha) * _sparse_dual(p, q, Abar, Bbar)


def factored_tolerance() -> float:
    """Relative slack on [u,σ] ≤ 1 for factored pairs (floating point only)."""
    return 1e-9


def strong_failure_bracket(gamma: float) -> tuple[float, float]:
    """Bounds for M_γ(χ_E) on (0, ∞), E = ⋃[j, j+(j+1)^{-γ}).

    Lower: 3·2^{γ-2} on [0,1) and ((k+2)^{1-γ}-1)/((1-γ)(k+1)^{1-γ}) ≥ its k=1
    value on [k,k+1).  Upper: |Q|^{γ} ≤ 1 when |Q| ≤ 1; otherwise at most
    |Q|+2 blocks meet Q, giving 1 + 3^{1-γ}/(1-γ)."""
    g = gamma
    low_k1 = (3.0 ** (1 - g) - 1.0) / ((1 - g) * 2.0 ** (1 - g)) if g < 1 else 1.0
    lo = min(3.0 * 2.0 ** (g - 2), low_k1)
    hi = 1.0 + 3.0 ** (1 - g) / (1 - g)
    return lo, hi
