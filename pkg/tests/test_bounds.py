import math

import numpy as np
import pytest

from dyadic_weights import bounds
from dyadic_weights.gallery import maximal_of_blocks
from dyadic_weights.orlicz import log_bump, power


@pytest.mark.parametrize("e,p", [(1.5, 2.0), (1.2, 3.0), (2.5, 3.0)])
def test_beta_of_power(e, p):
    c = 0.5 ** (1 / e)
    assert bounds.orlicz_beta(power(e), p) == pytest.approx(c ** (e - p) / (p - e), rel=1e-8)


def test_weak_type_maximal_bound_on_a_spike():
    # ‖M^D_Y F‖_p^p <= 2pβ‖F‖_p^p on a one-cell spike of height 1 at level -L
    from dyadic_weights.mesh import MeshFunction
    from dyadic_weights.operators import orlicz_maximal

    Y = log_bump(2.0, 1.0).associate()
    p = 3.0
    K, L = 3, 3
    v = np.zeros(2 ** (K + 1 + L))
    v[len(v) // 2] = 1.0
    F = MeshFunction(v, K, L)
    M = orlicz_maximal(F, Y, kmax=K).values
    h = 2.0 ** -L
    assert np.sum(M ** p) * h <= 2 * p * bounds.orlicz_beta(Y, p) * np.sum(v ** p) * h


def test_closed_forms():
    assert bounds.maximal_sandwich(1, 0.5) == pytest.approx(3 ** 0.5)
    assert bounds.sparse_maximal(2, 1.0) == 4.0
    assert bounds.out_over_maximal(1, 0.5) == pytest.approx(1 / (1 - 2 ** -0.5))
    assert bounds.dyadic_over_continuum(1, 0.5) == pytest.approx(1 / (1 - 2 ** -0.5))
    assert bounds.continuum_over_dyadic(1, 0.5) == pytest.approx(3 * 2 ** 1.5)


@pytest.mark.parametrize("g", [0.25, 0.5, 0.75])
def test_strong_failure_bracket_contains_block_maximal(g):
    lo, hi = bounds.strong_failure_bracket(g)
    assert 0 < lo <= hi
    vals = maximal_of_blocks(np.linspace(0.05, 40.0, 23), g, J=512)
    assert np.all(vals >= lo) and np.all(vals <= hi)


def test_bump_fixtures_finite():
    p, q, a = 2.0, 3.0, 0.5
    pp = p / (p - 1)
    B = log_bump(pp, 1.0).associate()
    A = log_bump(q, 1.0).associate()
    for v in (bounds.maximal_bump(1, a, p, q, B), bounds.frac_bump(1, a, p, q, A, B), bounds.commutator_bump(1, a, p, q, A, B)):
        assert math.isfinite(v) and v > 1
