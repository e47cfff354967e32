from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadic_weights.grid import DyadicCube, enumerate_cubes
from dyadic_weights.mesh import MeshFunction, Tail, WeightPair, average, lp_norm, measure, weight_from_spec

K, L = 2, 3
N = 2 ** (K + 1 + L)


def _exact_integral(vals, lo, hi):
    """∫_lo^hi of the step function, with Fractions."""
    h = Fraction(1, 2 ** L)
    R = 2 ** K
    tot = Fraction(0)
    for i, v in enumerate(vals):
        a = -R + i * h
        ov = min(a + h, hi) - max(a, lo)
        if ov > 0:
            tot += Fraction(float(v)) * ov
    return tot


@settings(max_examples=50)
@given(st.integers(0, 2 ** 31))
def test_cube_integrals_match_exact(seed):
    rng = np.random.default_rng(seed)
    vals = rng.integers(0, 9, size=N).astype(float)
    f = MeshFunction(vals, K, L)
    for t in (-1, 0, 1):
        k = int(rng.integers(-L, K + 1))
        for Q in list(enumerate_cubes((k, k), [(-2 ** K, 2 ** K)], [(t,)]))[:6]:
            (lo, hi), = Q.bounds()
            lo_c, hi_c = max(lo, -2 ** K), min(hi, 2 ** K)
            assert f.integral(Q) == pytest.approx(float(_exact_integral(vals, lo_c, hi_c)), rel=1e-12, abs=1e-12)


def test_level_tables_agree_with_integrals():
    rng = np.random.default_rng(3)
    f = MeshFunction(rng.random(N), K, L)
    for t in ((-1,), (0,), (1,)):
        tabs = f.level_tables(t, K, kmin=-L)
        for k in (-L, -1, 0, K):
            for Q in tabs[k].cubes():
                assert tabs[k].lookup(Q.m) == pytest.approx(f.integral(Q), rel=1e-12, abs=1e-14)


def test_level_tables_min_max():
    rng = np.random.default_rng(4)
    f = MeshFunction(rng.random(N) + 0.1, K, L)
    tabs = f.level_tables((1,), K, kmin=-1, op="min")
    for Q in list(tabs[0].cubes())[:5]:
        assert tabs[0].lookup(Q.m) == pytest.approx(f.extreme(Q, "min"))


def test_indicator_and_average():
    f = MeshFunction.indicator([(0, 1)], K, L, value=3.0)
    assert f.integral(DyadicCube(1, (0,), (0,))) == pytest.approx(3.0)
    assert average(f, DyadicCube(0, (0,), (0,))) == pytest.approx(3.0)
    assert average(f, DyadicCube(1, (-1,), (0,))) == 0.0
    g = MeshFunction.indicator([(0, 1), (-1, 1)], K, L)
    assert g.integral(DyadicCube(K, (-1, -1), (0, 0))) == 0.0  # [-4,0)^2 misses [0,1)x[-1,1)
    assert g.integral(DyadicCube(K, (0, -1), (0, 0))) == pytest.approx(1.0)


def test_constant_tail_outside_box():
    f = MeshFunction(np.ones(N), K, L, tail=Tail.constant(1.0))
    Q = DyadicCube(K + 2, (-1,), (0,))  # [-16, 0)
    assert f.integral(Q) == pytest.approx(16.0)


def test_cube_rows_weights():
    rng = np.random.default_rng(5)
    f = MeshFunction(rng.random(N), K, L)
    for t in ((-1,), (1,)):
        k = -1
        rows = f.cube_rows(k, t)
        flat = f.values.ravel()
        sums = (rows.weights * flat[rows.cells]).sum(axis=1) * 2.0 ** k  # rows hold averaging weights
        for r in range(0, len(sums), 3):
            assert sums[r] == pytest.approx(f.integral(rows.cube(r)), rel=1e-12, abs=1e-14)


def test_lp_norm_and_measure():
    f = MeshFunction.constant(2.0, K, L)
    w = MeshFunction.indicator([(0, 1)], K, L)
    assert lp_norm(f, w, 3) == pytest.approx(2.0)
    assert lp_norm(f, None, 2) == pytest.approx(2.0 * (2 ** (K + 1)) ** 0.5)
    assert measure(w, DyadicCube(0, (0,), (0,))) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        lp_norm(f, w, 0.5)


def test_weight_pair_rejects_negative():
    with pytest.raises(ValueError):
        WeightPair(MeshFunction.constant(-1.0, K, L), MeshFunction.constant(1.0, K, L))


def test_weight_from_spec():
    w = weight_from_spec({"kind": "power", "exponent": 0.5, "support": "all"}, K, L)
    assert w.values.min() >= 0
    c = weight_from_spec({"kind": "constant", "value": 2.5}, K, L)
    assert np.all(c.values == 2.5)
    i = weight_from_spec({"kind": "indicator", "interval": [0, 1]}, K, L)
    assert i.values.sum() * i.cell_volume == pytest.approx(1.0)


def test_shape_validation():
    with pytest.raises(ValueError):
        MeshFunction(np.zeros(N + 1), K, L)
    with pytest.raises(ValueError):
        MeshFunction(np.full(N, np.nan), K, L)
