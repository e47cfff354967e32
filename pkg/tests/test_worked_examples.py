"""Small hand-checkable cases for each module, with the expected values written out."""
import math
from fractions import Fraction

import numpy as np
import pytest

from dyadic_weights.grid import DyadicCube, children, enumerate_cubes, locate, one_third_cover, parent
from dyadic_weights.mesh import MeshFunction, average, lp_norm, measure, weighted_average
from dyadic_weights.operators import (
    commutator_continuum,
    commutator_dyadic,
    dyadic_frac_integral,
    frac_integral_points,
    frac_maximal,
    frac_maximal_continuum_1d,
    sparse_apply,
    weighted_dyadic_maximal,
)
from dyadic_weights.orlicz import associate, bp_check, holder_defect, log_bump, luxemburg_norm, power, power_log
from dyadic_weights.sparse_corona import (
    CertificationError,
    corona_build,
    cz_cubes,
    manual_family,
    parent_in,
    sparse_from_averages,
    sparse_from_maximal,
)
from dyadic_weights.gallery import example_weak_failure, factored_gamma

F = Fraction


def cube(k, m, t=0):
    return DyadicCube(k, (m,), (t,))


def interval(q):
    return (q.lower[0], q.upper[0])


# --- grid ---------------------------------------------------------------------------------
def test_locate_cases():
    assert locate([F(7, 10)], 0, (0,)) == cube(0, 0)
    q = locate([F(0)], -1, (0,))
    assert interval(q) == (0, F(1, 2))
    q = locate([F(1, 5)], 0, (1,))
    assert q.m == (-1,) and interval(q) == (F(-2, 3), F(1, 3))


def test_children_of_unit_interval_and_square():
    assert [interval(c) for c in children(cube(0, 0))] == [(0, F(1, 2)), (F(1, 2), 1)]
    sq = DyadicCube(0, (0, 0), (0, 0))
    kids = children(sq)
    assert len(kids) == 4 and all(parent(c) == sq for c in kids)


def test_cover_cases():
    t, P = one_third_cover([F(2, 5)], F(1, 2))
    assert t == (0,) and interval(P) == (0, 1)
    t, P = one_third_cover([F(9, 10)], F(1, 2))
    assert P.side == 1 and P.lower[0] <= F(9, 10) and P.upper[0] >= F(7, 5)
    for j in range(-3, 4):
        side = F(2) ** j / 3
        _, P = one_third_cover([F(1, 7)], side)
        assert P.side == 3 * side


def test_enumerate_cases():
    got = [interval(q) for q in enumerate_cubes((-1, 0), [(0, 1)], shifts=[(0,)])]
    assert got == [(0, 1), (0, F(1, 2)), (F(1, 2), 1)]
    got = {interval(q) for q in enumerate_cubes((0, 0), [(0, 1)])}
    assert got == {(0, 1), (F(-2, 3), F(1, 3)), (F(1, 3), F(4, 3)), (F(-1, 3), F(2, 3)), (F(2, 3), F(5, 3))}
    assert len(list(enumerate_cubes((0, 0), [(0, 2), (0, 2)], shifts=[(0, 0)]))) == 4
    assert list(enumerate_cubes((1, 0), [(0, 1)])) == []


def test_locate_partition_on_many_points():
    rng = np.random.default_rng(3)
    for x in rng.integers(-4000, 4000, size=10_000):
        xf = F(int(x), 1000)
        for k, t in ((-2, 1), (0, -1), (1, 0)):
            q = locate([xf], k, (t,))
            assert q.contains_point([xf])
            assert not DyadicCube(k, (q.m[0] + 1,), (t,)).contains_point([xf])
            assert not DyadicCube(k, (q.m[0] - 1,), (t,)).contains_point([xf])


# --- mesh ---------------------------------------------------------------------------------
def test_average_cases():
    f = MeshFunction.indicator([(0, 1)], 2, 3)
    assert average(f, cube(1, 0)) == pytest.approx(0.5, abs=1e-15)
    assert average(f, cube(0, 0, 1)) == pytest.approx(2 / 3, abs=1e-15)
    assert average(MeshFunction.constant(2.5, 2, 3), cube(0, 1, -1)) == pytest.approx(2.5)


def test_weighted_average_cases():
    K, L = 1, 1
    # cells of width 1/2 starting at -2; [0,1/2) is index 4
    f = np.zeros(8)
    s = np.zeros(8)
    f[4], f[5] = 2.0, 1.0
    s[4], s[5] = 3.0, 1.0
    assert weighted_average(MeshFunction(f, K, L), MeshFunction(s, K, L), cube(0, 0)) == pytest.approx(1.75)
    half = MeshFunction.indicator([(0, 0.5)], K, L)
    assert weighted_average(half, half, cube(0, 0)) == pytest.approx(1.0)
    g = MeshFunction(f, K, L)
    assert weighted_average(g, MeshFunction.constant(1.0, K, L), cube(0, 0)) == pytest.approx(average(g, cube(0, 0)))


def test_measure_cases():
    assert measure(MeshFunction.constant(1.0, 2, 3), cube(0, 0)) == pytest.approx(1.0)
    assert measure(MeshFunction.indicator([(2, 3)], 2, 3), cube(0, 0)) == 0.0
    s = MeshFunction.power_weight(-1 / 3, 1, 12, support="abs_gt_1")
    assert measure(s, cube(0, 1)) == pytest.approx(1.5 * (2 ** (2 / 3) - 1), abs=1e-3)
    q = cube(0, 1)
    assert measure(s, q) == pytest.approx(sum(measure(s, c) for c in children(q)), rel=1e-14)


def test_lp_norm_cases():
    f = MeshFunction.indicator([(0, 1)], 2, 3)
    assert lp_norm(f, None, 2) == pytest.approx(1.0)
    assert lp_norm(f * 2.0, f, 2) == pytest.approx(2.0)
    assert lp_norm(f * 3.0, None, 3) == pytest.approx(3 * lp_norm(f, None, 3))


# --- orlicz -------------------------------------------------------------------------------
def test_luxemburg_cases():
    K, L = 1, 3
    Q = cube(0, 0)
    f = MeshFunction.indicator([(0, 0.5)], K, L, value=2.0)
    assert luxemburg_norm(f, power(2.0), Q) == pytest.approx(math.sqrt(2), rel=1e-9)
    one = MeshFunction.constant(1.0, K, L)
    lam = luxemburg_norm(one, power_log(2.0, 1.0), Q)
    assert lam ** 2 == pytest.approx(math.log(math.e + 1 / lam), rel=1e-8)
    assert lam == pytest.approx(1.1322, abs=5e-4)
    rng = np.random.default_rng(0)
    g = MeshFunction(rng.random(2 ** (K + 1 + L)), K, L)
    B = log_bump(2.0, 0.5)
    assert luxemburg_norm(g * 3.0, B, Q) == pytest.approx(3 * luxemburg_norm(g, B, Q), rel=1e-8)


def test_associate_of_powers():
    ts = np.logspace(-3, 3, 25)
    half = power(2.0, 0.5)
    assert np.allclose(associate(half)(ts), ts ** 2 / 2, rtol=1e-9)
    cube_ = power(3.0, 1 / 3)
    assert np.allclose(associate(cube_)(ts), ts ** 1.5 / 1.5, rtol=1e-9)


def test_bp_cases():
    assert bp_check(power(2.0), 2.0)["in_Bp"] is False
    assert bp_check(associate(power(4.0)), 2.0)["in_Bp"] is True
    assert bp_check(associate(log_bump(2.0, 0.5)), 2.0)["in_Bp"] is True


def test_holder_cases():
    K, L = 1, 3
    Q = cube(0, 0)
    one = MeshFunction.constant(1.0, K, L)
    # associate of t^2 is t^2/4, so ||1|| under it is 1/2 and the defect is 2
    assert holder_defect(one, one, power(2.0), Q) == pytest.approx(2.0, rel=1e-9)
    e = MeshFunction.indicator([(0, 0.5)], K, L)
    rest = MeshFunction.indicator([(0.5, 1)], K, L)
    assert holder_defect(e, rest, power(2.0), Q) == 0.0


# --- operators ----------------------------------------------------------------------------
def test_frac_integral_at_two():
    f = MeshFunction.indicator([(0, 1)], 2, 3)
    v = frac_integral_points(f, 0.5, np.array([2.0]))
    assert float(np.ravel(v)[0]) == pytest.approx(2 * (math.sqrt(2) - 1), rel=1e-9)


def test_fractional_maximal_at_three():
    K, L = 3, 2
    f = MeshFunction.indicator([(0, 1)], K, L)
    x_idx = int((3 + 2 ** K) * 2 ** L)  # cell [3, 3.25)
    res = frac_maximal(f, 0.5, mode="dyadic", grid=(0,))
    # the dyadic value on [3, 3.25) comes from [0,4)
    assert float(res.values[x_idx]) == pytest.approx(0.5, rel=1e-12)
    cont = frac_maximal_continuum_1d(f, 0.5, points=np.array([3.0]))
    assert float(cont[0]) == pytest.approx(1 / math.sqrt(3), rel=1e-9)


def test_dyadic_integral_direct_sum():
    K, L = 5, 10
    f = MeshFunction.indicator([(0, 1)], K, L)
    res = dyadic_frac_integral(f, 0.5, grid=(0,), kmax=K, kmin=-L, fine=False)
    x = 0.25
    idx = int((x + 2 ** K) * 2 ** L)
    expect = 0.0
    for k in range(-L, K + 1):
        q = locate([F(1, 4)], k, (0,))
        expect += 2 ** (k / 2) * average(f, q)
    assert float(res.values[idx]) == pytest.approx(expect, rel=1e-10)


def test_sparse_apply_singleton():
    K, L = 1, 2
    one = MeshFunction.constant(1.0, K, L)
    S = manual_family([cube(0, 0)], K, L)
    I = sparse_apply(one, 0.5, S, kind="I").values
    Lv = sparse_apply(one, 0.5, S, kind="L").values
    inside = np.zeros(2 ** (K + 1 + L), bool)
    inside[8:12] = True
    assert np.allclose(I[inside], 1.0) and np.allclose(I[~inside], 0.0)
    assert np.allclose(Lv, I)  # a singleton has E(Q) = Q


def test_weighted_maximal_on_support():
    K, L = 2, 3
    s = MeshFunction.indicator([(0, 1)], K, L)
    one = MeshFunction.constant(1.0, K, L)
    v = weighted_dyadic_maximal(one, s, 0.0, grid=(0,)).values
    idx = slice(2 ** K * 2 ** L, (2 ** K + 1) * 2 ** L)
    assert np.allclose(v[idx], 1.0)


def test_commutator_cases():
    K, L = 2, 10
    f = MeshFunction.indicator([(2, 3)], K, L)
    b = MeshFunction.indicator([(0, 1)], K, L)
    a = 0.5
    res = commutator_continuum(b, f, a).values
    i = int((0.5 + 2 ** K) * 2 ** L)  # cell starting at 0.5; center 0.5 + h/2
    x = 0.5 + 2.0 ** (-L - 1)
    expect = ((3 - x) ** a - (2 - x) ** a) / a
    assert float(res[i]) == pytest.approx(expect, rel=1e-9)
    neg = commutator_continuum(b * -1.0, f, a).values
    assert np.allclose(neg, -res)
    c = MeshFunction.constant(2.0, K, L)
    assert np.allclose(commutator_dyadic(c, f, a, grid=(0,)).values, 0.0)


# --- sparse and corona --------------------------------------------------------------------
def test_cz_cases():
    f = MeshFunction.indicator([(0, 1)], 3, 3, value=4.0)
    assert cz_cubes(f, 1.0) == [cube(1, 0)]
    assert cz_cubes(f, 4.0) == []


def test_average_bands_example():
    f = MeshFunction.indicator([(0, 1)], 3, 3)
    S = sparse_from_averages(f, grid=(0,))
    members = {interval(q) for q in S.cubes}
    assert (0, 2) in members and (0, 8) in members
    assert S.labels[cube(3, 0)] == -2
    assert S.labels[cube(1, 0)] == -1
    assert (0, 4) not in members


def test_empty_families():
    z = MeshFunction.zeros(2, 3)
    assert len(sparse_from_maximal(z, 0.5).cubes) == 0
    assert len(sparse_from_averages(z).cubes) == 0


def test_manual_family_cases():
    K, L = 1, 3
    with pytest.raises(CertificationError):
        manual_family([cube(0, 0), cube(-1, 0), cube(-1, 1)], K, L)
    S = manual_family([cube(0, 0)], K, L)
    assert len(S.cubes) == 1


def test_corona_cases():
    K, L = 2, 4
    one = MeshFunction.constant(1.0, K, L)
    f = MeshFunction.indicator([(0, 0.25)], K, L, value=4.0)
    forest = corona_build(f, one, roots=[cube(0, 0)])
    assert forest.children[cube(0, 0)] == [cube(-2, 0)]
    assert parent_in(cube(0, 0), forest) == cube(0, 0)
    assert parent_in(cube(-2, 0), forest) == cube(-2, 0)
    assert parent_in(cube(-1, 0), forest) == cube(0, 0)
    flat = corona_build(MeshFunction.constant(3.0, K, L), one, roots=[cube(0, 0), cube(0, 1)])
    assert all(not flat.children[r] for r in flat.roots)


# --- gallery ------------------------------------------------------------------------------
def test_gamma_and_weak_exponent():
    assert factored_gamma(1, 0.5, 2.0, 2.0) == pytest.approx(0.5)
    ex = example_weak_failure(4.0, 4.0, 0.5, Ts=[2.0 ** 4, 2.0 ** 8], realize=False)
    assert ex.params["r"] == pytest.approx(1 / 3)
