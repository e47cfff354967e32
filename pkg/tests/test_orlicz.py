import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from dyadic_weights.grid import DyadicCube
from dyadic_weights.mesh import MeshFunction
from dyadic_weights.orlicz import (
    amemiya_norm,
    bp_check,
    bp_integral,
    cube_distribution,
    custom,
    double_log_bump,
    duality_band,
    holder_defect,
    log_bump,
    luxemburg_norm,
    phi_family,
    power,
    power_bump,
    power_log,
    young_from_spec,
)

K, L = 1, 4
N = 2 ** (K + 1 + L)
Q = DyadicCube(1, (-1,), (0,))  # [-2, 0)


def _lux_oracle(f, B, Q):
    vals, w = cube_distribution(f, Q)
    g = lambda lam: float(np.sum(w * B(vals / lam))) - 1.0
    hi = max(vals.max(), 1.0)
    while g(hi) > 0:
        hi *= 2
    return optimize.brentq(g, 1e-12, hi, xtol=1e-15, rtol=1e-14)


def _rand_f(seed):
    rng = np.random.default_rng(seed)
    return MeshFunction(rng.exponential(size=N) * (rng.random(N) < 0.8) + 1e-3, K, L)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(1.1, 6.0))
def test_luxemburg_power_is_lp_average(seed, p):
    f = _rand_f(seed)
    ref = (f.power(p).integral(Q) / float(Q.volume)) ** (1 / p)
    for method in ("auto", "bisect"):
        assert luxemburg_norm(f, power(p), Q, method=method) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("B", [log_bump(2.0, 0.5), double_log_bump(3.0, 1.0), phi_family(2.0), power_log(1.5, 0.5)])
def test_luxemburg_matches_root_finder(B):
    for seed in range(5):
        f = _rand_f(seed)
        assert luxemburg_norm(f, B, Q) == pytest.approx(_lux_oracle(f, B, Q), rel=1e-9)


@pytest.mark.parametrize("B", [power(2.0), log_bump(2.0, 1.0), phi_family(1.0)])
def test_amemiya_between_one_and_two_luxemburg(B):
    for seed in range(5):
        f = _rand_f(seed)
        lux = luxemburg_norm(f, B, Q)
        am = amemiya_norm(f, B, Q)
        assert lux * (1 - 1e-9) <= am <= 2 * lux * (1 + 1e-9)


def test_power_associate_closed_form():
    p = 3.0
    pp = p / (p - 1)
    Bbar = power(p).associate()
    s = np.logspace(-2, 2, 9)
    assert np.allclose(Bbar(s), (p - 1) * (s / p) ** pp, rtol=1e-9)


@pytest.mark.parametrize("B", [log_bump(2.0, 0.5), phi_family(1.0), power_log(3.0, 1.0)])
def test_associate_matches_brute_legendre(B):
    Bbar = B.associate()
    t = np.concatenate([[0.0], np.logspace(-6, 16, 600_001)])
    Bt = B(t)
    for s in (0.7, 2.0, 5.0, 30.0):
        brute = float(np.max(s * t - Bt))
        assert float(Bbar(s)) == pytest.approx(brute, rel=2e-3)


@pytest.mark.parametrize(
    "B",
    [power(2.0), power_bump(2.0, 1.5), log_bump(2.0, 0.5), double_log_bump(2.0, 0.5), phi_family(1.0), power_log(1.5, 2.0), custom(np.logspace(-3, 3, 40), np.logspace(-3, 3, 40) ** 2.5)],
)
def test_duality_band_and_inverse(B):
    d = duality_band(B, ts=np.logspace(-3, 3, 100))
    assert d["ok"], d
    y = np.logspace(-3, 3, 13)
    assert np.allclose(B(B.inverse(y)), y, rtol=1e-8)


def test_holder_defect_at_most_two():
    rng = np.random.default_rng(11)
    for B in (log_bump(2.0, 0.5), phi_family(2.0), power(3.0)):
        for _ in range(30):
            f = MeshFunction(rng.exponential(size=N), K, L)
            g = MeshFunction(rng.exponential(size=N) ** 3, K, L)
            assert holder_defect(f, g, B, Q) <= 2.0


def test_bp_verdicts():
    p = 2.0
    pp = p / (p - 1)
    assert bp_check(power_bump(p, 1.5).associate(), p)["in_Bp"] is True
    assert bp_check(log_bump(pp, 0.5).associate(), p)["in_Bp"] is True
    assert bp_check(power(pp).associate(), p)["in_Bp"] is False
    # numeric path: tabulated t^1.5 is in B_2, t^2.5 is not
    tab = np.logspace(-3, 3, 60)
    assert bp_check(custom(tab, tab ** 1.5), 2.0)["in_Bp"] is True
    assert bp_check(custom(tab, tab ** 2.5), 2.0)["in_Bp"] is False


def test_bp_integral_of_power():
    a, p = 1.25, 2.0
    head, tail = bp_integral(power(a), p)
    assert head + tail == pytest.approx(1.0 / (p - a), rel=1e-8)


def test_log_bump_formula():
    B = log_bump(2.0, 0.5)
    t = np.array([0.5, 1.0, 7.0])
    assert np.allclose(B(t), t ** 2 * np.log(math.e + t) ** 1.5)


def test_spec_round_trip():
    B = young_from_spec({"family": "log_bump", "p": 2, "delta": 0.5})
    assert float(B(3.0)) == pytest.approx(float(log_bump(2.0, 0.5)(3.0)))
    A = young_from_spec({"family": "power", "p": 3, "associate": True})
    assert float(A(2.0)) == pytest.approx(float(power(3.0).associate()(2.0)))
    with pytest.raises(ValueError):
        young_from_spec({"family": "nope"})
