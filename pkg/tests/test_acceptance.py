"""Acceptance criteria 1-10.  Each test prints one PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines are printed with capture
disabled) or ``python3 tests/test_acceptance.py`` for the lines alone.
"""
from __future__ import annotations

import json
import math
import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from dyadic_weights import bounds
from dyadic_weights.constants import growth_verdict, sawyer_testing_maximal, two_weight_apq
from dyadic_weights.constants import testing_frac as frac_testing
from dyadic_weights.gallery import (
    doubling_increments,
    example_separated_vs_conjoined,
    example_strong_failure,
    example_weak_failure,
    factored_pair,
    linear_fit,
)
from dyadic_weights.grid import DyadicCube, all_shifts, one_third_cover
from dyadic_weights.mesh import MeshFunction, WeightPair
from dyadic_weights.orlicz import (
    bp_check,
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
)
from dyadic_weights.sparse_corona import certify_sparse, corona_build, cz_family, sparse_from_averages, sparse_from_maximal
from dyadic_weights.suites import (
    _bump_trial,
    _equivalence_trial,
    _out_domination,
    _streams,
    random_step,
)

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str):
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


# 1 ------------------------------------------------------------------------------------------------
def test_criterion_01_one_third_cover(report):
    rng = np.random.default_rng(1)
    cases = []
    for _ in range(10_000):
        den = 2 ** int(rng.integers(0, 12)) * int(rng.choice([1, 3, 5, 7]))
        side = Fraction(int(rng.integers(1, 64 * den)), den)
        if side >= 64:
            side = Fraction(63)
        lo = Fraction(int(rng.integers(-32 * den, int((32 - side) * den) + 1)), den)
        cases.append((lo, side))
    t0 = time.perf_counter()
    covers = [one_third_cover([lo], side)[1] for lo, side in cases]
    dt = time.perf_counter() - t0
    bad = 0
    for (lo, side), P in zip(cases, covers):
        plo, phi = P.bounds()[0]
        if not (plo <= lo and lo + side <= phi and P.side <= 3 * side):
            bad += 1
    ok = bad == 0 and dt < 1.0
    report(1, ok, f"{len(cases) - bad}/{len(cases)} covers valid (exact Fraction check); cover time {dt:.3f} s (< 1 s)")
    assert ok


# 2 ------------------------------------------------------------------------------------------------
def test_criterion_02_sparsity_certificates(report):
    K, L = 4, 10
    t0 = time.perf_counter()
    bad, fams = 0, 0
    streams = _streams(2, 200)
    for i, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        f = random_step(rng, K, L, block=int(rng.choice([8, 32, 128])))
        t = all_shifts(1)[i % 3]
        for fam in (sparse_from_maximal(f, float(rng.choice([0.25, 0.5, 0.75])), t), sparse_from_averages(f, t), cz_family(f, t)):
            rep = certify_sparse(fam, raise_on_failure=False)
            fams += 1
            bad += not (rep["ok"] and rep["disjoint"] and rep["min_E_ratio"] >= 0.5)
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 30
    report(2, ok, f"{fams - bad}/{fams} families certified (|E(Q)| >= |Q|/2 exact, disjoint) at L=10, {dt:.1f} s (< 30 s)")
    assert ok


# 3 ------------------------------------------------------------------------------------------------
def test_criterion_03_sandwich_inequalities(report):
    K, L = 3, 6
    worst: dict[str, float] = {}
    fails = []
    for ss in _streams(3, 100):
        out = _equivalence_trial((ss, K, L, 1, [0.25, 0.5, 0.75], ["sandwich", "continuum"]))
        fails += out["fails"]
        for k, v in out["worst"].items():
            worst[k] = max(worst.get(k, 0.0), v)
    ok = not fails
    detail = ", ".join(f"{k} max {v:.4g}" for k, v in sorted(worst.items()))
    report(3, ok, f"100 trials x 3 alphas x 3 grids, violations={len(fails)}; {detail}")
    assert ok


# 4 ------------------------------------------------------------------------------------------------
def _exact_mass(vals, Q: DyadicCube, K: int, L: int) -> Fraction:
    lo, hi = Q.bounds()[0]
    h = Fraction(1, 2 ** L)
    R = Fraction(2 ** K)
    tot = Fraction(0)
    i0 = max(0, math.floor((lo + R) / h))
    i1 = min(len(vals), math.ceil((hi + R) / h))
    for i in range(i0, i1):
        a = -R + i * h
        ov = min(a + h, hi) - max(a, lo)
        if ov > 0:
            tot += Fraction(int(vals[i])) * ov
    return tot


def test_criterion_04_corona(report):
    K, L = 1, 3
    N = 2 ** (K + 1 + L)
    bad, nodes = 0, 0
    for ss in _streams(4, 1000):
        rng = np.random.default_rng(ss)
        fv = rng.integers(0, 6, size=N) * (rng.random(N) < 0.6)
        sv = rng.integers(0, 4, size=N)
        f, s = MeshFunction(fv.astype(float), K, L), MeshFunction(sv.astype(float), K, L)
        t = all_shifts(1)[int(rng.integers(0, 3))]
        F = corona_build(f, s, grid=t)
        for node in F.nodes:
            nodes += 1
            full = _exact_mass(sv, node, K, L)
            kids = sum((_exact_mass(sv, c, K, L) for c in F.children[node]), Fraction(0))
            if full > 0 and full - kids < full / 2:
                bad += 1
        bad += not F.certificate()["ok"]
    ok = bad == 0
    report(4, ok, f"1000 (f, sigma) pairs, {nodes} corona nodes, exact sigma(E_F) >= sigma(F)/2 violations={bad}")
    assert ok


# 5 ------------------------------------------------------------------------------------------------
def _registered_families():
    tab = np.logspace(-3, 3, 40)
    return [
        power(2.0),
        power(3.0, 0.5),
        power_bump(2.0, 1.5),
        log_bump(2.0, 0.5),
        log_bump(3.0, 1.0),
        double_log_bump(2.0, 0.5),
        phi_family(1.0),
        phi_family(2.0),
        power_log(1.5, 2.0),
        custom(tab, tab ** 2.5),
    ]


def test_criterion_05_orlicz_calculus(report):
    rng = np.random.default_rng(5)
    K, L = 2, 5
    lux_err = 0.0
    for _ in range(60):
        f = MeshFunction(np.abs(rng.normal(size=2 ** (K + 1 + L))) * 3, K, L)
        p = float(rng.uniform(1.0, 6.0))
        k = int(rng.integers(-L, K + 1))
        t = all_shifts(1)[int(rng.integers(0, 3))]
        rg = f.m_range(k, t)[0]
        Q = DyadicCube(k, (int(rng.integers(rg.start, rg.stop)),), t)
        if not (Q.bounds()[0][0] >= -2 ** K and Q.bounds()[0][1] <= 2 ** K):
            continue
        ref = (f.power(p).integral(Q) / float(Q.volume)) ** (1 / p)
        for method in ("auto", "bisect"):
            v = luxemburg_norm(f, power(p), Q, method=method)
            if ref > 0:
                lux_err = max(lux_err, abs(v - ref) / ref)
    band_ok = True
    band_range = [math.inf, -math.inf]
    for B in _registered_families():
        d = duality_band(B, ts=np.logspace(-3, 3, 100))
        band_ok &= d["ok"]
        band_range = [min(band_range[0], d["ratio_min"]), max(band_range[1], d["ratio_max"])]
    worst_def = 0.0
    fams = _registered_families()
    for i in range(1000):
        B = fams[i % len(fams)]
        f = MeshFunction(rng.exponential(size=2 ** (K + 1 + L)) * (rng.random(2 ** (K + 1 + L)) < 0.7), K, L)
        g = MeshFunction(rng.exponential(size=2 ** (K + 1 + L)) ** 2, K, L)
        k = int(rng.integers(-2, K))
        Q = DyadicCube(k, (int(rng.integers(-(2 ** (K - k)), 2 ** (K - k))),), (0,))
        worst_def = max(worst_def, holder_defect(f, g, B, Q))
    p = 2.0
    pp = p / (p - 1)
    verdicts = {
        "t^{r p'} (r=1.5)": bp_check(power_bump(p, 1.5).associate(), p)["in_Bp"],
        "log bump t^{p'}log^{p'-1+d}": bp_check(log_bump(pp, 0.5).associate(), p)["in_Bp"],
        "t^{p'}": bp_check(power(pp).associate(), p)["in_Bp"],
    }
    bp_ok = verdicts == {"t^{r p'} (r=1.5)": True, "log bump t^{p'}log^{p'-1+d}": True, "t^{p'}": False}
    ok = lux_err <= 1e-9 and band_ok and worst_def <= 2 and bp_ok
    report(
        5,
        ok,
        f"Luxemburg vs L^p rel err {lux_err:.2e} (<= 1e-9); duality band ratios in [{band_range[0]:.4f}, {band_range[1]:.4f}]; "
        f"max Holder defect {worst_def:.4f} (<= 2); B_p verdicts {verdicts}",
    )
    assert ok


# 6 ------------------------------------------------------------------------------------------------
def test_criterion_06_factored_weights(report):
    K, L = 2, 4
    p, q, a = 2.0, 3.0, 0.5
    eps = bounds.factored_tolerance()
    worst, ok_w = 0.0, True
    for ss in _streams(6, 50):
        rng = np.random.default_rng(ss)
        w1 = random_step(rng, K, L, positive=True, block=2)
        w2 = random_step(rng, K, L, positive=True, block=2)
        pair, _ = factored_pair(w1, w2, p, q, a)
        rep = two_weight_apq(pair, p, q, a)
        worst = max(worst, rep.value)
        ok_w &= rep.check_witness()
    ok = worst <= 1 + eps and ok_w
    report(6, ok, f"50 factored pairs: max [u,sigma]_A = {worst:.12f} (<= 1 + {eps:g}); witnesses recomputed")
    assert ok


# 7 ------------------------------------------------------------------------------------------------
def test_criterion_07_counter_example_asymptotics(report):
    t0 = time.perf_counter()
    parts = {}
    strong = example_strong_failure(2.0, 5.0, 0.25, Ts=[2.0 ** j for j in range(5, 21)], realize=False)
    F = [v for _, v in strong.curves["functional"]]
    pred = strong.info["prediction_per_doubling"]
    dev = max(abs(d / pred - 1) for d in doubling_increments(F))
    parts["strong increments"] = (dev <= 0.20, f"max |incr/log2 - 1| = {dev:.3f}")

    weak = example_weak_failure(4.0, 4.0, 0.5, Ts=[2.0 ** j for j in range(2, 31, 2)], realize=False)
    X = [v for _, v in weak.curves["loglog_reference"]]
    r2 = min(linear_fit(X, [v for _, v in weak.curves[k]])["r2"] for k in weak.curves if k.startswith("kernel"))
    parts["weak loglog"] = (r2 > 0.9, f"min R^2 = {r2:.5f}")

    sep = example_separated_vs_conjoined(2.0, 2.0, 0.5, 20)
    ks = np.array([k for k, _ in sep.curves["conjoined_Qk"]], float)
    conj = np.array([v for _, v in sep.curves["conjoined_Qk"]])
    fit = linear_fit(np.log(math.e + ks), conj ** 2)
    ext = [(k, v) for k, v in sep.curves["conjoined_Qk_extended"] if k >= 2.0 ** 11]
    efit = linear_fit(np.log(math.e + np.array([k for k, _ in ext])), np.array([v for _, v in ext]) ** 2)
    parts["conjoined growth k=2..20"] = (
        fit["slope"] > 0 and fit["r2"] > 0.9,
        f"slope {fit['slope']:.4f}, R^2 {fit['r2']:.3f}; diagnostic k=2^11..2^60: slope {efit['slope']:.4f}, R^2 {efit['r2']:.3f}",
    )
    changes = []
    for side in ("separated_left", "separated_right"):
        v = [x for _, x in sep.curves[side]][len(ks) // 2:]
        changes.append((max(v) - min(v)) / max(v))
    parts["separated flat"] = (max(changes) < 0.10, f"max change {max(changes):.4f}")
    dt = time.perf_counter() - t0
    parts["runtime"] = (dt < 300, f"{dt:.1f} s")
    ok = all(v[0] for v in parts.values())
    report(7, ok, "; ".join(f"{k}: {'ok' if v[0] else 'FAIL'} ({v[1]})" for k, v in parts.items()))
    assert ok


# 8 ------------------------------------------------------------------------------------------------
def test_criterion_08_bump_sufficiency(report):
    K, L = 2, 4
    worst = {}
    ok = True
    for i, op in enumerate(("maximal", "frac", "commutator")):
        for ss in _streams(80 + i, 20):
            o = _bump_trial((ss, K, L, 2.0, 3.0, 0.5, 1.0, op, 100))
            r = o["ratio"] / o["fixture"]
            worst[op] = max(worst.get(op, 0.0), r)
            ok &= o["ratio"] <= o["fixture"] and math.isfinite(o["constant"])
    report(8, ok, "20 pairs x 100 f; max ratio/fixture: " + ", ".join(f"{k} {v:.3g}" for k, v in worst.items()))
    assert ok


# 9 ------------------------------------------------------------------------------------------------
def test_criterion_09_testing_coherence(report):
    p = q = 2.0
    a = 0.5
    Ks = [4, 8, 12]
    L = 0
    stable = {}
    out_ratio = 0.0
    for label, fn in (
        ("M", lambda pr: sawyer_testing_maximal(pr, p, q, a)),
        ("I", lambda pr: frac_testing(pr, p, q, a, "forward", "full")),
        ("I*", lambda pr: frac_testing(pr, p, q, a, "dual", "full")),
        ("I_in", lambda pr: frac_testing(pr, p, q, a, "forward", "dyadic_in")),
        ("I_out", lambda pr: frac_testing(pr, p, q, a, "forward", "dyadic_out")),
    ):
        vals = []
        for K in Ks:
            pr = WeightPair(MeshFunction.indicator([(0, 1)], K, L), MeshFunction.indicator([(2, 3)], K, L))
            rep = fn(pr)
            vals.append(rep.value)
            if label == "I_out" and rep.witness is not None:
                out_ratio = max(out_ratio, _out_domination(pr, a, rep.witness))
        last = abs(vals[-1] - vals[-2]) / vals[-2]
        stable[label] = (all(math.isfinite(v) for v in vals) and growth_verdict(vals) == "finite" and last < 0.10, last)
    pw, qw = 4.0, 4.0
    duals = []
    for K in (2, 4, 8):
        ex = example_weak_failure(pw, qw, a, Ts=[2.0], K=K, L=2)
        duals.append(frac_testing(ex.pair, pw, qw, a, "dual", "full").value)
    verdict = growth_verdict(duals)
    ok = all(v[0] for v in stable.values()) and verdict == "growing" and out_ratio <= 1 + 1e-9
    report(
        9,
        ok,
        f"chi[0,1]/chi[2,3] over K={Ks}: verdict finite, last change "
        + ", ".join(f"{k} {v[1]:.3f}" for k, v in stable.items())
        + f"; weak-failure dual testing {[round(x, 4) for x in duals]} -> {verdict}; dyadic_out/(C M_alpha) max {out_ratio:.3f}",
    )
    assert ok


# 10 -----------------------------------------------------------------------------------------------
def test_criterion_10_determinism(report, tmp_path):
    cfgs = {
        "verify-equivalence": {"version": 1, "kind": "verify-equivalence", "mesh": {"K": 2, "L": 5}, "alphas": [0.5], "trials": 100, "seed": 7},
        "gallery": {"version": 1, "kind": "gallery", "example": "apq_insufficient_weak", "exponents": {"p": 4.0, "q": 4.0, "alpha": 0.5}, "outputs": {"plot": True}},
        "bump-sufficiency": {"version": 1, "kind": "bump-sufficiency", "mesh": {"K": 1, "L": 3}, "trials": 3, "functions": 5},
    }
    same = True
    for kind, cfg in cfgs.items():
        path = tmp_path / f"{kind}.json"
        path.write_text(json.dumps(cfg))
        blobs = []
        for run in range(2):
            out = tmp_path / f"{kind}_{run}"
            jobs = "2" if run else "1"
            subprocess.run([sys.executable, "-m", "dyadic_weights", kind, "--config", str(path), "--seed", "7", "--out", str(out), "--jobs", jobs], check=True, capture_output=True)
            blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        same &= blobs[0] == blobs[1]
    report(10, same, f"{len(cfgs)} CLI configs run twice (jobs 1 vs 2), all outputs byte-identical: {same}")
    assert same


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
