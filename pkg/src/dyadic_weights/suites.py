"""Verification suites driven by a validated config dict.

Every suite returns a ``SuiteResult``: CSV rows, a summary dict and optional
side files.  Randomized suites draw one independent generator per trial from
``SeedSequence(seed).spawn``, so results do not depend on ``jobs``.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bounds
from .constants import (
    CSV_HEADER,
    bump_constant,
    dyadic_out_operator,
    growth_verdict,
    norm_ratio,
    one_weight_apq,
    sawyer_testing_maximal,
    testing_commutator,
    testing_frac,
    two_weight_apq,
)
from .gallery import (
    doubling_increments,
    example_separated_vs_conjoined,
    example_strong_failure,
    example_weak_failure,
    linear_fit,
    pair_from_spec,
)
from .grid import all_shifts, parse_cube
from .mesh import MeshFunction, WeightPair, weight_from_spec
from .operators import (
    commutator_dyadic,
    dyadic_frac_integral,
    dyadic_maximal,
    frac_integral,
    frac_maximal_continuum_1d,
    sparse_apply,
)
from .orlicz import double_log_bump, log_bump, young_from_spec
from .sparse_corona import (
    certify_sparse,
    corona_build,
    cz_family,
    sparse_from_averages,
    sparse_from_maximal,
)

SLACK = 1e-9


class NumericFailure(RuntimeError):
    """A declared invariant failed; the message names it."""


@dataclass
class SuiteResult:
    suite: str
    header: list[str]
    rows: list[list]
    passes: int = 0
    failures: list[str] = field(default_factory=list)
    worst: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)  # name -> text
    extra: dict = field(default_factory=dict)

    def check(self, ok: bool, name: str):
        if ok:
            self.passes += 1
        else:
            self.failures.append(name)

    def note_worst(self, key: str, value: float):
        v = float(value)
        if key not in self.worst or v > self.worst[key]:
            self.worst[key] = v

    def summary(self) -> dict:
        out = {
            "suite": self.suite,
            "passes": self.passes,
            "failures": len(self.failures),
            "failed_checks": sorted(set(self.failures)),
            "worst_case_ratios": {k: self.worst[k] for k in sorted(self.worst)},
        }
        out.update(self.extra)
        return out


def _map(fn: Callable, args: list, jobs: int) -> list:
    if jobs <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, args))


def _streams(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(int(seed)).spawn(n)


def random_step(rng: np.random.Generator, K: int, L: int, n: int = 1, block: int = 8, zero_frac: float = 0.5, positive: bool = False) -> MeshFunction:
    N = 2 ** (K + 1 + L)
    nb = max(N // block, 1)
    shape = (nb,) * n
    vals = rng.exponential(size=shape)
    if positive:
        vals = np.exp(rng.normal(size=shape))
    elif zero_frac > 0:
        vals = vals * (rng.random(shape) >= zero_frac)
    for ax in range(n):
        vals = np.repeat(vals, N // nb, axis=ax)
    return MeshFunction(vals, K, L)


# --- verify-equivalence ----------------------------------------------------------------------------
def _equivalence_trial(args) -> dict:
    ss, K, L, n, alphas, checks = args
    rng = np.random.default_rng(ss)
    f = random_step(rng, K, L, n)
    worst = {}
    fails = []

    def note(key, v):
        worst[key] = max(worst.get(key, 0.0), float(v))

    cont = {}
    if "continuum" in checks and n == 1:
        for a in alphas:
            cont[a] = frac_integral(f, a).values
    for a in alphas:
        sup_id = None
        for t in all_shifts(n):
            if "sparse" in checks:
                for fam in (sparse_from_maximal(f, a, t), sparse_from_averages(f, t), cz_family(f, t)):
                    rep = certify_sparse(fam, raise_on_failure=False)
                    if not rep["ok"]:
                        fails.append(f"sparse certificate ({fam.generator})")
                    note("sparse_min_E_ratio_deficit", 0.5 / max(rep["min_E_ratio"], 1e-300) if fam.cubes else 0.0)
            if "sandwich" in checks:
                S = sparse_from_maximal(f, a, t)
                Ls = sparse_apply(f, a, S, "L").values
                Md = dyadic_maximal(f, a, t, fine=False).values
                cM = bounds.sparse_maximal(n, a)
                r1 = _ratio(Ls, Md)
                r2 = _ratio(Md, cM * Ls)
                note("L_S/M_D", r1)
                note("M_D/(a L_S)", r2)
                SA = sparse_from_averages(f, t)
                Is = sparse_apply(f, a, SA, "I").values
                Id = dyadic_frac_integral(f, a, t, fine=False).values
                cI = bounds.sparse_integral(n, a)
                r3 = _ratio(Is, Id)
                r4 = _ratio(Id, cI * Is)
                note("I_S/I_D", r3)
                note("I_D/(C I_S)", r4)
                for key, r in (("L_S<=M_D", r1), ("M_D<=aL_S", r2), ("I_S<=I_D", r3), ("I_D<=CI_S", r4)):
                    if r > 1 + SLACK:
                        fails.append(key)
            if a in cont:
                Idf = dyadic_frac_integral(f, a, t, fine=True).values
                r5 = _ratio(Idf, bounds.dyadic_over_continuum(n, a) * cont[a])
                note("I_D/(C' I)", r5)
                if r5 > 1 + SLACK:
                    fails.append("I_D<=C'I")
                big = dyadic_frac_integral(f, a, t, kmax=K + 4, fine=True).values
                sup_id = big if sup_id is None else np.maximum(sup_id, big)
        if a in cont:
            r6 = _ratio(cont[a], bounds.continuum_over_dyadic(n, a) * sup_id)
            note("I/(C'' sup I_D)", r6)
            if r6 > 1 + SLACK:
                fails.append("I<=C''supI_D")
    return {"worst": worst, "fails": fails}


def _ratio(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    pos = a > 0
    if not pos.any():
        return 0.0
    with np.errstate(divide="ignore"):
        r = np.where(b[pos] > 0, a[pos] / np.where(b[pos] > 0, b[pos], 1.0), math.inf)
    return float(r.max())


def run_verify_equivalence(cfg: dict, seed: int, jobs: int = 1) -> SuiteResult:
    K, L = cfg["mesh"]["K"], cfg["mesh"]["L"]
    n = cfg.get("dimension", 1)
    alphas = cfg.get("alphas") or [cfg.get("exponents", {}).get("alpha", 0.5)]
    trials = int(cfg.get("trials", 0))
    checks = cfg.get("checks", ["sparse", "sandwich", "continuum"])
    res = SuiteResult("verify-equivalence", ["trial", "check", "worst_ratio"], [])
    args = [(ss, K, L, n, alphas, checks) for ss in _streams(seed, trials)]
    for i, out in enumerate(_map(_equivalence_trial, args, jobs)):
        for key in sorted(out["worst"]):
            res.rows.append([i, key, repr(out["worst"][key])])
            res.note_worst(key, out["worst"][key])
        res.check(not out["fails"], "; ".join(sorted(set(out["fails"]))) or "ok")
    res.extra["trials"] = trials
    return res


# --- constants ---------------------------------------------------------------------------------------
def _young(spec):
    return None if spec is None else young_from_spec(spec)


def _pair(cfg: dict, K: int, L: int) -> WeightPair:
    w = cfg["weights"]
    n = cfg.get("dimension", 1)
    if "pair" in w:
        return pair_from_spec(w["pair"], K, L, n)[0]
    return WeightPair(weight_from_spec(w["u"], K, L, n), weight_from_spec(w["sigma"], K, L, n))


def _one_constant(item: dict, cfg: dict, K: int, L: int):
    ex = cfg.get("exponents", {})
    p, q, a = ex.get("p", 2.0), ex.get("q", 2.0), ex.get("alpha", 0.0)
    name = item["name"]
    win = item.get("window")
    if name == "A_pq":
        w = weight_from_spec(cfg["weights"]["w"], K, L, cfg.get("dimension", 1))
        return one_weight_apq(w, p, q, a, win)
    pair = _pair(cfg, K, L)
    if name == "A_pq_alpha":
        return two_weight_apq(pair, p, q, a, win)
    if name in ("bump_right", "bump_left", "bump_conjoined"):
        return bump_constant(pair, p, q, a, _young(item.get("A")), _young(item.get("B")), name.split("_")[1], win)
    if name == "testing_M":
        return sawyer_testing_maximal(pair, p, q, a, win)
    if name.startswith("testing_I"):
        return testing_frac(pair, p, q, a, item.get("side", "forward"), item.get("locality", "full"), win)
    if name == "testing_C":
        b = weight_from_spec(cfg["weights"]["b"], K, L, cfg.get("dimension", 1))
        return testing_commutator(pair, b, p, q, a, item.get("side", "forward"), win)
    raise ValueError(f"unknown constant {name!r}")


def run_constants(cfg: dict, seed: int, jobs: int = 1) -> SuiteResult:
    L = cfg["mesh"]["L"]
    Ks = cfg.get("Ks") or [cfg["mesh"]["K"]]
    res = SuiteResult("constants", list(CSV_HEADER), [])
    for item in cfg["constants"]:
        vals = []
        for K in Ks:
            rep = _one_constant(item, cfg, K, L)
            vals.append(rep.value)
            res.check(rep.check_witness(), f"witness recomputation ({rep.name}, K={K})")
        verdict = growth_verdict(vals) if len(Ks) > 2 else rep.verdict
        rep.verdict = verdict
        res.rows.append(rep.csv_row())
        exp = item.get("expect")
        if exp is not None:
            res.check(verdict == exp, f"verdict {rep.name}: expected {exp}, got {verdict}")
        cap = item.get("max_value")
        if cap is not None:
            res.check(rep.value <= cap * (1 + SLACK), f"{rep.name} <= {cap}")
            res.note_worst(f"{rep.name}/cap", rep.value / cap)
        if len(Ks) > 1:
            res.extra.setdefault("sweeps", {})[rep.name] = {"Ks": Ks, "values": vals}
    return res


# --- testing ------------------------------------------------------------------------------------------
TESTING_VARIANTS = [
    ("testing_M", {}),
    ("testing_I", {"side": "forward", "locality": "full"}),
    ("testing_I", {"side": "dual", "locality": "full"}),
    ("testing_I", {"side": "forward", "locality": "dyadic_in"}),
    ("testing_I", {"side": "forward", "locality": "dyadic_out"}),
]


def run_testing(cfg: dict, seed: int, jobs: int = 1) -> SuiteResult:
    ex = cfg.get("exponents", {})
    p, q, a = ex.get("p", 2.0), ex.get("q", 2.0), ex.get("alpha", 0.5)
    L = cfg["mesh"]["L"]
    Ks = cfg.get("Ks") or [cfg["mesh"]["K"]]
    window_lo = cfg.get("window_lo")
    res = SuiteResult("testing", list(CSV_HEADER), [])
    wanted = cfg.get("variants")
    expect = cfg.get("expect", {})
    for name, kw in TESTING_VARIANTS:
        label = name if not kw else f"{name}_{kw['side']}_{kw['locality']}"
        if wanted and label not in wanted:
            continue
        vals = []
        for K in Ks:
            pair = _pair(cfg, K, L)
            win = None if window_lo is None else (window_lo, K)
            rep = sawyer_testing_maximal(pair, p, q, a, win) if name == "testing_M" else testing_frac(pair, p, q, a, window=win, **kw)
            vals.append(rep.value)
            res.check(rep.check_witness(), f"witness recomputation ({label}, K={K})")
            if kw.get("locality") == "dyadic_out" and rep.witness is not None:
                r = _out_domination(pair, a, rep.witness)
                res.note_worst("dyadic_out/(C M_alpha)", r)
                res.check(r <= 1 + SLACK, "dyadic_out <= C M_alpha")
        verdict = growth_verdict(vals) if len(Ks) > 2 else ("finite" if all(math.isfinite(v) for v in vals) else "infinite")
        rep.verdict = verdict
        row = rep.csv_row()
        row[0] = label
        res.rows.append(row)
        res.extra.setdefault("sweeps", {})[label] = {"Ks": Ks, "values": vals}
        want = expect.get(label)
        if want is not None:
            res.check(verdict == want, f"verdict {label}: expected {want}, got {verdict}")
    return res


def _out_domination(pair: WeightPair, alpha: float, Q) -> float:
    """max over centres of I^{D,out}_Q(σχ_Q) / (C M_α(σχ_Q)) (1D, continuum M)."""
    s = pair.sigma.restrict(Q)
    out = dyadic_out_operator(s, Q, alpha)
    if s.n != 1:
        return 0.0
    M = frac_maximal_continuum_1d(s, alpha)
    return _ratio(out, bounds.out_over_maximal(1, alpha) * M)


# --- corona-dump --------------------------------------------------------------------------------------
def run_corona_dump(cfg: dict, seed: int, jobs: int = 1) -> SuiteResult:
    K, L = cfg["mesh"]["K"], cfg["mesh"]["L"]
    n = cfg.get("dimension", 1)
    w = cfg["weights"]
    f = weight_from_spec(w["f"], K, L, n)
    s = weight_from_spec(w["sigma"], K, L, n)
    roots = [parse_cube(c) for c in cfg["roots"]] if cfg.get("roots") else None
    grid = tuple(cfg.get("grid", [0] * n))
    F = corona_build(f, s, roots, grid)
    cert = F.certificate()
    res = SuiteResult("corona-dump", ["cube", "average", "sigma", "sigma_E", "children"], [])
    for node in F.to_json()["nodes"]:
        res.rows.append([node["cube"], repr(node["average"]), repr(node["sigma"]), repr(node["sigma_E"]), len(node["children"])])
    res.check(cert["ok"], "sigma(E_F(F)) >= sigma(F)/2")
    if cert["min_ratio"] is not None:
        res.note_worst("1/(2 min sigma_E/sigma)", 0.5 / cert["min_ratio"])
    res.files["corona.json"] = F.dumps() + "\n"
    return res


# --- gallery ---------------------------------------------------------------------------------------------
def run_gallery(cfg: dict, seed: int, jobs: int = 1) -> SuiteResult:
    ex = cfg.get("exponents", {})
    name = cfg["example"]
    res = SuiteResult("gallery", ["parameter", "quantity", "value"], [])
    p, q, a = ex.get("p"), ex.get("q"), ex.get("alpha")
    if name == "factored":
        return _gallery_factored(cfg, seed, jobs, res)
    if name == "apq_insufficient_strong":
        p, q, a = p or 2.0, q or 5.0, a or 0.25
        E = example_strong_failure(p, q, a, realize=cfg.get("realize", False))
        F = [v for _, v in E.curves["functional"]]
        Ts = [t for t, _ in E.curves["functional"]]
        pred = E.info["prediction_per_doubling"]
        incs = doubling_increments(F)
        worst = max(abs(d / pred - 1.0) for d in incs)
        res.note_worst("increment/prediction-1", worst)
        res.check(worst <= 0.20, "doubling increments within 20% of prediction")
        if E.pair is not None:
            rep = two_weight_apq(E.pair, p, q, a)
            res.check(math.isfinite(rep.value), "pair in A^alpha_{p,q}")
            res.extra["A_pq_alpha"] = rep.value
    elif name == "apq_insufficient_weak":
        p, q, a = p or 4.0, q or 4.0, a or 0.5
        E = example_weak_failure(p, q, a, realize=False)
        X = [v for _, v in E.curves["loglog_reference"]]
        for key in sorted(E.curves):
            if key.startswith("kernel_integral"):
                fit = linear_fit(X, [v for _, v in E.curves[key]])
                res.extra.setdefault("fits", {})[key] = fit
                res.check(fit["r2"] > 0.9 and fit["slope"] > 0, f"loglog growth ({key})")
        nm = dict(E.curves["f_norm_p"])
        if 2.0 ** 20 in nm and 2.0 ** 30 in nm:
            rel = abs(nm[2.0 ** 30] - nm[2.0 ** 20]) / nm[2.0 ** 30]
            res.note_worst("f_norm_rel_change", rel)
            res.check(rel < 0.01, "f in L^p(sigma): partial norms converge")
    elif name == "separated_vs_conjoined":
        p, q, a = p or 2.0, q or 2.0, a or 0.5
        kmax = int(cfg.get("k_max", 20))
        E = example_separated_vs_conjoined(p, q, a, kmax)
        ks = [k for k, _ in E.curves["conjoined_Qk"]]
        conj = [v for _, v in E.curves["conjoined_Qk"]]
        fit = linear_fit(np.log(math.e + np.array(ks)), np.array(conj) ** 2)
        res.extra["conjoined_fit"] = fit
        res.check(fit["slope"] > 0 and fit["r2"] > 0.9, "conjoined^2 linear in log(e+k)")
        half = len(ks) // 2
        for side in ("separated_left", "separated_right"):
            v = [x for _, x in E.curves[side]][half:]
            change = (max(v) - min(v)) / max(v) if max(v) > 0 else 0.0
            res.note_worst(f"{side}_change", change)
            res.check(change < 0.10, f"{side} flat over top half")
        bb = [v for _, v in E.curves["building_block_L1"]]
        err = max(abs(x - y) / y for x, y in zip(bb, E.info["building_block_closed"]))
        res.check(err < 1e-12, "building block L1 identity")
    else:
        raise ValueError(f"unknown example {name!r}")
    res.rows = [[repr(r[0]), r[1], repr(r[2])] for r in E.csv_rows()]
    res.extra["example"] = name
    return res


def _factored_trial(args) -> dict:
    ss, K, L, p, q, a = args
    from .gallery import factored_pair

    rng = np.random.default_rng(ss)
    w1 = random_step(rng, K, L, positive=True)
    w2 = random_step(rng, K, L, positive=True)
    pair, info = factored_pair(w1, w2, p, q, a)
    rep = two_weight_apq(pair, p, q, a)
    return {"value": rep.value, "gamma": info["gamma"], "witness_ok": rep.check_witness()}


def _gallery_factored(cfg, seed, jobs, res):
    ex = cfg.get("exponents", {})
    p, q, a = ex.get("p", 2.0), ex.get("q", 2.0), ex.get("alpha", 0.5)
    K, L = cfg["mesh"]["K"], cfg["mesh"]["L"]
    trials = int(cfg.get("trials", 0))
    tol = bounds.factored_tolerance()
    outs = _map(_factored_trial, [(ss, K, L, p, q, a) for ss in _streams(seed, trials)], jobs)
    for i, o in enumerate(outs):
        res.rows.append([repr(float(i)), "A_pq_alpha", repr(o["value"])])
        res.note_worst("A_pq_alpha", o["value"])
        res.check(o["value"] <= 1 + tol, "factored pair constant <= 1 + eps")
        res.check(o["witness_ok"], "witness recomputation")
    res.extra["example"] = "factored"
    return res


# --- bump-sufficiency ---------------------------------------------------------------------------------
def _bump_trial(args) -> dict:
    ss, K, L, p, q, a, delta, op, nf = args
    rng = np.random.default_rng(ss)
    u = random_step(rng, K, L, positive=True, block=4)
    s = random_step(rng, K, L, positive=True, block=4)
    pair = WeightPair(u, s)
    pp, qq = p / (p - 1), q / (q - 1)
    if op == "maximal":
        B = log_bump(pp, delta)
        const = bump_constant(pair, p, q, a, None, B, "right", window=(-L, K + 2)).value
        fix = bounds.maximal_bump(1, a, p, q, B.associate())
    elif op == "frac":
        A, B = log_bump(q, delta), log_bump(pp, delta)
        const = bump_constant(pair, p, q, a, A, B, "conjoined", window=(-L, K + 4)).value
        fix = bounds.frac_bump(1, a, p, q, A.associate(), B.associate())
    else:
        A, B = double_log_bump(q, delta), double_log_bump(pp, delta)
        const = bump_constant(pair, p, q, a, A, B, "conjoined", window=(-L, K)).value
        fix = bounds.commutator_bump(1, a, p, q, A.associate(), B.associate())
    b = None
    if op == "commutator":
        b = MeshFunction(np.repeat(rng.uniform(-1, 1, size=2 ** (K + 1 + L) // 8), 8), K, L)
        osc = float(b.values.max() - b.values.min())
    worst = 0.0
    for _ in range(nf):
        f = random_step(rng, K, L, block=4, zero_frac=0.3)
        fs = f * s
        if op == "maximal":
            Tv = frac_maximal_continuum_1d(fs, a)
            scale = 1.0
        elif op == "frac":
            Tv = frac_integral(fs, a).values
            scale = 1.0
        else:
            Tv = commutator_dyadic(b, fs, a, (0,), kmax=K).values
            scale = osc if osc > 0 else 1.0
        r = norm_ratio(Tv, f, u, s, p, q) / (scale * const)
        worst = max(worst, r)
    return {"ratio": worst, "fixture": fix, "constant": const}


def run_bump_sufficiency(cfg: dict, seed: int, jobs: int = 1) -> SuiteResult:
    ex = cfg.get("exponents", {})
    p, q, a, d = ex.get("p", 2.0), ex.get("q", 3.0), ex.get("alpha", 0.5), ex.get("delta", 1.0)
    K, L = cfg["mesh"]["K"], cfg["mesh"]["L"]
    trials = int(cfg.get("trials", 0))
    nf = int(cfg.get("functions", 100))
    ops = cfg.get("operators", ["maximal", "frac", "commutator"])
    res = SuiteResult("bump-sufficiency", ["operator", "pair", "ratio", "fixture"], [])
    for op in ops:
        seeds = _streams(seed + ["maximal", "frac", "commutator"].index(op), trials)
        outs = _map(_bump_trial, [(ss, K, L, p, q, a, d, op, nf) for ss in seeds], jobs)
        for i, o in enumerate(outs):
            res.rows.append([op, i, repr(o["ratio"]), repr(o["fixture"])])
            res.note_worst(f"{op}: ratio/fixture", o["ratio"] / o["fixture"])
            res.check(o["ratio"] <= o["fixture"], f"{op} ratio <= fixture")
    return res


SUITES = {
    "constants": run_constants,
    "verify-equivalence": run_verify_equivalence,
    "testing": run_testing,
    "corona-dump": run_corona_dump,
    "gallery": run_gallery,
    "bump-sufficiency": run_bump_sufficiency,
}
