"""Acceptance suite: one test per criterion, at full stated scale.

Run with `pytest tests/test_acceptance.py -v -s` to see one pass/fail line
per criterion.  The Monte Carlo criteria (5-8) use at least 1e6 trials per
SNR point and take minutes; everything else is seconds.
"""

import itertools
import os
import time
from fractions import Fraction

import numpy as np
import pytest

from stc_dmt import algebra, cli, decoder, dmt, lattice
from stc_dmt.channel import ChannelSpec, Model
from stc_dmt.decoder import error_prob_mc
from stc_dmt.dmt import (diag_golden_dmt, inf_lemma_multiblock_lp, inf_lemma_oracle,
                         inf_lemma_value, optimal_dmt, outage_exponent_mc,
                         quaternion_dmt, real_dmt, slope_fit)
from stc_dmt.lattice import enumerate_shell, min_abs_pdet_sq_exact

F = Fraction


def _report(name: str, ok: bool, detail: str, t0: float):
    status = "PASS" if ok else "FAIL"
    print(f"\n[{name}] {status} ({time.time() - t0:.1f}s) {detail}")
    assert ok, f"{name}: {detail}"


def test_acceptance_01_curve_exactness():
    t0 = time.time()
    ok = (
        optimal_dmt(2, 2).breakpoints == ((F(0), F(4)), (F(1), F(1)), (F(2), F(0)))
        and optimal_dmt(4, 1).breakpoints == ((F(0), F(4)), (F(1), F(0)))
        and real_dmt(4, 2).breakpoints == ((F(0), F(8)), (F(1, 2), F(9, 2)),
                                           (F(1), F(2)), (F(3, 2), F(1, 2)), (F(2), F(0)))
        and quaternion_dmt(4, 2).breakpoints == ((F(0), F(8)), (F(1), F(2)), (F(2), F(0)))
        and quaternion_dmt(2, 1).breakpoints == ((F(0), F(2)), (F(1), F(0)))
        and diag_golden_dmt().breakpoints == ((F(0), F(4)), (F(1, 2), F(1)), (F(1), F(0)))
    )
    _report("C1 curve exactness", ok, "optimal/real/quaternion/diag-golden "
            "breakpoints exact as rationals", t0)


def test_acceptance_02_infimum_lemma():
    t0 = time.time()
    worst = 0.0
    cases = 0
    for q, L in itertools.product(range(0, 7), range(1, 6)):
        s = F(0)
        while s <= L:
            gap = abs(inf_lemma_value(q, L, s) - inf_lemma_oracle(q, L, s))
            worst = max(worst, gap)
            cases += 1
            s += F(1, 4)
    worst_mb = 0.0
    mb_cases = 0
    for q, L in itertools.product(range(0, 7), range(1, 6)):
        if q < L - 1:
            continue  # multi-block LP is unbounded below q = L-1 (ledgered)
        s = F(0)
        while s <= L:
            single = inf_lemma_value(q, L, s)
            for k in (2, 3):
                gap = abs(inf_lemma_multiblock_lp(q, L, s, k) - k * single)
                worst_mb = max(worst_mb, gap)
                mb_cases += 1
            s += F(1, 2)
    ok = worst <= 1e-9 and worst_mb <= 1e-9
    _report("C2 infimum lemma", ok,
            f"{cases} closed-form vs vertex-oracle cases (max gap {worst:.2e}); "
            f"{mb_cases} multi-block LP cases (max gap {worst_mb:.2e})", t0)


def test_acceptance_03_nvd_integrality():
    t0 = time.time()
    lats = [algebra.alamouti_lattice(), algebra.real_sqrt3_lattice(),
            algebra.unramified_gamma3_lattice(), algebra.number_field_multiblock(5)]
    results = {}
    for lat in lats:
        for M in (6.0, 10.0):
            results[(lat.label, M)] = min_abs_pdet_sq_exact(lat, M)
    ok = all(v == 1 for v in results.values())
    _report("C3 NVD integrality", ok,
            "min |pdet| == 1 exactly on shells M=6,10 for "
            + ", ".join(l.label for l in lats), t0)


def test_acceptance_04_reshape_identity(rng):
    t0 = time.time()
    worst = 0.0
    for _ in range(1000):
        h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        X = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        y = h @ np.kron(np.eye(2), X) + w
        gap = np.abs(y.reshape(2, 2) - (h.reshape(2, 2) @ X + w.reshape(2, 2))).max()
        worst = max(worst, float(gap))
    ok = worst < 1e-12
    _report("C4 reshape identity", ok,
            f"4x1 diag(X,X) vs 2x2 system, max discrepancy {worst:.2e} over 1000 trials", t0)


def test_acceptance_05_counterexample_dmt_gap():
    t0 = time.time()
    dg = algebra.diag_replicate(algebra.golden_code(), 2)
    spec = ChannelSpec(4, 1)
    points = []
    for e in (1.5, 2.0, 2.5, 3.0):
        est = error_prob_mc(dg, spec, 10.0 ** e, 0.5, 10 ** 6, seed=501)
        points.append((est.rho, est.p_hat))
    fit = slope_fit(points)
    d_hat = fit.diversity
    predicted = diag_golden_dmt()(0.5)   # 1
    optimal = optimal_dmt(4, 1)(0.5)     # 2
    ok = d_hat <= 1.6 and d_hat < optimal and 0.6 <= d_hat <= 1.6
    _report("C5 counterexample DMT gap", ok,
            f"diag-Golden 4x1 r=1/2 fitted diversity {d_hat:.3f} "
            f"(predicted {predicted:g}, optimal {optimal:g}); "
            f"p={['%.3e' % p for _, p in points]}", t0)


def test_acceptance_06_alamouti_diversity():
    t0 = time.time()
    alam = algebra.alamouti_lattice()
    spec = ChannelSpec(2, 1)
    runs = [error_prob_mc(alam, spec, 10.0 ** 1.5, 0.0, 2 * 10 ** 6, seed=601),
            error_prob_mc(alam, spec, 10.0 ** 2.5, 0.0, 6 * 10 ** 6, seed=601)]
    fit = slope_fit([(p.rho, p.p_hat) for p in runs])
    ok = 1.6 <= fit.diversity <= 2.4
    _report("C6 Alamouti diversity", ok,
            f"2x1 fixed-rate fitted diversity {fit.diversity:.3f} vs d(0)=2; "
            f"errors={[p.errors for p in runs]}", t0)


def test_acceptance_07_outage_exponents():
    t0 = time.time()
    cases = [
        ("complex 1x1 r=1/2", ChannelSpec(1, 1), 0.5,
         [10.0, 100.0, 1000.0], 10 ** 6, 0.5),
        ("real 2x1 r=0", ChannelSpec(2, 1, model=Model.REAL_EQUIVALENT), 0.0,
         [10.0, 10.0 ** 1.5, 100.0], 2 * 10 ** 6, 2.0),
        ("quaternion 2x1 r=1/2", ChannelSpec(2, 1, model=Model.QUATERNION_EQUIVALENT), 0.5,
         [10.0, 100.0, 1000.0], 2 * 10 ** 6, 1.0),
    ]
    details, ok = [], True
    for name, spec, r, grid, trials, target in cases:
        res = outage_exponent_mc(spec, r, grid, trials, seed=701)
        good = abs(res.exponent - target) <= 0.4
        ok = ok and good
        details.append(f"{name}: {res.exponent:.3f} vs {target:g}")
    _report("C7 outage exponents", ok, "; ".join(details), t0)


def test_acceptance_08_multiblock_diversity():
    t0 = time.time()
    nf = algebra.number_field_multiblock(5)
    spec = ChannelSpec(1, 1, blocks=2)
    points = []
    for e in (1.5, 2.0, 2.5):
        est = error_prob_mc(nf, spec, 10.0 ** e, 0.0, 8 * 10 ** 6, seed=801)
        points.append((est.rho, est.p_hat))
    fit = slope_fit(points)
    ok = 1.5 <= fit.diversity <= 2.5
    _report("C8 multi-block diversity", ok,
            f"nf_multiblock(5) k=2 r=0 fitted diversity {fit.diversity:.3f} "
            f"vs k*d1(0)=2; p={['%.3e' % p for _, p in points]}", t0)


def test_acceptance_09_enumeration_oracle(rng):
    t0 = time.time()
    from test_lattice import brute_force_count, random_integer_lattice
    mismatches = 0
    for i in range(50):
        dim = int(rng.integers(2, 5))
        lat = random_integer_lattice(rng, dim)
        M = float(rng.uniform(2.0, 4.5))
        got = {tuple(c) for c in enumerate_shell(lat, M).coeffs}
        if got != brute_force_count(lat, M):
            mismatches += 1
    alam = algebra.alamouti_lattice()
    ratio = len(enumerate_shell(alam, 20.0)) / len(enumerate_shell(alam, 10.0))
    ratio_ok = abs(ratio / 2 ** alam.dim - 1) <= 0.15
    ok = mismatches == 0 and ratio_ok
    _report("C9 enumeration exactness", ok,
            f"50 random lattices vs brute force ({mismatches} mismatches); "
            f"Alamouti doubling ratio {ratio:.2f} vs {2 ** alam.dim}", t0)


def test_acceptance_10_determinism(tmp_path):
    t0 = time.time()
    sim_doc = {"mode": "simulate", "code": "alamouti", "channel": {"m": 1},
               "r": 0.0, "rho_exponents": {"start": 1.0, "stop": 1.5, "count": 2},
               "trials": 50_000, "seed": 1001, "plot": False}
    out_doc = {"mode": "outage", "code": "alamouti", "channel": {"m": 1},
               "r": 0.5, "rho_exponents": {"start": 1.0, "stop": 2.0, "count": 3},
               "trials": 100_000, "seed": 1002, "plot": False}
    blobs = {"simulate": set(), "outage": set()}
    previous = os.environ.get("STC_DMT_WORKERS")
    try:
        for workers in ("1", "2", "8"):
            os.environ["STC_DMT_WORKERS"] = workers
            for name, doc in (("simulate", sim_doc), ("outage", out_doc)):
                config = cli.config_from_dict(doc)
                result = cli.run(config, tmp_path / f"{name}-{workers}")
                blobs[name].add(result.csv_path.read_bytes())
    finally:
        if previous is None:
            os.environ.pop("STC_DMT_WORKERS", None)
        else:
            os.environ["STC_DMT_WORKERS"] = previous
    ok = len(blobs["simulate"]) == 1 and len(blobs["outage"]) == 1
    _report("C10 determinism", ok,
            "simulate and outage CSVs byte-identical across 1/2/8 workers", t0)
