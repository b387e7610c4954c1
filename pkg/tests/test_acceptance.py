"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line; the lines are repeated in a dedicated
section of the pytest terminal summary.
"""

from __future__ import annotations

import math
import subprocess
import sys
import time

import numpy as np

from hardkernels import harness, verify
from hardkernels.config import config_from_mapping
from hardkernels.learners import BUDGETED
from hardkernels.losses import u_star, u_star_numeric


def sweep(**items):
    cfg = config_from_mapping({k: str(v) for k, v in items.items()})
    return harness.run_scaling_experiment(cfg)


def point(**items):
    cfg = config_from_mapping({k: str(v) for k, v in items.items()})
    return harness.aggregate(cfg, harness.run_records(cfg))


def test_criterion_01_block_identity(record_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    dev = max(verify.block_objective_deviation(rng, max_m=256) for _ in range(100))
    secs = time.perf_counter() - t0
    ok = dev <= 1e-10 and secs < 10
    record_criterion(1, ok, f"block vs dense objective, 100 cases m<=256: max dev {dev:.2e} in {secs:.2f}s")
    assert ok


def test_criterion_02_ridge_reduction(record_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    devs = [verify.ridge_reduction_deviation(rng, max_m=96) for _ in range(50)]
    beta = max(b for b, _ in devs)
    obj = max(o for _, o in devs)
    secs = time.perf_counter() - t0
    ok = beta <= 1e-9 and obj <= 1e-9 and secs < 10
    record_criterion(2, ok, f"50 block-constant kernels m<=96: beta dev {beta:.2e}, "
                            f"objective dev {obj:.2e} in {secs:.2f}s")
    assert ok


def test_criterion_03_scalar_minimizers(record_criterion):
    res = verify.verify_scalar_minimizers(seed=103, cases=1000)
    # anchor values; the hinge plateau u* = 1 holds for p*lam*d <= 1/2
    anchors = []
    for lam_d in (0.05, 0.1, 0.25):
        for p in (0.5, 1.0, 2.0):
            a = p * lam_d
            anchors.append(abs(u_star("squared", 1.0, a) - 1 / (1 + a)))
            anchors.append(abs(u_star("absolute", 1 / (2 * a), a) - 1 / (2 * a)))
            anchors.append(abs(u_star("linear", 1.0, a) + 1 / (2 * a)))
            anchors.append(abs(u_star("hinge", 1.0, a) - 1.0))
            anchors.append(abs(u_star_numeric("hinge", 1.0, a) - 1.0))
    anchor_dev = max(anchors)
    ok = res.passed and anchor_dev <= 1e-6
    record_criterion(3, ok, f"{res.summary}; anchor dev {anchor_dev:.1e} "
                            f"(hinge plateau checked for p*lam*d <= 1/2)")
    assert ok


def test_criterion_04_linear_zero_query(record_criterion):
    res = verify.verify_linear_zero_query(seed=104, instances=100)
    record_criterion(4, res.passed, f"100 hard instances: {res.summary}")
    assert res.passed


def test_criterion_05_norm_ball_certificate(record_criterion):
    res = verify.verify_norm_ball_certificate(seed=105, instances=100)
    record_criterion(5, res.passed, f"100 hard instances d<=64: {res.summary}")
    assert res.passed


def test_criterion_06_block_coverage(record_criterion):
    t0 = time.perf_counter()
    ests = [verify.verify_block_coverage(k, 40, 5120, 95, trials=1000, seed=106)
            for k in ("subsample", "uniform_random_queries", "nystrom")]
    secs = time.perf_counter() - t0
    ok = all(e.passed for e in ests) and all(e.max_queries <= 95 for e in ests) and secs < 300
    parts = ", ".join(f"{e.learner} {e.estimate:.2f}-3*{e.stderr:.3f}" for e in ests)
    record_criterion(6, ok, f"d=40 m=5120 B=95, 1000 trials: {parts} vs 20 in {secs:.1f}s")
    assert ok


def test_criterion_07_norm_regime_gap(record_criterion):
    t0 = time.perf_counter()
    bound = 1 / (70 * math.sqrt(64))
    lines, ok = [], True
    for kind in BUDGETED:
        rep = point(d=64, m=8192, budget=245, trials=500, seed=107, learner=kind)
        p = rep.points[0]
        good = p.mean_delta - 3 * p.stderr_delta >= bound
        ok &= good
        lines.append(f"{kind} {p.mean_delta:.4f}+-{p.stderr_delta:.4f}")
    secs = time.perf_counter() - t0
    ok &= secs < 600
    record_criterion(7, ok, f"d=64 m=8192 B=245, 500 trials, bound {bound:.5f}: "
                            f"{', '.join(lines)} in {secs:.1f}s")
    assert ok


def test_criterion_08_minimax_grid(record_criterion):
    res = verify.minimax_suite(seed=108, configs=20)
    record_criterion(8, res.passed, f"4 losses x 20 configurations: {res.summary}")
    assert res.passed


def test_criterion_09_subsample_rate(record_criterion):
    t0 = time.perf_counter()
    report, _ = sweep(loss="absolute", regime="norm", d="budget", m="auto",
                      learner="subsample", trials=200, seed=109, sweep="budget",
                      sweep_values="64,128,256,512,1024,2048,4096")
    secs = time.perf_counter() - t0
    f = report.fit
    ok = -0.35 <= f.slope <= -0.15 and secs < 900
    record_criterion(9, ok, f"B=2^6..2^12, 200 trials/point: slope {f.slope:.4f} "
                            f"(95% CI [{f.ci_low:.4f}, {f.ci_high:.4f}]) in {secs:.1f}s")
    assert ok


def test_criterion_10_soft_absolute_rate(record_criterion):
    lam = 0.05
    report, _ = sweep(loss="absolute", regime="soft", lam=lam, d="budget", m="auto",
                      y="half_inv_lam_d", learner="subsample", trials=200, seed=110,
                      sweep="budget", sweep_values="64,128,256,512,1024,2048,4096")
    floors = [p.mean_delta - 3 * p.stderr_delta - 1 / (960 * lam * p.d) for p in report.points]
    f = report.fit
    ok = min(floors) >= 0 and abs(f.slope + 0.5) <= 0.15
    record_criterion(10, ok, f"lam={lam}, B=2^6..2^12: min(mean-3se-bound) {min(floors):.4f}, "
                             f"slope {f.slope:.4f} (95% CI [{f.ci_low:.4f}, {f.ci_high:.4f}])")
    assert ok


def test_criterion_11_hinge_plateau(record_criterion):
    floor = 1 / 240
    worst, lines, ok = np.inf, [], True
    for kind in BUDGETED:
        report, _ = sweep(loss="hinge", regime="soft", lam=0.005, d=100, m=12800, y=1,
                          learner=kind, trials=200, seed=111, sweep="budget",
                          sweep_values="1,4,16,64,256,595")
        lo = min(p.mean_delta - 3 * p.stderr_delta for p in report.points)
        worst = min(worst, lo)
        lines.append(f"{kind} {lo:.3f}")
    full = point(loss="hinge", regime="soft", lam=0.005, d=100, m=12800, y=1,
                 learner="full_info", budget=12800 ** 2, trials=20, seed=111)
    full_gap = full.points[0].mean_delta
    ok = worst >= floor and full_gap <= 1e-10
    record_criterion(11, ok, f"lam=0.005 d=100 m=12800 B<=595, min(mean-3se) per learner: "
                             f"{', '.join(lines)} vs {floor:.5f}; full info gap {full_gap:.1e}")
    assert ok


def test_criterion_12_squared_floor(record_criterion):
    floor = 2.0 ** -18
    m = 16384
    worst, lines = np.inf, []
    for lam in (0.5, 0.25, 0.125, 0.0625):
        top = round(1 / lam**2)
        assert top <= 2.0 ** -20 * m * m
        budgets = [b for b in (1, 4, 16, 64, 256) if b <= top]
        for kind in BUDGETED:
            if len(budgets) > 1:
                report, _ = sweep(loss="squared", regime="soft", lam=lam, d="squared", m=m, y=1,
                                  learner=kind, trials=100, seed=112, sweep="budget",
                                  sweep_values=",".join(map(str, budgets)))
            else:
                report = point(loss="squared", regime="soft", lam=lam, d="squared", m=m, y=1,
                               learner=kind, trials=100, seed=112, budget=budgets[0])
            lo = min(p.mean_delta - 3 * p.stderr_delta for p in report.points)
            worst = min(worst, lo)
        lines.append(f"lam={lam} d={report.points[0].d} B<={budgets[-1]}")
    ok = worst >= floor
    record_criterion(12, ok, f"m={m}, {'; '.join(lines)}: min(mean-3se) {worst:.4f} "
                             f"vs 2^-18={floor:.2e}")
    assert ok


def test_criterion_13_lowrank_ridge(record_criterion):
    rng = np.random.default_rng(113)
    low, full = [], []
    for d in (4, 8, 16):
        m = 8 * d
        for lam in (0.1, 0.5, 1.0):
            for k in range(1, d + 1):
                lm = rng.choice(m, size=k, replace=False)
                low.append(verify.lowrank_trial(d, lam, lm, m, seed=rng))
            cover = np.arange(2 * d) * (m // (2 * d))
            full.append(verify.lowrank_trial(d, lam, cover, m, seed=rng))
    margin = min(c.delta - c.bound for c in low)
    exact = max(c.delta for c in full)
    ok = margin >= -1e-9 and exact <= 1e-9
    record_criterion(13, ok, f"{len(low)} runs with k<=d: min(gap-bound) {margin:.2e}; "
                             f"k=2d covering landmarks: max gap {exact:.1e}")
    assert ok


def test_criterion_14_reproducible_sweep(tmp_path, record_criterion):
    outs = []
    for name in ("first", "second"):
        out = tmp_path / f"{name}.csv"
        cmd = [sys.executable, "-m", "hardkernels", "sweep", "--d", "budget", "--trials", "20",
               "--seed", "114", "--values", "16,32,64,128", "--out", str(out),
               "--trials-csv", str(tmp_path / f"{name}_trials.csv")]
        subprocess.run(cmd, check=True, capture_output=True)
        outs.append((out.read_bytes(), (tmp_path / f"{name}_trials.csv").read_bytes()))
    ok = outs[0] == outs[1]
    record_criterion(14, ok, f"two CLI sweeps with seed 114: sweep CSV and trial CSV "
                             f"{'byte-identical' if ok else 'differ'}")
    assert ok
