"""Verification suites: algebraic identities, scalar minimizers, coverage,
the two-block minimax inequality and the low-rank ridge gap."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import Point
from .harness import lowrank_bound, mean_stderr, run_point_trial, trial_seed
from .instances import BlockKernel, build_lowrank_instance, make_rng, sample_hard_kernel
from .learners import LearnerSpec, nystrom_gram, nystrom_learn
from .linalg import cho_solve
from .losses import KINDS as LOSS_KINDS
from .losses import eval_loss, u_star, u_star_numeric
from .oracle import BudgetedOracle
from .solvers import (
    BlockConstantMatrix,
    Objective,
    delta_gap,
    dense_objective,
    lowrank_delta,
    linear_loss_solution,
    objective_value,
    reduce_by_partition,
    reduce_coefficients,
    ridge_closed_form,
    ridge_objective,
    quadratic_form,
    ridge_objective_reduced,
    norm_ball_certificate,
)

IDENTITY_TOL = 1e-8


@dataclass
class SuiteResult:
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.summary} ({self.seconds:.2f}s)"


def _random_kernel(rng, d: int, m: int) -> BlockKernel:
    return sample_hard_kernel(d, m, rng)


def _random_objective(rng, loss: str) -> Objective:
    if rng.random() < 0.25 and loss != "linear":
        return Objective.constrained(loss, float(rng.uniform(0.5, 4.0)))
    return Objective.soft(loss, float(10 ** rng.uniform(-3, 1)))


def _random_target(rng, loss: str) -> float:
    if loss == "hinge":
        return float(rng.choice([-1.0, 1.0]))
    return float(rng.normal())


# -- block reduction of the objective ------------------------------------------


def block_objective_deviation(rng, max_m: int = 256) -> float:
    """Block-path vs dense-path objective on one random case."""
    m = 2 * int(rng.integers(4, max_m // 2 + 1))
    d = int(rng.integers(1, m // 2 + 1))
    K = _random_kernel(rng, d, m)
    loss = LOSS_KINDS[int(rng.integers(len(LOSS_KINDS)))]
    obj = _random_objective(rng, loss)
    y = _random_target(rng, loss)
    alpha = rng.normal(size=m) * rng.choice([1e-2, 1.0, 10.0])
    block = objective_value(K, obj, alpha, y)
    dense = dense_objective(K.to_dense(), obj, alpha, y)
    qf = float(alpha @ K.to_dense() @ alpha)
    scale = max(1.0, abs(dense), abs(qf))
    return max(abs(block - dense), abs(quadratic_form(K, reduce_coefficients(K, alpha)) - qf)) / scale


def ridge_reduction_deviation(rng, max_m: int = 96) -> tuple[float, float]:
    """``(beta deviation, objective-rewrite deviation)`` on one random case."""
    d = int(rng.integers(1, max_m // 2 + 1))
    reps = int(rng.integers(1, max_m // (2 * d) + 1))
    m = 2 * d * reps
    r = int(rng.integers(1, 2 * d + 1))
    A = rng.normal(size=(2 * d, r))
    G = A @ A.T
    lam = float(10 ** rng.uniform(-2, 1))
    z = rng.normal(size=2 * d)
    Kp = BlockConstantMatrix(m, d, G)
    y = z[Kp.partition]
    dense = Kp.to_dense()
    alpha = ridge_closed_form(dense, y, lam)
    beta = reduce_by_partition(alpha, d)
    beta_ref = np.linalg.solve(G + d * lam * np.eye(2 * d), z)
    beta_dev = float(np.max(np.abs(beta - beta_ref)) / max(1.0, np.max(np.abs(beta_ref))))
    beta_dev = max(beta_dev, float(np.max(np.abs(reduce_by_partition(ridge_closed_form(Kp, y, lam), d) - beta_ref))))
    obj_dev = 0.0
    for a in (alpha, rng.normal(size=m)):
        full = ridge_objective(dense, a, y, lam)
        red = ridge_objective_reduced(G, reduce_by_partition(a, d), z, lam, d)
        obj_dev = max(obj_dev, abs(full - red) / max(1.0, abs(full)))
    return beta_dev, obj_dev


def verify_identities(seed=0, n_block: int = 100, n_ridge: int = 50, max_m: int = 256,
                      max_m_ridge: int = 96) -> SuiteResult:
    t0 = time.perf_counter()
    rng = make_rng(seed)
    dev2 = max(block_objective_deviation(rng, max_m) for _ in range(n_block))
    # all-ones kernel: alpha' K alpha = (sum alpha)^2
    K1 = BlockKernel(m=8, d=1, sigma=[1], block=[0] * 8, sub=[0, 1] * 4)
    a1 = rng.normal(size=8)
    dev_ones = abs(quadratic_form(K1, reduce_coefficients(K1, a1)) - a1.sum() ** 2)
    dev_ones = max(dev_ones, abs(float(a1 @ K1.to_dense() @ a1) - a1.sum() ** 2))
    devs7 = [ridge_reduction_deviation(rng, max_m_ridge) for _ in range(n_ridge)]
    beta7 = max(b for b, _ in devs7)
    obj7 = max(o for _, o in devs7)
    # identity representative matrix: beta = z / (1 + d lam)
    d, lam = 5, 0.3
    z = rng.choice([-1.0, 1.0], size=2 * d)
    Kp = BlockConstantMatrix(20 * d, d, np.eye(2 * d))
    beta_id = reduce_by_partition(ridge_closed_form(Kp, z[Kp.partition], lam), d)
    dev_id = float(np.max(np.abs(beta_id - z / (1 + d * lam))))
    worst = max(dev2, dev_ones, beta7, obj7, dev_id)
    details = {"block_objective": dev2, "all_ones": dev_ones, "ridge_beta": beta7,
               "ridge_objective": obj7, "identity_gram": dev_id}
    return SuiteResult("identities", worst <= IDENTITY_TOL,
                       f"max deviation {worst:.2e} (block {dev2:.1e}, ridge beta {beta7:.1e}, "
                       f"ridge objective {obj7:.1e})", details, time.perf_counter() - t0)


# -- scalar minimizers --------------------------------------------------------


def verify_scalar_minimizers(seed=0, cases: int = 1000, tol: float = 1e-6) -> SuiteResult:
    """Closed-form minimizers against the grid/ternary-search oracle."""
    t0 = time.perf_counter()
    rng = make_rng(seed)
    worst = 0.0
    worst_case = None
    for _ in range(cases):
        loss = LOSS_KINDS[int(rng.integers(len(LOSS_KINDS)))]
        y = _random_target(rng, loss) * (1.0 if loss == "hinge" else 2.0)
        a = float(np.exp(rng.uniform(np.log(0.05), np.log(20.0))))
        dev = abs(u_star(loss, y, a) - u_star_numeric(loss, y, a))
        if dev > worst:
            worst, worst_case = dev, (loss, y, a)
    anchors = []
    for lam_d in (0.05, 0.1, 0.25, 0.7, 1.3):
        for p in (0.5, 1.0, 2.0):
            a = p * lam_d
            anchors.append(abs(u_star("squared", 1.0, a) - 1.0 / (1.0 + a)))
            anchors.append(abs(u_star("absolute", 1.0 / (2 * a), a) - 1.0 / (2 * a)))
            anchors.append(abs(u_star("linear", 0.7, a) + 0.7 / (2 * a)))
            if a <= 0.5:
                anchors.append(abs(u_star("hinge", 1.0, a) - 1.0))
    worst_anchor = max(anchors)
    ok = worst <= tol and worst_anchor <= 1e-12
    return SuiteResult("scalar_minimizers", ok,
                       f"max |closed form - search| {worst:.2e} over {cases} cases, "
                       f"anchors {worst_anchor:.1e}",
                       {"max_dev": worst, "worst_case": worst_case, "anchor_dev": worst_anchor},
                       time.perf_counter() - t0)


# -- certificates -------------------------------------------------------------


def verify_linear_zero_query(seed=0, instances: int = 100, tol: float = 1e-10) -> SuiteResult:
    t0 = time.perf_counter()
    rng = make_rng(seed)
    worst, queries = 0.0, 0
    for _ in range(instances):
        d = int(rng.integers(1, 65))
        m = 2 * int(rng.integers(d, 8 * d + 1))
        K = sample_hard_kernel(d, m, rng)
        lam = float(10 ** rng.uniform(-2, 1))
        y = float(rng.normal())
        oracle = BudgetedOracle(K, 0)
        alpha = linear_loss_solution(np.full(m, y), lam)
        queries += oracle.used
        worst = max(worst, delta_gap(K, Objective.soft("linear", lam), alpha, y))
    return SuiteResult("linear_zero_query", worst <= tol and queries == 0,
                       f"max gap {worst:.2e}, queries {queries}",
                       {"max_gap": worst, "queries": queries}, time.perf_counter() - t0)


def verify_norm_ball_certificate(seed=0, instances: int = 100) -> SuiteResult:
    t0 = time.perf_counter()
    rng = make_rng(seed)
    worst_loss, worst_norm = 0.0, 0.0
    for _ in range(instances):
        d = int(rng.integers(1, 65))
        m = 2 * int(rng.integers(d, 8 * d + 1))
        K = sample_hard_kernel(d, m, rng)
        alpha = norm_ball_certificate(K)
        y = 1.0 / math.sqrt(d)
        worst_loss = max(worst_loss, objective_value(K, Objective.constrained("absolute"), alpha, y))
        worst_norm = max(worst_norm, quadratic_form(K, reduce_coefficients(K, alpha)))
    ok = worst_loss <= 1e-12 and worst_norm <= 2.0 + 1e-12
    return SuiteResult("norm_ball_certificate", ok,
                       f"max loss {worst_loss:.2e}, max alpha'K alpha {worst_norm:.12f}",
                       {"max_loss": worst_loss, "max_norm": worst_norm}, time.perf_counter() - t0)


# -- block coverage -------------------------------------------------------------


@dataclass
class CoverageEstimate:
    learner: str
    d: int
    m: int
    budget: int
    trials: int
    estimate: float
    stderr: float
    max_queries: int

    @property
    def passed(self) -> bool:
        return self.estimate - 3.0 * self.stderr > self.d / 2.0


def verify_block_coverage(learner, d: int, m: int, budget: int, trials: int = 1000,
                          seed=0) -> CoverageEstimate:
    """Monte Carlo estimate of the expected number of never-probed blocks.

    A block counts as missed when no query had both endpoints inside it.
    """
    spec = learner if isinstance(learner, LearnerSpec) else LearnerSpec.parse(learner)
    point = Point("absolute", "norm", 2.0, 0.0, d, m, budget, 1.0 / math.sqrt(d))
    missed, used = [], 0
    for t in range(trials):
        rec = run_point_trial(point, spec, trial_seed(seed, 0, t), 0, t)
        missed.append(rec.missed_blocks)
        used = max(used, rec.queries)
    est, se = mean_stderr(missed)
    return CoverageEstimate(spec.kind, d, m, budget, trials, est, se, used)


def coverage_suite(d: int = 40, m: int = 5120, budget: int = 95, trials: int = 1000,
                   seed=0, learners=("subsample", "uniform_random_queries", "nystrom")) -> SuiteResult:
    t0 = time.perf_counter()
    ests = [verify_block_coverage(k, d, m, budget, trials, seed) for k in learners]
    ok = all(e.passed for e in ests)
    summary = ", ".join(f"{e.learner} {e.estimate:.2f}+-{e.stderr:.2f}" for e in ests)
    return SuiteResult("block_coverage", ok, f"missed blocks vs {d / 2:g}: {summary}",
                       {e.learner: asdict(e) for e in ests}, time.perf_counter() - t0)


# -- two-block minimax --------------------------------------------------------


@dataclass
class MinimaxCheck:
    loss: str
    lam: float
    d: int
    m: int
    n: int
    y: float
    u1: float
    u2: float
    lhs: float
    rhs: float
    argmin: tuple
    surrogate_argmin: tuple
    grid_step: float
    convexity_slack: float

    @property
    def passed(self) -> bool:
        centre = (self.u1 + self.u2) / 3.0
        near = max(abs(self.surrogate_argmin[0] - centre),
                   abs(self.surrogate_argmin[1] - centre)) <= self.grid_step
        return self.lhs >= self.rhs - 1e-6 and near and self.convexity_slack >= -1e-9


def _pair_values(loss, y, n, m, lam, u, v):
    """``(g0, g1)``: the split and merged two-block objectives minus their minima."""
    w = n / m
    a1, a2 = lam / w, lam / (2.0 * w)
    u1, u2 = u_star(loss, y, a1), u_star(loss, y, a2)
    f0 = 0.5 * w * (eval_loss(loss, u, y) + eval_loss(loss, v, y)) + 0.5 * lam * (u * u + v * v)
    f1 = w * eval_loss(loss, u + v, y) + 0.5 * lam * (u + v) ** 2
    f0_min = w * eval_loss(loss, u1, y) + lam * u1 * u1
    f1_min = w * eval_loss(loss, u2, y) + 0.5 * lam * u2 * u2
    return f0 - f0_min, f1 - f1_min, u1, u2


def verify_two_block_minimax(loss, lam: float, d: int, n: int, y: float, grid: int = 201,
                        m: int | None = None, zoom: int = 6) -> MinimaxCheck:
    """Grid check of ``min_{u,v} max_sigma g^sigma(u, v) >= (lam/12)(2 u1 - u2)^2``.

    The coarse grid minimum is refined by repeatedly zooming in around the
    best cell, so the reported value approximates the true min-max from
    above to within the final grid resolution.
    """
    m = m if m is not None else 128 * d
    if not lam > 0:
        raise ValueError("soft regime only")
    _, _, u1, u2 = _pair_values(loss, y, n, m, lam, 0.0, 0.0)
    lo = min(u1, u2, u2 / 2.0, 0.0)
    hi = max(u1, u2, u2 / 2.0, 0.0)
    pad = 0.5 * (hi - lo) + 0.1 * max(1.0, abs(hi), abs(lo))
    cu = cv = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo) + pad
    convexity_slack = np.inf
    first_step = None
    best = np.inf
    arg = (cu, cv)
    for level in range(zoom):
        us = np.linspace(cu - half, cu + half, grid)
        vs = np.linspace(cv - half, cv + half, grid)
        U, V = np.meshgrid(us, vs, indexing="ij")
        g0, g1, _, _ = _pair_values(loss, y, n, m, lam, U, V)
        worst = np.maximum(g0, g1)
        k = np.unravel_index(int(np.argmin(worst)), worst.shape)
        if worst[k] < best:
            best, arg = float(worst[k]), (float(us[k[0]]), float(vs[k[1]]))
        step = us[1] - us[0]
        if level == 0:
            first_step = step
            # strong-convexity lower bounds for each branch
            s0 = g0 - 0.5 * lam * ((U - u1) ** 2 + (V - u1) ** 2)
            s1 = g1 - 0.5 * lam * (U + V - u2) ** 2
            scale = max(1.0, float(np.max(np.abs(g0))), float(np.max(np.abs(g1))))
            convexity_slack = min(float(s0.min()), float(s1.min())) / scale
            surrogate = (U - u1) ** 2 + (V - u1) ** 2 + (U + V - u2) ** 2
            j = np.unravel_index(int(np.argmin(surrogate)), surrogate.shape)
            surrogate_arg = (float(us[j[0]]), float(vs[j[1]]))
        cu, cv = arg
        half = 4.0 * step
    rhs = lam / 12.0 * (2.0 * u1 - u2) ** 2
    return MinimaxCheck(str(loss), lam, d, m, n, float(y), float(u1), float(u2), best, float(rhs),
                        arg, surrogate_arg, float(first_step), convexity_slack)


def random_minimax_configs(loss: str, count: int, seed=0):
    rng = make_rng(seed)
    for _ in range(count):
        d = int(rng.integers(1, 101))
        m = 128 * d
        lam = float(10 ** rng.uniform(-3, 0))
        n = int(rng.integers(math.ceil(m / (2 * d)), 2 * m // d + 1))
        y = _random_target(rng, loss)
        yield dict(loss=loss, lam=lam, d=d, n=n, y=y, m=m)


def minimax_suite(seed=0, configs: int = 20, grid: int = 201) -> SuiteResult:
    t0 = time.perf_counter()
    checks = []
    for i, loss in enumerate(LOSS_KINDS):
        for cfg in random_minimax_configs(loss, configs, seed=(seed, i)):
            checks.append(verify_two_block_minimax(grid=grid, **cfg))
    failed = [c for c in checks if not c.passed]
    margin = min(c.lhs - c.rhs for c in checks)
    return SuiteResult("two_block_minimax", not failed,
                       f"{len(checks) - len(failed)}/{len(checks)} configurations, "
                       f"min (lhs - rhs) {margin:.2e}",
                       {"failed": [asdict(c) for c in failed], "min_margin": margin},
                       time.perf_counter() - t0)


# -- low-rank ridge -------------------------------------------------------------


@dataclass
class LowRankCheck:
    d: int
    m: int
    lam: float
    landmarks: int
    delta: float
    bound: float
    search_score: float


def lowrank_trial(d: int, lam: float, landmarks, m: int | None = None, seed=0) -> LowRankCheck:
    """Nystrom ridge on an adversarially labelled block instance."""
    m = m if m is not None else 8 * d
    landmarks = np.asarray(landmarks, dtype=int)
    probe = build_lowrank_instance(d, m, z=np.ones(2 * d))
    Gp = nystrom_gram(probe, landmarks)
    inst = build_lowrank_instance(d, m, z="search", lam=lam, gram_approx=Gp, seed=seed)
    alpha, _ = nystrom_learn(inst, landmarks, lam)
    delta = lowrank_delta(inst.gram(), alpha, inst.z, lam, d)
    return LowRankCheck(d, m, lam, int(landmarks.size), float(delta), lowrank_bound(lam, d),
                        float(inst.search_score))


def lowrank_suite(ds=(4, 8, 16), lams=(0.1, 0.5, 1.0), seed=0) -> SuiteResult:
    t0 = time.perf_counter()
    rng = make_rng(seed)
    low, full = [], []
    for d in ds:
        m = 8 * d
        for lam in lams:
            for k in sorted({1, max(1, d // 2), d}):
                lm = rng.choice(m, size=k, replace=False)
                low.append(lowrank_trial(d, lam, lm, m, seed=rng))
            cover = np.arange(2 * d) * (m // (2 * d))
            full.append(lowrank_trial(d, lam, cover, m, seed=rng))
    ok_low = all(c.delta >= c.bound - 1e-9 for c in low)
    ok_full = all(c.delta <= 1e-9 for c in full)
    worst_ratio = min(c.delta / c.bound for c in low)
    return SuiteResult("lowrank_ridge", ok_low and ok_full,
                       f"min gap/bound {worst_ratio:.3f} over {len(low)} rank-limited runs, "
                       f"max gap with covering landmarks {max(c.delta for c in full):.1e}",
                       {"low": [asdict(c) for c in low], "full": [asdict(c) for c in full]},
                       time.perf_counter() - t0)


def run_all(seed=0, quick: bool = False) -> list[SuiteResult]:
    coverage_trials = 100 if quick else 1000
    return [
        verify_identities(seed),
        verify_scalar_minimizers(seed),
        verify_linear_zero_query(seed),
        verify_norm_ball_certificate(seed),
        coverage_suite(trials=coverage_trials, seed=seed),
        minimax_suite(seed),
        lowrank_suite(seed=seed),
    ]
