"""Monte Carlo driver: trials, sweeps, slope fits and result files."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .config import ExperimentConfig, Point
from .instances import sample_hard_kernel
from .learners import LearnerSpec, run_learner
from .oracle import BudgetedOracle
from .solvers import gap_with_clamp

WORKERS_ENV = "HARDKERNELS_WORKERS"
SCHEMA_VERSION = 1

TRIAL_COLUMNS = ("point", "trial", "seed", "d", "m", "budget", "lam", "y", "sigma_popcount",
                 "learner", "queries", "delta", "missed_blocks", "clamped")
SWEEP_COLUMNS = ("axis", "value", "d", "m", "budget", "lam", "y", "trials", "mean_delta",
                 "stderr_delta", "mean_missed", "bound")


class TrialError(RuntimeError):
    pass


@dataclass
class TrialRecord:
    point: int
    trial: int
    seed: int
    d: int
    m: int
    budget: int
    lam: float
    y: float
    sigma_popcount: int
    learner: str
    queries: int
    delta: float
    missed_blocks: int
    clamped: bool = False
    wall_time: float = field(default=0.0, compare=False)


def trial_seed(master: int, point: int, trial: int) -> int:
    """64-bit seed of one trial, derived from ``(master, point, trial)``."""
    ss = np.random.SeedSequence(int(master), spawn_key=(int(point), int(trial)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_point_trial(point: Point, learner: LearnerSpec, seed: int,
                    point_index: int = 0, trial: int = 0) -> TrialRecord:
    """Sample a hard kernel, run the learner against the oracle, score it."""
    t0 = time.perf_counter()
    kernel_ss, learner_ss = np.random.SeedSequence(seed).spawn(2)
    try:
        K = sample_hard_kernel(point.d, point.m, kernel_ss)
        budget = point.budget
        if learner.kind == "full_info":
            budget = max(budget, point.m * point.m)
        oracle = BudgetedOracle(K, budget)
        obj = point.objective
        alpha = run_learner(learner, oracle, point.y, obj, learner_ss)
        delta, clamped = gap_with_clamp(K, obj, alpha, point.y)
    except Exception as exc:
        raise TrialError(f"trial {trial} at point {point_index} (seed {seed}, {point}, "
                         f"learner {learner.kind}) failed: {exc}") from exc
    return TrialRecord(
        point=point_index, trial=trial, seed=int(seed), d=point.d, m=point.m,
        budget=oracle.budget, lam=point.lam, y=point.y,
        sigma_popcount=int(K.sigma.sum()), learner=learner.kind, queries=oracle.used,
        delta=float(delta), missed_blocks=int(oracle.missed_blocks().sum()),
        clamped=clamped, wall_time=time.perf_counter() - t0,
    )


def run_trial(cfg: ExperimentConfig, seed: int, sweep_value=None) -> TrialRecord:
    return run_point_trial(cfg.resolve(sweep_value), cfg.learner, seed)


def _job(args):
    point, learner, seed, p, t = args
    return run_point_trial(point, learner, seed, p, t)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_records(cfg: ExperimentConfig, workers: int | None = None) -> list[TrialRecord]:
    """All trials of every sweep point, ordered by ``(point, trial)``."""
    jobs = [(pt, cfg.learner, trial_seed(cfg.seed, p, t), p, t)
            for p, pt in enumerate(cfg.points()) for t in range(cfg.trials)]
    workers = workers or worker_count()
    if workers == 1:
        records = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    records.sort(key=lambda r: (r.point, r.trial))
    return records


# -- aggregation -----------------------------------------------------------------


def mean_stderr(values) -> tuple[float, float]:
    """Mean and standard error; exact summation keeps it order-independent."""
    v = [float(x) for x in values]
    n = len(v)
    if n == 0:
        return math.nan, math.nan
    mean = math.fsum(v) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in v) / (n - 1)
    return mean, math.sqrt(var / n)


def gap_lower_bound(point: Point) -> float:
    """Lower bound on the expected gap for the point's loss and regime."""
    lam, d = point.lam, point.d
    if point.regime == "norm":
        return 1.0 / (70.0 * math.sqrt(d))
    if point.loss == "absolute":
        return 1.0 / (960.0 * lam * d)
    if point.loss == "hinge":
        return lam * d / 60.0 if lam * d <= 0.5 else 0.0
    if point.loss == "squared":
        return lam * d / (60.0 * (1.0 + 2.0 * lam * d) ** 4)
    return 0.0


def lowrank_bound(lam: float, d: int) -> float:
    return 1.0 / (2.0 * (lam * d) ** 2 * (1.0 + lam * d))


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    stderr: float


def fit_loglog_slope(xs, ys, confidence: float = 0.95) -> SlopeFit:
    """Least-squares line through ``(log x, log y)`` with a t-interval on the slope."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 4:
        raise ValueError("slope fit needs at least 4 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive values")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise ValueError("degenerate x-range")
    res = stats.linregress(lx, ly)
    half = stats.t.ppf(0.5 + confidence / 2.0, x.size - 2) * res.stderr
    return SlopeFit(float(res.slope), float(res.intercept),
                    float(res.slope - half), float(res.slope + half), float(res.stderr))


@dataclass
class SweepPoint:
    value: float
    d: int
    m: int
    budget: int
    lam: float
    y: float
    trials: int
    mean_delta: float
    stderr_delta: float
    mean_missed: float
    bound: float


@dataclass
class ScalingReport:
    axis: str
    learner: str
    loss: str
    regime: str
    points: list[SweepPoint]
    fit: SlopeFit | None
    config: dict
    timing: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "axis": self.axis,
            "learner": self.learner,
            "loss": self.loss,
            "regime": self.regime,
            "points": [asdict(p) for p in self.points],
            "fit": asdict(self.fit) if self.fit else None,
            "config": self.config,
            "timing": self.timing,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ScalingReport":
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {doc.get('schema_version')!r}")
        fit = SlopeFit(**doc["fit"]) if doc.get("fit") else None
        return cls(doc["axis"], doc["learner"], doc["loss"], doc["regime"],
                   [SweepPoint(**p) for p in doc["points"]], fit, doc["config"],
                   doc.get("timing", {}))


def aggregate(cfg: ExperimentConfig, records: list[TrialRecord]) -> ScalingReport:
    pts = cfg.points()
    values = list(cfg.sweep_values) if cfg.sweep else [None]
    out = []
    for p, (pt, val) in enumerate(zip(pts, values)):
        rs = [r for r in records if r.point == p]
        mean, se = mean_stderr(r.delta for r in rs)
        missed, _ = mean_stderr(r.missed_blocks for r in rs)
        x = float(val) if val is not None else float(pt.budget)
        out.append(SweepPoint(x, pt.d, pt.m, pt.budget, pt.lam, pt.y, len(rs), mean, se,
                              missed, gap_lower_bound(pt)))
    fit = None
    if cfg.sweep and len(out) >= 4 and all(sp.mean_delta > 0 for sp in out):
        fit = fit_loglog_slope([sp.value for sp in out], [sp.mean_delta for sp in out])
    timing = {"total_wall_time": math.fsum(r.wall_time for r in records)}
    return ScalingReport(cfg.sweep or "budget", cfg.learner.kind, cfg.loss, cfg.regime,
                         out, fit, cfg.to_dict(), timing)


def run_scaling_experiment(cfg: ExperimentConfig, workers: int | None = None):
    """Run every trial of the sweep; returns ``(report, records)``."""
    if cfg.sweep is None:
        raise ValueError("config has no sweep axis")
    records = run_records(cfg, workers)
    return aggregate(cfg, records), records


# -- output ----------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_csv(records, path, columns=TRIAL_COLUMNS) -> None:
    """Write records (dataclasses or dicts) with a fixed column order.

    Wall-clock times are deliberately not a column so that reruns with the
    same seed produce identical files.
    """
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in records:
            row = r if isinstance(r, dict) else asdict(r)
            w.writerow([_fmt(row[c]) for c in columns])


def emit_sweep_csv(report: ScalingReport, path) -> None:
    rows = [{"axis": report.axis, **asdict(p)} for p in report.points]
    emit_csv(rows, path, SWEEP_COLUMNS)


def emit_json(report, path) -> None:
    doc = report.to_json() if hasattr(report, "to_json") else report
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def format_report(report: ScalingReport) -> str:
    head = (f"{report.axis:>10} {'d':>6} {'m':>8} {'trials':>6} {'mean gap':>12} "
            f"{'stderr':>10} {'bound':>12} {'missed':>8}")
    lines = [f"learner={report.learner} loss={report.loss} regime={report.regime}", head]
    for p in report.points:
        lines.append(f"{p.value:>10.6g} {p.d:>6} {p.m:>8} {p.trials:>6} {p.mean_delta:>12.6g} "
                     f"{p.stderr_delta:>10.3g} {p.bound:>12.6g} {p.mean_missed:>8.2f}")
    if report.fit:
        f = report.fit
        lines.append(f"log-log slope {f.slope:.4f}  95% CI [{f.ci_low:.4f}, {f.ci_high:.4f}]")
    return "\n".join(lines)
