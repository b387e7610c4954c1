"""Budgeted and low-rank kernel learners.

Budgeted learners see the target vector and read kernel entries only through
a :class:`~hardkernels.oracle.BudgetedOracle`.  Whatever part of the kernel
they observe is solved exactly with the grouped solvers of
:mod:`hardkernels.solvers`; the returned coefficient vector is then scored
against the true kernel by the harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import isqrt

import numpy as np

from .instances import LowRankInstance, make_rng
from .oracle import BudgetedOracle
from .solvers import (
    BlockConstantMatrix,
    Objective,
    group_labels,
    linear_loss_solution,
    ridge_closed_form,
    solve_grouped,
)

KINDS = ("subsample", "nystrom", "uniform_random_queries", "full_info", "zero",
         "linear_closed_form")
BUDGETED = ("subsample", "nystrom", "uniform_random_queries", "zero")

NYSTROM_RCOND = 1e-10


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown learner {self.kind!r}; expected one of {KINDS}")

    @classmethod
    def parse(cls, doc) -> "LearnerSpec":
        """From ``{"kind": ..., **params}`` or a bare kind string."""
        if isinstance(doc, str):
            return cls(doc)
        doc = dict(doc)
        return cls(doc.pop("kind"), doc)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


def _solve_observed(obj: Objective, Khat: np.ndarray, y: float) -> np.ndarray:
    labels = group_labels(Khat)
    alpha, _ = solve_grouped(obj.loss, labels, y, lam=obj.lam, norm_bound=obj.norm_bound)
    return alpha


def _embed(m: int, rows, alpha_hat) -> np.ndarray:
    alpha = np.zeros(m)
    np.add.at(alpha, np.asarray(rows, dtype=int), alpha_hat)
    return alpha


def subsample_learn(oracle: BudgetedOracle, y: float, obj: Objective, seed) -> np.ndarray:
    """Train exactly on ``floor(sqrt(B))`` rows drawn with replacement.

    The full sub-kernel is read (duplicates and the diagonal cost nothing),
    the sub-problem is solved in the same regime as the full one, and the
    solution is written back on the sampled rows (duplicates add up).
    """
    n = isqrt(oracle.budget)
    if n < 1:
        return np.zeros(oracle.m)
    rng = make_rng(seed)
    rows = rng.integers(0, oracle.m, size=n)
    return learn_on_rows(oracle, rows, y, obj)


def learn_on_rows(oracle: BudgetedOracle, rows, y: float, obj: Objective) -> np.ndarray:
    """Read the sub-kernel on ``rows``, solve the sub-problem, embed the result."""
    rows = np.asarray(rows, dtype=int)
    Khat = oracle.query_block(rows, rows)
    return _embed(oracle.m, rows, _solve_observed(obj, Khat, y))


def _nystrom_features(C: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Nystrom feature map ``C W^{+1/2}``; ``C`` holds landmark columns."""
    vals, vecs = np.linalg.eigh(0.5 * (W + W.T))
    keep = vals > NYSTROM_RCOND * max(vals.max(initial=0.0), 0.0)
    if not keep.any():
        return np.zeros((C.shape[0], 0))
    return C @ (vecs[:, keep] / np.sqrt(vals[keep]))


def nystrom_budget_layout(budget: int, landmarks: int | None = None) -> tuple[int, int]:
    """``(k, n)``: landmark count and sample size that fit the budget.

    Landmarks are compared with each other and with every other sampled row,
    which costs ``k(k-1)/2 + k(n-k)`` distinct entries.
    """
    if budget < 1:
        return 0, 0
    k = landmarks if landmarks is not None else max(1, isqrt(budget) // 2)
    k = max(1, min(k, budget))
    while k > 1 and k * (k - 1) // 2 > budget:
        k -= 1
    n = k + (budget - k * (k - 1) // 2) // k
    return k, n


def nystrom_budgeted_learn(oracle: BudgetedOracle, y: float, obj: Objective, seed,
                           landmarks: int | None = None) -> np.ndarray:
    """Nystrom approximation from ``k`` landmark columns restricted to a sample.

    ``n`` distinct rows are drawn, the first ``k`` act as landmarks, and only
    the landmark columns are queried.  The sub-problem on the sample is solved
    with the Nystrom matrix in place of the unobserved kernel.
    """
    k, n = nystrom_budget_layout(oracle.budget, landmarks)
    n = min(n, oracle.m)
    k = min(k, n)
    if k < 1:
        return np.zeros(oracle.m)
    rng = make_rng(seed)
    rows = rng.choice(oracle.m, size=n, replace=False)
    C = oracle.query_block(rows, rows[:k])
    phi = _nystrom_features(C, C[:k])
    Kp = phi @ phi.T
    # on hard kernels K' is again a 0/1 grouped matrix up to rounding
    Kp = np.where(np.abs(Kp) < 1e-9, 0.0, Kp)
    Kp = np.where(np.abs(Kp - 1.0) < 1e-9, 1.0, Kp)
    return _embed(oracle.m, rows, _solve_observed(obj, Kp, y))


def uniform_random_queries_learn(oracle: BudgetedOracle, y: float, obj: Objective,
                                 seed) -> np.ndarray:
    """Query ``B`` uniformly random off-diagonal pairs, complete, solve.

    Unobserved entries are taken as 0 except where the observed ones force a
    1 by transitivity (every row of a hard kernel belongs to exactly one
    all-ones block).
    """
    m = oracle.m
    rng = make_rng(seed)
    parent = np.arange(m)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for _ in range(oracle.budget if m > 1 else 0):
        s = int(rng.integers(0, m))
        r = (s + 1 + int(rng.integers(0, m - 1))) % m
        if oracle.query(s, r):
            ps, pr = find(s), find(r)
            if ps != pr:
                parent[max(ps, pr)] = min(ps, pr)
    roots = np.array([find(t) for t in range(m)])
    _, labels = np.unique(roots, return_inverse=True)
    alpha, _ = solve_grouped(obj.loss, labels, y, lam=obj.lam, norm_bound=obj.norm_bound)
    return alpha


def full_info_learn(oracle: BudgetedOracle, y: float, obj: Objective) -> np.ndarray:
    K = oracle.reveal_all()
    alpha, _ = solve_grouped(obj.loss, K.group, y, lam=obj.lam, norm_bound=obj.norm_bound)
    return alpha


def zero_learn(m: int) -> np.ndarray:
    return np.zeros(m)


def run_learner(spec: LearnerSpec, oracle: BudgetedOracle, y: float, obj: Objective,
                seed) -> np.ndarray:
    kind = spec.kind
    if kind == "subsample":
        return subsample_learn(oracle, y, obj, seed)
    if kind == "nystrom":
        return nystrom_budgeted_learn(oracle, y, obj, seed, spec.params.get("landmarks"))
    if kind == "uniform_random_queries":
        return uniform_random_queries_learn(oracle, y, obj, seed)
    if kind == "full_info":
        return full_info_learn(oracle, y, obj)
    if kind == "linear_closed_form":
        if obj.loss.kind != "linear" or not obj.is_soft:
            raise ValueError("linear_closed_form needs the linear loss in the soft regime")
        return linear_loss_solution(np.full(oracle.m, y), obj.lam)
    return zero_learn(oracle.m)


# -- low-rank (Nystrom) ridge on the block-partition instance ------------------


def nystrom_gram(instance: LowRankInstance, landmarks) -> np.ndarray:
    """``2d x 2d`` representative matrix of the Nystrom approximation of the
    instance kernel built from the given landmark rows."""
    landmarks = np.asarray(landmarks, dtype=int)
    lb = instance.partition[landmarks]
    G = instance.gram()
    C = G[:, lb]                       # landmark columns, one row per block
    phi = _nystrom_features(C, C[lb])
    return phi @ phi.T


def nystrom_learn(instance: LowRankInstance, landmarks, lam: float):
    """Kernel ridge regression on the Nystrom approximation ``K'``.

    Returns ``(alpha, K')`` with ``K'`` as a :class:`BlockConstantMatrix`;
    ``alpha`` is meant to be scored against the true kernel.
    """
    Kp = BlockConstantMatrix(instance.m, instance.d, nystrom_gram(instance, landmarks))
    return ridge_closed_form(Kp, instance.y, lam), Kp
