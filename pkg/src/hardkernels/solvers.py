"""Exact optimization on block-structured kernels.

For a hard kernel every quantity of interest depends on a coefficient vector
only through its sub-block sums ``beta[i, s] = sum(alpha[t] for t in T_{i,s})``.
The regularized objective then separates over blocks into scalar problems
with closed-form minimizers (:func:`hardkernels.losses.u_star`), so all
optima below are exact.  Dense ``O(m^2)`` evaluation paths are kept as
independent checks for small ``m``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .instances import MAX_DENSE, BlockKernel, partition_index
from .linalg import cho_solve
from .losses import LossSpec, as_loss, eval_loss, u_star

log = logging.getLogger(__name__)

CLAMP_TOL = 1e-12
NEGATIVE_GAP_TOL = 1e-9
MU_BRACKET = (1e-12, 1e6)
MU_ITERS = 200


class NegativeGapError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Objective:
    """``(1/m) sum_t loss((K alpha)_t, y_t) + (lam/2) alpha' K alpha``.

    Either soft-regularized (``lam > 0``, no constraint) or norm-constrained
    (``lam == 0`` and ``alpha' K alpha <= norm_bound``).
    """

    loss: LossSpec
    lam: float = 0.0
    norm_bound: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "loss", as_loss(self.loss))
        if self.norm_bound is None:
            if not self.lam > 0:
                raise ValueError("soft regime needs lam > 0")
        else:
            if self.lam != 0:
                raise ValueError("norm-constrained regime needs lam == 0")
            if self.norm_bound < 0:
                raise ValueError("norm_bound must be non-negative")

    @classmethod
    def soft(cls, loss, lam: float) -> "Objective":
        return cls(as_loss(loss), float(lam), None)

    @classmethod
    def constrained(cls, loss, norm_bound: float = 2.0) -> "Objective":
        return cls(as_loss(loss), 0.0, float(norm_bound))

    @property
    def is_soft(self) -> bool:
        return self.norm_bound is None


@dataclass(frozen=True)
class BlockCoefficients:
    """Sub-block sums, shape ``(d, 2)``; column 0 is ``T_{i,1}``, column 1 ``T_{i,2}``."""

    beta: np.ndarray

    @property
    def d(self) -> int:
        return self.beta.shape[0]


# -- block reduction ---------------------------------------------------------


def reduce_coefficients(K: BlockKernel, alpha) -> BlockCoefficients:
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (K.m,):
        raise ValueError(f"alpha must have length {K.m}")
    sums = np.bincount(K.block * 2 + K.sub, weights=alpha, minlength=2 * K.d)
    return BlockCoefficients(sums.reshape(K.d, 2))


def expand_coefficients(K: BlockKernel, coef: BlockCoefficients) -> np.ndarray:
    """A coefficient vector whose sub-block sums are ``coef``, spread evenly."""
    half = K.block_sizes // 2
    per_row = np.divide(coef.beta, half[:, None], out=np.zeros_like(coef.beta),
                        where=half[:, None] > 0)
    return per_row[K.block, K.sub]


def quadratic_form(K: BlockKernel, coef: BlockCoefficients) -> float:
    b1, b2 = coef.beta[:, 0], coef.beta[:, 1]
    return float(np.sum(b1**2 + b2**2 + 2.0 * K.sigma * b1 * b2))


def average_loss_block(K: BlockKernel, loss, coef: BlockCoefficients, y: float) -> float:
    b1, b2 = coef.beta[:, 0], coef.beta[:, 1]
    s = K.sigma
    per_block = eval_loss(loss, b1 + s * b2, y) + eval_loss(loss, s * b1 + b2, y)
    return float(np.sum(K.block_sizes / (2.0 * K.m) * per_block))


def objective_value(K: BlockKernel, obj: Objective, alpha, y, dense: bool = False) -> float:
    """Objective at ``alpha`` (no projection onto the norm ball).

    The default path uses the block formula and needs a constant target;
    ``dense=True`` forms ``K`` explicitly and accepts per-row targets.
    """
    if dense:
        return dense_objective(K.to_dense(), obj, alpha, y)
    if np.ndim(y):
        raise ValueError("block path needs a constant target; use dense=True")
    coef = reduce_coefficients(K, alpha)
    val = average_loss_block(K, obj.loss, coef, float(y))
    if obj.lam:
        val += 0.5 * obj.lam * quadratic_form(K, coef)
    return val


def dense_objective(Kmat, obj: Objective, alpha, y) -> float:
    Kmat = np.asarray(Kmat, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    m = Kmat.shape[0]
    if m > MAX_DENSE:
        raise ValueError(f"dense path is limited to m <= {MAX_DENSE}")
    pred = Kmat @ alpha
    val = float(np.mean(eval_loss(obj.loss, pred, np.broadcast_to(y, (m,)))))
    if obj.lam:
        val += 0.5 * obj.lam * float(alpha @ pred)
    return val


# -- exact minimizers ----------------------------------------------------------


def solve_block_erm(K: BlockKernel, obj: Objective, y: float) -> tuple[BlockCoefficients, float]:
    """Global minimizer of the soft-regularized objective, block by block.

    Split blocks (``sigma_i = 0``) give two copies of
    ``min_b (N_i/2m) loss(b, y) + (lam/2) b^2``; merged blocks give one
    problem in ``s = b1 + b2`` with weight ``N_i/m``, returned as ``(s, 0)``.
    """
    if not obj.lam > 0:
        raise ValueError("solve_block_erm needs lam > 0")
    return _solve_blocks(K, obj.loss, obj.lam, float(y))


def _solve_blocks(K: BlockKernel, loss, lam: float, y: float) -> tuple[BlockCoefficients, float]:
    N = K.block_sizes.astype(float)
    live = N > 0
    merged = K.sigma.astype(bool)
    beta = np.zeros((K.d, 2))
    a = np.full(K.d, np.inf)
    # weight w -> a = lam / (2 w); w = N/2m when split, N/m when merged
    a[live] = lam * K.m / N[live]
    a[live & merged] /= 2.0
    b = np.zeros(K.d)
    b[live] = u_star(loss, y, a[live])
    beta[:, 0] = b
    beta[:, 1] = np.where(merged, 0.0, b)
    coef = BlockCoefficients(beta)
    value = average_loss_block(K, loss, coef, y) + 0.5 * lam * quadratic_form(K, coef)
    return coef, value


def solve_norm_constrained_abs(K: BlockKernel, norm_bound: float, y: float,
                               loss="absolute") -> tuple[BlockCoefficients, float]:
    """Minimize the average loss subject to ``alpha' K alpha <= norm_bound``.

    Lagrangian bisection on the multiplier ``mu``: the soft solution's
    quadratic form decreases monotonically in ``mu``, so bisecting (in log
    scale) over ``MU_BRACKET`` finds the multiplier at which the constraint
    becomes active.  When the small-``mu`` solution is already feasible it is
    an unconstrained optimum and is returned as is.
    """
    loss = as_loss(loss)
    y = float(y)
    if norm_bound <= 0:
        coef = BlockCoefficients(np.zeros((K.d, 2)))
        return coef, average_loss_block(K, loss, coef, y)

    def at(mu):
        coef, _ = _solve_blocks(K, loss, mu, y)
        return coef, quadratic_form(K, coef)

    lo, hi = np.log(MU_BRACKET[0]), np.log(MU_BRACKET[1])
    coef, q = at(np.exp(lo))
    if q > norm_bound:
        coef, q = at(np.exp(hi))
        for _ in range(MU_ITERS):
            mid = 0.5 * (lo + hi)
            c_mid, q_mid = at(np.exp(mid))
            if q_mid > norm_bound:
                lo = mid
            else:
                hi, coef, q = mid, c_mid, q_mid
            if norm_bound - q <= 1e-9 * max(1.0, norm_bound):
                break
    return coef, average_loss_block(K, loss, coef, y)


def optimal_value(K: BlockKernel, obj: Objective, y: float) -> float:
    if obj.is_soft:
        return solve_block_erm(K, obj, y)[1]
    return solve_norm_constrained_abs(K, obj.norm_bound, y, loss=obj.loss)[1]


def gap_with_clamp(K: BlockKernel, obj: Objective, alpha, y) -> tuple[float, bool]:
    """``(gap, clamped)``: objective minus optimum, with ``[-1e-12, 0)`` floored to 0."""
    gap = objective_value(K, obj, alpha, y) - optimal_value(K, obj, y)
    if gap < -NEGATIVE_GAP_TOL:
        raise NegativeGapError(f"objective below the computed optimum by {-gap:.3e}")
    if -CLAMP_TOL <= gap < 0:
        log.debug("clamping gap %.3e to zero", gap)
        return 0.0, True
    return gap, False


def delta_gap(K: BlockKernel, obj: Objective, alpha, y) -> float:
    return gap_with_clamp(K, obj, alpha, y)[0]


def norm_ball_certificate(K: BlockKernel) -> np.ndarray:
    """Coefficients fitting ``y = 1/sqrt(d)`` exactly with ``alpha' K alpha <= 2``.

    Split blocks get ``beta = (1/sqrt d, 1/sqrt d)``, merged blocks
    ``(1/sqrt d, 0)``.
    """
    c = 1.0 / np.sqrt(K.d)
    beta = np.zeros((K.d, 2))
    beta[:, 0] = c
    beta[:, 1] = np.where(K.sigma == 1, 0.0, c)
    return expand_coefficients(K, BlockCoefficients(beta))


def linear_loss_solution(y, lam: float) -> np.ndarray:
    """Optimal coefficients ``-v / lam`` (``v_t = y_t / m``) for the linear loss.

    The optimality condition ``K (v + lam alpha) = 0`` holds for every ``K``,
    so no kernel entry is needed.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    y = np.asarray(y, dtype=float)
    return -(y / y.size) / lam


# -- grouped 0/1 kernels -------------------------------------------------------


def group_labels(Kmat, tol: float = 1e-8) -> np.ndarray:
    """Read off the group structure of a 0/1 "same-group" matrix.

    Returns one label per row (``-1`` for all-zero rows).  Raises
    ``ValueError`` when the matrix is not of the form ``sum_g 1_g 1_g'``.
    """
    A = np.asarray(Kmat, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    ones = A > 0.5
    if np.any(np.abs(A - ones) > tol):
        raise ValueError("matrix entries are not 0/1")
    labels = np.full(n, -1, dtype=np.int64)
    nxt = 0
    for t in range(n):
        if labels[t] >= 0 or not ones[t, t]:
            continue
        labels[ones[t]] = nxt
        nxt += 1
    live = labels >= 0
    same = (labels[:, None] == labels[None, :]) & live[:, None] & live[None, :]
    if not np.array_equal(same, ones):
        raise ValueError("matrix is not a disjoint union of all-ones blocks")
    return labels


def _group_weights(labels, n: int):
    live = labels[labels >= 0]
    counts = np.bincount(live) if live.size else np.zeros(0, dtype=np.int64)
    return counts, counts / float(n)


def grouped_objective(loss, labels, gammas, y: float, lam: float) -> float:
    """Objective on a grouped kernel in terms of per-group predictions."""
    labels = np.asarray(labels)
    n = labels.size
    counts, w = _group_weights(labels, n)
    nulls = int(np.sum(labels < 0))
    val = float(np.sum(w * eval_loss(loss, gammas, y)))
    val += nulls / n * float(eval_loss(loss, 0.0, y))
    return val + 0.5 * lam * float(np.sum(np.asarray(gammas) ** 2))


def _grouped_soft_gammas(loss, w, y: float, lam: float) -> np.ndarray:
    out = np.zeros(w.size)
    pos = w > 0
    out[pos] = u_star(loss, y, lam / (2.0 * w[pos]))
    return out


def _gammas_to_alpha(labels, counts, gammas) -> np.ndarray:
    alpha = np.zeros(labels.size)
    live = labels >= 0
    alpha[live] = gammas[labels[live]] / counts[labels[live]]
    return alpha


def solve_grouped(loss, labels, y: float, lam: float = 0.0,
                  norm_bound: float | None = None) -> tuple[np.ndarray, float]:
    """Exact minimizer on a grouped 0/1 kernel given by row ``labels``.

    Returns per-row coefficients (each group's prediction spread evenly over
    its rows) and the optimal value.  Soft regime when ``norm_bound`` is
    None, otherwise the norm-constrained regime with ``lam == 0``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    loss = as_loss(loss)
    y = float(y)
    counts, w = _group_weights(labels, labels.size)
    if norm_bound is None:
        if not lam > 0:
            raise ValueError("soft regime needs lam > 0")
        g = _grouped_soft_gammas(loss, w, y, lam)
        return _gammas_to_alpha(labels, counts, g), grouped_objective(loss, labels, g, y, lam)
    if norm_bound <= 0:
        g = np.zeros(w.size)
    else:
        lo, hi = np.log(MU_BRACKET[0]), np.log(MU_BRACKET[1])
        g = _grouped_soft_gammas(loss, w, y, np.exp(lo))
        if g @ g > norm_bound:
            g = _grouped_soft_gammas(loss, w, y, np.exp(hi))
            for _ in range(MU_ITERS):
                mid = 0.5 * (lo + hi)
                g_mid = _grouped_soft_gammas(loss, w, y, np.exp(mid))
                q = g_mid @ g_mid
                if q > norm_bound:
                    lo = mid
                else:
                    hi, g = mid, g_mid
                    if norm_bound - q <= 1e-9 * max(1.0, norm_bound):
                        break
    return _gammas_to_alpha(labels, counts, g), grouped_objective(loss, labels, g, y, 0.0)


# -- block-constant matrices and ridge regression (low-rank setting) ----------


@dataclass(frozen=True, eq=False)
class BlockConstantMatrix:
    """``m x m`` matrix with ``K[t, t'] = G[i(t), i(t')]`` on ``2d`` equal runs."""

    m: int
    d: int
    G: np.ndarray

    def __post_init__(self):
        G = np.array(self.G, dtype=float)
        if G.shape != (2 * self.d, 2 * self.d):
            raise ValueError("G must be 2d x 2d")
        partition_index(self.m, self.d)
        G.setflags(write=False)
        object.__setattr__(self, "G", G)

    @property
    def partition(self) -> np.ndarray:
        return partition_index(self.m, self.d)

    def to_dense(self) -> np.ndarray:
        if self.m > MAX_DENSE:
            raise ValueError(f"dense materialization is limited to m <= {MAX_DENSE}")
        p = self.partition
        return self.G[np.ix_(p, p)]


def reduce_gram(Kp, d: int, m: int | None = None, tol: float = 1e-12) -> np.ndarray:
    """Representative ``2d x 2d`` matrix of a block-constant ``m x m`` matrix."""
    if isinstance(Kp, BlockConstantMatrix):
        if Kp.d != d:
            raise ValueError("d mismatch")
        return np.array(Kp.G)
    A = np.asarray(Kp, dtype=float)
    m = A.shape[0]
    p = partition_index(m, d)
    starts = np.arange(2 * d) * (m // (2 * d))
    G = A[np.ix_(starts, starts)]
    if np.max(np.abs(G[np.ix_(p, p)] - A), initial=0.0) > tol:
        raise ValueError("matrix is not constant on the blocks of the partition")
    return G


def reduce_by_partition(alpha, d: int) -> np.ndarray:
    """``beta_j = sum of alpha_t over run j`` of the equal ``2d``-way partition."""
    alpha = np.asarray(alpha, dtype=float)
    p = partition_index(alpha.size, d)
    return np.bincount(p, weights=alpha, minlength=2 * d)


def ridge_closed_form(Kp, y, lam: float, d: int | None = None) -> np.ndarray:
    """``alpha = (K' + (lam m / 2) I)^{-1} y``.

    Block-constant inputs are solved through the ``2d x 2d`` system
    ``(G + d lam I) beta = z`` with an in-repo Cholesky factorization and
    spread back as ``alpha_t = (2d/m) beta_{i(t)}``; dense inputs use a dense
    solve.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    y = np.asarray(y, dtype=float)
    if isinstance(Kp, BlockConstantMatrix):
        m, d = Kp.m, Kp.d
        p = Kp.partition
        z = y[np.arange(2 * d) * (m // (2 * d))]
        if not np.array_equal(z[p], y):
            raise ValueError("targets must be constant on the partition blocks")
        beta = cho_solve(Kp.G + d * lam * np.eye(2 * d), z)
        return (2.0 * d / m) * beta[p]
    A = np.asarray(Kp, dtype=float)
    m = A.shape[0]
    return np.linalg.solve(A + 0.5 * lam * m * np.eye(m), y)


def ridge_objective(Kmat, alpha, y, lam: float) -> float:
    """``(1/m) |K alpha - y|^2 + (lam/2) alpha' K alpha`` (dense)."""
    Kmat = np.asarray(Kmat, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    r = Kmat @ alpha - y
    return float(r @ r) / Kmat.shape[0] + 0.5 * lam * float(alpha @ Kmat @ alpha)


def ridge_objective_expanded(Kmat, alpha, y, lam: float) -> float:
    """``(1/m) (alpha'(K + m lam/2 I) K alpha - 2 y' K alpha + |y|^2)``."""
    Kmat = np.asarray(Kmat, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    y = np.asarray(y, dtype=float)
    m = Kmat.shape[0]
    Ka = Kmat @ alpha
    return float(alpha @ Ka * 0.5 * m * lam + Ka @ Ka - 2.0 * y @ Ka + y @ y) / m


def ridge_objective_reduced(G, beta, z, lam: float, d: int) -> float:
    """``(1/2d) (beta'(G + d lam I) G beta - 2 z' G beta + |z|^2)``."""
    G = np.asarray(G, dtype=float)
    Gb = G @ beta
    return float(Gb @ Gb + d * lam * beta @ Gb - 2.0 * z @ Gb + z @ z) / (2.0 * d)


def lowrank_delta(G_true, alpha, z, lam: float, d: int) -> float:
    """Ridge suboptimality of ``alpha`` on the block-constant kernel ``G_true``.

    Evaluated through the reduced form; the optimum is the exact ridge
    solution ``beta* = (G + d lam I)^{-1} z``.
    """
    beta = reduce_by_partition(alpha, d)
    G_true = np.asarray(G_true, dtype=float)
    beta_opt = cho_solve(G_true + d * lam * np.eye(2 * d), z)
    gap = (ridge_objective_reduced(G_true, beta, z, lam, d)
           - ridge_objective_reduced(G_true, beta_opt, z, lam, d))
    if gap < -NEGATIVE_GAP_TOL:
        raise NegativeGapError(f"objective below the ridge optimum by {-gap:.3e}")
    return max(gap, 0.0) if gap >= -CLAMP_TOL else gap
