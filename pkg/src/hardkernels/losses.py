"""Scalar losses and their regularized minimizers.

Every block-level solve in this package reduces to the scalar problem

    min_u  loss(u, y) + a * u**2,      a > 0,

whose minimizer ``u_star`` has a closed form for each of the four losses
supported here.  Functions accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("absolute", "hinge", "squared", "linear")

DEFAULT_P_GRID = 513


@dataclass(frozen=True)
class LossSpec:
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {KINDS}")

    @property
    def nonnegative(self) -> bool:
        return self.kind != "linear"

    def __call__(self, u, y):
        return eval_loss(self, u, y)


def as_loss(loss) -> LossSpec:
    if isinstance(loss, LossSpec):
        return loss
    return LossSpec(str(loss))


def _check_hinge_labels(y):
    y = np.asarray(y, dtype=float)
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("hinge loss requires labels in {-1, +1}")


def eval_loss(loss, u, y):
    """Loss value at prediction ``u`` and label ``y``."""
    kind = as_loss(loss).kind
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    if kind == "absolute":
        out = np.abs(u - y)
    elif kind == "squared":
        out = (u - y) ** 2
    elif kind == "hinge":
        _check_hinge_labels(y)
        out = np.maximum(0.0, 1.0 - u * y)
    else:
        out = y * u
    return out if out.ndim else float(out)


def u_star(loss, y, a):
    """Unique minimizer of ``loss(u, y) + a * u**2`` for ``a > 0``.

    At the kinks (absolute loss with ``|y| == 1/(2a)``, hinge loss with
    ``a == 1/2``) both branches agree and the value ``y`` is returned.
    """
    kind = as_loss(loss).kind
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("u_star requires a > 0")
    if kind == "squared":
        out = y / (1.0 + a)
    elif kind == "absolute":
        cap = 1.0 / (2.0 * a)
        out = np.where(np.abs(y) <= cap, y, np.sign(y) * cap)
    elif kind == "hinge":
        _check_hinge_labels(y)
        out = np.where(a <= 0.5, y, y / (2.0 * a))
    else:
        out = -y / (2.0 * a)
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


def ternary_argmin(fun, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 400,
                   diff=None) -> float:
    """Minimize a convex scalar function on ``[lo, hi]`` by ternary search.

    ``diff(p, q)``, when given, should return ``fun(p) - fun(q)`` computed
    without cancellation; it replaces the direct comparison of values.
    """
    if diff is None:
        def diff(p, q):
            return fun(p) - fun(q)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if diff(m1, m2) <= 0:
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


def u_star_numeric(loss, y: float, a: float) -> float:
    """Grid scan followed by ternary search; a test oracle for :func:`u_star`."""
    loss = as_loss(loss)
    width = 10.0 * abs(y) + 10.0
    while True:
        grid = np.linspace(-width, width, 4001)
        vals = eval_loss(loss, grid, y) + a * grid**2
        k = int(np.argmin(vals))
        if 0 < k < grid.size - 1 or width > 1e12:
            break
        width *= 4.0
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]

    def obj(u):
        return eval_loss(loss, u, y) + a * u * u

    def diff(p, q):
        # a p^2 - a q^2 factored to avoid cancellation far from the origin
        return eval_loss(loss, p, y) - eval_loss(loss, q, y) + a * (p - q) * (p + q)

    return ternary_argmin(obj, lo, hi, diff=diff)


def gap_term(loss, y, a):
    """``(2 u1 - u2)**2`` with ``u1 = u_star(y, a)`` and ``u2 = u_star(y, a/2)``."""
    u1 = u_star(loss, y, a)
    u2 = u_star(loss, y, np.asarray(a, dtype=float) / 2.0)
    return (2.0 * np.asarray(u1) - np.asarray(u2)) ** 2


@dataclass(frozen=True)
class GapBound:
    grid_value: float
    analytic_value: float
    p_at_min: float


def block_gap_bound(loss, lam: float, d: int, labels, p_grid: int = DEFAULT_P_GRID) -> GapBound:
    """Lower bound ``(lam*d/60) * min_p max_y (2 u1 - u2)**2`` on the expected gap.

    ``u1`` and ``u2`` minimize ``loss(u, y) + p*lam*d*u**2`` and
    ``loss(u, y) + p*lam*d*u**2/2``; ``p`` ranges over a uniform grid on
    ``[1/2, 2]`` and ``y`` over the finite label set ``labels``.

    For the four supported losses ``(2 u1 - u2)**2`` is non-increasing in
    ``a = p*lam*d`` for every fixed label, so the exact minimum over ``p`` sits
    at ``p = 2``; that value is returned as ``analytic_value``.
    """
    loss = as_loss(loss)
    if lam <= 0 or d <= 0:
        raise ValueError("lam and d must be positive")
    ys = np.atleast_1d(np.asarray(labels, dtype=float))
    if ys.size == 0:
        raise ValueError("label set must be nonempty")
    scale = lam * d / 60.0
    ps = np.linspace(0.5, 2.0, p_grid)
    worst = np.array([np.max(gap_term(loss, ys, p * lam * d)) for p in ps])
    k = int(np.argmin(worst))
    analytic = float(np.max(gap_term(loss, ys, 2.0 * lam * d)))
    return GapBound(
        grid_value=float(scale * worst[k]),
        analytic_value=float(scale * analytic),
        p_at_min=float(ps[k]),
    )
