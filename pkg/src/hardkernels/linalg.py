"""Dense Cholesky factorization and solve for small SPD systems."""

from __future__ import annotations

import math

import numpy as np


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


def cholesky(A) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == A`` (Cholesky-Banachiewicz)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    L = np.zeros_like(A)
    for i in range(n):
        for j in range(i + 1):
            s = A[i, j] - float(np.dot(L[i, :j], L[j, :j]))
            if i == j:
                if s <= 0.0:
                    raise NotPositiveDefinite(f"non-positive pivot {s!r} at row {i}")
                L[i, i] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    return L


def solve_lower(L, b) -> np.ndarray:
    n = L.shape[0]
    x = np.array(b, dtype=float, copy=True)
    for i in range(n):
        x[i] = (x[i] - np.dot(L[i, :i], x[:i])) / L[i, i]
    return x


def solve_upper(U, b) -> np.ndarray:
    n = U.shape[0]
    x = np.array(b, dtype=float, copy=True)
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - np.dot(U[i, i + 1:], x[i + 1:])) / U[i, i]
    return x


def cho_solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive definite ``A``."""
    A = np.asarray(A, dtype=float)
    L = cholesky(0.5 * (A + A.T))
    return solve_upper(L.T, solve_lower(L, b))
