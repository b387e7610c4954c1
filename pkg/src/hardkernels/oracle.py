"""Budget-enforcing access to a hard kernel.

Learners read kernel entries only through :class:`BudgetedOracle`.  The
budget counts distinct unordered index pairs; repeating a pair (in either
order) is free and returns the cached value.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .instances import BlockKernel, kernel_entry

LOG_COLUMNS = ("t", "s", "r", "value", "charged")


class BudgetExhausted(RuntimeError):
    pass


class BudgetedOracle:
    def __init__(self, kernel: BlockKernel, budget: int):
        if budget < 0:
            raise ValueError("budget must be non-negative")
        self.kernel = kernel
        self.budget = int(budget)
        self.queried: dict[tuple[int, int], int] = {}
        self.query_log: list[tuple[int, int, int, bool]] = []
        self.revealed_all = False
        self._spent = 0

    @property
    def m(self) -> int:
        return self.kernel.m

    @property
    def used(self) -> int:
        return self._spent

    @property
    def remaining(self) -> int:
        return self.budget - self._spent

    def query(self, s: int, r: int) -> int:
        s, r = int(s), int(r)
        key = (s, r) if s <= r else (r, s)
        if key in self.queried or self.revealed_all:
            value = self.queried.get(key)
            if value is None:
                value = kernel_entry(self.kernel, s, r)
            self.query_log.append((s, r, value, False))
            return value
        if self.remaining <= 0:
            raise BudgetExhausted(f"budget of {self.budget} distinct entries exhausted")
        value = kernel_entry(self.kernel, s, r)
        self.queried[key] = value
        self._spent += 1
        self.query_log.append((s, r, value, True))
        return value

    def query_block(self, rows, cols) -> np.ndarray:
        """Sub-matrix ``K[rows][:, cols]``; the diagonal ``K[t, t] = 1`` is
        filled in without a query."""
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        out = np.empty((rows.size, cols.size))
        for a, s in enumerate(rows):
            for b, r in enumerate(cols):
                out[a, b] = 1.0 if s == r else self.query(s, r)
        return out

    def reveal_all(self) -> BlockKernel:
        """Hand over the whole matrix, charging every distinct pair."""
        m = self.kernel.m
        cost = m * (m + 1) // 2
        if self.budget < cost:
            raise BudgetExhausted(f"full reveal needs {cost} entries, budget is {self.budget}")
        self.revealed_all = True
        self._spent = cost
        return self.kernel

    def missed_blocks(self) -> np.ndarray:
        """Boolean vector: ``True`` for block ``i`` when no logged query had
        both endpoints inside block ``i``."""
        missed = np.ones(self.kernel.d, dtype=bool)
        if self.revealed_all:
            hit = np.unique(self.kernel.block)
            missed[hit] = False
            return missed
        if not self.queried:
            return missed
        pairs = np.array(list(self.queried), dtype=int)
        bs = self.kernel.block[pairs[:, 0]]
        same = bs == self.kernel.block[pairs[:, 1]]
        missed[bs[same]] = False
        return missed

    def export_log(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LOG_COLUMNS)
            for t, (s, r, v, c) in enumerate(self.query_log):
                w.writerow((t, s, r, v, int(c)))
