"""Hard kernel instances.

A :class:`BlockKernel` is a random member of the class of permuted
block-diagonal 0/1 matrices with ``2d`` all-ones sub-blocks.  Block ``i``
holds two equal halves; when ``sigma[i] == 1`` the halves are merged into one
all-ones block, otherwise they are disjoint.  The matrix is stored through
its row labels only and is never formed unless explicitly materialized.

Indices are 0-based throughout: rows ``0..m-1``, blocks ``0..d-1`` and
sub-blocks ``0`` / ``1``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_DENSE = 2048


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator from an int seed or an existing ``SeedSequence``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BlockKernel:
    m: int
    d: int
    sigma: np.ndarray
    block: np.ndarray
    sub: np.ndarray
    block_sizes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        sigma = _frozen(self.sigma, np.int8)
        block = _frozen(self.block, np.int64)
        sub = _frozen(self.sub, np.int8)
        if sigma.shape != (self.d,) or block.shape != (self.m,) or sub.shape != (self.m,):
            raise ValueError("shape mismatch between m, d and label arrays")
        if not np.isin(sigma, (0, 1)).all() or not np.isin(sub, (0, 1)).all():
            raise ValueError("sigma and sub must be 0/1")
        if block.size and (block.min() < 0 or block.max() >= self.d):
            raise ValueError("block labels out of range")
        half = np.bincount(block * 2 + sub, minlength=2 * self.d).reshape(self.d, 2)
        if not np.array_equal(half[:, 0], half[:, 1]):
            raise ValueError("sub-blocks of each block must have equal size")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "block", block)
        object.__setattr__(self, "sub", sub)
        object.__setattr__(self, "block_sizes", _frozen(half.sum(axis=1), np.int64))

    @property
    def assignment(self) -> np.ndarray:
        """``(m, 2)`` array of ``(block, sub)`` per row."""
        return np.stack([self.block, self.sub], axis=1)

    @property
    def group(self) -> np.ndarray:
        """Label of the all-ones block each row belongs to (``2*block + sub``,
        with ``sub`` collapsed to 0 when the block is merged)."""
        merged = self.sigma[self.block].astype(bool)
        return self.block * 2 + np.where(merged, 0, self.sub)

    def entry(self, s: int, r: int) -> int:
        return kernel_entry(self, s, r)

    def members(self, i: int, sub: int | None = None) -> np.ndarray:
        mask = self.block == i
        if sub is not None:
            mask &= self.sub == sub
        return np.flatnonzero(mask)

    def to_dense(self) -> np.ndarray:
        if self.m > MAX_DENSE:
            raise ValueError(f"dense materialization is limited to m <= {MAX_DENSE}")
        g = self.group
        return (g[:, None] == g[None, :]).astype(float)

    def to_json(self) -> dict:
        return {
            "m": int(self.m),
            "d": int(self.d),
            "sigma": [int(s) for s in self.sigma],
            "assignment": [[int(b), int(s)] for b, s in zip(self.block, self.sub)],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BlockKernel":
        assignment = np.asarray(doc["assignment"], dtype=np.int64).reshape(-1, 2)
        return cls(
            m=int(doc["m"]),
            d=int(doc["d"]),
            sigma=doc["sigma"],
            block=assignment[:, 0],
            sub=assignment[:, 1],
        )


def sample_hard_kernel(d: int, m: int, seed) -> BlockKernel:
    """Draw a kernel from the hard distribution.

    ``sigma`` is uniform on ``{0,1}^d``; each of the ``m/2`` consecutive
    pairs of instances picks a block uniformly (with replacement) and takes
    its two halves; a uniform permutation then shuffles the rows.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if m < 2 or m % 2:
        raise ValueError("m must be a positive even integer")
    if m < 2 * d:
        warnings.warn(f"m={m} < 2d={2 * d}: some blocks are necessarily empty", stacklevel=2)
    rng = make_rng(seed)
    sigma = rng.integers(0, 2, size=d)
    pair_block = rng.integers(0, d, size=m // 2)
    z_block = np.repeat(pair_block, 2)
    z_sub = np.tile(np.array([0, 1]), m // 2)
    perm = rng.permutation(m)
    # row t holds instance z_{perm[t]}
    return BlockKernel(m=m, d=d, sigma=sigma, block=z_block[perm], sub=z_sub[perm])


def resample_permutation(K: BlockKernel, seed) -> BlockKernel:
    """Same sigma and pair draw, fresh row permutation."""
    rng = make_rng(seed)
    perm = rng.permutation(K.m)
    return BlockKernel(m=K.m, d=K.d, sigma=K.sigma, block=K.block[perm], sub=K.sub[perm])


def kernel_entry(K: BlockKernel, s: int, r: int) -> int:
    if not (0 <= s < K.m and 0 <= r < K.m):
        raise IndexError(f"index pair ({s}, {r}) out of range for m={K.m}")
    b = K.block[s]
    if b != K.block[r]:
        return 0
    if K.sub[s] == K.sub[r] or K.sigma[b]:
        return 1
    return 0


def realize_instances(K: BlockKernel) -> np.ndarray:
    """Unit vectors in ``R^{2d}`` whose Gram matrix is ``K``.

    Row ``t`` is ``e_i`` for the first half of block ``i`` (and for both
    halves when the block is merged), ``e_{i+d}`` for the second half.
    """
    X = np.zeros((K.m, 2 * K.d))
    split = (K.sub == 1) & (K.sigma[K.block] == 0)
    col = K.block + np.where(split, K.d, 0)
    X[np.arange(K.m), col] = 1.0
    return X


# -- low-rank ridge instance --------------------------------------------------


def partition_index(m: int, d: int) -> np.ndarray:
    """Block of each row when ``0..m-1`` is cut into ``2d`` equal runs."""
    if m % (2 * d):
        raise ValueError("2d must divide m")
    return np.arange(m) // (m // (2 * d))


@dataclass(frozen=True, eq=False)
class LowRankInstance:
    m: int
    d: int
    z: np.ndarray
    search_score: float | None = None

    def __post_init__(self):
        z = _frozen(self.z, float)
        if self.m % (2 * self.d):
            raise ValueError("2d must divide m")
        if z.shape != (2 * self.d,) or not np.all(np.abs(z) == 1):
            raise ValueError("z must be a +-1 vector of length 2d")
        object.__setattr__(self, "z", z)

    @property
    def partition(self) -> np.ndarray:
        return partition_index(self.m, self.d)

    @property
    def y(self) -> np.ndarray:
        return self.z[self.partition]

    @property
    def block_size(self) -> int:
        return self.m // (2 * self.d)

    def gram(self) -> np.ndarray:
        """Representative ``2d x 2d`` matrix of the true kernel (the identity)."""
        return np.eye(2 * self.d)

    def to_dense(self) -> np.ndarray:
        if self.m > MAX_DENSE:
            raise ValueError(f"dense materialization is limited to m <= {MAX_DENSE}")
        p = self.partition
        return (p[:, None] == p[None, :]).astype(float)

    def to_json(self) -> dict:
        # 2d equal all-ones blocks == d split blocks with sigma = 0
        p = self.partition
        return {
            "m": int(self.m),
            "d": int(self.d),
            "sigma": [0] * self.d,
            "assignment": [[int(b) // 2, int(b) % 2] for b in p],
            "z": [int(v) for v in self.z],
        }

    def as_block_kernel(self) -> BlockKernel:
        p = self.partition
        return BlockKernel(m=self.m, d=self.d, sigma=np.zeros(self.d, dtype=int),
                           block=p // 2, sub=p % 2)

    @classmethod
    def from_json(cls, doc: dict) -> "LowRankInstance":
        return cls(m=int(doc["m"]), d=int(doc["d"]), z=doc["z"])


class SearchFailed(RuntimeError):
    def __init__(self, best_z, best_score, target):
        super().__init__(
            f"z-search exhausted its budget: best score {best_score:.6g} < target {target}"
        )
        self.best_z = best_z
        self.best_score = best_score


def bottom_eigvecs(G: np.ndarray, k: int) -> np.ndarray:
    """Eigenvectors of the ``k`` smallest eigenvalues of symmetric ``G``."""
    _, U = np.linalg.eigh(0.5 * (G + G.T))
    return U[:, :k]


def projection_score(U: np.ndarray, z: np.ndarray) -> float:
    return float(np.sum((U.T @ z) ** 2))


def search_adversarial_z(G: np.ndarray, d: int, search_budget: int = 100_000,
                         restarts: int = 32, seed=0) -> tuple[np.ndarray, float]:
    """Find ``z in {-1,+1}^{2d}`` with ``sum_{i<=d} (u_i . z)**2 >= d``.

    ``u_1..u_d`` are the bottom eigenvectors of ``G``.  Random starts are
    improved by greedy single-coordinate sign flips until a local maximum or
    the target is reached; every score evaluation counts against the budget.
    """
    G = np.asarray(G, dtype=float)
    n = 2 * d
    if G.shape != (n, n):
        raise ValueError(f"G must be {n}x{n}")
    U = bottom_eigvecs(G, d)
    P = U @ U.T
    target = d - 1e-9
    rng = make_rng(seed)
    evals = 0
    best_z, best = None, -np.inf
    for _ in range(restarts):
        if evals >= search_budget:
            break
        z = rng.choice(np.array([-1.0, 1.0]), size=n)
        Pz = P @ z
        score = float(z @ Pz)
        evals += 1
        while True:
            if score > best:
                best, best_z = score, z.copy()
            if score >= target or evals >= search_budget:
                break
            # flipping z_j changes the score by -4 z_j (Pz)_j + 4 P_jj
            delta = -4.0 * z * Pz + 4.0 * np.diag(P)
            evals += n
            j = int(np.argmax(delta))
            if delta[j] <= 1e-12:
                break
            Pz = Pz - 2.0 * z[j] * P[:, j]
            z[j] = -z[j]
            score = float(z @ Pz)
        if best >= target:
            return best_z, best
    raise SearchFailed(best_z, best, d)


def build_lowrank_instance(d: int, m: int, z="search", lam: float | None = None,
                           gram_approx: np.ndarray | None = None,
                           search_budget: int = 100_000, seed=0) -> LowRankInstance:
    """Training set whose targets are ``y_t = z_{block(t)}`` on ``2d`` equal blocks.

    With ``z="search"`` the labels are chosen adversarially against the
    learner's representative matrix ``gram_approx`` (``2d x 2d``).  ``lam``
    does not enter the search; it is accepted so callers can pass a full
    experiment configuration.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    partition_index(m, d)
    if isinstance(z, str):
        if z != "search":
            raise ValueError("z must be a +-1 vector or 'search'")
        if gram_approx is None:
            gram_approx = np.zeros((2 * d, 2 * d))
        zz, score = search_adversarial_z(gram_approx, d, search_budget=search_budget, seed=seed)
        return LowRankInstance(m=m, d=d, z=zz, search_score=score)
    return LowRankInstance(m=m, d=d, z=np.asarray(z, dtype=float))


def save_instance(inst, path) -> None:
    Path(path).write_text(json.dumps(inst.to_json(), indent=1) + "\n")


def load_instance(path_or_doc):
    doc = path_or_doc
    if not isinstance(doc, dict):
        doc = json.loads(Path(path_or_doc).read_text())
    if "z" in doc:
        return LowRankInstance.from_json(doc)
    return BlockKernel.from_json(doc)
