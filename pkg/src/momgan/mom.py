"""Median-of-means over random equal-size blocks."""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BlockPartition:
    """``K`` disjoint index blocks of size ``n // K``; leftover indices are dropped."""

    n: int
    blocks: np.ndarray  # (K, n // K) int array
    dropped: np.ndarray

    @property
    def K(self):
        return self.blocks.shape[0]

    @property
    def block_size(self):
        return self.blocks.shape[1]

    @property
    def retained(self):
        return self.K * self.block_size


def partition(n, K, rng):
    """Split a uniform random permutation of ``range(n)`` into ``K`` chunks."""
    n = int(n)
    K = int(K)
    if K < 1 or K > n:
        raise ValueError(f"need 1 <= K <= n, got K={K}, n={n}")
    b = n // K
    perm = rng.permutation(n)
    return BlockPartition(n=n, blocks=perm[: K * b].reshape(K, b), dropped=perm[K * b :])


def fixed_partition(n, K):
    """Contiguous blocks ``[0..b), [b..2b), ...`` with no shuffling."""
    b = n // K
    idx = np.arange(n)
    return BlockPartition(n=n, blocks=idx[: K * b].reshape(K, b), dropped=idx[K * b :])


def block_means(values, part):
    values = np.asarray(values, dtype=np.float64)
    if part.blocks.size and part.blocks.max() >= values.shape[0]:
        raise IndexError("partition indexes past the end of values")
    # fsum is correctly rounded, so the result ignores the order inside a block
    b = part.block_size
    return np.array([math.fsum(values[blk]) / b for blk in part.blocks])


def quantile_lower(values, alpha):
    """The ``ceil(alpha * K)``-th smallest of ``values`` (1-based)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty input")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    k = max(1, math.ceil(alpha * values.size))
    return float(np.sort(values)[k - 1])


def mom_from_means(means):
    """MoM value and attaining block index from precomputed block means.

    The value is the largest block mean not above the lower median; ties go
    to the lowest block index.
    """
    means = np.asarray(means, dtype=np.float64)
    if np.isnan(means).any():
        raise ValueError("block means contain NaN")
    q = quantile_lower(means, 0.5)
    ok = np.flatnonzero(means <= q)
    best = means[ok].max()
    idx = int(ok[np.flatnonzero(means[ok] == best)[0]])
    return float(best), idx


def mom(values, part):
    means = block_means(values, part)
    return mom_from_means(means)


def median_of_means(values, K, rng):
    """One-shot estimate: random partition then ``mom``."""
    values = np.asarray(values, dtype=np.float64)
    return mom(values, partition(values.shape[0], K, rng))[0]
