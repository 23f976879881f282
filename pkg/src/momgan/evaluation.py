"""Distances between empirical distributions."""

from dataclasses import dataclass

import numpy as np

from .numerics import psd_sqrt


def w1_exact_1d(a, b):
    """Wasserstein-1 between two equal-size 1-D samples via sorted pairing."""
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size != b.size:
        raise ValueError(f"sample sizes differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty samples")
    return float(np.mean(np.abs(a - b)))


def random_directions(p, n_proj, rng):
    u = rng.standard_normal((n_proj, p))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def sliced_w1(A, B, n_proj=256, rng=None, directions=None):
    """Average 1-D W1 of the two point clouds projected on random unit directions."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ValueError(f"point clouds differ in shape: {A.shape} vs {B.shape}")
    if directions is None:
        if n_proj < 1:
            raise ValueError("n_proj must be >= 1")
        directions = random_directions(A.shape[1], n_proj, rng)
    pa = np.sort(A @ directions.T, axis=0)
    pb = np.sort(B @ directions.T, axis=0)
    return float(np.mean(np.abs(pa - pb)))


@dataclass(frozen=True)
class GaussianSummary:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self):
        return self.mean.shape[0]


def fit_gaussian(samples):
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError("need at least two samples")
    # shift by one sample first: exact zero covariance for constant data
    y = x - x[0]
    my = y.mean(axis=0)
    c = y - my
    cov = c.T @ c / (x.shape[0] - 1)
    return GaussianSummary(x.mean(axis=0), 0.5 * (cov + cov.T))


def frechet_distance(g1, g2):
    """``|m1 - m2|^2 + tr(S1 + S2 - 2 (S1 S2)^{1/2})`` for two Gaussian summaries.

    The cross term uses ``tr sqrt(sqrt(S1) S2 sqrt(S1))``, which has the same
    trace as ``(S1 S2)^{1/2}`` but stays symmetric.
    """
    if g1.dim != g2.dim:
        raise ValueError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    if np.array_equal(g1.mean, g2.mean) and np.array_equal(g1.cov, g2.cov):
        return 0.0
    r1 = psd_sqrt(g1.cov)
    cross = psd_sqrt(r1 @ g2.cov @ r1)
    dm = g1.mean - g2.mean
    d = float(dm @ dm + np.trace(g1.cov) + np.trace(g2.cov) - 2.0 * np.trace(cross))
    return max(d, 0.0)


def evaluate_samples(fake, real, n_proj=256, rng=None):
    """Sliced-W1 and Frechet scores of ``fake`` against ``real`` (equal sizes)."""
    return {
        "sliced_w1": sliced_w1(fake, real, n_proj=n_proj, rng=rng),
        "frechet": frechet_distance(fit_gaussian(fake), fit_gaussian(real)),
    }
