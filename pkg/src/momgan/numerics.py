"""Small dense linear algebra and seeded random streams.

Matrices are plain 2-D ``float64`` numpy arrays.  The eigensolver is a cyclic
Jacobi sweep, which is plenty for the covariance sizes used at desk scale.
"""

import numpy as np

JACOBI_MAX_DIM = 64
NEG_EIG_CLAMP = 1e-10


class NumericsError(ValueError):
    pass


def make_rng(seed, stream=0):
    """Return a ``numpy.random.Generator`` keyed by ``(seed, stream)``.

    Backed by the counter-based Philox bit generator.  Equal keys give equal
    sequences; distinct stream ids give independent sequences, so parallel
    workers can each take their own stream.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def as_matrix(a):
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise NumericsError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericsError("matrix has non-finite entries")
    return m


def matmul(a, b):
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise NumericsError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def _check_symmetric(s, tol=1e-9):
    s = as_matrix(s)
    if s.shape[0] != s.shape[1]:
        raise NumericsError(f"matrix is not square: {s.shape}")
    scale = max(1.0, float(np.max(np.abs(s)))) if s.size else 1.0
    if np.max(np.abs(s - s.T), initial=0.0) > tol * scale:
        raise NumericsError("matrix is not symmetric")
    return 0.5 * (s + s.T)


def _jacobi_eig(a, tol=1e-14, max_sweeps=100):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n), v
    tiny = 1e-18 * norm
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * norm:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tiny:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta  # theta^2 would overflow
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J, rotating rows then columns p and q
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise NumericsError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")


def sym_eig(s):
    """Eigen-decomposition of a symmetric matrix.

    Returns ``(w, V)`` with eigenvalues ``w`` in descending order and
    orthonormal eigenvectors in the columns of ``V``.  Matrices larger than
    ``JACOBI_MAX_DIM`` are handed to LAPACK.
    """
    s = _check_symmetric(s)
    if s.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    if s.shape[0] <= JACOBI_MAX_DIM:
        w, v = _jacobi_eig(s)
    else:
        w, v = np.linalg.eigh(s)
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def psd_sqrt(s):
    """Symmetric PSD square root; eigenvalues in [-1e-10, 0) are clamped to zero."""
    w, v = sym_eig(s)
    if w.size and w.min() < -NEG_EIG_CLAMP:
        raise NumericsError(f"matrix is not PSD (min eigenvalue {w.min():.3e})")
    root = np.sqrt(np.clip(w, 0.0, None))
    r = (v * root) @ v.T
    return 0.5 * (r + r.T)


def spectral_norm(a, iters=200, rng=None):
    """Largest singular value of ``a`` by power iteration on ``a^T a``.

    The Rayleigh-type estimate ``||a x|| / ||x||`` never exceeds the true
    value, so this is a lower estimate that converges from below.
    """
    a = as_matrix(a)
    if iters < 1:
        raise NumericsError("iters must be >= 1")
    if not np.any(a):
        return 0.0
    if rng is None:
        rng = make_rng(0)
    x = rng.standard_normal(a.shape[1])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = a.T @ (a @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            # started in the null space; restart on a fresh direction
            x = rng.standard_normal(a.shape[1])
            x /= np.linalg.norm(x)
            continue
        x = y / ny
        est = float(np.linalg.norm(a @ x))
    return est
