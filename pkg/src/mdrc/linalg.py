"""Small dense linear-algebra helpers with explicit rank thresholds."""

import numpy as np

PINV_RTOL = 1e-12


def pinv(a, rtol=PINV_RTOL):
    """Moore-Penrose pseudo-inverse by SVD.

    Singular values below ``sigma_max * max(rows, cols) * rtol`` (and any
    subnormal ones, whose reciprocal would overflow) are treated as zero.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return np.zeros(a.shape[::-1])
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    cutoff = max((s[0] if s.size else 0.0) * max(a.shape) * rtol, np.finfo(float).tiny)
    s_inv = np.zeros_like(s)
    keep = s > cutoff
    s_inv[keep] = 1.0 / s[keep]
    return (vt.T * s_inv) @ u.T


def rank(a, rtol=PINV_RTOL):
    """Numerical rank with the threshold ``sigma_max * max(shape) * rtol``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > s[0] * max(a.shape) * rtol))


def symmetrize(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def psd_sqrt(q, tol=1e-10):
    """Symmetric PSD square root via the spectral decomposition.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything more negative
    is rejected.
    """
    w, v = np.linalg.eigh(symmetrize(np.asarray(q, dtype=float)))
    if w.size and w.min() < -tol * max(1.0, abs(w).max()):
        raise ValueError(f"matrix is not PSD (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return symmetrize((v * np.sqrt(w)) @ v.T)


def is_psd(a, sym_tol=1e-12, eig_tol=1e-10):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    if a.size and np.max(np.abs(a - a.T)) > sym_tol * max(1.0, np.max(np.abs(a))):
        return False
    return bool(np.linalg.eigvalsh(symmetrize(a)).min(initial=0.0) >= -eig_tol)
