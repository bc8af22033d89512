"""Singular values of dense patch matrices via a cyclic Jacobi eigensolver.

The singular values of A are the square roots of the eigenvalues of the
smaller Gram matrix (A A^T or A^T A). The Jacobi iteration below handles
the modest symmetric systems produced by patch matrices; only values are
needed, so no vectors are accumulated.
"""

from __future__ import annotations

import warnings

import numpy as np
from numba import njit

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 30


@njit(cache=True)
def _jacobi_eigenvalues(a, tol, max_sweeps):
    """Diagonalize symmetric a in place by cyclic Jacobi rotations.

    Returns (eigenvalues, converged). Convergence: off-diagonal Frobenius
    norm below tol times the Frobenius norm of the input.
    """
    n = a.shape[0]
    norm_f = 0.0
    for i in range(n):
        for j in range(n):
            norm_f += a[i, j] * a[i, j]
    norm_f = np.sqrt(norm_f)
    threshold = tol * norm_f

    converged = norm_f == 0.0
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        if np.sqrt(off) < threshold:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                app = a[p, p]
                aqq = a[q, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    if i == p or i == q:
                        continue
                    aip = a[i, p]
                    aiq = a[i, q]
                    a[i, p] = c * aip - s * aiq
                    a[p, i] = a[i, p]
                    a[i, q] = s * aip + c * aiq
                    a[q, i] = a[i, q]

    eig = np.empty(n, dtype=np.float64)
    for i in range(n):
        eig[i] = a[i, i]
    return eig, converged


def singular_values(m):
    """Singular values of a dense matrix, descending.

    Negative eigenvalues produced by round-off are clamped to zero. A
    non-converged iteration (30 sweeps) emits a warning and returns the
    best iterate.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("expected a nonempty 2-D matrix")
    if m.shape[0] <= m.shape[1]:
        gram = m @ m.T
    else:
        gram = m.T @ m
    eig, converged = _jacobi_eigenvalues(np.ascontiguousarray(gram), JACOBI_TOL, JACOBI_MAX_SWEEPS)
    if not converged:
        warnings.warn("Jacobi eigensolver did not converge in 30 sweeps; returning best iterate")
    eig = np.where(eig < 0.0, 0.0, eig)
    return np.sqrt(np.sort(eig)[::-1])


def partial_energy_count(s, alpha):
    """Smallest t with s_1 + ... + s_t >= alpha * sum(s), for descending s.

    Sums are over the singular values themselves, not their squares. An
    all-zero vector yields t = 1 by convention.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.size == 0:
        raise ValueError("empty singular value list")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    if np.any(s < 0) or np.any(np.diff(s) > 0):
        raise ValueError("singular values must be nonnegative and descending")
    total = float(s.sum())
    if total == 0.0:
        return 1
    prefix = np.cumsum(s)
    return int(np.searchsorted(prefix, alpha * total - 1e-12 * total) + 1)
