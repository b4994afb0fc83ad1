"""Dense symmetric eigendecomposition by cyclic Jacobi rotations."""

from __future__ import annotations

import numpy as np

from .errors import EigensolverFailure


def jacobi_eigh(a, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decompose a real symmetric matrix.

    Returns ``(w, v)`` with eigenvalues ``w`` in descending order and the
    matching unit eigenvectors as the columns of ``v``. Equal eigenvalues
    keep the order of their diagonal positions. Convergence means the
    off-diagonal Frobenius norm drops below ``tol * max(1, ||a||_F)``.
    """
    a = np.array(a, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    n = a.shape[0]
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-10 * max(1.0, float(np.abs(a).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    a = (a + a.T) / 2
    v = np.eye(n)
    threshold = tol * max(1.0, float(np.linalg.norm(a)))

    iu = np.triu_indices(n, k=1)

    def off_norm():
        return float(np.sqrt(2.0 * np.sum(a[iu] ** 2)))

    for _ in range(max_sweeps):
        if off_norm() < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                with np.errstate(over="ignore"):
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e100:
                    t = 0.5 / theta
                else:
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    else:
        off = off_norm()
        if off >= threshold:
            raise EigensolverFailure(f"no convergence after {max_sweeps} sweeps (off-diagonal norm {off:.3e})")

    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


SIGN_TIE_RTOL = 1e-9


def fix_signs(vectors):
    """Flip each column so its largest-magnitude entry is positive.

    Entries within ``SIGN_TIE_RTOL`` of the largest magnitude count as tied
    and the first of them decides, so rounding noise cannot flip a column.
    """
    vectors = np.array(vectors, dtype=float, copy=True)
    for j in range(vectors.shape[1]):
        mags = np.abs(vectors[:, j])
        i = int(np.flatnonzero(mags >= mags.max() * (1 - SIGN_TIE_RTOL))[0])
        if vectors[i, j] < 0:
            vectors[:, j] = -vectors[:, j]
    return vectors
