"""Pure NumPy implementations of the inner kernels.

These mirror ``_kernels.pyx`` one for one and are used whenever the
compiled module is unavailable or ``EDGEVIEW_PURE=1`` is set.
"""

import math

import numpy as np

SQRT2 = math.sqrt(2.0)


def svec_rows(G):
    """Row ``n`` is the scaled symmetric vectorization of ``g_n g_n^T``.

    Ordering is column-major over the upper triangle: for ``K=2`` the row
    is ``(g1^2, sqrt2 g1 g2, g2^2)``.
    """
    G = np.ascontiguousarray(G, dtype=np.float64)
    N, K = G.shape
    rows, cols = np.triu_indices(K)
    order = np.lexsort((rows, cols))
    rows, cols = rows[order], cols[order]
    out = G[:, rows] * G[:, cols]
    out[:, rows != cols] *= SQRT2
    return out


def joint_diagonalize(mats, tol=1e-10, max_sweeps=100):
    """Orthogonal Jacobi joint diagonalization of symmetric matrices.

    Parameters
    ----------
    mats : ndarray, shape (m, n, n)
        Stack of real symmetric matrices. Not modified.
    tol : float
        A sweep whose largest rotation sine is below ``tol`` ends the
        iteration, as does relative off-diagonal mass below ``tol``.
    max_sweeps : int

    Returns
    -------
    V : ndarray, shape (n, n)
        Orthogonal matrix with ``V.T @ mats[i] @ V`` close to diagonal.
    sweeps : int
    offdiag : float
        Off-diagonal Frobenius norm relative to the input norm, after the
        last sweep.
    converged : bool
    """
    A = np.array(mats, dtype=np.float64, copy=True)
    m, n, _ = A.shape
    V = np.eye(n)
    total = float(np.sum(A * A)) or 1.0
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        biggest = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                g1 = A[:, p, p] - A[:, q, q]
                g2 = A[:, p, q] + A[:, q, p]
                ton = float(g1 @ g1 - g2 @ g2)
                toff = 2.0 * float(g1 @ g2)
                theta = 0.5 * math.atan2(toff, ton + math.hypot(ton, toff))
                c, s = math.cos(theta), math.sin(theta)
                biggest = max(biggest, abs(s))
                if abs(s) <= tol:
                    continue
                ap = A[:, :, p].copy()
                aq = A[:, :, q]
                A[:, :, p] = c * ap + s * aq
                A[:, :, q] = c * aq - s * ap
                ap = A[:, p, :].copy()
                aq = A[:, q, :]
                A[:, p, :] = c * ap + s * aq
                A[:, q, :] = c * aq - s * ap
                vp = V[:, p].copy()
                V[:, p] = c * vp + s * V[:, q]
                V[:, q] = c * V[:, q] - s * vp
        off = A * (1.0 - np.eye(n))
        offdiag = math.sqrt(float(np.sum(off * off)) / total)
        if biggest <= tol or offdiag <= tol:
            converged = True
            break
    return V, sweeps, offdiag, converged
