"""Algebraic separation of BPSK sources from a real linear mixture.

Given ``G ~ X F`` with ``X`` binary, each separating vector ``w`` obeys
``(g_n^T w)^2 = 1`` for every row. Lifting ``w w^T`` to its scaled
symmetric vectorization turns these into a linear system whose kernel
(after removing the constant direction) is spanned by the rank-one
matrices ``w_k w_k^T``. Those are pulled apart by a symmetric pencil for
two sources or by joint diagonalization for more.
"""

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .errors import (
    ConditioningError,
    DegenerateMixtureError,
    InvalidInputError,
    UnderdeterminedSystemError,
    UnresolvedAmbiguityError,
)
from .kernels import joint_diagonalize, svec_rows
from .numerics import gen_sym_eig

MATCH_THRESHOLD = 0.6
COLLINEAR_CORR = 0.99
JD_TOL = 1e-10
JD_MAX_SWEEPS = 100
REFINE_ITERS = 3
RANK_WARN = 1e-10


@dataclass
class SeparationResult:
    X_hat: np.ndarray
    F_hat: np.ndarray
    assignment: Dict[int, int] = field(default_factory=dict)
    confidence: Optional[np.ndarray] = None
    residual: float = float("nan")
    sweeps: int = 0
    offdiag: float = 0.0


def build_quadratic_system(G):
    """Rows ``svec(g_n g_n^T)`` and the all-ones target.

    Returns
    -------
    P : ndarray, shape (N, K(K+1)/2)
    target : ndarray, shape (N,)
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[1] < 1:
        raise InvalidInputError("G must be an N x K matrix with K >= 1")
    N, K = G.shape
    D = K * (K + 1) // 2
    if N < D:
        raise UnderdeterminedSystemError(f"need N >= {D} rows for K={K}, got {N}")
    return svec_rows(G), np.ones(N)


def unsvec(y, K):
    """Inverse of the scaled symmetric vectorization (column-major upper triangle)."""
    M = np.zeros((K, K))
    c = 0
    for j in range(K):
        for i in range(j + 1):
            if i == j:
                M[i, i] = y[c]
            else:
                M[i, j] = M[j, i] = y[c] / math.sqrt(2.0)
            c += 1
    return M


def svec(M):
    K = M.shape[0]
    out = []
    for j in range(K):
        for i in range(j + 1):
            out.append(M[i, i] if i == j else math.sqrt(2.0) * M[i, j])
    return np.array(out)


def binarize(A):
    out = np.sign(A)
    out[out == 0] = 1.0
    return out


def _separating_vectors(Gw, K):
    """Columns ``w_k`` with ``sign(Gw @ w_k)`` estimating the sources."""
    if K == 1:
        return np.ones((1, 1)), 0, 0.0
    P, _ = build_quadratic_system(Gw)
    P_hat = P - P.mean(axis=0)
    _, s, vt = np.linalg.svd(P_hat, full_matrices=False)
    D = P.shape[1]
    if D > K and s[D - K - 1] <= 1e-12 * max(s[0], 1e-300) * math.sqrt(P.shape[0]):
        raise DegenerateMixtureError("solution set has more than K dimensions")
    kernel = vt[D - K:].T
    y0 = kernel @ (kernel.T @ svec(np.eye(K)))
    if np.linalg.norm(y0) < 1e-12:
        raise DegenerateMixtureError("identity has no component in the solution set")
    basis = [unsvec(kernel[:, i], K) for i in range(K)]
    M0 = unsvec(y0, K)
    try:
        C = np.linalg.cholesky(M0)
    except np.linalg.LinAlgError:
        C = None
    if K == 2:
        rest = kernel - np.outer(y0, y0 @ kernel) / (y0 @ y0)
        j = int(np.argmax(np.linalg.norm(rest, axis=0)))
        M_perp = unsvec(rest[:, j], K)
        pencil = gen_sym_eig(M_perp, M0)
        return np.linalg.inv(pencil.vectors).T, 0, 0.0
    if C is not None:
        Ci = np.linalg.inv(C)
        mats = np.array([Ci @ M @ Ci.T for M in basis])
    else:
        mats = np.array(basis)
    V, sweeps, offdiag, converged = joint_diagonalize(mats, JD_TOL, JD_MAX_SWEEPS)
    if not converged:
        raise ConditioningError(
            f"joint diagonalization stalled after {sweeps} sweeps", residual=offdiag
        )
    W = C @ V if C is not None else V
    return W, sweeps, offdiag


def solve_mixture(G, assume_K=None, refine=REFINE_ITERS):
    """Recover ``X_hat`` (entries +-1) and ``F_hat`` with ``G ~ X_hat F_hat``.

    Parameters
    ----------
    G : ndarray, shape (N, K)
    assume_K : int, optional
        Number of sources; defaults to the column count of ``G``. A smaller
        value keeps only the dominant ``assume_K`` directions of ``G``.
    refine : int
        Alternating quantize-and-refit passes after the algebraic step.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2:
        raise InvalidInputError("G must be a matrix")
    N = G.shape[0]
    K = G.shape[1] if assume_K is None else int(assume_K)
    if not 1 <= K <= G.shape[1]:
        raise InvalidInputError(f"assume_K must lie in [1, {G.shape[1]}]")
    U, s, _ = np.linalg.svd(G, full_matrices=False)
    if s[0] == 0:
        raise DegenerateMixtureError("G is identically zero")
    if s[K - 1] <= RANK_WARN * s[0]:
        warnings.warn(f"G has numerical rank below {K}", stacklevel=2)
    if K < G.shape[1]:
        G = U[:, :K] * s[:K]
    Gw = math.sqrt(N) * U[:, :K]
    W, sweeps, offdiag = _separating_vectors(Gw, K)
    X_hat = binarize(Gw @ W)
    for _ in range(refine):
        F = np.linalg.lstsq(X_hat, G, rcond=None)[0]
        X_hat = binarize(G @ np.linalg.pinv(F))
    if K > 1:
        corr = np.corrcoef(X_hat.T)
        np.fill_diagonal(corr, 0.0)
        if np.any(np.abs(np.nan_to_num(corr, nan=1.0)) > COLLINEAR_CORR):
            raise DegenerateMixtureError("separated columns are collinear")
    F_hat = np.linalg.lstsq(X_hat, G, rcond=None)[0]
    residual = float(np.linalg.norm(G - X_hat @ F_hat) / np.linalg.norm(G))
    return SeparationResult(
        X_hat=X_hat, F_hat=F_hat, residual=residual, sweeps=sweeps, offdiag=offdiag
    )


def resolve_ambiguity(result, preambles, threshold=MATCH_THRESHOLD):
    """Match output columns to users by preamble correlation.

    Parameters
    ----------
    result : SeparationResult
    preambles : dict
        ``user_id -> +-1 preamble``; all of equal length.
    threshold : float
        Smallest accepted ``|correlation|``.

    Returns
    -------
    SeparationResult
        Columns flipped so each matched correlation is positive;
        ``assignment`` maps output column to ``user_id``.
    """
    if not preambles:
        return dataclasses.replace(result, assignment={}, confidence=np.zeros(0))
    users = list(preambles)
    P = len(preambles[users[0]])
    if P == 0:
        raise InvalidInputError("preambles are empty")
    pre = np.column_stack([np.asarray(preambles[u], dtype=float) for u in users])
    K = result.X_hat.shape[1]
    corr = result.X_hat[:P].T @ pre / P
    mag = np.abs(corr)
    assignment, confidence = {}, np.zeros(K)
    signs = np.ones(K)
    free_cols, free_users = set(range(K)), set(range(len(users)))
    weak = []
    for _ in range(min(K, len(users))):
        best, pick = -1.0, None
        for c in sorted(free_cols):
            for u in sorted(free_users):
                if mag[c, u] > best:
                    best, pick = mag[c, u], (c, u)
        c, u = pick
        if best < threshold:
            weak.append(c)
        assignment[c] = users[u]
        confidence[c] = best
        signs[c] = -1.0 if corr[c, u] < 0 else 1.0
        free_cols.discard(c)
        free_users.discard(u)
    if weak:
        raise UnresolvedAmbiguityError(
            f"preamble correlation below {threshold} for columns {sorted(weak)}",
            columns=sorted(weak),
        )
    return dataclasses.replace(
        result,
        X_hat=result.X_hat * signs,
        F_hat=result.F_hat * signs[:, None],
        assignment=assignment,
        confidence=confidence,
    )
