"""Dense linear-algebra helpers shared by the detector stages.

Everything here works on real matrices: complex observations are stacked
into the real domain before they reach these routines.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import (
    InvalidInputError,
    PencilDegeneracyError,
    RankDeficiencyError,
    SymmetryError,
)

SYMMETRY_TOL = 1e-10
PENCIL_TOL = 1e-12
DEFAULT_RIDGE_SCALE = 1e-10


@dataclass
class EigenPairs:
    """Eigenvalues sorted non-increasing with matching column vectors."""

    values: np.ndarray
    vectors: np.ndarray
    condition: Optional[float] = None


def check_symmetric(S, name="matrix"):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise InvalidInputError(f"{name} has non-finite entries")
    scale = np.max(np.abs(S)) if S.size else 0.0
    if scale > 0 and np.max(np.abs(S - S.T)) > SYMMETRY_TOL * scale:
        raise SymmetryError(f"{name} is not symmetric within {SYMMETRY_TOL:g}")
    return S


def fix_signs(vectors):
    """Flip each column so that its largest-magnitude entry is positive."""
    vectors = np.array(vectors, dtype=float, copy=True)
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eig(S, k=None):
    """Return the ``k`` largest eigenpairs of a real symmetric matrix."""
    S = check_symmetric(S)
    n = S.shape[0]
    if k is None:
        k = n
    if not 1 <= k <= n:
        raise InvalidInputError(f"k must lie in [1, {n}], got {k}")
    S = 0.5 * (S + S.T)
    values, vectors = sla.eigh(S, subset_by_index=[n - k, n - 1])
    order = np.argsort(values)[::-1]
    return EigenPairs(values[order], fix_signs(vectors[:, order]))


def default_ridge(Y):
    m = Y.shape[0]
    return DEFAULT_RIDGE_SCALE * float(np.sum(Y * Y)) / m


def rank_cutoff(s, shape):
    if s.size == 0 or s[0] == 0:
        return np.inf
    return max(shape) * np.finfo(float).eps * s[0]


def row_space_factor(Y, ridge=None, view=None):
    """Return ``B`` with ``B.T @ B == Y.T (Y Y.T + ridge I)^-1 Y``.

    ``B`` has one row per row of ``Y``. For ``ridge=0`` and full row rank
    its rows are an orthonormal basis of the row space of ``Y``.

    ``ridge=None`` uses the pseudo-inverse of the Gram matrix instead: the
    result is the exact projector onto the numerical row space, which
    keeps rank-deficient (noiseless) views usable without biasing weak
    directions. ``ridge="scaled"`` applies ``default_ridge(Y)``.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise InvalidInputError("Y must be a matrix")
    if not np.all(np.isfinite(Y)):
        raise InvalidInputError("Y has non-finite entries")
    m, n = Y.shape
    if m > n:
        raise InvalidInputError(f"row_space_projector needs m <= n, got {m}x{n}")
    if isinstance(ridge, str):
        if ridge != "scaled":
            raise InvalidInputError(f"unknown ridge mode {ridge!r}")
        ridge = default_ridge(Y)
    if ridge is not None and ridge < 0:
        raise InvalidInputError("ridge must be non-negative")
    _, s, vt = np.linalg.svd(Y, full_matrices=False)
    if ridge is None:
        return vt[s > rank_cutoff(s, Y.shape)]
    where = f"view {view}" if view is not None else "input"
    if ridge == 0:
        if s.size == 0 or s[-1] <= rank_cutoff(s, Y.shape):
            raise RankDeficiencyError(
                f"Gram matrix of {where} is singular (rank deficient rows)", view=view
            )
        return vt
    weights = s / np.sqrt(s * s + ridge)
    return weights[:, None] * vt


def row_space_projector(Y, ridge=None, view=None):
    """``Y.T (Y Y.T + ridge I)^-1 Y`` as a dense symmetric matrix."""
    B = row_space_factor(Y, ridge=ridge, view=view)
    P = B.T @ B
    return 0.5 * (P + P.T)


def gen_sym_eig(A, B):
    """Solve the symmetric pencil ``A v = lambda B v``.

    Positive definite ``B`` goes through the Cholesky route and the vectors
    come back ``B``-orthonormal. For indefinite but invertible ``B`` the
    general QZ solver is used and each vector is scaled so ``|v.T B v| = 1``.
    """
    A = check_symmetric(A, "A")
    B = check_symmetric(B, "B")
    if A.shape != B.shape:
        raise InvalidInputError("A and B must have the same order")
    sv = np.linalg.svd(B, compute_uv=False)
    if sv[0] == 0 or sv[-1] <= PENCIL_TOL * sv[0]:
        raise PencilDegeneracyError("B is singular; the pencil is degenerate")
    cond = float(sv[0] / sv[-1])
    try:
        values, vectors = sla.eigh(A, B)
    except np.linalg.LinAlgError:
        values, vectors = sla.eig(A, B)
        values = values.real
        vectors = vectors.real
        norms = np.sqrt(np.abs(np.einsum("ij,ik,kj->j", vectors, B, vectors)))
        norms[norms == 0] = 1.0
        vectors = vectors / norms
    order = np.argsort(values)[::-1]
    vectors = fix_signs(vectors[:, order])
    return EigenPairs(values[order], vectors, condition=cond)


def orthonormalize(U):
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if U.shape[1] == 0:
        raise InvalidInputError("subspace basis has no columns")
    q, _ = np.linalg.qr(U)
    return q


def principal_angles(U, V):
    """Principal angles between ``span(U)`` and ``span(V)`` in ascending order."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if V.ndim == 1:
        V = V[:, None]
    if U.shape[1] == 0 or V.shape[1] == 0:
        raise InvalidInputError("subspace basis has no columns")
    if U.shape[0] != V.shape[0]:
        raise InvalidInputError("bases must have equal row counts")
    # scipy mixes the cosine and sine formulas, so tiny angles stay accurate
    angles = sla.subspace_angles(U, V)
    return np.clip(np.sort(angles), 0.0, np.pi / 2)
