"""MAXVAR generalized CCA over the per-BS views.

The shared latent ``G`` is the top eigenspace of the sum of the views'
row-space projectors. The eigenproblem is solved through the SVD of the
stacked projector factors, which never forms the ``N x N`` aggregate.
"""

import itertools
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .airlink import ViewSet, stack_real
from .errors import DegenerateComponentError, DimensionError, InvalidInputError
from .numerics import default_ridge, fix_signs, rank_cutoff, row_space_factor

TIE_TOL = 1e-6
RHO_THRESHOLD = 0.5
RANK_TOL = 1e-8


@dataclass
class GccaSolution:
    G: np.ndarray
    Q: List[np.ndarray]
    eigenvalues: np.ndarray
    objective: float
    rho_pairs: Optional[np.ndarray] = None
    rho_avg: Optional[np.ndarray] = None
    pairs: list = field(default_factory=list)
    bs_index: Optional[List[int]] = None

    @property
    def Kc(self):
        return self.G.shape[1]

    def spectral_gap(self, k=None):
        k = self.Kc if k is None else k
        if k < 1 or k >= self.eigenvalues.size:
            return float("nan")
        return float(self.eigenvalues[k - 1] - self.eigenvalues[k])


def _as_views(views):
    if isinstance(views, ViewSet):
        return list(views.views), list(views.bs_index)
    views = [np.asarray(v, dtype=float) for v in views]
    return views, list(range(len(views)))


def _check_columns(views):
    if not views:
        raise InvalidInputError("need at least one view")
    N = views[0].shape[1]
    if any(v.ndim != 2 or v.shape[1] != N for v in views):
        raise InvalidInputError("all views must have the same number of columns")
    return N


def _ridges(views, ridge):
    if ridge is None or isinstance(ridge, str):
        return [ridge] * len(views)
    if np.isscalar(ridge):
        return [float(ridge)] * len(views)
    return [None if r is None else float(r) for r in ridge]


def _gram_inverse_weights(Y, r, view):
    """SVD of ``Y`` with factor weights and ``(Y Y^T + r I)^+`` weights."""
    u, s, vt = np.linalg.svd(Y, full_matrices=False)
    if r == "scaled":
        r = default_ridge(Y)
    if r is None:
        keep = s > rank_cutoff(s, Y.shape)
        fw = keep.astype(float)
        qw = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    else:
        if r == 0:
            row_space_factor(Y, ridge=0.0, view=view)  # raises when rank deficient
        fw = s / np.sqrt(s * s + r)
        qw = s / (s * s + r)
    return u, s, vt, fw, qw


def build_aggregate(views, ridge=None):
    """Sum of per-view (ridged) row-space projectors, ``N x N``."""
    views, _ = _as_views(views)
    N = _check_columns(views)
    A = np.zeros((N, N))
    for ell, (Y, r) in enumerate(zip(views, _ridges(views, ridge))):
        B = row_space_factor(Y, ridge=r, view=ell)
        A += B.T @ B
    return 0.5 * (A + A.T)


def maxvar(views, Kc, ridge=None):
    """Solve MAXVAR GCCA for a ``Kc``-dimensional shared component.

    Parameters
    ----------
    views : ViewSet or list of ndarray
        Real matrices ``2M_l x N`` with a common column count.
    Kc : int
    ridge : float, list of float, "scaled" or None
        Tikhonov term added to each view's Gram matrix. ``None`` uses the
        Gram pseudo-inverse so rank-deficient views still work.

    Returns
    -------
    GccaSolution
        ``G`` has orthonormal columns; ``Q[l]`` maps view ``l`` onto it.
        Pairwise and average correlation coefficients are filled in.
    """
    Ys, bs_index = _as_views(views)
    N = _check_columns(Ys)
    if Kc < 1:
        raise DimensionError("Kc must be at least 1")
    ridges = _ridges(Ys, ridge)
    factors, svds = [], []
    for ell, (Y, r) in enumerate(zip(Ys, ridges)):
        if Y.shape[0] > N:
            raise InvalidInputError(f"view {ell} has more rows than samples")
        u, s, vt, fw, qw = _gram_inverse_weights(Y, r, ell)
        rank = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
        if Kc > rank:
            raise DimensionError(f"Kc={Kc} exceeds the rank {rank} of view {ell}")
        factors.append(fw[:, None] * vt)
        svds.append((u, vt, qw))
    stacked = np.vstack(factors)
    _, sv, vt = np.linalg.svd(stacked, full_matrices=False)
    eigenvalues = sv * sv
    G = fix_signs(vt[:Kc].T)
    if eigenvalues.size > Kc and eigenvalues[Kc - 1] - eigenvalues[Kc] < TIE_TOL:
        warnings.warn(
            f"eigenvalues {Kc} and {Kc + 1} are tied within {TIE_TOL:g}; keeping Kc={Kc}",
            stacklevel=2,
        )
    Q, objective = [], 0.0
    for Y, (u, vt_l, qw) in zip(Ys, svds):
        Ql = u @ (qw[:, None] * (vt_l @ G))
        Q.append(Ql)
        objective += float(np.sum((Y.T @ Ql - G) ** 2))
    sol = GccaSolution(G=G, Q=Q, eigenvalues=eigenvalues, objective=objective, bs_index=bs_index)
    sol.rho_pairs, sol.rho_avg = canonical_correlations(sol, Ys)
    sol.pairs = list(itertools.combinations(range(len(Ys)), 2))
    return sol


def canonical_correlations(solution, views):
    """Pairwise and mean correlation of the per-view canonical components.

    Returns
    -------
    rho_pairs : ndarray, shape (L(L-1)/2, Kc)
        Rows follow ``itertools.combinations(range(L), 2)``.
    rho_avg : ndarray, shape (Kc,)
    """
    Ys, _ = _as_views(views)
    Z = []
    for ell, (Y, Ql) in enumerate(zip(Ys, solution.Q)):
        z = Y.T @ Ql
        norms = np.linalg.norm(z, axis=0)
        if np.any(norms <= 1e-300):
            bad = int(np.argmin(norms))
            raise DegenerateComponentError(
                f"component {bad} of view {ell} projects to zero"
            )
        Z.append(z / norms)
    pairs = list(itertools.combinations(range(len(Ys)), 2))
    if not pairs:
        return np.zeros((0, solution.Kc)), np.full(solution.Kc, np.nan)
    rho_pairs = np.array([np.sum(Z[a] * Z[b], axis=0) for a, b in pairs])
    rho_pairs = np.clip(rho_pairs, -1.0, 1.0)
    return rho_pairs, rho_pairs.mean(axis=0)


def estimate_common_dim(rho_avg, rho_th=RHO_THRESHOLD):
    rho = np.sort(np.asarray(rho_avg, dtype=float))[::-1]
    return int(np.sum(rho > rho_th))


@dataclass
class IdentifiabilityReport:
    W_ranks: List[int]
    W_columns: List[int]
    V_rank: int
    V_columns: int

    @property
    def W_full_rank(self):
        return all(r == c for r, c in zip(self.W_ranks, self.W_columns))

    @property
    def V_full_rank(self):
        return self.V_rank == self.V_columns

    @property
    def holds(self):
        return self.W_full_rank and self.V_full_rank


def numerical_rank(A, tol=RANK_TOL):
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def block_V(Xc, Xp):
    """Stack ``[Xp1, -Xc, Xp_j]`` block rows for ``j = 2..L``."""
    L = len(Xp)
    N = Xc.shape[0]
    widths = [Xp[0].shape[1]] + [Xc.shape[1] + Xp[j].shape[1] for j in range(1, L)]
    V = np.zeros(((L - 1) * N, sum(widths)))
    offsets = np.concatenate([[0], np.cumsum(widths)])
    for j in range(1, L):
        rows = slice((j - 1) * N, j * N)
        V[rows, : widths[0]] = Xp[0]
        c0 = offsets[j]
        V[rows, c0: c0 + Xc.shape[1]] = -Xc
        V[rows, c0 + Xc.shape[1]: offsets[j + 1]] = Xp[j]
    return V


def check_identifiability(frames, channels, partition=None):
    """Numerical ranks of the per-view ``W_l`` and the stacked ``V`` matrix.

    ``partition`` optionally overrides the user split as
    ``(common_users, [private_users_of_bs_l, ...])``.
    """
    if partition is None:
        common = channels.edge_users
        private = [channels.private_users(ell) for ell in range(channels.L)]
    else:
        common, private = partition
        common = np.asarray(common, dtype=int)
        private = [np.asarray(p, dtype=int) for p in private]
    X = frames.X
    W_ranks, W_cols = [], []
    for ell, H in enumerate(channels.H):
        Hb = stack_real(H)
        W = np.hstack([Hb[:, common], Hb[:, private[ell]]])
        W_ranks.append(numerical_rank(W))
        W_cols.append(W.shape[1])
    V = block_V(X[:, common], [X[:, p] for p in private])
    return IdentifiabilityReport(W_ranks, W_cols, numerical_rank(V), V.shape[1])


@dataclass
class EigSnrDiagnostic:
    eigenvalues: np.ndarray
    eta_sorted: np.ndarray
    user_order: np.ndarray
    user_gap: np.ndarray
    spectral_gap: float


def effective_snr(channels, bs_index=None, domain="real"):
    """Predicted eigenvalue per user: ``sum_l g/(g+1)`` over the given BSs.

    ``domain="real"`` doubles each SNR since stacking splits the complex
    noise evenly across the real and imaginary rows while the BPSK signal
    keeps its full energy in the real-stacked space.
    """
    if channels.Gamma is None:
        raise InvalidInputError("channel set has no SNR table; call snr_table first")
    gamma = channels.Gamma if bs_index is None else channels.Gamma[:, bs_index]
    if domain == "real":
        gamma = 2.0 * gamma
    elif domain != "complex":
        raise InvalidInputError(f"unknown domain {domain!r}")
    return np.sum(gamma / (gamma + 1.0), axis=1)


def eig_snr_diagnostic(solution, channels, domain="real"):
    """Pair the top ``Ks`` eigenvalues with the sorted effective SNRs."""
    eta = effective_snr(channels, solution.bs_index, domain)
    order = np.argsort(-eta, kind="stable")
    Ks = eta.size
    lam = np.zeros(Ks)
    n = min(Ks, solution.eigenvalues.size)
    lam[:n] = solution.eigenvalues[:n]
    gap = np.empty(Ks)
    gap[order] = np.abs(lam - eta[order])
    return EigSnrDiagnostic(
        eigenvalues=lam,
        eta_sorted=eta[order],
        user_order=order,
        user_gap=gap,
        spectral_gap=solution.spectral_gap(),
    )
