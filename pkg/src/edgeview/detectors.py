"""Pilot-based baselines and the cancel-then-separate edge pipeline.

Decision matrices are laid out like the transmitted frame: one row per
symbol, one column per user.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.linalg as sla

from .airlink import stack_real
from .errors import DetectionError, InvalidInputError, PilotDesignError
from .racma import binarize, resolve_ambiguity, solve_mixture

RANK_TOL = 1e-10


@dataclass
class ChannelEstimate:
    H_hat: np.ndarray
    pilot_len: int
    mse: Optional[np.ndarray] = None


@dataclass
class DetectionReport:
    method: str
    user_ids: List[int] = field(default_factory=list)
    decisions: Optional[np.ndarray] = None
    ber: np.ndarray = field(default_factory=lambda: np.zeros(0))
    metadata: Dict[str, object] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def mean_ber(self):
        return float(np.mean(self.ber)) if self.ber.size else float("nan")


def make_pilot_book(pilot_len, n_users):
    """Orthogonal +-1 pilots, one column per user (Sylvester construction)."""
    if pilot_len < 1 or pilot_len & (pilot_len - 1):
        raise PilotDesignError(f"pilot length {pilot_len} is not a power of two")
    if n_users > pilot_len:
        raise PilotDesignError(f"{n_users} users do not fit {pilot_len} orthogonal pilots")
    return sla.hadamard(pilot_len).astype(float)[:, :n_users]


def estimate_channels_ls(Y_pilot, pilots, H_true=None):
    pilots = np.asarray(pilots, dtype=float)
    Np, K = pilots.shape
    if K > Np:
        raise PilotDesignError(f"{K} users need at least {K} pilot symbols, got {Np}")
    if not np.allclose(pilots.T @ pilots, Np * np.eye(K)):
        raise PilotDesignError("pilot columns are not mutually orthogonal")
    H_hat = np.asarray(Y_pilot) @ pilots / Np
    mse = None
    if H_true is not None:
        mse = np.mean(np.abs(H_hat - H_true) ** 2, axis=0)
    return ChannelEstimate(H_hat=H_hat, pilot_len=Np, mse=mse)


def _full_column_rank(H):
    if H.shape[1] == 0:
        return True
    s = np.linalg.svd(H, compute_uv=False)
    return s[0] > 0 and s[-1] > RANK_TOL * s[0] and H.shape[0] >= H.shape[1]


def zf_detect(Y, H_hat):
    if not _full_column_rank(H_hat):
        raise DetectionError("channel matrix is rank deficient; zero forcing undefined")
    return binarize(np.real(np.linalg.pinv(H_hat) @ Y)).T


def mmse_detect(Y, H_hat, sigma2, frame_len=None):
    """Linear MMSE with per-entry noise variance ``sigma2 / frame_len``."""
    N = Y.shape[1] if frame_len is None else frame_len
    K = H_hat.shape[1]
    Hh = H_hat.conj().T
    A = Hh @ H_hat + (sigma2 / N) * np.eye(K)
    return binarize(np.real(np.linalg.solve(A, Hh @ Y))).T


def sic_detect(Y, H_hat, sigma2, mode="mmse", frame_len=None):
    """Strongest-first cancellation of every column of ``H_hat``.

    Returns
    -------
    decisions : ndarray, shape (N, K)
    residual : ndarray
        ``Y`` with all re-encoded users subtracted.
    """
    if mode not in ("zf", "mmse"):
        raise InvalidInputError(f"unknown SIC mode {mode!r}")
    N = Y.shape[1] if frame_len is None else frame_len
    K = H_hat.shape[1]
    residual = np.array(Y, dtype=complex, copy=True)
    decisions = np.zeros((Y.shape[1], K))
    remaining = list(np.argsort(-np.linalg.norm(H_hat, axis=0), kind="stable"))
    while remaining:
        k = remaining[0]
        Hr = H_hat[:, remaining]
        if mode == "zf":
            x = zf_detect(residual, Hr)[:, 0]
        else:
            x = mmse_detect(residual, Hr, sigma2, N)[:, 0]
        decisions[:, k] = x
        residual -= np.outer(H_hat[:, k], x)
        remaining.pop(0)
    return decisions, residual


def bit_errors(decisions, truth):
    return np.mean(decisions != truth, axis=0)


def residual_racma(residuals, Kc, preambles, truth=None, payload_start=0, method="residual_racma"):
    """Separate the edge users from post-cancellation residuals.

    Parameters
    ----------
    residuals : list of complex ndarray
        One ``M_l x N`` residual per selected BS.
    Kc : int
    preambles : dict
        ``user_id -> preamble`` for the users to be recovered.
    truth : ndarray, optional
        ``N x Ks`` transmitted matrix; enables BER scoring.
    payload_start : int
        First symbol index scored.
    """
    report = DetectionReport(method=method)
    if Kc == 0:
        return report
    stacked = np.vstack([stack_real(R) for R in residuals])
    _, _, vt = np.linalg.svd(stacked, full_matrices=False)
    if vt.shape[0] < Kc:
        raise DetectionError("residual rank is below the number of edge users")
    sep = resolve_ambiguity(solve_mixture(vt[:Kc].T), preambles)
    return score_separation(report, sep, preambles, truth, payload_start)


def score_separation(report, sep, preambles, truth=None, payload_start=0):
    """Fill ``report`` from a resolved separation; unmatched users score 0.5."""
    users = list(preambles)
    N = sep.X_hat.shape[0]
    decisions = np.ones((N - payload_start, len(users)))
    matched = np.zeros(len(users), dtype=bool)
    for col, uid in sep.assignment.items():
        j = users.index(uid)
        decisions[:, j] = sep.X_hat[payload_start:, col]
        matched[j] = True
    report.user_ids = users
    report.decisions = decisions
    report.metadata["confidence"] = sep.confidence
    report.metadata["residual"] = sep.residual
    if truth is not None:
        ber = np.full(len(users), 0.5)
        if matched.any():
            ber[matched] = bit_errors(decisions[:, matched], truth[payload_start:, np.array(users)[matched]])
        report.ber = ber
    return report
