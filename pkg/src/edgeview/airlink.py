"""Uplink synthesis: BPSK frames, noisy per-BS receptions, real stacking.

Noise convention: every entry of the complex noise matrix has variance
``sigma2 / N``, so each antenna collects total noise energy ``sigma2``
over one frame.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import CalibrationError, ConfigurationError, InvalidInputError

PREAMBLE_STREAM = 0x5052
ADJACENT_BS = 3


@dataclass
class FrameSet:
    """Transmitted ``N x Ks`` BPSK matrix plus the preamble registry."""

    X: np.ndarray
    preambles: Dict[int, np.ndarray]
    preamble_len: int

    @property
    def N(self):
        return self.X.shape[0]

    def payload(self):
        return self.X[self.preamble_len:]


@dataclass
class ViewSet:
    """Real-stacked received matrices, one per BS, with their complex sources."""

    views: List[np.ndarray]
    sigma2: float
    complex_views: List[np.ndarray] = field(default_factory=list)
    bs_index: Optional[List[int]] = None

    def __post_init__(self):
        if self.bs_index is None:
            self.bs_index = list(range(len(self.views)))

    @property
    def L(self):
        return len(self.views)

    @property
    def N(self):
        return self.views[0].shape[1]

    def subset(self, indices):
        indices = list(indices)
        return ViewSet(
            views=[self.views[i] for i in indices],
            sigma2=self.sigma2,
            complex_views=[self.complex_views[i] for i in indices] if self.complex_views else [],
            bs_index=[self.bs_index[i] for i in indices],
        )


def user_preamble(seed, user_id, length):
    """Fixed +-1 preamble of one user, independent of the trial stream."""
    rng = np.random.default_rng([int(seed), PREAMBLE_STREAM, int(user_id)])
    return rng.choice([-1.0, 1.0], size=length)


def generate_frames(config, rng):
    Ks, N, P = config.Ks, config.N, config.preamble_len
    if N <= Ks + P:
        raise ConfigurationError("frame length must exceed users plus preamble")
    X = rng.choice([-1.0, 1.0], size=(N, Ks))
    preambles = {}
    for k in range(Ks):
        pre = user_preamble(config.seed, k, P)
        X[:P, k] = pre
        preambles[k] = pre
    return FrameSet(X=X, preambles=preambles, preamble_len=P)


def adjacent_bs(alpha_column, count=ADJACENT_BS):
    """Indices of the ``count`` BSs with the largest mean gain to one user."""
    count = min(count, alpha_column.size)
    return np.argsort(-alpha_column, kind="stable")[:count]


def edge_power(channels, users=None):
    """Mean frame energy of edge users, averaged over their adjacent BSs."""
    if users is None:
        users = channels.edge_users
    users = np.asarray(users, dtype=int)
    if users.size == 0:
        raise CalibrationError("noise calibration needs at least one edge user")
    per_user = [
        channels.alpha[adjacent_bs(channels.alpha[:, k]), k].mean() for k in users
    ]
    return channels.frame_len * float(np.mean(per_user))


def noise_for_power(p_e, target_snr_dB):
    return p_e / 10.0 ** (target_snr_dB / 10.0)


def calibrate_noise(channels, target_snr_dB):
    """``sigma2`` putting edge users at ``target_snr_dB`` on their adjacent BSs."""
    return noise_for_power(edge_power(channels), target_snr_dB)


def stack_real(Y):
    Y = np.asarray(Y)
    return np.vstack([Y.real, Y.imag]).astype(float)


def unstack_real(Ybar):
    half = Ybar.shape[0] // 2
    return Ybar[:half] + 1j * Ybar[half:]


def complex_noise(shape, variance, rng):
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def link_mask(channels, ell, intercell=True):
    """Users heard at BS ``ell``; without inter-cell terms other cells' private users drop."""
    if intercell:
        return np.ones(channels.Ks, dtype=bool)
    return (channels.roles == "edge") | (channels.serving == ell)


def synthesize_rx(channels, frames, sigma2, rng, intercell=True):
    if sigma2 < 0:
        raise InvalidInputError("sigma2 must be non-negative")
    X = frames.X
    if X.shape[1] != channels.Ks:
        raise InvalidInputError("frame and channel user counts differ")
    N = X.shape[0]
    complex_views = []
    for ell, H in enumerate(channels.H):
        mask = link_mask(channels, ell, intercell)
        Y = H[:, mask] @ X[:, mask].T
        if sigma2 > 0:
            Y = Y + complex_noise(Y.shape, sigma2 / N, rng)
        complex_views.append(Y)
    return ViewSet(
        views=[stack_real(Y) for Y in complex_views],
        sigma2=float(sigma2),
        complex_views=complex_views,
    )


def view_terms(channels, frames, ell):
    """Noiseless private, common and inter-cell parts of view ``ell`` (real stacked)."""
    H = stack_real(channels.H[ell])
    X = frames.X
    own = channels.private_users(ell)
    common = channels.edge_users
    other = np.flatnonzero((channels.roles == "center") & (channels.serving != ell))
    return {
        "private": H[:, own] @ X[:, own].T,
        "common": H[:, common] @ X[:, common].T,
        "intercell": H[:, other] @ X[:, other].T,
    }


def synthesize_pilots(channels, pilots, sigma2, rng, frame_len=None):
    """Per-BS reception of the pilot block ``pilots`` (``Np x Ks``).

    Noise per entry keeps the data-frame convention ``sigma2 / N``.
    """
    N = frame_len or channels.frame_len
    out = []
    for H in channels.H:
        Yp = H @ pilots.T
        if sigma2 > 0:
            Yp = Yp + complex_noise(Yp.shape, sigma2 / N, rng)
        out.append(Yp)
    return out
