"""Physical world generation: cell layout, user drops, UMa path loss, channels.

Path loss and LOS probability follow the 3GPP TR 38.901 urban macro (UMa)
tables. Channels are a sum of ``Np`` plane waves impinging on a
half-wavelength uniform linear array.
"""

import dataclasses
import hashlib
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ConfigurationError, InvalidInputError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

log = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299792458.0
MIN_D2D_M = 10.0
LAYOUTS = ("tri", "quad", "cluster")


@dataclass
class ScenarioConfig:
    """Full description of one simulated deployment.

    ``M``, ``K`` and ``Ke`` accept a scalar, which is broadcast to all
    ``L`` cells. ``K`` counts every user a BS serves, edge users included.

    SNR handling: noise is calibrated so that edge users see
    ``target_snr_dB`` on average over their adjacent BSs. When
    ``noise_ref_snr_dB`` is set instead, noise is calibrated to that value
    for edge users at full power and the edge users' transmit power is
    lowered (or raised) by ``noise_ref_snr_dB - target_snr_dB`` dB; this is
    how SNR sweeps leave the cell-centre users untouched.
    """

    L: int = 3
    cell_radius_m: float = 600.0
    M: List[int] = field(default_factory=lambda: 12)
    K: List[int] = field(default_factory=lambda: 8)
    Ke: List[int] = field(default_factory=lambda: [1, 1, 0])
    scatter_fraction: float = 0.4
    edge_band: List[float] = field(default_factory=lambda: [0.95, 1.05])
    tx_power_dBm: float = 25.0
    carrier_GHz: float = 2.0
    N: int = 800
    Np: int = 6
    preamble_len: int = 16
    seed: int = 0
    pathloss_exponent: float = 3.908
    layout: str = "tri"
    target_snr_dB: float = 3.0
    noise_ref_snr_dB: Optional[float] = None
    edge_x_m: Optional[float] = None
    calibration_x_m: Optional[float] = None
    h_bs_m: float = 25.0
    h_ut_m: float = 1.5
    shadowing: bool = False
    pilot_len: int = 256
    sic_bs_count: int = 3
    name: str = "custom"

    def __post_init__(self):
        for key in ("M", "K", "Ke"):
            value = getattr(self, key)
            if np.isscalar(value):
                value = [int(value)] * self.L
            setattr(self, key, [int(v) for v in value])
        self.edge_band = [float(v) for v in self.edge_band]
        self.validate()

    def validate(self):
        if self.L < 2:
            raise ConfigurationError("need at least two cells")
        for key in ("M", "K", "Ke"):
            if len(getattr(self, key)) != self.L:
                raise ConfigurationError(f"{key} must have one entry per cell")
        if self.layout not in LAYOUTS:
            raise ConfigurationError(f"unknown layout {self.layout!r}")
        if self.layout == "tri" and self.L != 3:
            raise ConfigurationError("layout 'tri' has exactly 3 cells")
        if self.layout == "quad" and self.L != 4:
            raise ConfigurationError("layout 'quad' has exactly 4 cells")
        if self.layout == "cluster" and self.L > 7:
            raise ConfigurationError("layout 'cluster' supports at most 7 cells")
        if any(m < 1 for m in self.M):
            raise ConfigurationError("every BS needs at least one antenna")
        for k, ke in zip(self.K, self.Ke):
            if ke < 0 or ke >= k:
                raise ConfigurationError("need 0 <= Ke < K for every cell")
        if self.N <= self.Ks:
            raise ConfigurationError("frame length N must exceed the total user count")
        if self.N <= self.Ks + self.preamble_len:
            raise ConfigurationError("frame too short for users plus preamble")
        if not 0 < self.scatter_fraction <= 1:
            raise ConfigurationError("scatter_fraction must lie in (0, 1]")
        lo, hi = self.edge_band
        if not 0 < lo < hi:
            raise ConfigurationError(f"edge band {self.edge_band} is empty")
        if self.Np < 1:
            raise ConfigurationError("need at least one path per link")
        if self.edge_x_m is not None and self.layout != "quad":
            raise ConfigurationError("edge_x_m is only defined for the 'quad' layout")
        if self.edge_x_m is not None and self.Kc < 1:
            raise ConfigurationError("edge_x_m needs at least one edge user")
        for ell in range(self.L):
            need = self.Kc + self.K[ell] - self.Ke[ell]
            if 2 * self.M[ell] < need:
                warnings.warn(
                    f"BS {ell}: 2M={2 * self.M[ell]} < Kc + K - Ke = {need}; "
                    "the per-view identifiability condition cannot hold",
                    stacklevel=3,
                )

    @property
    def Ks(self):
        return int(sum(self.K))

    @property
    def Kc(self):
        return int(sum(self.Ke))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            out[f.name] = list(value) if isinstance(value, list) else value
        return out

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_toml(self):
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_toml(cls, text):
        return cls.from_dict(tomllib.loads(text))

    def digest(self):
        return hashlib.sha256(self.to_toml().encode()).hexdigest()[:16]


def load_config(path):
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    data.pop("experiment", None)
    return ScenarioConfig.from_dict(data)


def save_config(config, path):
    with open(path, "w") as fh:
        fh.write(config.to_toml())


def preset(name):
    """Named deployments used by the CLI and the experiment sweeps."""
    if name == "fig3-3bs":
        return ScenarioConfig(name=name)
    if name == "fig2-4bs":
        return ScenarioConfig(
            name=name, L=4, layout="quad", M=12, K=8, Ke=[1, 0, 0, 0],
            edge_x_m=-300.0, calibration_x_m=-300.0, sic_bs_count=1,
        )
    if name == "dense-k16":
        return ScenarioConfig(
            name=name, M=30, K=16, scatter_fraction=0.8, noise_ref_snr_dB=5.0,
            target_snr_dB=5.0,
        )
    raise ConfigurationError(f"unknown preset {name!r}")


# --------------------------------------------------------------- geometry

@dataclass
class UserPlacement:
    position: np.ndarray
    role: str
    serving_bs: int
    user_id: int


def bs_positions(config):
    R = config.cell_radius_m
    if config.layout == "tri":
        angles = np.deg2rad([90.0, 210.0, 330.0])
        return R * np.column_stack([np.cos(angles), np.sin(angles)])
    if config.layout == "quad":
        h = math.sqrt(3.0) / 2 * R
        return np.array([[0.0, h], [0.0, -h], [-1.5 * R, 0.0], [1.5 * R, 0.0]])
    ring = np.deg2rad(30.0 + 60.0 * np.arange(6))
    pts = np.vstack([[0.0, 0.0], math.sqrt(3.0) * R * np.column_stack([np.cos(ring), np.sin(ring)])])
    return pts[: config.L]


def _vertex_phase(layout):
    return math.pi / 6 if layout == "tri" else 0.0


def edge_points(config):
    """Candidate cell-edge anchor points per cell.

    For each cell these are its hexagon vertices shared by the largest
    number of cells in the layout, sorted by bearing from the BS.
    """
    R = config.cell_radius_m
    bs = bs_positions(config)
    phase = _vertex_phase(config.layout)
    angles = phase + np.deg2rad(60.0 * np.arange(6))
    offsets = R * np.column_stack([np.cos(angles), np.sin(angles)])
    out = []
    for ell in range(config.L):
        verts = bs[ell] + offsets
        dist = np.linalg.norm(verts[:, None, :] - bs[None, :, :], axis=2)
        shared = np.sum(np.abs(dist - R) < 1e-6 * R, axis=1)
        best = verts[shared == shared.max()]
        bearing = np.arctan2(best[:, 1] - bs[ell, 1], best[:, 0] - bs[ell, 0])
        out.append(best[np.argsort(bearing)])
    return out


def place_users(config, rng):
    """Drop users; edge users first, then private users grouped by BS."""
    R = config.cell_radius_m
    bs = bs_positions(config)
    anchors = edge_points(config)
    lo, hi = config.edge_band
    # disc around the anchor vertex keeps every adjacent BS inside [lo, hi] R
    edge_radius = 0.5 * (hi - lo) * R
    placements = []
    uid = 0
    for ell in range(config.L):
        for j in range(config.Ke[ell]):
            anchor = anchors[ell][j % len(anchors[ell])]
            rho = edge_radius * math.sqrt(rng.uniform())
            ang = rng.uniform(0.0, 2 * math.pi)
            pos = anchor + rho * np.array([math.cos(ang), math.sin(ang)])
            if uid == 0 and config.edge_x_m is not None:
                pos = np.array([float(config.edge_x_m), 0.0])
            placements.append(UserPlacement(pos, "edge", ell, uid))
            uid += 1
    radius = config.scatter_fraction * R
    for ell in range(config.L):
        for _ in range(config.K[ell] - config.Ke[ell]):
            rho = radius * math.sqrt(rng.uniform())
            ang = rng.uniform(0.0, 2 * math.pi)
            pos = bs[ell] + rho * np.array([math.cos(ang), math.sin(ang)])
            placements.append(UserPlacement(pos, "center", ell, uid))
            uid += 1
    return placements


# ---------------------------------------------------------------- 38.901 UMa

def los_probability(d2d_m):
    """UMa LOS probability for a user at ground height (h_UT <= 13 m)."""
    d = np.asarray(d2d_m, dtype=float)
    if np.any(d < 0):
        raise InvalidInputError("distance must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        p = 18.0 / d + np.exp(-d / 63.0) * (1.0 - 18.0 / d)
    p = np.where(d <= 18.0, 1.0, p)
    return float(p) if p.ndim == 0 else p


def breakpoint_distance(carrier_GHz, h_bs, h_ut, h_e=1.0):
    return 4.0 * (h_bs - h_e) * (h_ut - h_e) * carrier_GHz * 1e9 / SPEED_OF_LIGHT


def path_loss_dB(d3d_m, los, config=None, *, carrier_GHz=2.0, h_bs=25.0, h_ut=1.5):
    """UMa path loss in dB; ``d3d_m`` is BS-to-user distance in metres.

    Distances whose ground projection falls under 10 m are clamped to 10 m.
    """
    if config is not None:
        carrier_GHz, h_bs, h_ut = config.carrier_GHz, config.h_bs_m, config.h_ut_m
    d3d = float(d3d_m)
    if not d3d > 0:
        raise InvalidInputError("3-D distance must be positive")
    dh = h_bs - h_ut
    d2d = math.sqrt(max(d3d * d3d - dh * dh, 0.0))
    if d2d < MIN_D2D_M:
        log.warning("2-D distance %.2f m below the UMa validity floor; clamped to 10 m", d2d)
        d2d = MIN_D2D_M
        d3d = math.hypot(d2d, dh)
    fc = carrier_GHz
    dbp = breakpoint_distance(fc, h_bs, h_ut)
    if d2d <= dbp:
        pl_los = 28.0 + 22.0 * math.log10(d3d) + 20.0 * math.log10(fc)
    else:
        pl_los = (28.0 + 40.0 * math.log10(d3d) + 20.0 * math.log10(fc)
                  - 9.0 * math.log10(dbp * dbp + dh * dh))
    if los:
        return pl_los
    pl_nlos = 13.54 + 39.08 * math.log10(d3d) + 20.0 * math.log10(fc) - 0.6 * (h_ut - 1.5)
    return max(pl_los, pl_nlos)


def shadow_std_dB(los):
    return 4.0 if los else 6.0


def phase_transition_ratio(distance_m, noise_to_gain, exponent):
    """Closed-form ``d^-lam / (d^-lam + sigma2/c)`` power-law SNR ratio."""
    g = np.power(np.asarray(distance_m, dtype=float), -exponent)
    return g / (g + noise_to_gain)


# ----------------------------------------------------------------- channels

def array_response(phi, M):
    """Half-wavelength ULA steering vector ``exp(i pi m cos(phi))``."""
    return np.exp(1j * math.pi * np.arange(M) * math.cos(phi))


@dataclass
class ChannelSet:
    """Per-BS channel matrices with transmit power folded in.

    ``alpha[l, k]`` is the mean received power (mW) of user ``k`` at BS
    ``l``; ``H[l][:, k]`` is the realized channel. Received frame energy is
    ``N * |h|^2`` and the SNR tables compare it to the per-antenna frame
    noise energy ``sigma2``.
    """

    H: List[np.ndarray]
    alpha: np.ndarray
    los: np.ndarray
    roles: np.ndarray
    serving: np.ndarray
    frame_len: int
    sigma2: Optional[float] = None
    Gamma: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None

    @property
    def L(self):
        return len(self.H)

    @property
    def Ks(self):
        return self.H[0].shape[1]

    @property
    def edge_users(self):
        return np.flatnonzero(self.roles == "edge")

    @property
    def Kc(self):
        return int(np.sum(self.roles == "edge"))

    def private_users(self, ell):
        return np.flatnonzero((self.roles == "center") & (self.serving == ell))

    def rx_energy(self):
        """Realized received frame energy, shape ``(Ks, L)``."""
        return self.frame_len * np.stack([np.sum(np.abs(h) ** 2, axis=0) for h in self.H], axis=1)

    def scale_users(self, users, gain_dB):
        users = np.asarray(users, dtype=int)
        amp = 10.0 ** (gain_dB / 20.0)
        H = [h.copy() for h in self.H]
        for h in H:
            h[:, users] *= amp
        alpha = self.alpha.copy()
        alpha[:, users] *= amp * amp
        out = dataclasses.replace(self, H=H, alpha=alpha)
        return snr_table(out, self.sigma2) if self.sigma2 is not None else out


def draw_channels(placements, config, rng, sigma2=None):
    L = config.L
    Ks = len(placements)
    bs = bs_positions(config)
    dh = config.h_bs_m - config.h_ut_m
    alpha = np.zeros((L, Ks))
    los = np.zeros((L, Ks), dtype=bool)
    H = [np.zeros((config.M[ell], Ks), dtype=complex) for ell in range(L)]
    for ell in range(L):
        M = config.M[ell]
        for k, user in enumerate(placements):
            d2d = float(np.linalg.norm(user.position - bs[ell]))
            is_los = False
            if user.role == "center" and user.serving_bs == ell:
                is_los = bool(rng.uniform() < los_probability(d2d))
            los[ell, k] = is_los
            d3d = math.hypot(max(d2d, MIN_D2D_M), dh)
            pl = path_loss_dB(d3d, is_los, config)
            if config.shadowing:
                pl += shadow_std_dB(is_los) * rng.standard_normal()
            alpha[ell, k] = 10.0 ** ((config.tx_power_dBm - pl) / 10.0)
            phi = rng.uniform(-math.pi, math.pi, config.Np)
            steer = np.exp(1j * math.pi * np.outer(np.arange(M), np.cos(phi)))
            H[ell][:, k] = math.sqrt(alpha[ell, k] / config.Np / M) * steer.conj().sum(axis=1)
    channels = ChannelSet(
        H=H,
        alpha=alpha,
        los=los,
        roles=np.array([u.role for u in placements]),
        serving=np.array([u.serving_bs for u in placements]),
        frame_len=config.N,
    )
    if sigma2 is not None:
        channels = snr_table(channels, sigma2)
    return channels


def snr_table(channels, sigma2):
    """Attach received SNR ``Gamma``, ``r = g/(g+1)`` and ``eta = sum_l r``."""
    if not sigma2 > 0:
        raise InvalidInputError("sigma2 must be positive")
    gamma = channels.rx_energy() / sigma2
    r = gamma / (gamma + 1.0)
    return dataclasses.replace(
        channels, sigma2=float(sigma2), Gamma=gamma, r=r, eta=r.sum(axis=1)
    )
