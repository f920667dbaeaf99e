"""Seeded Monte Carlo driver for the edge-user detection experiments.

All randomness of a trial derives from ``(master_seed, trial_index)``, so
results do not depend on scheduling or on the worker count.
"""

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import airlink, detectors, gcca, racma, scenario
from .detectors import DetectionReport
from .errors import ConfigurationError, EdgeviewError

METHODS = (
    "gcca3",
    "gcca_all",
    "cca2",
    "zf",
    "mmse",
    "zf_sic_racma",
    "mmse_sic_racma",
    "zf_sic_racma_perfect",
    "mmse_sic_racma_perfect",
)
SWEEP_PARAMS = ("edge_user_x", "target_snr_dB", "scatter_fraction", "K_per_cell")
CSV_HEADER = ["sweep_param", "sweep_value", "method", "ber_mean", "ber_stderr", "trials", "runtime_ms_mean"]
FAILED_BER = 0.5


@dataclass
class ExperimentSpec:
    base: scenario.ScenarioConfig
    sweep_param: Optional[str] = None
    sweep_values: Sequence[float] = ()
    methods: Sequence[str] = ("gcca3",)
    trials: int = 100
    master_seed: Optional[int] = None
    estimate_kc: bool = False
    name: str = ""

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError("need at least one trial")
        if self.sweep_param is not None and self.sweep_param not in SWEEP_PARAMS:
            raise ConfigurationError(f"unknown sweep parameter {self.sweep_param!r}")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigurationError(f"unknown methods: {sorted(unknown)}")
        if self.master_seed is None:
            self.master_seed = self.base.seed

    def configs(self):
        """``(sweep_value, config)`` pairs; a single pair when not sweeping."""
        if self.sweep_param is None:
            return [(None, self.base)]
        return [(v, apply_sweep(self.base, self.sweep_param, v)) for v in self.sweep_values]


@dataclass
class ResultRow:
    sweep_param: str
    sweep_value: Optional[float]
    method: str
    ber_mean: float
    ber_stderr: float
    trials: int
    runtime_ms_mean: float


def apply_sweep(config, param, value):
    if param == "edge_user_x":
        return config.replace(edge_x_m=float(value))
    if param == "target_snr_dB":
        return config.replace(target_snr_dB=float(value))
    if param == "scatter_fraction":
        return config.replace(scatter_fraction=float(value))
    if param == "K_per_cell":
        return config.replace(K=[int(value)] * config.L)
    raise ConfigurationError(f"unknown sweep parameter {param!r}")


# ------------------------------------------------------------------ a trial

@dataclass
class TrialData:
    config: scenario.ScenarioConfig
    trial_index: int
    placements: list
    channels: scenario.ChannelSet
    frames: airlink.FrameSet
    views: airlink.ViewSet
    sigma2: float
    pilots: np.ndarray
    pilot_rx: List[np.ndarray]
    estimates: List[detectors.ChannelEstimate] = field(default_factory=list)


def trial_streams(seed, trial_index, n=5):
    ss = np.random.SeedSequence([int(seed), int(trial_index)])
    return [np.random.default_rng(s) for s in ss.spawn(n)]


def calibration_sigma2(config):
    """Deterministic noise level for a swept user at ``(calibration_x_m, 0)``."""
    bs = scenario.bs_positions(config)
    user = np.array([config.calibration_x_m, 0.0])
    dh = config.h_bs_m - config.h_ut_m
    alpha = []
    for pos in bs:
        d2d = max(float(np.linalg.norm(user - pos)), scenario.MIN_D2D_M)
        pl = scenario.path_loss_dB(math.hypot(d2d, dh), False, config)
        alpha.append(10.0 ** ((config.tx_power_dBm - pl) / 10.0))
    alpha = np.sort(alpha)[::-1][: airlink.ADJACENT_BS]
    return airlink.noise_for_power(config.N * float(np.mean(alpha)), config.target_snr_dB)


def noise_and_channels(config, channels):
    """Pick ``sigma2`` per the config's SNR mode; may rescale edge users."""
    if config.noise_ref_snr_dB is not None:
        sigma2 = airlink.calibrate_noise(channels, config.noise_ref_snr_dB)
        shift = config.target_snr_dB - config.noise_ref_snr_dB
        channels = scenario.snr_table(channels, sigma2)
        if shift != 0 and channels.Kc:
            channels = channels.scale_users(channels.edge_users, shift)
        return sigma2, channels
    if config.calibration_x_m is not None:
        sigma2 = calibration_sigma2(config)
    else:
        sigma2 = airlink.calibrate_noise(channels, config.target_snr_dB)
    return sigma2, scenario.snr_table(channels, sigma2)


def prepare_trial(config, trial_index, seed=None, intercell=True):
    seed = config.seed if seed is None else seed
    r_place, r_chan, r_frame, r_noise, r_pilot = trial_streams(seed, trial_index)
    placements = scenario.place_users(config, r_place)
    channels = scenario.draw_channels(placements, config, r_chan)
    sigma2, channels = noise_and_channels(config, channels)
    frames = airlink.generate_frames(config, r_frame)
    views = airlink.synthesize_rx(channels, frames, sigma2, r_noise, intercell=intercell)
    pilots = detectors.make_pilot_book(config.pilot_len, channels.Ks)
    pilot_rx = airlink.synthesize_pilots(channels, pilots, sigma2, r_pilot, config.N)
    estimates = [
        detectors.estimate_channels_ls(Yp, pilots, H) for Yp, H in zip(pilot_rx, channels.H)
    ]
    return TrialData(config, trial_index, placements, channels, frames, views,
                     sigma2, pilots, pilot_rx, estimates)


def rank_bs(channels, count=None):
    """BS indices by mean edge-user gain, strongest first."""
    edge = channels.edge_users
    score = channels.alpha[:, edge].mean(axis=1)
    order = np.argsort(-score, kind="stable")
    return list(order if count is None else order[:count])


def _edge_preambles(trial):
    return {int(k): trial.frames.preambles[int(k)] for k in trial.channels.edge_users}


def _gcca_method(trial, bs, estimate_kc):
    ch, fr = trial.channels, trial.frames
    views = trial.views.subset(sorted(bs))
    Kc = ch.Kc
    meta = {"bs": [int(b) for b in sorted(bs)]}
    if estimate_kc:
        full = min(v.shape[0] for v in views.views)
        sol = gcca.maxvar(views, full)
        Kc = gcca.estimate_common_dim(sol.rho_avg)
        meta["kc_estimate"] = Kc
        if Kc == 0:
            raise EdgeviewError("no component passed the correlation threshold")
        G = sol.G[:, :Kc]
    else:
        sol = gcca.maxvar(views, Kc)
        G = sol.G
    meta["rho_avg"] = sol.rho_avg[:Kc]
    sep = racma.resolve_ambiguity(racma.solve_mixture(G, Kc), _edge_preambles(trial))
    report = DetectionReport(method="", metadata=meta)
    return detectors.score_separation(report, sep, _edge_preambles(trial), fr.X, fr.preamble_len)


def _linear_method(trial, mode):
    ch, fr = trial.channels, trial.frames
    P = fr.preamble_len
    edge = ch.edge_users
    decisions = np.ones((fr.N - P, edge.size))
    for j, e in enumerate(edge):
        b = int(np.argmax(ch.alpha[:, e]))
        users = np.concatenate([ch.private_users(b), [e]]).astype(int)
        H_hat = trial.estimates[b].H_hat[:, users]
        Y = trial.views.complex_views[b]
        if mode == "zf":
            d = detectors.zf_detect(Y, H_hat)
        else:
            d = detectors.mmse_detect(Y, H_hat, trial.sigma2, fr.N)
        decisions[:, j] = d[P:, -1]
    ber = detectors.bit_errors(decisions, fr.X[P:, edge])
    return DetectionReport(method="", user_ids=[int(e) for e in edge], decisions=decisions, ber=ber)


def _sic_method(trial, mode, perfect):
    ch, fr = trial.channels, trial.frames
    bs = rank_bs(ch, trial.config.sic_bs_count)
    residuals = []
    for b in bs:
        own = ch.private_users(b)
        H = ch.H[b] if perfect else trial.estimates[b].H_hat
        _, res = detectors.sic_detect(trial.views.complex_views[b], H[:, own], trial.sigma2, mode, fr.N)
        residuals.append(res)
    report = detectors.residual_racma(
        residuals, ch.Kc, _edge_preambles(trial), fr.X, fr.preamble_len
    )
    report.metadata["bs"] = [int(b) for b in bs]
    return report


def run_method(trial, method, estimate_kc=False):
    ch = trial.channels
    if method == "gcca3":
        return _gcca_method(trial, rank_bs(ch, 3), estimate_kc)
    if method == "cca2":
        return _gcca_method(trial, rank_bs(ch, 2), estimate_kc)
    if method == "gcca_all":
        return _gcca_method(trial, rank_bs(ch), estimate_kc)
    if method in ("zf", "mmse"):
        return _linear_method(trial, method)
    mode = "zf" if method.startswith("zf") else "mmse"
    return _sic_method(trial, mode, method.endswith("_perfect"))


def run_trial(config, methods, trial_index, seed=None, estimate_kc=False):
    """Run every method on one seeded realization.

    A method that raises is recorded with ``error`` set and BER 0.5 for
    every edge user; the other methods are unaffected.
    """
    methods = list(methods)
    if not methods:
        return []
    seed = config.seed if seed is None else seed
    trial = prepare_trial(config, trial_index, seed)
    edge = [int(k) for k in trial.channels.edge_users]
    reports = []
    for method in methods:
        start = time.perf_counter()
        try:
            report = run_method(trial, method, estimate_kc)
        except (EdgeviewError, np.linalg.LinAlgError) as exc:
            report = DetectionReport(
                method=method, user_ids=edge, ber=np.full(len(edge), FAILED_BER),
                error=f"{type(exc).__name__}: {exc}",
            )
        report.method = method
        report.metadata.update(
            seed=int(seed), trial_index=int(trial_index), config_hash=config.digest(),
            sigma2=trial.sigma2, runtime_ms=1000.0 * (time.perf_counter() - start),
        )
        reports.append(report)
    return reports


# ---------------------------------------------------------- Monte Carlo

def worker_count():
    try:
        return max(1, int(os.environ.get("EDGEVIEW_WORKERS", "1")))
    except ValueError:
        return 1


def _trial_task(args):
    config, methods, trial_index, seed, estimate_kc = args
    reports = run_trial(config, methods, trial_index, seed, estimate_kc)
    return [(r.mean_ber, r.metadata["runtime_ms"], r.error) for r in reports]


def _map_trials(tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [_trial_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def aggregate(method, param, value, bers, runtimes):
    bers = np.asarray(bers, dtype=float)
    T = bers.size
    stderr = float(np.std(bers, ddof=1) / math.sqrt(T)) if T > 1 else 0.0
    return ResultRow(param or "none", value, method, float(np.mean(bers)), stderr, T,
                     float(np.mean(runtimes)))


def run_monte_carlo(spec, workers=None):
    workers = worker_count() if workers is None else workers
    rows = []
    for value, config in spec.configs():
        tasks = [(config, tuple(spec.methods), t, spec.master_seed, spec.estimate_kc)
                 for t in range(spec.trials)]
        results = _map_trials(tasks, workers)
        for m, method in enumerate(spec.methods):
            bers = [res[m][0] for res in results]
            times = [res[m][1] for res in results]
            rows.append(aggregate(method, spec.sweep_param, value, bers, times))
    return rows


def _require(spec, param):
    if spec.sweep_param != param:
        raise ConfigurationError(f"expected a {param} sweep, got {spec.sweep_param!r}")


def sweep_location(spec, workers=None):
    _require(spec, "edge_user_x")
    if spec.base.layout != "quad":
        raise ConfigurationError("the location sweep needs the 4-cell layout")
    return run_monte_carlo(spec, workers)


def sweep_snr(spec, workers=None):
    _require(spec, "target_snr_dB")
    return run_monte_carlo(spec, workers)


def sweep_density(spec, workers=None):
    if spec.sweep_param not in ("scatter_fraction", "K_per_cell"):
        raise ConfigurationError("density sweeps vary scatter_fraction or K_per_cell")
    return run_monte_carlo(spec, workers)


def correlation_profile(config, trials, seed=None, components=None):
    """Per-trial average correlation of every extractable component.

    Returns an array of shape ``(trials, components)`` with rows sorted
    descending.
    """
    seed = config.seed if seed is None else seed
    if components is None:
        components = min(2 * m for m in config.M)
    out = np.zeros((trials, components))
    for t in range(trials):
        trial = prepare_trial(config, t, seed)
        sol = gcca.maxvar(trial.views, components)
        out[t] = np.sort(sol.rho_avg)[::-1]
    return out


# ------------------------------------------------------------------ output

def _fmt(x):
    if x is None:
        return ""
    return repr(float(x))


def rows_to_csv(rows, timing=False):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([
            r.sweep_param, _fmt(r.sweep_value), r.method, _fmt(r.ber_mean),
            _fmt(r.ber_stderr), r.trials, _fmt(r.runtime_ms_mean) if timing else "",
        ])
    return buf.getvalue()


def write_csv(rows, path, timing=False):
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows, timing))


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ----------------------------------------------------------------- presets

SNR_METHODS = ("gcca3", "cca2", "zf", "mmse", "zf_sic_racma", "mmse_sic_racma",
               "zf_sic_racma_perfect", "mmse_sic_racma_perfect")
LOCATION_METHODS = ("gcca3", "gcca_all", "cca2", "zf_sic_racma_perfect")
SNR_GRID = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)


def sweep_preset(name, trials=100, seed=0):
    """Experiment specs reproducing one figure; keyed by output file stem."""
    if name == "fig4":
        base = scenario.preset("fig2-4bs").replace(seed=seed)
        R = base.cell_radius_m
        xs = [float(x) for x in np.linspace(-R, R, 11)]
        return {"fig4": ExperimentSpec(base, "edge_user_x", xs, LOCATION_METHODS, trials, seed)}
    if name == "fig5":
        base = scenario.preset("fig3-3bs").replace(noise_ref_snr_dB=5.0, seed=seed)
        return {"fig5": ExperimentSpec(base, "target_snr_dB", SNR_GRID, SNR_METHODS, trials, seed)}
    if name == "fig6":
        out = {}
        for d in (0.4, 0.7):
            base = scenario.preset("fig3-3bs").replace(noise_ref_snr_dB=5.0, scatter_fraction=d, seed=seed)
            out[f"fig6_d{d}"] = ExperimentSpec(base, "target_snr_dB", SNR_GRID, SNR_METHODS, trials, seed)
        return out
    if name == "fig7":
        base = scenario.preset("dense-k16").replace(seed=seed)
        return {"fig7": ExperimentSpec(base, "target_snr_dB", SNR_GRID, SNR_METHODS, trials, seed)}
    raise ConfigurationError(f"unknown sweep preset {name!r}")


def profile_csv(profiles):
    """``profiles`` maps scatter fraction to a ``(trials, components)`` array."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scatter_fraction", "component_index", "rho_avg_mean", "rho_avg_median", "trials"])
    for d, prof in profiles.items():
        for i in range(prof.shape[1]):
            writer.writerow([_fmt(d), i + 1, _fmt(prof[:, i].mean()), _fmt(np.median(prof[:, i])), prof.shape[0]])
    return buf.getvalue()
