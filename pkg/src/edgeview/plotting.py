"""Static SVG plots of result CSVs."""

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

BER_FLOOR = 1e-5


def plot_results(rows, out_path, title=None):
    """BER per method against the sweep value on a log axis.

    ``rows`` are dicts as read back from the results CSV.
    """
    curves = defaultdict(list)
    param = rows[0]["sweep_param"] if rows else ""
    for r in rows:
        x = float(r["sweep_value"]) if r["sweep_value"] else 0.0
        curves[r["method"]].append((x, float(r["ber_mean"]), float(r["ber_stderr"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for method, pts in curves.items():
        pts.sort()
        xs = [p[0] for p in pts]
        ys = [max(p[1], BER_FLOOR) for p in pts]
        err = [p[2] for p in pts]
        ax.errorbar(xs, ys, yerr=err, marker="o", ms=3, capsize=2, label=method)
    ax.set_yscale("log")
    ax.set_xlabel(param)
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_profile(profiles, out_path):
    """Mean average-correlation per component, one line per scatter fraction."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for d, prof in profiles.items():
        mean = prof.mean(axis=0)
        ax.plot(range(1, mean.size + 1), mean, marker="o", ms=3, label=f"d={d}R")
    ax.axhline(0.5, color="gray", ls="--", lw=0.8)
    ax.set_xlabel("component")
    ax.set_ylabel("average correlation")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
