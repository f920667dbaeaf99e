"""Compiled versus NumPy-fallback timing for the two inner kernels.

Also times one full separation and one full trial under each backend, to
show how little of the end-to-end runtime the kernels account for.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from edgeview import _kernels_py

try:
    from edgeview import _kernels
except ImportError:
    _kernels = None


def jd_inputs(rng, n, m):
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    mats = np.stack([V @ np.diag(rng.standard_normal(n)) @ V.T for _ in range(m)])
    return mats + 1e-6 * rng.standard_normal(mats.shape)


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_table(repeat):
    rng = np.random.default_rng(0)
    cases = []
    for N, K in ((800, 2), (800, 4), (800, 8)):
        G = rng.standard_normal((N, K))
        cases.append((f"svec_rows N={N} K={K}", lambda mod, G=G: mod.svec_rows(G)))
    for n, m in ((3, 2), (4, 6), (8, 20)):
        mats = jd_inputs(rng, n, m)
        cases.append((f"joint_diagonalize n={n} m={m}",
                      lambda mod, mats=mats: mod.joint_diagonalize(mats)))
    print(f"{'kernel':32s} {'python us':>12s} {'cython us':>12s} {'speedup':>8s}")
    for name, fn in cases:
        t_py = best_of(lambda: fn(_kernels_py), repeat, 50)
        if _kernels is None:
            print(f"{name:32s} {1e6 * t_py:12.1f} {'n/a':>12s}")
            continue
        t_c = best_of(lambda: fn(_kernels), repeat, 50)
        print(f"{name:32s} {1e6 * t_py:12.1f} {1e6 * t_c:12.1f} {t_py / t_c:8.1f}")


END_TO_END = """
import timeit, numpy as np
from edgeview import harness, racma, scenario, kernels
rng = np.random.default_rng(1)
X = rng.choice([-1.0, 1.0], size=(800, 4))
G = X @ rng.standard_normal((4, 4))
cfg = scenario.preset("fig3-3bs")
t_sep = min(timeit.repeat(lambda: racma.solve_mixture(G), repeat={r}, number=20)) / 20
t_trial = min(timeit.repeat(lambda: harness.run_trial(cfg, ["gcca3"], 0), repeat={r}, number=3)) / 3
print(f"{{kernels.BACKEND:7s}} solve_mixture K=4 {{1e3 * t_sep:8.2f}} ms   gcca3 trial {{1e3 * t_trial:8.2f}} ms")
"""


def end_to_end(repeat):
    for pure in ("0", "1"):
        env = dict(os.environ, EDGEVIEW_PURE=pure)
        subprocess.run([sys.executable, "-c", END_TO_END.format(r=repeat)], env=env, check=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    kernel_table(args.repeat)
    print(flush=True)
    end_to_end(args.repeat)


if __name__ == "__main__":
    main()
