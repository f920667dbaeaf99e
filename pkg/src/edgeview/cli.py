"""Command line entry point: ``edgeview run|sweep|gcca|racma|plot``."""

import argparse
import csv
import itertools
import os
import sys

import numpy as np

from . import gcca, harness, io, racma, scenario
from .errors import EdgeviewError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def _methods(text, config):
    if text:
        return [m.strip() for m in text.split(",") if m.strip()]
    methods = list(harness.METHODS)
    if config.L <= 3:
        methods.remove("gcca_all")
    return methods


def cmd_run(args):
    with open(args.config, "rb") as fh:
        data = tomllib.load(fh)
    exp = data.pop("experiment", {})
    config = scenario.ScenarioConfig.from_dict(data)
    seed = args.seed if args.seed is not None else exp.get("seed", config.seed)
    config = config.replace(seed=seed)
    trials = args.trials or exp.get("trials", 100)
    methods = _methods(args.methods or ",".join(exp.get("methods", [])), config)
    spec = harness.ExperimentSpec(
        base=config,
        sweep_param=exp.get("sweep_param"),
        sweep_values=exp.get("sweep_values", ()),
        methods=methods,
        trials=trials,
        master_seed=seed,
        estimate_kc=args.estimate_kc,
    )
    if args.dump_views:
        trial = harness.prepare_trial(config, 0, seed)
        io.dump_views(args.dump_views, trial.views, trial.frames, trial.channels.edge_users)
    rows = harness.run_monte_carlo(spec)
    harness.write_csv(rows, args.out, timing=args.timing)
    return 0


def cmd_sweep(args):
    os.makedirs(args.out, exist_ok=True)
    from . import plotting

    if args.preset == "fig8":
        profiles = {}
        for d in (0.4, 0.7):
            cfg = scenario.preset("fig3-3bs").replace(scatter_fraction=d, seed=args.seed)
            profiles[d] = harness.correlation_profile(cfg, args.trials, args.seed)
        with open(os.path.join(args.out, "fig8.csv"), "w") as fh:
            fh.write(harness.profile_csv(profiles))
        plotting.plot_profile(profiles, os.path.join(args.out, "fig8.svg"))
        return 0
    for stem, spec in harness.sweep_preset(args.preset, args.trials, args.seed).items():
        rows = harness.run_monte_carlo(spec)
        path = os.path.join(args.out, f"{stem}.csv")
        harness.write_csv(rows, path, timing=args.timing)
        plotting.plot_results(harness.read_csv(path), os.path.join(args.out, f"{stem}.svg"), stem)
        print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_gcca(args):
    dump = io.load_views(args.dump)
    K = args.components or min(v.shape[0] for v in dump.views)
    sol = gcca.maxvar(dump.views, K)
    pairs = list(itertools.combinations(range(len(dump.views)), 2))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["component_index", "eigenvalue"]
                    + [f"rho_{a + 1}{b + 1}" for a, b in pairs] + ["rho_avg"])
    for i in range(K):
        writer.writerow([i + 1, repr(float(sol.eigenvalues[i]))]
                        + [repr(float(sol.rho_pairs[p, i])) for p in range(len(pairs))]
                        + [repr(float(sol.rho_avg[i]))])
    if args.out:
        out.close()
    print(f"estimated Kc: {gcca.estimate_common_dim(sol.rho_avg, args.rho_th)}", file=sys.stderr)
    return 0


def cmd_racma(args):
    G = io.read_matrix(args.matrix)
    result = racma.solve_mixture(G, args.kc)
    report = ["column,user_id,confidence"]
    if args.preambles:
        result = racma.resolve_ambiguity(result, io.load_views(args.preambles).edge_preambles())
        for col in range(result.X_hat.shape[1]):
            uid = result.assignment.get(col, "")
            report.append(f"{col},{uid},{result.confidence[col]:.4f}")
    else:
        report += [f"{col},," for col in range(result.X_hat.shape[1])]
    np.savetxt(args.out, result.X_hat, fmt="%d", delimiter=",")
    text = "\n".join(report) + "\n"
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text)
    else:
        sys.stderr.write(text)
    print(f"separation residual: {result.residual:.3e}", file=sys.stderr)
    return 0


def cmd_plot(args):
    from . import plotting

    plotting.plot_results(harness.read_csv(args.results), args.out)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="edgeview", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="Monte Carlo run from a TOML scenario")
    r.add_argument("--config", required=True)
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", required=True)
    r.add_argument("--methods", help="comma-separated method names")
    r.add_argument("--estimate-kc", action="store_true")
    r.add_argument("--timing", action="store_true", help="fill the runtime column")
    r.add_argument("--dump-views", metavar="PATH", help="write trial 0 views as an EDGV dump")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a figure preset")
    s.add_argument("--preset", required=True, choices=["fig4", "fig5", "fig6", "fig7", "fig8"])
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--timing", action="store_true")
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("gcca", help="eigenvalues and correlation profile of a dump")
    g.add_argument("dump")
    g.add_argument("--out")
    g.add_argument("--components", type=int)
    g.add_argument("--rho-th", type=float, default=gcca.RHO_THRESHOLD)
    g.set_defaults(func=cmd_gcca)

    m = sub.add_parser("racma", help="separate binary sources from a mixture matrix")
    m.add_argument("matrix", help="N x K matrix as .npy or CSV")
    m.add_argument("--out", required=True)
    m.add_argument("--kc", type=int)
    m.add_argument("--preambles", metavar="DUMP", help="EDGV dump supplying edge preambles")
    m.add_argument("--report")
    m.set_defaults(func=cmd_racma)

    pl = sub.add_parser("plot", help="SVG of a results CSV")
    pl.add_argument("results")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EdgeviewError, OSError) as exc:
        print(f"edgeview: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
