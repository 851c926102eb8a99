"""Command line entry point: ``girsanov-lab <command> ...``.

Exit status: 0 when every gate passes, 1 when a gate fails, 2 on usage or
configuration errors, 3 when outputs cannot be written.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .config import OUTPUT_ENV, ConfigError, ScenarioConfig
from .entropy_core import DiscreteDist, SearchConfig, dv_supremum, kl_divergence
from .harness import _jsonable, run_scenario
from .orlicz import WeightedSample, luxemburg_norm
from .scenarios import REGISTRY

EXIT_OK, EXIT_GATE, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def _rows(path):
    """Data rows of a small CSV, skipping comments and a non-numeric header."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if rows:
        try:
            float(rows[0][-1])
        except ValueError:
            rows = rows[1:]
    return rows


def cmd_run(args) -> int:
    try:
        cfg = ScenarioConfig.from_file(args.config).with_overrides(
            seed=args.seed, n_paths=args.paths, grid_n=args.grid, output_path=args.out, workers=args.workers)
        report = run_scenario(cfg)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    for g in report.gates:
        flag = "PASS" if g.passed else "FAIL"
        print(f"{flag}  {g.name}: achieved {g.achieved:.6g}, target {g.target:.6g} ({g.provenance}), "
              f"margin {g.margin:.3g} <= {g.tolerance:.3g}")
    for tag, est in report.estimates.items():
        print(f"      {tag}: {est.value:.6g} +/- {est.stderr:.2g} (n={est.n}, excluded {est.n_excluded})")
    print(f"wrote {', '.join(report.files)}")
    if args.json:
        print(json.dumps(_jsonable(report.summary()), indent=2))
    return EXIT_OK if report.passed else EXIT_GATE


def cmd_list(args) -> int:
    for name, fn in REGISTRY.items():
        doc = (fn.__doc__ or "").strip().splitlines()[0]
        print(f"{name:20s} {doc}")
    return EXIT_OK


def cmd_orlicz(args) -> int:
    try:
        rows = _rows(args.csv)
        sample = WeightedSample([float(r[0]) for r in rows], [float(r[1]) for r in rows])
    except (OSError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    youngs = ["theta", "theta_star"] if args.young == "both" else [args.young]
    out = {}
    for y in youngs:
        res = luxemburg_norm(sample, y)
        out[y] = res.value if res.finite else float("inf")
        print(f"{y:10s} {out[y]!r}{'' if res.finite else '  (no finite bracket)'}")
    if args.json:
        print(json.dumps(_jsonable(out)))
    return EXIT_OK


def _dist(path) -> DiscreteDist:
    rows = _rows(path)
    return DiscreteDist.from_weights([float(r[1]) for r in rows], labels=[r[0] for r in rows])


def cmd_dv(args) -> int:
    try:
        p, r = _dist(args.p_csv), _dist(args.r_csv)
        kl = kl_divergence(p, r)
    except (OSError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    res = dv_supremum(p, r, SearchConfig(divergence_cap=args.cap))
    print(f"kl          {kl!r}")
    print(f"dv_supremum {res.value!r}  iterations={res.iterations} converged={res.converged} diverged={res.diverged}")
    if args.json:
        print(json.dumps(_jsonable({"kl": kl, "dv": res.value, "iterations": res.iterations,
                                    "converged": res.converged, "diverged": res.diverged,
                                    "u": dict(zip(p.labels, np.asarray(res.u).tolist()))})))
    if np.isfinite(kl):
        return EXIT_OK if abs(res.value - kl) <= args.tol else EXIT_GATE
    return EXIT_OK if res.diverged else EXIT_GATE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="girsanov-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config file")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--paths", type=int, help="number of Monte Carlo paths")
    run.add_argument("--grid", type=int, help="number of grid intervals")
    run.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./girsanov-out)")
    run.add_argument("--workers", type=int, help="simulation threads; results do not depend on it")
    run.add_argument("--json", action="store_true", help="also print the JSON summary")
    run.set_defaults(func=cmd_run)

    ls = sub.add_parser("list-scenarios", help="list built-in scenarios")
    ls.set_defaults(func=cmd_list)

    on = sub.add_parser("orlicz-norm", help="Luxemburg norms of a (value, mass) CSV")
    on.add_argument("csv")
    on.add_argument("--young", choices=["theta", "theta_star", "both"], default="both")
    on.add_argument("--json", action="store_true")
    on.set_defaults(func=cmd_orlicz)

    dv = sub.add_parser("dv", help="variational entropy of two (label, probability) CSVs")
    dv.add_argument("p_csv")
    dv.add_argument("r_csv")
    dv.add_argument("--cap", type=float, default=1e3, help="divergence cap")
    dv.add_argument("--tol", type=float, default=1e-6)
    dv.add_argument("--json", action="store_true")
    dv.set_defaults(func=cmd_dv)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
