"""Command line entry point: run, scan, exact, compare, validate."""
import os

# one BLAS thread per process; parallelism comes from worker processes
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse  # noqa: E402
import sys  # noqa: E402
from pathlib import Path  # noqa: E402

from .config import dump_run_spec, load_run_spec  # noqa: E402
from .errors import ConfigError, NumericalFailure  # noqa: E402

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _default_output(config_path, spec, suffix=""):
    if spec.output:
        base = Path(spec.output)
        return base.with_name(base.stem + suffix + base.suffix) if suffix else base
    return Path(config_path).with_suffix("").with_name(Path(config_path).stem + suffix + ".csv")


def _summary(report, written):
    lines = [f"method {report.method}: {report.n_traj} trajectories, {report.n_failed} failed "
             f"({100.0 * report.failure_fraction:.2f}%), {report.wall_time:.1f} s"]
    for flag in report.series.flags:
        lines.append(f"note: {flag}")
    if report.channels:
        for name, (v, e) in report.channels.items():
            lines.append(f"  {name:16s} {v:.5f} +- {e:.5f}")
    lines += [f"wrote {p}" for p in written]
    return "\n".join(lines)


def cmd_validate(args):
    spec = load_run_spec(args.config)
    print(dump_run_spec(spec), end="")
    return EXIT_OK


def cmd_run(args, exact=False):
    from .harness import emit_outputs, run_ensemble, run_exact

    spec = load_run_spec(args.config)
    report = run_exact(spec) if exact else run_ensemble(spec, args.workers)
    out = Path(args.output) if args.output else _default_output(args.config, spec, "_exact" if exact else "")
    written = emit_outputs(report, out, ("csv", "plot") if args.plot else ("csv",))
    print(_summary(report, written))
    return EXIT_OK


def cmd_scan(args):
    from .harness import _atomic_write, momentum_scan, output_paths, scan_csv

    spec = load_run_spec(args.config)
    try:
        p0 = [float(x) for x in args.p0.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"--p0 must be a list of numbers, got {args.p0!r}") from None
    values, table, reports = momentum_scan(spec, p0, args.workers)
    out = Path(args.output) if args.output else _default_output(args.config, spec, "_scan")
    path = output_paths(out)["series"]
    _atomic_write(path, scan_csv(values, table))
    failed = sum(r.n_failed for r in reports)
    print(f"scan over {len(values)} momenta, {failed} failed trajectories in total")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_compare(args):
    from .harness import compare

    result = compare(args.a, args.b)
    print(f"points compared   {result.n_points}")
    print(f"max abs deviation {result.max_abs:.6g}")
    print(f"rms deviation     {result.rms:.6g}")
    for name, z in result.z_scores.items():
        print(f"  z[{name}] = {z:.3f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="nafdyn", description="Nonadiabatic trajectory ensembles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="propagate an ensemble and write CSV output")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.add_argument("-w", "--workers", type=int)
    p.add_argument("--plot", action="store_true", help="also write one x/y file per observable")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("scan", help="scattering channels over a list of initial momenta")
    p.add_argument("config")
    p.add_argument("--p0", required=True, help="comma or space separated momenta")
    p.add_argument("-o", "--output")
    p.add_argument("-w", "--workers", type=int)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("exact", help="grid wavepacket reference for a one-dimensional model")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=lambda a: cmd_run(a, exact=True), workers=None)

    p = sub.add_parser("compare", help="deviation metrics between two CSV files")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="check a configuration and print it with defaults")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
