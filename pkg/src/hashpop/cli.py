"""Command-line interface.

    hashpop simulate  --popularity gamma:2,1,0.1 --degree discrete:1,2,3:0.5,0.3,0.2 ...
    hashpop synth     --n-users 2000 --popularity gamma:3,0.5,0.05 ... --out-dir data
    hashpop fit       data/dataset.csv --out-dir fit
    hashpop moments   --popularity gamma:3,0.5,0.05 --degree degenerate:10 --horizon 6
    hashpop validate  data/dataset.csv --out-dir report --svg

Exit codes: 0 success, 2 schema/usage errors, 3 numeric non-convergence.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    DomainError,
    EmptyInputError,
    HashpopError,
    NumericError,
    SchemaError,
    UnsupportedVariantError,
)
from .fitting import (
    empirical_popularity,
    gamma_kernel_values,
    initial_guess,
    lm_fit_gamma,
    moving_average,
)
from .model import (
    Constant,
    Degenerate,
    Discrete,
    EmpiricalSample,
    GammaKernel,
    LogNormalDiscretized,
    NetworkParams,
    ParetoDiscrete,
    Tabulated,
    degree_moments,
)
from .moments import asymptotic_moments, confidence_band
from .pipeline import (
    DEFAULT_LEVEL,
    DEFAULT_SMOOTHING,
    _csv_text,
    atomic_write_text,
    compute_network_params,
    default_bins,
    fit_to_dict,
    load_dataset,
    synthesize_dataset,
    validate,
    write_dataset,
    write_report,
)
from .simulator import (
    ensemble_statistics,
    evolve_master_equation,
    simulate_events,
    simulate_micro,
    suggest_x_max,
)

log = logging.getLogger("hashpop")

EXIT_OK, EXIT_SCHEMA, EXIT_NONCONVERGED = 0, 2, 3


class UsageError(HashpopError):
    pass


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def parse_popularity(text: str):
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind == "constant":
        return Constant(float(rest))
    if kind == "gamma":
        a, b, c = _floats(rest)
        return GammaKernel(a, b, c)
    if kind == "table":
        data = np.loadtxt(rest, delimiter=",", skiprows=1, ndmin=2)
        return Tabulated(tuple(data[:, 0]), tuple(data[:, 1]))
    raise UsageError(f"unknown popularity {text!r}; use constant:c, gamma:a,b,c or table:FILE")


def parse_degree(text: str):
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind == "degenerate":
        return Degenerate(int(rest))
    if kind == "discrete":
        support, _, probs = rest.partition(":")
        return Discrete(tuple(int(v) for v in _floats(support)), tuple(_floats(probs)))
    if kind == "empirical":
        if Path(rest).is_file():
            values = np.loadtxt(rest, delimiter=",", ndmin=1).ravel()
        else:
            values = _floats(rest)
        return EmpiricalSample(tuple(int(v) for v in values))
    if kind == "lognormal":
        mu, sigma = _floats(rest)
        return LogNormalDiscretized(mu, sigma)
    if kind == "pareto":
        alpha, m = _floats(rest)
        return ParetoDiscrete(alpha, int(m))
    raise UsageError(
        f"unknown degree law {text!r}; use degenerate:k, discrete:S:P, empirical:LIST|FILE, "
        "lognormal:mu,sigma or pareto:alpha,m")


def parse_times(text: str):
    """``start:stop:count`` grid or an explicit comma list."""
    if text.count(":") == 2:
        start, stop, count = text.split(":")
        return np.linspace(float(start), float(stop), int(count))
    return np.array(_floats(text))


def load_config(path) -> dict:
    """Flags from a JSON object or ``key = value`` lines (``#`` comments)."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            value = value.strip()
            raw[key.strip()] = {"true": True, "false": False}.get(value.lower(), value)
    return {k.lstrip("-").replace("-", "_"): v for k, v in raw.items()}


def _model_args(p):
    p.add_argument("--n-users", type=int, default=1000, help="community size N")
    p.add_argument("--popularity", default="gamma:2,1,0.1",
                   help="constant:c | gamma:a,b,c | table:FILE (csv t,w)")
    p.add_argument("--degree", default="degenerate:1",
                   help="degenerate:k | discrete:1,2:0.5,0.5 | empirical:LIST|FILE | "
                        "lognormal:mu,sigma | pareto:alpha,m")
    p.add_argument("--horizon", type=float, default=10.0)


def _network(args, dist):
    mom = degree_moments(dist)
    return NetworkParams(args.n_users, mom.mean, mom.mean_sq)


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="key=value or JSON file mirroring these flags")
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--bins", type=int, default=None, help="number of popularity bins")
    shared.add_argument("--smooth-k", type=int, default=DEFAULT_SMOOTHING, help="moving-average points (odd)")
    shared.add_argument("--level", type=float, default=DEFAULT_LEVEL, help="confidence level of the band")
    shared.add_argument("--format", choices=("csv", "jsonl"), default=None, help="dataset file format")
    shared.add_argument("--out-dir", default=".", help="directory for output files")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hashpop", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[shared], help="simulate X(t) for a model configuration")
    _model_args(p)
    p.add_argument("--method", choices=("events", "micro", "master"), default="events")
    p.add_argument("--dt", type=float, default=None, help="time step (micro, master)")
    p.add_argument("--x-max", type=int, default=None, help="state-space cutoff (master)")
    p.add_argument("--times", default=None, help="output grid, start:stop:count or a list")
    p.add_argument("--replications", type=int, default=1, help=">1 gives ensemble statistics")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("synth", parents=[shared], help="write a synthetic tweet-record dataset")
    _model_args(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("moments", parents=[shared], help="analytic mean, variance and band")
    _model_args(p)
    p.add_argument("--times", default=None, help="grid, start:stop:count or a list")
    p.set_defaults(func=cmd_moments)

    for name, func, text in (("fit", cmd_fit, "fit the popularity kernel to a dataset"),
                             ("validate", cmd_validate, "full calibration and validation pipeline")):
        p = sub.add_parser(name, parents=[shared], help=text)
        p.add_argument("input", help="CSV or JSONL file of tweet records")
        p.add_argument("--n-users", type=int, default=None,
                       help="community size (default: distinct users in the sample)")
        p.add_argument("--fit-raw", action="store_true", help="fit the unsmoothed series")
        p.add_argument("--max-iterations", type=int, default=200)
        if name == "validate":
            p.add_argument("--svg", action="store_true", help="also render report.svg")
        p.set_defaults(func=func)
    return parser


def _grid(args):
    if args.times:
        return parse_times(args.times)
    return np.linspace(0.0, args.horizon, 101)


def cmd_simulate(args) -> int:
    spec, dist = parse_popularity(args.popularity), parse_degree(args.degree)
    params = _network(args, dist)
    out = Path(args.out_dir)
    grid = _grid(args)

    if args.method == "master":
        x_max = args.x_max or suggest_x_max(params, spec, dist, grid[-1])
        res = evolve_master_equation(params, spec, dist, x_max, grid, dt=args.dt)
        tt, xx = np.meshgrid(res.times, res.x_values, indexing="ij")
        atomic_write_text(out / "pmf.csv", _csv_text(("t", "x", "p"), (tt.ravel(), xx.ravel(), res.pmf.ravel())))
        atomic_write_text(out / "master.csv", _csv_text(
            ("t", "mean", "variance", "leak"), (res.times, res.mean(), res.variance(), res.leak)))
        print(f"master equation: {len(grid)} times, x_max={x_max}, max leak {res.leak.max():.3g}")
        return EXIT_OK

    if args.replications > 1:
        if args.method != "events":
            raise UsageError("ensembles use the event simulator; drop --method micro")
        ens = ensemble_statistics(params, spec, dist, args.horizon, grid, args.replications, args.seed)
        curves = confidence_band(params, spec, grid, args.level)
        atomic_write_text(out / "ensemble.csv", _csv_text(
            ("t", "sample_mean", "sample_var", "standard_error", "mean", "variance"),
            (grid, ens.sample_mean, ens.sample_var, ens.standard_error, curves.mean, curves.variance)))
        print(f"ensemble of {args.replications} traces written to {out / 'ensemble.csv'}")
        return EXIT_OK

    if args.method == "micro":
        dt = args.dt or args.horizon / 10_000
        trace = simulate_micro(params, spec, dist, dt, args.horizon, args.seed)
    else:
        trace = simulate_events(params, spec, dist, args.horizon, args.seed)
    atomic_write_text(out / "trace.csv", _csv_text(
        ("t", "jump", "x"), (trace.event_times, trace.jump_sizes, trace.trajectory)))
    final = int(trace.trajectory[-1]) if len(trace) else 0
    print(f"{len(trace)} shoot events, X({args.horizon:g}) = {final}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec, dist = parse_popularity(args.popularity), parse_degree(args.degree)
    params = _network(args, dist)
    ds = synthesize_dataset(params, spec, dist, args.horizon, args.seed)
    fmt = args.format or "csv"
    out = Path(args.out_dir)
    path = out / f"dataset.{fmt}"
    write_dataset(ds, path, fmt)
    truth = {"n_users": args.n_users, "popularity": args.popularity, "degree": args.degree,
             "horizon": args.horizon, "seed": args.seed, "records": len(ds),
             "start": ds.epoch.isoformat()}
    atomic_write_text(out / "truth.json", json.dumps(truth, indent=2, sort_keys=True) + "\n")
    print(f"{len(ds)} records written to {path}")
    return EXIT_OK


def cmd_moments(args) -> int:
    spec, dist = parse_popularity(args.popularity), parse_degree(args.degree)
    params = _network(args, dist)
    grid = _grid(args)
    curves = confidence_band(params, spec, grid, args.level)
    out = Path(args.out_dir)
    atomic_write_text(out / "moments.csv", _csv_text(
        ("t", "intensity", "mean", "variance", "band_low", "band_high"),
        (curves.times, curves.intensity, curves.mean, curves.variance, curves.band_low, curves.band_high)))
    summary = {"n_users": params.n_users, "mean_followers": params.mean_followers,
               "mean_sq_followers": params.mean_sq_followers, "level": args.level}
    if isinstance(spec, GammaKernel):
        summary["limits"] = asymptotic_moments(params, spec)._asdict()
    atomic_write_text(out / "moments.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"moments on {len(grid)} times written to {out / 'moments.csv'}")
    return EXIT_OK


def cmd_fit(args) -> int:
    ds = load_dataset(args.input, args.format)
    network = compute_network_params(ds)
    n_users = args.n_users or network.n_users
    w_raw = empirical_popularity(list(ds.records), n_users, args.bins or default_bins(len(ds)))
    w_smooth = moving_average(w_raw, args.smooth_k)
    target = w_raw if args.fit_raw else w_smooth
    fit = lm_fit_gamma(target, initial_guess(target), max_iterations=args.max_iterations)
    out = Path(args.out_dir)
    atomic_write_text(out / "fit.json", json.dumps(fit_to_dict(fit), indent=2, sort_keys=True) + "\n")
    atomic_write_text(out / "w.csv", _csv_text(
        ("t", "w_raw", "w_smooth", "w_fit"),
        (w_raw.times, w_raw.values, w_smooth.values, gamma_kernel_values(w_raw.times, fit.a, fit.b, fit.c))))
    print(f"a={fit.a:.6g} b={fit.b:.6g} c={fit.c:.6g} converged={fit.converged}")
    return EXIT_OK if fit.converged else EXIT_NONCONVERGED


def cmd_validate(args) -> int:
    ds = load_dataset(args.input, args.format)
    if ds.diagnostics:
        log.warning("%d malformed rows skipped in %s", len(ds.diagnostics), args.input)
    report = validate(ds, n_bins=args.bins, k=args.smooth_k, level=args.level,
                      n_users=args.n_users, fit_raw=args.fit_raw, max_iterations=args.max_iterations)
    write_report(report, args.out_dir, svg=args.svg)
    fit = report.fit
    print(f"a={fit.a:.6g} b={fit.b:.6g} c={fit.c:.6g} coverage={report.coverage_fraction:.3f} "
          f"converged={fit.converged}")
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.config:
        try:
            config = load_config(args.config)
        except (OSError, ValueError, UsageError) as exc:
            parser.error(f"cannot read config: {exc}")
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = sorted(set(config) - known)
        if unknown:
            parser.error(f"unknown config key(s): {', '.join(unknown)}")
        subparser.set_defaults(**config)
        args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SchemaError, EmptyInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (UsageError, DomainError, UnsupportedVariantError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
