"""Command-line interface: one binary, one subcommand per workflow, a
manifest for every run.

Exit codes: 0 success, 1 domain error, 2 usage error.  Numeric outputs
are CSV with '.' decimals and trailing newlines; summaries are JSON.  The
default output root comes from TICKCHAIN_OUT (falling back to ./runs).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .chain import ChainSpec, build_effective_hamiltonian
from .errors import TickchainError

_FORMAT_VERSION = "1"


def _out_dir(args) -> Path:
    root = args.out_dir or os.environ.get("TICKCHAIN_OUT", "runs")
    path = Path(root) / f"{args.command}-{args.tag}" if args.tag else Path(root) / args.command
    return path


def _prepare_dir(args) -> Path:
    path = _out_dir(args)
    manifest = path / "manifest.json"
    if manifest.exists() and not args.force:
        raise TickchainError(f"output {manifest} exists; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_seed(args, config_seed=None) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    if config_seed is not None:
        return int(config_seed)
    seed = int(np.random.SeedSequence().entropy % (2**63))
    print(f"no seed given; drew {seed}", file=sys.stderr)
    return seed


def _write_json(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    tmp.replace(path)


def _write_csv(path: Path, names, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _finish(path: Path, command: str, seed, config_payload, outputs, started: float) -> None:
    manifest = {
        "subcommand": command,
        "config_hash": __import__("hashlib").sha256(json.dumps(config_payload, sort_keys=True, default=str).encode()).hexdigest()[:16],
        "master_seed": seed,
        "versions": {"tickchain": __version__, "format": _FORMAT_VERSION, "numpy": np.__version__},
        "started": started,
        "finished": time.time(),
        "outputs": [str(p) for p in outputs],
    }
    _write_json(path / "manifest.json", manifest)


def _load_spec(args) -> ChainSpec:
    return ChainSpec.from_json(Path(args.config).read_text())


def _cmd_optimize(args) -> int:
    from .optimize import apodization_report, optimize_couplings

    started = time.time()
    path = _prepare_dir(args)
    seed = _resolve_seed(args)
    profile = optimize_couplings(args.n, gamma=args.gamma, window_m=args.window, budget=args.budget, seed=seed)
    bulk, window, ratio = apodization_report(profile)
    spec = ChainSpec(args.n, profile.values, args.gamma, seed=seed)
    spec_path = path / "chain.json"
    spec_path.write_text(spec.to_json(indent=2) + "\n")
    report = {
        "objective": profile.objective,
        "iterations": profile.iterations,
        "converged": profile.converged,
        "window_stats": {"bulk": bulk, "window_length": window, "boundary_ratio": ratio},
    }
    report_path = path / "report.json"
    _write_json(report_path, report)
    _finish(path, "optimize", seed, vars(args), [spec_path, report_path], started)
    print(json.dumps(report))
    return 0


def _parse_grid(text: str):
    lo, hi, steps = text.split(":")
    return np.linspace(float(lo), float(hi), int(steps))


def _cmd_transport(args) -> int:
    from .landauer import lb_numeric, spectral_decompose, transport_summary

    started = time.time()
    path = _prepare_dir(args)
    spec = _load_spec(args)
    seed = _resolve_seed(args, spec.seed)
    h = build_effective_hamiltonian(spec)
    from .landauer import transmission

    grid = _parse_grid(args.energy_grid)
    t_vals = transmission(h, grid)
    csv_path = path / "transmission.csv"
    _write_csv(csv_path, ["energy", "transmission"], np.column_stack([grid, t_vals]))
    beta = math.inf if args.beta is None else args.beta
    if args.method == "residue":
        summary = transport_summary(spectral_decompose(h))
        tolerance = 1e-12
    else:
        summary = lb_numeric(h, args.mu_l, args.mu_r, beta, abs_tol=args.tolerance)
        tolerance = args.tolerance
    payload = {
        "J": summary.current,
        "D": summary.diffusion,
        "fano": summary.fano,
        "method": args.method,
        "tolerance": tolerance,
    }
    sum_path = path / "summary.json"
    _write_json(sum_path, payload)
    _finish(path, "transport", seed, {**vars(args), "spec": spec.to_dict()}, [csv_path, sum_path], started)
    print(json.dumps(payload))
    return 0


def _cmd_simulate(args) -> int:
    from .moments import ExactMoments
    from .trajectories import mc_number_variance, simulate_ensemble, waiting_time_stats

    started = time.time()
    path = _prepare_dir(args)
    spec = _load_spec(args)
    seed = _resolve_seed(args, spec.seed)
    records = simulate_ensemble(
        spec,
        args.trajectories,
        n_ticks=args.ticks,
        t_max=args.t_max,
        dt=args.dt,
        seed=seed,
        reproject_every=args.reproject_every,
        threads=args.threads,
    )
    outputs = []
    for i, rec in enumerate(records):
        p = path / f"trajectory_{i:04d}.csv"
        _write_csv(p, ["tick_time"], rec.tick_times[:, None])
        outputs.append(p)
    total_time = sum(r.tick_times[-1] - r.tick_times[args.discard_first] for r in records)
    total_ticks = sum(r.n_ticks - args.discard_first for r in records)
    j_hat = total_ticks / total_time
    aggregate = {"J_hat": j_hat, "trajectories": len(records), "dt": records[0].dt}
    min_len = min(r.n_ticks for r in records)
    n_max = min_len - args.discard_first - 1
    if n_max >= 1:
        ns = np.unique(np.geomspace(1, n_max, 24).astype(int))
        wt = waiting_time_stats(records, ns, discard_first=args.discard_first)
        aggregate["var_table"] = {
            "n": wt.n.tolist(),
            "mean": wt.mean.tolist(),
            "variance": wt.variance.tolist(),
            "stderr": wt.stderr.tolist(),
        }
        windows = np.geomspace(2.0 / j_hat, 0.2 * total_time / len(records), 12)
        t_grid, var_n, err_n = mc_number_variance(records, windows, discard_first=args.discard_first)
        aggregate["number_variance"] = {"t": t_grid.tolist(), "variance": var_n.tolist(), "stderr": err_n.tolist()}
        import warnings as _warnings

        from .trajectories import conditional_waiting_histogram

        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")
            hist = conditional_waiting_histogram(records, discard_first=args.discard_first)
        aggregate["histograms"] = {
            "bin_edges": hist.bin_edges.tolist(),
            "density": hist.density.tolist(),
            "density_prev_fast": hist.density_fast.tolist(),
            "density_prev_slow": hist.density_slow.tolist(),
            "means": {"all": hist.mean, "prev_fast": hist.mean_fast, "prev_slow": hist.mean_slow},
            "n_samples": hist.n_samples,
        }
    agg_path = path / "aggregate.json"
    _write_json(agg_path, aggregate)
    outputs.append(agg_path)
    _finish(path, "simulate", seed, {**vars(args), "spec": spec.to_dict()}, outputs, started)
    print(json.dumps({"J_hat": j_hat, "trajectories": len(records)}))
    return 0


def _cmd_variance(args) -> int:
    from .moments import ExactMoments

    started = time.time()
    path = _prepare_dir(args)
    spec = _load_spec(args)
    seed = _resolve_seed(args, spec.seed)
    kind, t0s, t1s, steps = args.times.split(":")
    if kind != "log":
        raise TickchainError("only log:t0:t1:steps time grids are supported")
    times = np.geomspace(float(t0s), float(t1s), int(steps))
    ex = ExactMoments(spec)
    curve = ex.number_variance(times) if args.bond is None else ex.bond_variance(args.bond, times)
    slope = np.gradient(curve.variance, curve.times)
    csv_path = path / "variance.csv"
    _write_csv(csv_path, ["t", "var", "slope"], np.column_stack([curve.times, curve.variance, slope]))
    payload = {"J": ex.current, "D": curve.diffusion, "A": curve.activity}
    sum_path = path / "summary.json"
    _write_json(sum_path, payload)
    _finish(path, "variance", seed, {**vars(args), "spec": spec.to_dict()}, [csv_path, sum_path], started)
    print(json.dumps(payload))
    return 0


def _cmd_asymptotics(args) -> int:
    from . import asymptotics as asy

    rows = []
    if args.what == "variance":
        ts = _parse_grid(args.grid)
        rows = [(t, asy.bulk_variance_closed_form(args.g, t), asy.bulk_variance_asymptotic(args.g, t) if t > 0 else 0.0) for t in ts]
        names = ["t", "variance", "asymptote"]
    elif args.what == "correlator":
        ts = _parse_grid(args.grid)
        rows = [(t, asy.bulk_correlator(args.g, t)) for t in ts]
        names = ["tau", "correlator"]
    elif args.what == "crossover":
        rows = [(args.current, args.diffusion, asy.crossover_time(args.current, args.diffusion), asy.crossover_time_leading(args.current, args.diffusion))]
        names = ["J", "D", "t_star", "t_star_leading"]
    else:
        es = _parse_grid(args.grid)
        rows = [(e, asy.localization_length(e, args.disorder, args.g)) for e in es]
        names = ["energy", "xi"]
    sys.stdout.write(",".join(names) + "\n")
    for row in rows:
        sys.stdout.write(",".join(repr(float(x)) for x in row) + "\n")
    return 0


def _cmd_experiment(args) -> int:
    from .experiments import ExperimentConfig, run_experiment

    started = time.time()
    config = ExperimentConfig.from_json(Path(args.config).read_text())
    if args.seed is not None:
        config.seed = int(args.seed)
    args.tag = args.tag or config.kind
    path = _prepare_dir(args)
    results = run_experiment(config)
    table = results[0]
    outputs = table.write(path, config.kind)
    checks = []
    if config.kind == "validate":
        checks.append(("dense-oracle max deviation < 1e-8", results[1].passed(1e-8)))
    expect = config.options.get("expect", {})
    if config.kind == "scaling" and "exponent" in expect and results[1] is not None:
        tol = float(expect.get("tol", 0.1))
        checks.append((f"scaling exponent within {tol} of {expect['exponent']}",
                       abs(results[1].exponent - float(expect["exponent"])) <= tol))
    if config.kind in ("disorder_onsite", "disorder_coupling") and "alpha" in expect:
        tol = float(expect.get("tol", 0.15))
        alphas = [f.exponent for f in results[1].values() if f is not None]
        checks.append((f"mean disorder exponent within {tol} of {expect['alpha']}",
                       bool(alphas) and abs(float(np.mean(alphas)) - float(expect["alpha"])) <= tol))
    ok = all(passed for _, passed in checks)
    _finish(path, "experiment", config.seed, config.to_dict(), outputs, started)
    print(json.dumps({"kind": config.kind, "outputs": [str(o) for o in outputs],
                      "checks": [{"name": n, "passed": p} for n, p in checks], "passed": ok}))
    return 0 if ok else 1


def _cmd_validate(args) -> int:
    from .oracle import validate_against_dense_oracle

    started = time.time()
    path = _prepare_dir(args)
    seed = _resolve_seed(args)
    sigmas = tuple(float(s) for s in args.sigma) if args.sigma else (math.inf, 1.0, 3.0)
    report = validate_against_dense_oracle(args.n, sigmas=sigmas)
    payload = {"n_sites": report.n_sites, "cases": report.cases, "worst": report.worst, "passed_1e-8": report.passed(1e-8)}
    rep_path = path / "report.json"
    _write_json(rep_path, payload)
    _finish(path, "validate", seed, vars(args), [rep_path], started)
    print(json.dumps({"worst": report.worst, "passed": report.passed(1e-8)}))
    return 0 if report.passed(1e-8) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tickchain", description=__doc__)
    parser.add_argument("--version", action="version", version=f"tickchain {__version__} (format {_FORMAT_VERSION})")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--out-dir", default=None, help="output root (default $TICKCHAIN_OUT or ./runs)")
        p.add_argument("--tag", default=None, help="subdirectory tag for this run")
        p.add_argument("--force", action="store_true", help="overwrite an existing run directory")
        p.add_argument("--threads", type=int, default=None)
        if seed:
            p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("optimize", help="minimize D/J over coupling profiles")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--budget", type=int, default=None)
    common(p)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("transport", help="transmission curve and exact J, D")
    p.add_argument("--config", required=True)
    p.add_argument("--energy-grid", default="-2.0:2.0:401")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--mu-l", type=float, default=math.inf)
    p.add_argument("--mu-r", type=float, default=-math.inf)
    p.add_argument("--method", choices=("residue", "quadrature"), default="residue")
    p.add_argument("--tolerance", type=float, default=1e-9)
    common(p)
    p.set_defaults(func=_cmd_transport)

    p = sub.add_parser("simulate", help="stochastic trajectory ensembles")
    p.add_argument("--config", required=True)
    p.add_argument("--ticks", type=int, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--trajectories", type=int, default=8)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--reproject-every", type=int, default=50)
    p.add_argument("--discard-first", type=int, default=200)
    common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("variance", help="exact number-variance curves")
    p.add_argument("--config", required=True)
    p.add_argument("--times", default="log:0.5:500:40")
    p.add_argument("--bond", type=int, default=None)
    common(p)
    p.set_defaults(func=_cmd_variance)

    p = sub.add_parser("asymptotics", help="closed-form infinite-chain results")
    p.add_argument("--what", choices=("variance", "correlator", "crossover", "localization"), required=True)
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--grid", default="0.5:100:40")
    p.add_argument("--current", type=float, default=0.5)
    p.add_argument("--diffusion", type=float, default=1e-3)
    p.add_argument("--disorder", type=float, default=0.1)
    p.set_defaults(func=_cmd_asymptotics)

    p = sub.add_parser("experiment", help="config-driven campaigns")
    p.add_argument("--config", required=True)
    common(p)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("validate", help="dense-oracle validation (N <= 4)")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--sigma", type=float, nargs="*", default=None)
    common(p)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TickchainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
