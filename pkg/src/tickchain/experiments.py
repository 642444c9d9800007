"""Config-driven reproduction campaigns: Fano scaling, disorder sweeps,
thermal sweeps, crossover checks, and the dense-oracle validation, with
reproducible tables and run manifests."""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import crossover_time
from .chain import ChainSpec, apply_coupling_disorder, apply_onsite_disorder, build_effective_hamiltonian, stream
from .errors import DegenerateSpectrumError, InvalidSpecError, NoCrossoverError
from .landauer import lb_numeric, spectral_decompose, transport_summary, wbl_finite_bias
from .moments import ExactMoments
from .optimize import auto_window, fit_power_law, optimize_couplings
from .oracle import validate_against_dense_oracle

__all__ = [
    "ExperimentConfig",
    "ResultTable",
    "disorder_fano",
    "run_scaling",
    "run_disorder",
    "run_thermal",
    "run_validate",
    "run_experiment",
]

_KINDS = ("scaling", "disorder_onsite", "disorder_coupling", "thermal", "crossover", "validate")


def _canonical_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:16]


@dataclass(eq=False)
class ExperimentConfig:
    """One campaign: what to sweep, how many samples, which seed."""

    kind: str
    sweep: dict
    samples: int = 1
    seed: int = 0
    output_dir: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidSpecError(f"unknown experiment kind {self.kind!r}; choose from {_KINDS}")
        if not self.sweep and self.kind != "validate":
            raise InvalidSpecError("sweep grid must be non-empty")
        if self.samples < 1:
            raise InvalidSpecError("samples must be >= 1")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "sweep": self.sweep,
            "samples": self.samples,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "options": self.options,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(
            kind=d["kind"],
            sweep=d.get("sweep", {}),
            samples=d.get("samples", 1),
            seed=d.get("seed", 0),
            output_dir=d.get("output_dir"),
            options=d.get("options", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @property
    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        return _canonical_hash(d)


@dataclass(eq=False)
class ResultTable:
    """Tagged tabular output plus a reproducibility manifest."""

    columns: dict
    manifest: dict

    def __post_init__(self):
        lengths = {k: len(v) for k, v in self.columns.items()}
        if len(set(lengths.values())) > 1:
            raise InvalidSpecError(f"ragged columns: {lengths}")
        for key in ("config_hash", "seed", "version", "wall_time_s"):
            if key not in self.manifest:
                raise InvalidSpecError(f"manifest missing {key!r}")

    def write(self, directory, stem: str) -> list:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path = directory / f"{stem}.csv"
        names = list(self.columns)
        rows = np.column_stack([np.asarray(self.columns[k], dtype=float) for k in names])
        header = ",".join(names)
        with open(csv_path, "w") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
        man_path = directory / f"{stem}_manifest.json"
        tmp = man_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.manifest, indent=2, sort_keys=True, default=str) + "\n")
        tmp.replace(man_path)
        return [csv_path, man_path]


def _manifest(config: ExperimentConfig, t0: float, extra: dict | None = None) -> dict:
    man = {
        "config_hash": config.config_hash,
        "config": config.to_dict(),
        "seed": config.seed,
        "version": __version__,
        "wall_time_s": round(time.time() - t0, 3),
        "error_convention": "all tabulated errors are standard errors of the mean",
    }
    if extra:
        man.update(extra)
    return man


def run_scaling(config: ExperimentConfig):
    """Optimize couplings per chain length and fit the D/J power law.
    Chains successive lengths through warm starts (the apodization window
    carries over)."""
    if config.kind != "scaling":
        raise InvalidSpecError("config.kind must be 'scaling'")
    t0 = time.time()
    lengths = sorted(int(n) for n in config.sweep["n_sites"])
    gamma = float(config.options.get("gamma", 1.0))
    budget = config.options.get("budget")
    fanos, iters, windows = [], [], {}
    prev = None
    for n in lengths:
        prof = optimize_couplings(n, gamma=gamma, budget=budget, seed=config.seed, init=prev)
        m = auto_window(n)
        prev = (prof.values[len(prof.values) // 2], prof.values[:m])
        fanos.append(prof.objective)
        iters.append(prof.iterations)
        windows[n] = prof.values.tolist()
    table = ResultTable(
        {"n_sites": lengths, "fano": fanos, "evaluations": iters},
        _manifest(config, t0, {"profiles": windows}),
    )
    fit = fit_power_law(lengths, fanos) if len(lengths) >= 3 else None
    return table, fit


def disorder_transport(spec: ChainSpec, kind: str, strength: float, rng):
    """Transport summary of one disorder realization: residue route with
    the quadrature fallback on (near-)defective spectra."""
    if kind == "disorder_onsite":
        _, shifts = apply_onsite_disorder(spec, strength, rng)
        sample = spec
    else:
        sample = apply_coupling_disorder(spec, strength, rng)
        shifts = None
    h = build_effective_hamiltonian(sample, shifts)
    try:
        return transport_summary(spectral_decompose(h))
    except DegenerateSpectrumError:
        return lb_numeric(h, math.inf, -math.inf, math.inf)


def run_disorder(config: ExperimentConfig):
    """Disorder-averaged noise over (N, strength) with per-N power-law
    fits of the excess against relative strength on the weakest points
    (the excess is (D_W - D)/J for on-site disorder and the Fano-factor
    difference for coupling disorder), plus a c_N-vs-N fit when three or
    more lengths are present."""
    if config.kind not in ("disorder_onsite", "disorder_coupling"):
        raise InvalidSpecError("config.kind must be a disorder kind")
    t0 = time.time()
    lengths = sorted(int(n) for n in config.sweep["n_sites"])
    strengths = [float(w) for w in config.sweep["strength"]]  # relative to bulk g
    fit_fraction = float(config.options.get("fit_fraction", 0.6))
    budget = config.options.get("budget")
    onsite = config.kind == "disorder_onsite"
    cols = {"n_sites": [], "strength": [], "excess_mean": [], "excess_stderr": [], "fano_mean": [], "fano_clean": []}
    fits = {}
    c_values = []
    prev = None
    for n in lengths:
        prof = optimize_couplings(n, budget=budget, seed=config.seed, init=prev)
        m = auto_window(n)
        prev = (prof.values[len(prof.values) // 2], prof.values[:m])
        spec = ChainSpec(n, prof.values)
        g_bulk = float(np.median(prof.values))
        s_clean = transport_summary(spectral_decompose(build_effective_hamiltonian(spec)))
        excesses = []
        for iw, w_rel in enumerate(strengths):
            w_abs = w_rel * g_bulk
            if w_abs == 0.0:
                per = np.zeros(config.samples)
                fano_mean = s_clean.fano
            else:
                summaries = [
                    disorder_transport(spec, config.kind, w_abs, stream(config.seed, n, iw, k))
                    for k in range(config.samples)
                ]
                if onsite:
                    per = np.array([(s.diffusion - s_clean.diffusion) / s_clean.current for s in summaries])
                else:
                    per = np.array([s.fano - s_clean.fano for s in summaries])
                fano_mean = float(np.mean([s.fano for s in summaries]))
            cols["n_sites"].append(n)
            cols["strength"].append(w_rel)
            cols["excess_mean"].append(per.mean())
            cols["excess_stderr"].append(per.std(ddof=1) / math.sqrt(len(per)) if len(per) > 1 else 0.0)
            cols["fano_mean"].append(fano_mean)
            cols["fano_clean"].append(s_clean.fano)
            excesses.append(per.mean())
        ws = np.array(strengths)
        ex = np.array(excesses)
        keep = ws > 0.0
        ws, ex = ws[keep], ex[keep]
        order = np.argsort(ws)
        take = order[: max(3, int(math.ceil(fit_fraction * ws.size)))]
        if take.size >= 3 and np.all(ex[take] > 0.0):
            fits[n] = fit_power_law(ws[take], ex[take])
            c_values.append(fits[n].prefactor)
        else:
            fits[n] = None
            c_values.append(math.nan)
    c_fit = None
    if len(lengths) >= 3 and np.all(np.isfinite(c_values)):
        c_fit = fit_power_law(lengths, c_values)
    table = ResultTable(
        cols,
        _manifest(
            config,
            t0,
            {
                "alpha_per_n": {str(n): (None if f is None else {"exponent": f.exponent, "err": f.exponent_err, "prefactor": f.prefactor}) for n, f in fits.items()},
                "c_n_fit": None if c_fit is None else {"exponent": c_fit.exponent, "err": c_fit.exponent_err},
            },
        ),
    )
    return table, fits, c_fit


def run_thermal(config: ExperimentConfig):
    """Per entropy value: the exact finite-bias current/noise (Lyapunov
    route), the wide-band identity from the clean baseline, and the
    predicted log-to-linear crossover in time and tick number."""
    if config.kind != "thermal":
        raise InvalidSpecError("config.kind must be 'thermal'")
    t0 = time.time()
    n = int(config.options.get("n_sites", 20))
    budget = config.options.get("budget")
    prof = optimize_couplings(n, budget=budget, seed=config.seed)
    base = ChainSpec(n, prof.values)
    s0 = transport_summary(spectral_decompose(build_effective_hamiltonian(base)))
    cols = {"sigma": [], "current": [], "diffusion": [], "diffusion_wbl": [], "t_star": [], "n_star": []}
    for sigma in config.sweep["sigma"]:
        sigma = float(sigma)
        if math.isinf(sigma):
            j, d = s0.current, s0.diffusion
            d_wbl = s0.diffusion
        else:
            spec = ChainSpec.from_entropy(n, prof.values, sigma)
            ex = ExactMoments(spec)
            j, d = ex.current, ex.diffusion
            d_wbl = wbl_finite_bias(s0.current, s0.diffusion, sigma).diffusion
        try:
            t_star = crossover_time(j, d)
        except NoCrossoverError:
            t_star = math.nan  # noise too large for a log regime at this entropy
        cols["sigma"].append(sigma)
        cols["current"].append(j)
        cols["diffusion"].append(d)
        cols["diffusion_wbl"].append(d_wbl)
        cols["t_star"].append(t_star)
        cols["n_star"].append(j * t_star)
    table = ResultTable(cols, _manifest(config, t0, {"profile": prof.values.tolist(), "clean": {"J": s0.current, "D": s0.diffusion}}))
    return table


def run_validate(config: ExperimentConfig):
    """Dense-oracle validation for N <= 4 at the configured biases."""
    t0 = time.time()
    n = int(config.options.get("n_sites", 3))
    sigmas = tuple(float(s) for s in config.options.get("sigmas", (math.inf, 1.0, 3.0)))
    report = validate_against_dense_oracle(n, sigmas=sigmas)
    rows = {"case": list(range(len(report.cases))), "worst_deviation": [max(v for k, v in c.items() if k != "label") for c in report.cases]}
    table = ResultTable(rows, _manifest(config, t0, {"cases": report.cases, "passed_1e-8": report.passed(1e-8)}))
    return table, report


def run_experiment(config: ExperimentConfig):
    """Dispatch a campaign by kind; returns (table, extras...)."""
    if config.kind == "scaling":
        return run_scaling(config)
    if config.kind in ("disorder_onsite", "disorder_coupling"):
        return run_disorder(config)
    if config.kind == "thermal":
        return (run_thermal(config),)
    if config.kind == "validate":
        return run_validate(config)
    raise InvalidSpecError(f"experiment kind {config.kind!r} not runnable")
