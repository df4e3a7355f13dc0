"""
Experiment harness: seeded scenario sweeps, solver runs from a shared
initialization, per-run trajectory CSVs and aggregate tables.

Trajectory CSV columns, in order::

    seed,solver,variant,iter,wsr_nats,cum_seconds,mu_iters

Only ``cum_seconds`` depends on the machine; every other column is a pure
function of the configuration.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calculus import EtaMode
from .lagrange import SearchOptions
from .mimo import run_mimo
from .miso import SolverConfig, run
from .system_model import (GeometryConfig, dbm_to_linear, generate_mimo,
                           generate_miso, init_rng, random_beamformers_mimo,
                           random_beamformers_miso)

__all__ = [
    "ConfigError", "SolverSpec", "ExperimentConfig", "load_config",
    "default_config", "run_seed", "run_experiment", "aggregate",
    "write_trajectories", "sweep", "relaxed_bisection", "CSV_COLUMNS",
    "DEFAULT_SOLVERS",
]

CSV_COLUMNS = ("seed", "solver", "variant", "iter", "wsr_nats",
               "cum_seconds", "mu_iters")

ALGORITHMS = {
    "wmmse": ("l_m_w", "m_l_w"),
    "fp": ("unconventional", "conv_gamma_first", "conv_phi_first"),
    "mm": (),
    "mm_plus": (),
    "fp_plus": (),
}

DEFAULT_SOLVERS = (("wmmse", "l_m_w"), ("fp", "unconventional"), ("mm", None),
                 ("mm_plus", None), ("fp_plus", None))

# monotonicity slack used when classifying relaxed-bisection runs
DESCENT_TOL = 1e-9
SHORTFALL_TOL = 1e-3


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` names the bad field."""

    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}")
        self.path = path


@dataclass(frozen=True)
class SolverSpec:
    algorithm: str
    variant: str = None

    @property
    def label(self):
        return self.algorithm if self.variant is None \
            else f"{self.algorithm}:{self.variant}"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce an experiment.

    ``antennas`` is the base-station array size (MISO) or the transmit array
    size of every link (MIMO). Power is given in dBm; 0 dBm is unit power.
    """
    system: str = "miso"
    users: int = 4
    antennas: int = 4
    rx_antennas: int = 4
    streams: int = 4
    power_dbm: float = 0.0
    weights: object = 1.0
    noise: float = 1.0
    geometry: dict = field(default_factory=dict)
    solvers: tuple = tuple(SolverSpec(a, v) for a, v in DEFAULT_SOLVERS)
    seeds: tuple = tuple(range(100))
    stop_epsilon: float = 1e-6
    max_iters: int = 10000
    bisection: SearchOptions = field(default_factory=SearchOptions)
    eta_mode: EtaMode = EtaMode.EXACT
    out_dir: str = "results"

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("$", "config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        for key in doc:
            if key not in names:
                raise ConfigError(key, "unknown field")
        kw = dict(doc)
        if "solvers" in kw:
            kw["solvers"] = _parse_solvers(kw["solvers"])
        if "seeds" in kw:
            kw["seeds"] = _parse_seeds(kw["seeds"])
        if "bisection" in kw:
            b = kw["bisection"]
            if not isinstance(b, dict):
                raise ConfigError("bisection", "must be an object")
            try:
                kw["bisection"] = SearchOptions(**b)
            except TypeError as exc:
                raise ConfigError("bisection", str(exc)) from None
        if "eta_mode" in kw:
            try:
                kw["eta_mode"] = EtaMode(kw["eta_mode"])
            except ValueError:
                raise ConfigError("eta_mode",
                                  "must be 'exact' or 'frobenius'") from None
        if "geometry" in kw:
            g = kw["geometry"]
            gnames = {f.name for f in dataclasses.fields(GeometryConfig)}
            if not isinstance(g, dict):
                raise ConfigError("geometry", "must be an object")
            for key in g:
                if key not in gnames or key == "seed":
                    raise ConfigError(f"geometry.{key}", "unknown field")
            kw["geometry"] = {k: tuple(v) if isinstance(v, list) else v
                              for k, v in g.items()}
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self):
        if self.system not in ("miso", "mimo"):
            raise ConfigError("system", "must be 'miso' or 'mimo'")
        for name in ("users", "antennas", "rx_antennas", "streams",
                     "max_iters"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(name, "must be a positive integer")
        if self.system == "mimo" and \
                self.streams > min(self.antennas, self.rx_antennas):
            raise ConfigError("streams", "exceeds min(antennas, rx_antennas)")
        if not self.solvers:
            raise ConfigError("solvers", "need at least one solver")
        if not self.seeds:
            raise ConfigError("seeds", "need at least one seed")
        if not self.stop_epsilon > 0:
            raise ConfigError("stop_epsilon", "must be positive")
        if not self.noise > 0:
            raise ConfigError("noise", "must be positive")
        w = np.asarray(self.weights, dtype=float)
        if w.ndim > 1 or (w.ndim == 1 and w.size != self.users) \
                or np.any(w < 0):
            raise ConfigError("weights",
                              "must be a nonnegative scalar or K-vector")
        try:
            GeometryConfig(**self.geometry)
        except (TypeError, ValueError) as exc:
            raise ConfigError("geometry", str(exc)) from None

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["solvers"] = [{"algorithm": s.algorithm, "variant": s.variant}
                        for s in self.solvers]
        d["seeds"] = list(self.seeds)
        d["eta_mode"] = EtaMode(self.eta_mode).value
        w = self.weights
        d["weights"] = w.tolist() if isinstance(w, np.ndarray) else w
        return d

    @property
    def power(self):
        return float(dbm_to_linear(self.power_dbm))

    def solver_config(self, spec, search=None):
        return SolverConfig(algorithm=spec.algorithm, variant=spec.variant,
                            stop_epsilon=self.stop_epsilon,
                            max_iters=self.max_iters,
                            search=search or self.bisection,
                            eta_mode=self.eta_mode)

    def scenario(self, seed):
        geo = GeometryConfig(seed=seed, **self.geometry)
        if self.system == "miso":
            return generate_miso(geo, self.users, self.antennas,
                                 self.weights, self.noise, self.power)
        return generate_mimo(geo, self.users, self.antennas,
                             self.rx_antennas, self.streams, self.weights,
                             self.noise, self.power)

    def initial_point(self, scn, seed):
        rng = init_rng(seed)
        if self.system == "miso":
            return random_beamformers_miso(scn, rng)
        return random_beamformers_mimo(scn, rng)


def _parse_solvers(items):
    if not isinstance(items, list):
        raise ConfigError("solvers", "must be a list")
    out = []
    for i, it in enumerate(items):
        path = f"solvers[{i}]"
        if isinstance(it, str):
            it = {"algorithm": it}
        if not isinstance(it, dict) or "algorithm" not in it:
            raise ConfigError(path, "needs an 'algorithm' field")
        extra = set(it) - {"algorithm", "variant"}
        if extra:
            raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown field")
        alg, var = it["algorithm"], it.get("variant")
        if alg not in ALGORITHMS:
            raise ConfigError(f"{path}.algorithm",
                              f"unknown algorithm {alg!r}")
        if var is not None and var not in ALGORITHMS[alg]:
            raise ConfigError(f"{path}.variant",
                              f"unknown variant {var!r} for {alg}")
        out.append(SolverSpec(alg, var))
    return tuple(out)


def _parse_seeds(s):
    if isinstance(s, dict):
        extra = set(s) - {"count", "base"}
        if extra:
            raise ConfigError(f"seeds.{sorted(extra)[0]}", "unknown field")
        n = s.get("count")
        base = s.get("base", 0)
        if not isinstance(n, int) or n < 0:
            raise ConfigError("seeds.count", "must be a nonnegative integer")
        if not isinstance(base, int) or base < 0:
            raise ConfigError("seeds.base", "must be a nonnegative integer")
        return tuple(range(base, base + n))
    if isinstance(s, list):
        for i, v in enumerate(s):
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ConfigError(f"seeds[{i}]",
                                  "must be a nonnegative integer")
        return tuple(s)
    raise ConfigError("seeds", "must be a list or {count, base}")


def load_config(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from None
    return ExperimentConfig.from_dict(doc)


def default_config():
    return ExperimentConfig()


# --------------------------------------------------------------------------
# Running
# --------------------------------------------------------------------------
@dataclass
class RunRecord:
    seed: int
    spec: SolverSpec
    traj: object


def run_seed(config, seed, solvers=None, searches=None):
    """Run every solver on one seed from the same initial point.

    ``searches`` optionally maps a solver index to its own multiplier-search
    options.
    """
    scn = config.scenario(seed)
    init = config.initial_point(scn, seed)
    runner = run if config.system == "miso" else run_mimo
    out = []
    for i, spec in enumerate(solvers or config.solvers):
        search = (searches or {}).get(i)
        traj = runner(scn, config.solver_config(spec, search), init)
        traj.beamformers = None  # keep records light across processes
        out.append(RunRecord(seed, spec, traj))
    return out


def _seed_job(args):
    config, seed, solvers, searches = args
    return run_seed(config, seed, solvers, searches)


def run_experiment(config, parallel=False, solvers=None, searches=None,
                   workers=None):
    """All seeds, in seed order; numeric results do not depend on
    ``parallel``."""
    jobs = [(config, s, solvers, searches) for s in config.seeds]
    if parallel:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_seed_job, jobs))
    else:
        chunks = [_seed_job(j) for j in jobs]
    return [r for chunk in chunks for r in chunk]


def trajectory_rows(rec, variant=None):
    var = rec.spec.variant if variant is None else variant
    t = rec.traj
    for i in range(len(t.wsr)):
        yield (rec.seed, rec.spec.algorithm, var or "", i, repr(t.wsr[i]),
               repr(t.seconds[i]), t.mu_iters[i])


def write_trajectories(records, out_dir, variants=None):
    """One CSV per run under ``out_dir/runs``; returns the paths."""
    run_dir = os.path.join(out_dir, "runs")
    os.makedirs(run_dir, exist_ok=True)
    paths = []
    for n, rec in enumerate(records):
        var = (variants or {}).get(n)
        tag = rec.spec.label if var is None else f"{rec.spec.algorithm}:{var}"
        name = f"seed{rec.seed:04d}_{tag.replace(':', '-')}.csv"
        path = os.path.join(run_dir, name)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(trajectory_rows(rec, var))
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())
        paths.append(path)
    return paths


def _pad(seqs):
    # last-value carry-forward to the longest sequence
    n = max(len(s) for s in seqs)
    return np.array([list(s) + [s[-1]] * (n - len(s)) for s in seqs])


def _on_grid(times, values, grid):
    idx = np.searchsorted(np.asarray(times), grid, side="right") - 1
    return np.asarray(values)[np.clip(idx, 0, None)]


def aggregate(records, grid_points=100):
    """Per-solver means over seeds, keyed by solver label."""
    by = {}
    for rec in records:
        by.setdefault(rec.spec.label, []).append(rec)
    out = {}
    for label, recs in by.items():
        ok = [r for r in recs if r.traj.error is None]
        entry = {
            "seeds": [r.seed for r in recs],
            "final_wsr": [r.traj.final_wsr for r in recs],
            "iterations": [r.traj.iterations for r in recs],
            "failures": {str(r.seed): r.traj.error for r in recs
                         if r.traj.error is not None},
        }
        if ok:
            wsr = _pad([r.traj.wsr for r in ok])
            secs = np.array([r.traj.total_seconds for r in ok])
            grid = np.linspace(0.0, secs.max(), grid_points)
            on_grid = np.array([_on_grid(r.traj.seconds, r.traj.wsr, grid)
                                for r in ok])
            entry.update(
                mean_wsr_by_iter=wsr.mean(axis=0).tolist(),
                time_grid=grid.tolist(),
                mean_wsr_by_time=on_grid.mean(axis=0).tolist(),
                mean_final_wsr=float(np.mean([r.traj.final_wsr
                                              for r in ok])),
                mean_iterations=float(np.mean([r.traj.iterations
                                               for r in ok])),
                mean_seconds=float(secs.mean()),
                std_seconds=float(secs.std()),
            )
        out[label] = entry
    return out


# --------------------------------------------------------------------------
# Studies
# --------------------------------------------------------------------------
SWEEP_AXES = {"users": "users", "antennas": "antennas"}
SWEEP_SOLVERS = (SolverSpec("mm"), SolverSpec("mm_plus"))


def sweep(config, axis, values, parallel=False):
    """Mean convergence time of WSR-MM and WSR-MM+ along one axis.

    Returns a list of row dicts, one per (value, solver).
    """
    if axis not in SWEEP_AXES:
        raise ConfigError("axis", "must be 'users' or 'antennas'")
    values = list(values)
    if not values:
        raise ConfigError("values", "need at least one value")
    if values != sorted(values):
        raise ConfigError("values", "must be sorted ascending")
    rows = []
    for v in values:
        cfg = dataclasses.replace(config, **{SWEEP_AXES[axis]: int(v)})
        cfg.validate()
        agg = aggregate(run_experiment(cfg, parallel, SWEEP_SOLVERS))
        for spec in SWEEP_SOLVERS:
            a = agg[spec.label]
            rows.append({"axis": axis, "value": int(v), "solver": spec.label,
                         "mean_seconds": a.get("mean_seconds"),
                         "std_seconds": a.get("std_seconds"),
                         "mean_iterations": a.get("mean_iterations"),
                         "mean_final_wsr": a.get("mean_final_wsr"),
                         "failures": len(a["failures"])})
    return rows


def _descends(wsr, tol=DESCENT_TOL):
    return bool(np.any(np.diff(wsr) < -tol))


def relaxed_bisection(config, thresholds, parallel=False):
    """WSR-MM with the interval-width stopping rule ``2**-i`` for each ``i``.

    Each seed also runs WSR-MM at the configured (exact) tolerance and the
    WSR-MM+ reference. Returns ``(records, variants, summary)``: the run
    records, a map from record index to CSV variant tag, and per-threshold
    statistics against the exact run.
    """
    thresholds = list(thresholds)
    if not thresholds:
        raise ConfigError("thresholds", "need at least one threshold")
    for i in thresholds:
        if not isinstance(i, int) or i < 0:
            raise ConfigError("thresholds", "must be nonnegative integers")
    solvers = [SolverSpec("mm"), SolverSpec("mm_plus")] + \
        [SolverSpec("mm") for _ in thresholds]
    searches = {2 + n: SearchOptions.relaxed(i, config.bisection.max_iter)
                for n, i in enumerate(thresholds)}
    records = run_experiment(config, parallel, solvers, searches)
    per_seed = len(solvers)
    variants = {}
    summary = {str(i): {"threshold": 2.0 ** -i, "non_monotone": [],
                        "shortfall": [], "max_abs_final_gap": 0.0}
               for i in thresholds}
    for base in range(0, len(records), per_seed):
        exact = records[base].traj
        variants[base] = "exact"
        variants[base + 1] = ""
        for n, i in enumerate(thresholds):
            rec = records[base + 2 + n]
            variants[base + 2 + n] = f"relaxed_{i}"
            s = summary[str(i)]
            gap = exact.final_wsr - rec.traj.final_wsr
            if _descends(rec.traj.wsr):
                s["non_monotone"].append(rec.seed)
            if gap > SHORTFALL_TOL:
                s["shortfall"].append(rec.seed)
            s["max_abs_final_gap"] = max(s["max_abs_final_gap"], abs(gap))
    n_seeds = len(config.seeds)
    for s in summary.values():
        bad = set(s["non_monotone"]) | set(s["shortfall"])
        s["affected_fraction"] = len(bad) / n_seeds
    return records, variants, summary
