"""Ensemble orchestration and statistical reports.

Runs R independent replications of a model at each scaling level n, with
seeds derived from (seed, n, replication) so results do not depend on
execution order or worker count.  On top of the ensembles it builds the
three reports used for verification: a convergence report against a
deterministic limit solution, a moment-growth report, and a martingale
report from repeated generator probes.
"""

from __future__ import annotations

import concurrent.futures
import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .engine import RecordSpec, Trajectory, simulate, martingale_probe
from .flows import StepControl
from .limits import LimitSolution
from .measures import AtomicMeasure, TestFunction, pair
from .models import initial_measure, model_from_config


class InsufficientLevels(ValueError):
    """Fewer than three usable scaling levels for a slope fit."""


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce an ensemble run."""

    model: str
    params: dict = field(default_factory=dict)
    init: dict = field(default_factory=dict)
    n_levels: Sequence[int] = (100,)
    replications: int = 2
    T: float = 1.0
    grid_dt: float = 0.1
    seed: int = 0
    observables: Optional[Sequence[str]] = None
    moment_order: int = 1
    jump_cap: int = 10 ** 8
    max_h: float = 1e-3
    out_dir: Optional[str] = None

    def __post_init__(self):
        levels = [int(n) for n in self.n_levels]
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("n_levels must be strictly increasing")
        if self.replications < 2:
            raise ValueError("replications must be >= 2")
        if self.T <= 0:
            raise ValueError("T must be positive")
        self.n_levels = levels

    def as_dict(self) -> dict:
        d = asdict(self)
        d["n_levels"] = list(self.n_levels)
        if d["observables"] is not None:
            d["observables"] = list(d["observables"])
        return d

    def digest(self) -> str:
        d = self.as_dict()
        d.pop("out_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def scaled_init(model_name: str, init: dict, n: int) -> dict:
    """Turn per-unit initial data into integer counts at level n."""
    out = copy.deepcopy(init)
    if model_name in ("sir", "sir_unscaled", "age_sir"):
        for key in ("S", "I", "R"):
            v = out.get(key, 0)
            if isinstance(v, list):
                out[key] = [[a, int(round(c * n))] for a, c in v]
            else:
                out[key] = int(round(v * n))
    elif "atoms" in out:
        out["atoms"] = [row[:-1] + [int(round(row[-1] * n))]
                        for row in out["atoms"]]
    elif "count" in out:
        out["count"] = int(round(out["count"] * n))
    return out


@dataclass
class ReplicationResult:
    n: int
    rep: int
    status: str                      # "ok" or "failed"
    error: str = ""
    times: Optional[np.ndarray] = None
    observables: dict = field(default_factory=dict)
    jump_counts: dict = field(default_factory=dict)
    final_mass: float = 0.0
    warnings: list = field(default_factory=list)


@dataclass
class EnsembleResult:
    config: ExperimentConfig
    results: dict                    # n -> list[ReplicationResult]
    manifest: dict

    def successes(self, n: int) -> list:
        return [r for r in self.results[n] if r.status == "ok"]


def _run_replication(cfg_dict: dict, n: int, rep: int) -> ReplicationResult:
    """One seeded replication.  Top-level so a process pool can import it."""
    cfg = ExperimentConfig(**cfg_dict)
    model = model_from_config({"model": cfg.model, "params": cfg.params,
                               "n": n})
    m0 = initial_measure(model, scaled_init(cfg.model, cfg.init, n))
    seed = np.random.SeedSequence([cfg.seed, n, rep])
    record = RecordSpec(grid_dt=cfg.grid_dt, observables=cfg.observables)
    try:
        traj = simulate(model, m0, cfg.T, seed, record=record,
                        step_control=StepControl(max_h=cfg.max_h),
                        jump_cap=cfg.jump_cap)
    except Exception as e:                       # noqa: BLE001
        return ReplicationResult(n, rep, "failed",
                                 error=f"{type(e).__name__}: {e}")
    return ReplicationResult(
        n, rep, "ok", times=traj.times,
        observables={k: np.asarray(v) for k, v in traj.observables.items()},
        jump_counts=dict(sorted(traj.jump_counts.items())),
        final_mass=traj.final.total_mass(),
        warnings=[[float(t), str(w)] for t, w in traj.warnings])


def run_ensemble(config: ExperimentConfig,
                 workers: int = 1) -> EnsembleResult:
    """Run R replications at every scaling level and assemble a manifest.

    Replications are independent and may run concurrently; the manifest is
    always written in (n, replication) order, so identical configs produce
    byte-identical manifests regardless of worker count.  A replication
    that raises is recorded as failed without touching its siblings.
    """
    cfg_dict = config.as_dict()
    jobs = [(n, rep) for n in config.n_levels
            for rep in range(config.replications)]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            futs = {pool.submit(_run_replication, cfg_dict, n, rep): (n, rep)
                    for n, rep in jobs}
            done = {futs[f]: f.result()
                    for f in concurrent.futures.as_completed(futs)}
        ordered = [done[j] for j in jobs]
    else:
        ordered = [_run_replication(cfg_dict, n, rep) for n, rep in jobs]

    results = {n: [] for n in config.n_levels}
    for r in ordered:
        results[r.n].append(r)

    entries = []
    for r in ordered:
        entry = {"n": r.n, "rep": r.rep, "status": r.status}
        if r.status == "ok":
            entry["jump_counts"] = r.jump_counts
            entry["final_mass"] = r.final_mass
            if r.warnings:
                entry["warnings"] = r.warnings
        else:
            entry["error"] = r.error
        entries.append(entry)
    manifest = {"config": {k: v for k, v in cfg_dict.items()
                           if k != "out_dir"},
                "config_hash": config.digest(),
                "version": _version(),
                "replications": entries}

    if config.out_dir is not None:
        _persist(config, ordered, manifest)
    return EnsembleResult(config, results, manifest)


def _version() -> str:
    from . import __version__
    return __version__


def _persist(config: ExperimentConfig, ordered: list, manifest: dict) -> None:
    out = config.out_dir
    traj_dir = os.path.join(out, "trajectories")
    os.makedirs(traj_dir, exist_ok=True)
    for r in ordered:
        if r.status != "ok":
            continue
        path = os.path.join(traj_dir, f"n{r.n}_rep{r.rep:04d}.csv")
        with open(path, "w") as f:
            f.write("time,observable,value\n")
            for name, vals in r.observables.items():
                for t, v in zip(r.times, vals):
                    f.write(f"{float(t)!r},{name},{float(v)!r}\n")
    with open(os.path.join(out, "manifest.json"), "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=1)
        f.write("\n")


@dataclass
class ConvergenceReport:
    n_levels: list
    errors: list                    # mean over replications of sup_t distance
    std_errors: list
    effective_R: list
    slope: Optional[float]
    slope_ci: Optional[tuple]
    slope_window: tuple
    verdict: str                    # "pass", "fail", "exact-match"
    config_hash: str = ""
    version: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict in ("pass", "exact-match")

    def as_dict(self) -> dict:
        return {"n_levels": self.n_levels, "errors": self.errors,
                "std_errors": self.std_errors,
                "effective_R": self.effective_R, "slope": self.slope,
                "slope_ci": list(self.slope_ci) if self.slope_ci else None,
                "slope_window": list(self.slope_window),
                "verdict": self.verdict, "config_hash": self.config_hash,
                "version": self.version}


def lln_report(ensemble: EnsembleResult, limit: LimitSolution,
               panel: Optional[Sequence[str]] = None,
               slope_window: tuple = (-0.65, -0.35)) -> ConvergenceReport:
    """Compare renormalized ensembles to a deterministic limit solution.

    err(n) is the mean over replications of the sup over grid times of the
    panel distance between the renormalized empirical measure and the limit,
    where the panel distance is the largest discrepancy of any panel
    pairing.  The decay rate of err(n) is fitted by least squares on
    (log n, log err); three levels with nonzero error are required.
    """
    config = ensemble.config
    levels = [n for n in config.n_levels if ensemble.successes(n)]
    if len(levels) < 3:
        raise InsufficientLevels(f"{len(levels)} usable levels, need >= 3")

    any_ok = ensemble.successes(levels[0])[0]
    names = list(panel) if panel is not None else list(any_ok.observables)
    model = model_from_config({"model": config.model, "params": config.params,
                               "n": 1})
    limit_vals = np.array([[limit.pair(t, model.observables[name])
                            for t in any_ok.times] for name in names])

    errors, ses, eff = [], [], []
    for n in levels:
        reps = ensemble.successes(n)
        sups = np.empty(len(reps))
        for j, r in enumerate(reps):
            emp = np.array([r.observables[name] for name in names]) / n
            sups[j] = np.max(np.abs(emp - limit_vals))
        errors.append(float(np.mean(sups)))
        ses.append(float(np.std(sups, ddof=1) / math.sqrt(len(sups))))
        eff.append(len(reps))

    if max(errors) == 0.0:
        return ConvergenceReport(levels, errors, ses, eff, None, None,
                                 slope_window, "exact-match",
                                 config.digest(), _version())

    x = np.log(np.asarray(levels, dtype=float))
    y = np.log(np.asarray(errors))
    fit = stats.linregress(x, y)
    half = stats.t.ppf(0.975, len(levels) - 2) * fit.stderr
    ci = (fit.slope - half, fit.slope + half)
    in_window = slope_window[0] <= fit.slope <= slope_window[1]
    decreasing = all(b < a for a, b in zip(errors, errors[1:]))
    verdict = "pass" if (in_window and decreasing) else "fail"
    return ConvergenceReport(levels, errors, ses, eff, float(fit.slope),
                             ci, slope_window, verdict,
                             config.digest(), _version())


def moment_report(ensemble: EnsembleResult, p: int = 1) -> dict:
    """Growth check for the p-th moment of the renormalized total mass.

    For each grid time the ensemble mean of mass^p is computed per level;
    a line is fitted to its logarithm, so the reported slope bounds the
    exponential growth rate.  Also reports the worst-case running mass over
    all replications, which backs the pathwise moment bound.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    out = {"p": p, "levels": {}, "config_hash": ensemble.config.digest(),
           "version": _version()}
    for n in ensemble.config.n_levels:
        reps = ensemble.successes(n)
        if not reps:
            out["levels"][n] = {"effective_R": 0}
            continue
        masses = np.array([r.observables["mass"] for r in reps]) / n
        mean_p = np.mean(masses ** p, axis=0)
        times = reps[0].times
        if np.all(mean_p > 0):
            fit = stats.linregress(times, np.log(mean_p))
            slope, slope_se = float(fit.slope), float(fit.stderr)
        else:
            slope, slope_se = None, None
        out["levels"][n] = {
            "effective_R": len(reps),
            "times": times.tolist(),
            "mean_mass_p": mean_p.tolist(),
            "log_growth_slope": slope,
            "log_growth_slope_se": slope_se,
            "max_sup_mass": float(np.max(masses)),
        }
    return out


def martingale_report(model, m0: AtomicMeasure, T: float, h: TestFunction,
                      R: int, seed: int,
                      step_control: StepControl = StepControl(),
                      var_window: tuple = (0.85, 1.15)) -> dict:
    """Replicated generator probes with the two martingale verdicts.

    Checks that the terminal martingale increment has mean zero within
    three standard errors, and that its sample variance matches the mean
    predicted quadratic variation within the given ratio window.
    """
    m_vals = np.empty(R)
    qv_vals = np.empty(R)
    for rep in range(R):
        m_vals[rep], qv_vals[rep] = martingale_probe(
            model, m0, T, h, np.random.SeedSequence([seed, rep]),
            step_control=step_control)
    mean = float(np.mean(m_vals))
    if R > 1 and np.any(m_vals != m_vals[0]):
        se = float(np.std(m_vals, ddof=1) / math.sqrt(R))
        var = float(np.var(m_vals, ddof=1))
    else:
        se, var = 0.0, 0.0
    mean_qv = float(np.mean(qv_vals))
    mean_zero = abs(mean) <= 3.0 * se if se > 0 else mean == 0.0
    if mean_qv > 0:
        ratio = var / mean_qv
        var_ok = var_window[0] <= ratio <= var_window[1]
    else:
        ratio = None
        var_ok = var == 0.0
    return {"R": R, "mean": mean, "se": se, "var": var,
            "mean_predicted_qv": mean_qv, "var_ratio": ratio,
            "mean_zero_pass": bool(mean_zero),
            "var_ratio_pass": bool(var_ok),
            "var_window": list(var_window), "version": _version()}
