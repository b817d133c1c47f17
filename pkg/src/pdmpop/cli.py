"""Command-line front door.

Subcommands mirror the library layers: ``simulate`` runs one stochastic
trajectory, ``limit`` one deterministic solve, ``converge`` an ensemble
plus convergence report, ``moments`` and ``martingale`` the statistical
checks, ``audit`` the model-assumption report, and ``residual`` the weak
equation cross-check on a limit solution.

Exit codes: 0 when everything passes, 2 when a report records a failure,
1 on configuration or runtime errors.  Each command reads a JSON config
via --config and writes plot-ready CSV plus a JSON report under --out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .audit import audit_assumptions
from .engine import RecordSpec, simulate
from .flows import StepControl
from .harness import (ExperimentConfig, lln_report, martingale_report,
                      moment_report, run_ensemble, scaled_init)
from .limits import (solve_age_sir_pde, solve_bell_anderson_pde,
                     solve_host_pathogen_particles, solve_sir_ode,
                     residual_check)
from .measures import AtomicMeasure
from .models import (LogNormalJitter, default_age_profiles, initial_measure,
                     model_from_config)


def _load_config(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


def _ensure_out(out: str) -> str:
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(out: str, name: str, payload: dict) -> None:
    with open(os.path.join(out, name), "w") as f:
        json.dump(payload, f, sort_keys=True, indent=1)
        f.write("\n")


def _write_rows(out: str, name: str, header: str, rows) -> None:
    with open(os.path.join(out, name), "w") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(str(v) for v in row) + "\n")


def _build(config: dict):
    model = model_from_config(config)
    n = int(config.get("n", 1))
    m0 = initial_measure(model,
                         scaled_init(config["model"], config.get("init", {}),
                                     n))
    return model, m0, n


def cmd_simulate(config: dict, seed: int, out: str, workers: int) -> int:
    model, m0, _ = _build(config)
    record = RecordSpec(grid_dt=float(config.get("grid_dt", 0.1)),
                        observables=config.get("observables"))
    traj = simulate(model, m0, float(config["T"]), seed, record=record,
                    step_control=StepControl(
                        max_h=float(config.get("max_h", 1e-3))))
    traj_dir = os.path.join(out, "trajectories")
    os.makedirs(traj_dir, exist_ok=True)
    traj.to_csv(os.path.join(traj_dir, "run.csv"))
    _write_json(out, "manifest.json",
                {"config": config, "seed": seed, "summary": traj.summary()})
    return 0


def solve_limit(config: dict):
    """Dispatch a deterministic solve from a CLI config dict."""
    name = config["model"]
    params = dict(config.get("params") or {})
    init = dict(config.get("init") or {})
    solver = dict(config.get("solver") or {})
    T = float(config["T"])
    dt = float(solver.get("dt", 1e-3))
    stride = int(solver.get("snapshot_stride", max(1, round(0.1 / dt))))
    if name == "sir":
        return solve_sir_ode(params.get("beta", 3.0), params.get("gamma", 1.0),
                             init.get("S", 0.99), init.get("I", 0.01),
                             init.get("R", 0.0), T, dt, snapshot_stride=stride)
    if name == "age_sir":
        if params:
            b0 = float(params.get("beta0", 3.0))
            g0 = float(params.get("gamma0", 1.0))
            beta = lambda a: np.full_like(np.asarray(a, dtype=float), b0)
            gamma = lambda a: np.full_like(np.asarray(a, dtype=float), g0)
        else:
            beta, gamma, _, _ = default_age_profiles()
        i0frac = init.get("I", 0.01)
        if isinstance(i0frac, (int, float)):
            width = float(solver.get("i0_width", 0.1))
            tot = float(i0frac)
            i0 = lambda a: np.where(np.asarray(a) < width, tot / width, 0.0)
        else:
            raise ValueError("age_sir limit init expects a scalar I fraction")
        return solve_age_sir_pde(beta, gamma, init.get("S", 0.99), i0,
                                 init.get("R", 0.0), T, dt,
                                 float(solver.get("da", dt)),
                                 float(solver.get("a_max", T + 2.0)),
                                 snapshot_stride=stride)
    if name == "bell_anderson":
        a_min = float(params.get("a_min", 1.0))
        b0 = float(params.get("b0", 1.0))
        d0 = float(params.get("d0", 0.1))
        g = lambda x: np.asarray(x, dtype=float)
        b = lambda x: np.where(np.asarray(x) >= 2.0 * a_min, b0, 0.0)
        d = lambda x: np.full_like(np.asarray(x, dtype=float), d0)
        center = float(solver.get("n0_center", 1.5 * a_min))
        halfw = float(solver.get("n0_halfwidth", 0.45 * a_min))

        def n0(x):
            y = (np.asarray(x, dtype=float) - center) / halfw
            out = np.zeros_like(y)
            inside = np.abs(y) < 1.0
            out[inside] = np.exp(-1.0 / (1.0 - y[inside] ** 2))
            return out

        return solve_bell_anderson_pde(g, b, d, n0, T, dt,
                                       float(solver.get("dx", 0.02)),
                                       float(solver.get("x_max", 32.0)),
                                       snapshot_stride=stride)
    if name == "host_pathogen":
        p = {"r": 2.0, "c": 1.0, "a_stim": 1.0, "gamma_mut": 0.5}
        p.update({k: v for k, v in params.items() if k in p})
        psi = LogNormalJitter(**{k: params[k] for k in
                                 ("delta_p", "delta_b", "sigma")
                                 if k in params})
        cap = int(solver.get("cap", 2000))
        P0, B0 = float(init.get("P", 1.0)), float(init.get("B", 1.0))
        mass = float(init.get("count", 1.0))
        xi0 = AtomicMeasure(np.full(cap, mass / cap), np.zeros(cap, dtype=int),
                            np.column_stack([np.full(cap, P0),
                                             np.full(cap, B0)]))
        return solve_host_pathogen_particles(
            p["r"], p["c"], p["a_stim"], p["gamma_mut"], psi, xi0, T, dt,
            cap=cap, seed=int(solver.get("seed", 0)),
            snapshot_stride=stride)
    raise ValueError(f"unknown model {name!r}")


def cmd_limit(config: dict, seed: int, out: str, workers: int) -> int:
    sol = solve_limit(config)
    model = model_from_config({"model": config["model"],
                               "params": config.get("params"), "n": 1})
    names = config.get("observables") or list(model.observables)
    sol.to_csv(os.path.join(out, "report.csv"),
               {nm: model.observables[nm] for nm in names})
    _write_json(out, "report.json", {"config": config, "meta": sol.meta})
    return 0


def cmd_converge(config: dict, seed: int, out: str, workers: int) -> int:
    cfg = ExperimentConfig(
        model=config["model"], params=dict(config.get("params") or {}),
        init=dict(config.get("init") or {}),
        n_levels=config["n_levels"], replications=int(config["replications"]),
        T=float(config["T"]), grid_dt=float(config.get("grid_dt", 0.1)),
        seed=seed, observables=config.get("observables"),
        out_dir=out)
    ens = run_ensemble(cfg, workers=workers)
    limit = solve_limit(config)
    window = tuple(config.get("slope_window", (-0.65, -0.35)))
    report = lln_report(ens, limit, panel=config.get("panel"),
                        slope_window=window)
    _write_json(out, "report.json", report.as_dict())
    _write_rows(out, "report.csv", "n,error,std_error,effective_R",
                zip(report.n_levels, report.errors, report.std_errors,
                    report.effective_R))
    return 0 if report.passed else 2


def cmd_moments(config: dict, seed: int, out: str, workers: int) -> int:
    cfg = ExperimentConfig(
        model=config["model"], params=dict(config.get("params") or {}),
        init=dict(config.get("init") or {}),
        n_levels=config["n_levels"], replications=int(config["replications"]),
        T=float(config["T"]), grid_dt=float(config.get("grid_dt", 0.1)),
        seed=seed, out_dir=out)
    ens = run_ensemble(cfg, workers=workers)
    p = int(config.get("p", 1))
    report = moment_report(ens, p)
    bound = config.get("mass_growth_bound")
    ok = True
    for n, lvl in report["levels"].items():
        if lvl.get("effective_R", 0) == 0:
            ok = False
        elif bound is not None and lvl["log_growth_slope"] is not None:
            if lvl["log_growth_slope"] > bound + 3 * lvl["log_growth_slope_se"]:
                ok = False
    report["passed"] = ok
    _write_json(out, "report.json", report)
    rows = []
    for n, lvl in report["levels"].items():
        for t, v in zip(lvl.get("times", []), lvl.get("mean_mass_p", [])):
            rows.append((n, t, v))
    _write_rows(out, "report.csv", "n,time,mean_mass_p", rows)
    return 0 if ok else 2


def cmd_martingale(config: dict, seed: int, out: str, workers: int) -> int:
    model, m0, _ = _build(config)
    h = model.observables[config["observable"]]
    report = martingale_report(model, m0, float(config["T"]), h,
                               int(config["replications"]), seed)
    _write_json(out, "report.json", report)
    _write_rows(out, "report.csv", "key,value",
                [(k, v) for k, v in report.items()
                 if isinstance(v, (int, float, bool)) or v is None])
    return 0 if report["mean_zero_pass"] and report["var_ratio_pass"] else 2


def cmd_audit(config: dict, seed: int, out: str, workers: int) -> int:
    model, _, _ = _build(config)
    report = audit_assumptions(model, trials=int(config.get("trials", 1000)),
                               seed=seed)
    _write_json(out, "report.json", report.as_dict())
    _write_rows(out, "report.csv", "check,channel,value,bound,passed",
                [(e.check, e.channel, e.value, e.bound, e.passed)
                 for e in report.entries])
    return 0 if report.passed else 2


def cmd_residual(config: dict, seed: int, out: str, workers: int) -> int:
    sol = solve_limit(config)
    model = model_from_config({"model": config["model"],
                               "params": config.get("params"), "n": 1})
    panel = model.panel(config.get("panel"))
    spacing = float(np.median(np.diff(sol.times))) if len(sol.times) > 1 else 0.1
    dt_probe = float(config.get("dt_probe", spacing))
    res = residual_check(sol, model, panel, dt_probe)
    tol = float(config["tolerance"])
    payload = {"config": config, "residual": res, "tolerance": tol,
               "passed": bool(res <= tol)}
    _write_json(out, "report.json", payload)
    _write_rows(out, "report.csv", "key,value",
                [("residual", res), ("tolerance", tol),
                 ("passed", res <= tol)])
    return 0 if res <= tol else 2


COMMANDS = {
    "simulate": cmd_simulate,
    "limit": cmd_limit,
    "converge": cmd_converge,
    "moments": cmd_moments,
    "martingale": cmd_martingale,
    "audit": cmd_audit,
    "residual": cmd_residual,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pdmpop",
        description="Measure-valued jump-process simulation and limit checks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=1)
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        out = _ensure_out(args.out)
        return COMMANDS[args.command](config, args.seed, out, args.workers)
    except SystemExit:
        raise
    except Exception as e:                       # noqa: BLE001
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
