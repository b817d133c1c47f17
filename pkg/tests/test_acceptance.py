"""End-to-end acceptance suite.

One test per verification criterion, each ending in a single printed
pass/fail line.  These run the full stated problem sizes, so the file is
much slower than the unit suites (around ten minutes total, dominated by
the convergence study in criterion 1).
"""

import math

import numpy as np
import pytest
from scipy import stats

from pdmpop.audit import audit_assumptions
from pdmpop.engine import (RecordSpec, sample_jump_time, simulate,
                           total_rate)
from pdmpop.harness import (ExperimentConfig, lln_report, martingale_report,
                            moment_report, run_ensemble)
from pdmpop.limits import (residual_check, solve_age_sir_pde,
                           solve_bell_anderson_pde,
                           solve_host_pathogen_particles, solve_sir_ode)
from pdmpop.measures import AtomicMeasure, constant
from pdmpop.models import (LogNormalJitter, build_age_sir,
                           build_host_pathogen, build_sir,
                           build_sir_unscaled, default_age_profiles,
                           default_bell_anderson, initial_measure,
                           model_from_config, pathogen_first_integral)

S, I, R = 0, 1, 2


def const_fn(v):
    return lambda a: np.full_like(np.asarray(a, dtype=float), v)


def smooth_bump(center, halfwidth):
    def f(x):
        y = (np.asarray(x, dtype=float) - center) / halfwidth
        out = np.zeros_like(y)
        inside = np.abs(y) < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - y[inside] ** 2))
        return out
    return f


def verdict(num, ok, detail):
    line = f"[criterion {num}] {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. Basic-model law of large numbers at scale.

def test_criterion_1_sir_law_of_large_numbers():
    cfg = ExperimentConfig(model="sir",
                           params={"beta": 3.0, "gamma": 1.0},
                           init={"S": 0.99, "I": 0.01},
                           n_levels=[100, 400, 1600, 6400],
                           replications=200, T=10.0, grid_dt=0.1, seed=42)
    ens = run_ensemble(cfg)
    limit = solve_sir_ode(3.0, 1.0, 0.99, 0.01, 0.0, 10.0, 1e-4,
                          snapshot_stride=100)
    rep = lln_report(ens, limit)
    decreasing = all(b < a for a, b in zip(rep.errors, rep.errors[1:]))
    ok = decreasing and -0.65 <= rep.slope <= -0.35
    verdict(1, ok, f"slope={rep.slope:.3f} errors="
            + "[" + ", ".join(f"{e:.4f}" for e in rep.errors) + "]")


# ---------------------------------------------------------------------------
# 2. Age-structured model reduces to the basic model for constant rates.

def test_criterion_2_age_reduction_deterministic():
    da = 1e-3
    raw = smooth_bump(0.05, 0.05)
    centers = (np.arange(int(round(12.0 / da))) + 0.5) * da
    scale = 0.01 / (raw(centers).sum() * da)
    sol = solve_age_sir_pde(const_fn(3.0), const_fn(1.0), 0.99,
                            lambda a: scale * raw(a), 0.0,
                            T=10.0, dt=da, da=da, a_max=12.0,
                            snapshot_stride=100)
    ode = solve_sir_ode(3.0, 1.0, 0.99, 0.01, 0.0, 10.0, 1e-3,
                        snapshot_stride=100)
    model = build_sir(3.0, 1.0)
    worst = max(abs(sol.pair(t, model.observables[nm])
                    - ode.pair(t, model.observables[nm]))
                for t in np.linspace(0.0, 10.0, 101)
                for nm in ("S", "I", "R"))
    verdict("2a", worst <= 1e-3, f"PDE vs ODE sup-error={worst:.3e}")


def test_criterion_2_age_reduction_stochastic():
    n, reps, T = 400, 500, 10.0
    age = build_age_sir(const_fn(3.0), const_fn(1.0), n=n,
                        beta_sup=3.0, gamma_sup=1.0)
    basic = build_sir(3.0, 1.0, n=n)
    finals = {}
    for tag, model in (("age", age), ("basic", basic)):
        m0 = initial_measure(model, {"S": 396, "I": 4})
        out = np.empty((reps, 3))
        for k in range(reps):
            traj = simulate(model, m0, T, np.random.SeedSequence([90, k]),
                            record=RecordSpec(grid_dt=T,
                                              observables=("S", "I", "R")))
            out[k] = [traj.observables[nm][-1] for nm in ("S", "I", "R")]
        finals[tag] = out
    ok = True
    deltas = []
    for j, nm in enumerate(("S", "I", "R")):
        a, b = finals["age"][:, j], finals["basic"][:, j]
        pooled = math.hypot(a.std(ddof=1), b.std(ddof=1)) / math.sqrt(reps)
        deltas.append(f"{nm}:{abs(a.mean() - b.mean()):.2f}/{3 * pooled:.2f}")
        ok = ok and abs(a.mean() - b.mean()) <= 3 * pooled
    verdict("2b", ok, "final-mean gaps vs 3*pooled-SE " + " ".join(deltas))


# ---------------------------------------------------------------------------
# 3. Martingale mean-zero and variance identities.

def test_criterion_3_martingale_identities():
    model = build_sir(3.0, 1.0, n=100)
    m0 = initial_measure(model, {"S": 99, "I": 1})
    rep = martingale_report(model, m0, 5.0, model.observables["R"],
                            R=1000, seed=17)
    ok = rep["mean_zero_pass"] and rep["var_ratio_pass"]
    verdict(3, ok, f"mean={rep['mean']:.4f} (3SE={3 * rep['se']:.4f}) "
            f"var-ratio={rep['var_ratio']:.4f}")


# ---------------------------------------------------------------------------
# 4. Jump clocks match the exponential law on both sampling paths.

def test_criterion_4_jump_clock_distribution():
    model = build_sir(3.0, 1.0, n=1)
    m0 = initial_measure(model, {"S": 3, "I": 2})
    q = total_rate(model, m0)
    pvals = {}
    for tag, force in (("exact", False), ("thinning", True)):
        rng = np.random.default_rng(101 if force else 100)
        times = np.array([sample_jump_time(model, m0, rng,
                                           force_thinning=force)[0]
                          for _ in range(10 ** 4)])
        pvals[tag] = stats.kstest(times, "expon", args=(0, 1 / q)).pvalue
    ok = all(p > 0.01 for p in pvals.values())
    verdict(4, ok, f"KS p-values exact={pvals['exact']:.3f} "
            f"thinning={pvals['thinning']:.3f}")


# ---------------------------------------------------------------------------
# 5. Flow integration preserves the host-pathogen first integral.

def test_criterion_5_flow_fidelity():
    psi = LogNormalJitter()
    model = build_host_pathogen(2.0, 1.0, 1.0, 1e-12, psi, n=1)
    m0 = initial_measure(model, {"count": 1, "P": 1.0, "B": 1.0})
    h0 = pathogen_first_integral(2.0, 1.0, 1.0, 1.0, 1.0)
    traj = simulate(model, m0, 20.0, seed=0,
                    record=RecordSpec(grid_dt=20.0, observables=()))
    p, b = traj.final.traits[0]
    drift = abs(pathogen_first_integral(2.0, 1.0, 1.0, p, b) - h0) / 20.0
    verdict(5, drift <= 1e-8, f"first-integral drift={drift:.2e}/unit time")


# ---------------------------------------------------------------------------
# 6. Growth-fragmentation stochastic ensembles match the finite-volume limit.

BA_PANEL = ("mass", "size_mean", "size_bump_lo", "size_bump_hi")


def ba_bump_quantiles(n):
    xs = np.linspace(1.0, 2.0, 20001)
    cdf = np.cumsum(smooth_bump(1.5, 0.45)(xs))
    cdf /= cdf[-1]
    return np.interp((np.arange(n) + 0.5) / n, cdf, xs)


def solve_ba_limit(T=3.0, dt=2.5e-4, dx=0.02):
    g = lambda x: np.asarray(x, dtype=float)
    b = lambda x: np.where(np.asarray(x) >= 2.0, 1.0, 0.0)
    d = lambda x: np.full_like(np.asarray(x, dtype=float), 0.1)
    xs = np.linspace(1.0, 2.0, 20001)
    norm = np.trapezoid(smooth_bump(1.5, 0.45)(xs), xs)
    n0 = lambda x: smooth_bump(1.5, 0.45)(x) / norm
    return solve_bell_anderson_pde(g, b, d, n0, T, dt, dx, 64.0,
                                   snapshot_stride=int(round(0.1 / dt)))


def test_criterion_6_bell_anderson_limit_consistency():
    # pure-decay oracle at first order in dt
    d0, dt0 = 0.5, 1e-3
    zero = const_fn(0.0)
    decay = solve_bell_anderson_pde(zero, zero, const_fn(d0),
                                    smooth_bump(1.5, 0.4),
                                    T=2.0, dt=dt0, dx=0.02, x_max=4.0)
    mass0 = decay.pair(0.0, constant(1.0))
    decay_err = abs(decay.pair(2.0, constant(1.0)) / mass0
                    - math.exp(-d0 * 2.0))
    ok_decay = decay_err <= 10.0 * dt0

    # full model: ensemble mean of the panel vs the PDE at T
    n, reps, T = 1000, 100, 3.0
    dt, dx = 2.5e-4, 0.02
    model = default_bell_anderson(n)
    m0 = AtomicMeasure(np.ones(n), np.zeros(n, dtype=int),
                       ba_bump_quantiles(n)[:, None])
    vals = {nm: np.empty(reps) for nm in BA_PANEL}
    for k in range(reps):
        traj = simulate(model, m0, T, np.random.SeedSequence([60, k]),
                        record=RecordSpec(grid_dt=T, observables=BA_PANEL))
        for nm in BA_PANEL:
            vals[nm][k] = traj.observables[nm][-1] / n
    sol = solve_ba_limit(T, dt, dx)
    ok_panel = True
    gaps = []
    for nm in BA_PANEL:
        se = vals[nm].std(ddof=1) / math.sqrt(reps)
        gap = abs(vals[nm].mean() - sol.pair(T, model.observables[nm]))
        tol = 3.0 * se + 10.0 * (dt + dx)
        gaps.append(f"{nm}:{gap:.3f}/{tol:.3f}")
        ok_panel = ok_panel and gap <= tol

    res = residual_check(sol, model, model.panel(BA_PANEL), 0.1)
    ok_res = res <= 10.0 * (dt + dx)
    verdict(6, ok_decay and ok_panel and ok_res,
            f"decay-err={decay_err:.2e} panel " + " ".join(gaps)
            + f" residual={res:.3f}")


# ---------------------------------------------------------------------------
# 7. Moment control: no explosion at defaults, bounded mass growth.

def test_criterion_7_moment_control():
    runs = [
        ({"model": "sir", "params": {"beta": 3.0, "gamma": 1.0}, "n": 100},
         {"S": 99, "I": 1}),
        ({"model": "age_sir", "n": 100}, {"S": 99, "I": 1}),
        ({"model": "host_pathogen", "n": 100},
         {"count": 100, "P": 1.0, "B": 1.0}),
        ({"model": "bell_anderson", "n": 2}, {"count": 2}),
    ]
    for cfg, init in runs:
        model = model_from_config(cfg)
        m0 = initial_measure(model, init)
        simulate(model, m0, 10.0, seed=1,
                 record=RecordSpec(grid_dt=1.0, observables=()))

    cfg = ExperimentConfig(model="bell_anderson", params={},
                           init={"count": 1.0}, n_levels=[20, 50],
                           replications=50, T=3.0, grid_dt=0.25, seed=5)
    ens = run_ensemble(cfg)
    report = moment_report(ens, p=1)
    ok = True
    slopes = []
    for nlvl, lvl in report["levels"].items():
        slope, se = lvl["log_growth_slope"], lvl["log_growth_slope_se"]
        slopes.append(f"n={nlvl}:{slope:.3f}")
        ok = ok and slope <= 1.0 + 3.0 * se
    verdict(7, ok, "no explosion at T=10; log-mass slopes "
            + " ".join(slopes) + " vs sup b = 1.0")


# ---------------------------------------------------------------------------
# 8. Assumption audits pass; the unscaled counterexample fails.

def test_criterion_8_assumption_audit():
    builders = {
        "sir": lambda: build_sir(3.0, 1.0, n=4),
        "age_sir": lambda: build_age_sir(*default_age_profiles()[:2], n=4,
                                         beta_sup=default_age_profiles()[2],
                                         gamma_sup=default_age_profiles()[3]),
        "host_pathogen": lambda: build_host_pathogen(
            2.0, 1.0, 1.0, 0.5, LogNormalJitter(), n=4),
        "bell_anderson": lambda: default_bell_anderson(n=4),
    }
    results = {}
    for name, build in builders.items():
        results[name] = audit_assumptions(build(), trials=1000, seed=8).passed
    bad = audit_assumptions(build_sir_unscaled(3.0, 1.0, n=10),
                            trials=1000, seed=8)
    scaling_failed = any(e.check == "scaling_identity" and not e.passed
                         for e in bad.entries)
    ok = all(results.values()) and scaling_failed
    verdict(8, ok, f"models={results} unscaled-counterexample-caught="
            f"{scaling_failed}")


# ---------------------------------------------------------------------------
# 9. All solvers satisfy the same weak equation; corruption is detected.

def test_criterion_9_equation_cross_check():
    model = build_sir(3.0, 1.0)
    sol = solve_sir_ode(3.0, 1.0, 0.99, 0.01, 0.0, 10.0, 1e-3,
                        snapshot_stride=1)
    res_ode = residual_check(sol, model, model.panel(), dt_probe=1e-3)
    ok_ode = res_ode <= 1e-6

    da = 1e-3
    raw = smooth_bump(0.05, 0.05)
    centers = (np.arange(int(round(6.0 / da))) + 0.5) * da
    scale = 0.01 / (raw(centers).sum() * da)
    age_model = model_from_config(
        {"model": "age_sir", "params": {"beta0": 3.0, "gamma0": 1.0}, "n": 1})
    age_sol = solve_age_sir_pde(const_fn(3.0), const_fn(1.0), 0.99,
                                lambda a: scale * raw(a), 0.0,
                                T=4.0, dt=da, da=da, a_max=6.0,
                                snapshot_stride=100)
    res_age = residual_check(age_sol, age_model,
                             age_model.panel(("S", "I", "R", "mass")), 0.1)
    ok_age = res_age <= 10.0 * (da + da)

    ba_model = default_bell_anderson(1)
    ba_sol = solve_ba_limit()
    res_ba = residual_check(ba_sol, ba_model, ba_model.panel(BA_PANEL), 0.1)
    ok_ba = res_ba <= 10.0 * (2.5e-4 + 0.02)

    corrupt = solve_sir_ode(3.0, 1.0, 0.99, 0.01, 0.0, 10.0, 1e-3,
                            snapshot_stride=1)
    k = corrupt.index_of(5.0)
    corrupt.measures[k].weights = corrupt.measures[k].weights.copy()
    corrupt.measures[k].weights[corrupt.measures[k].compartments == S] *= 2.0
    res_bad = residual_check(corrupt, model, model.panel(), dt_probe=1e-3,
                             probe_times=np.array([5.0]))
    ok_detect = res_bad > 10.0 * 1e-6
    verdict(9, ok_ode and ok_age and ok_ba and ok_detect,
            f"residuals ode={res_ode:.2e} age={res_age:.2e} ba={res_ba:.3f} "
            f"corrupted={res_bad:.2e}")


# ---------------------------------------------------------------------------
# 10. Host-pathogen: stochastic ensembles and the particle limit agree.

HP_PANEL = ("mass", "P_mean", "B_mean", "P_bump", "B_bump")


def hp_cloud(cap):
    return AtomicMeasure(np.full(cap, 1.0 / cap), np.zeros(cap, dtype=int),
                         np.column_stack([np.ones(cap), np.ones(cap)]))


def test_criterion_10_host_pathogen_self_consistency():
    psi = LogNormalJitter()
    T, grid_dt, reps = 3.0, 0.1, 30
    grid = np.arange(0.0, T + 1e-9, grid_dt)
    ref_model = build_host_pathogen(2.0, 1.0, 1.0, 0.5, psi, n=1)

    coarse = solve_host_pathogen_particles(2.0, 1.0, 1.0, 0.5, psi,
                                           hp_cloud(4000), T, 1e-2,
                                           cap=4000, seed=5,
                                           snapshot_stride=10)
    fine = solve_host_pathogen_particles(2.0, 1.0, 1.0, 0.5, psi,
                                         hp_cloud(16000), T, 5e-3,
                                         cap=16000, seed=6,
                                         snapshot_stride=20)
    self_diff = max(abs(coarse.pair(T, ref_model.observables[nm])
                        - fine.pair(T, ref_model.observables[nm]))
                    for nm in HP_PANEL)
    ok_self = self_diff <= 0.05

    lim = {nm: np.array([fine.pair(t, ref_model.observables[nm])
                         for t in grid]) for nm in HP_PANEL}

    def run_level(n):
        model = build_host_pathogen(2.0, 1.0, 1.0, 0.5, psi, n=n)
        m0 = initial_measure(model, {"count": n, "P": 1.0, "B": 1.0})
        trajs = []
        for k in range(reps):
            traj = simulate(model, m0, T, np.random.SeedSequence([80, n, k]),
                            record=RecordSpec(grid_dt=grid_dt,
                                              observables=HP_PANEL))
            trajs.append({nm: np.asarray(traj.observables[nm]) / n
                          for nm in HP_PANEL})
        return trajs

    def dist(a, b):
        return max(np.max(np.abs(a[nm] - b[nm])) for nm in HP_PANEL)

    t500, t2000 = run_level(500), run_level(2000)
    sup500 = np.array([dist(t, lim) for t in t500])
    sup2000 = np.array([dist(t, lim) for t in t2000])
    err500, err2000 = sup500.mean(), sup2000.mean()
    pooled = math.hypot(sup500.std(ddof=1), sup2000.std(ddof=1)) \
        / math.sqrt(reps)
    ok_order = err2000 < err500 + 2.0 * pooled

    mean500 = {nm: np.mean([t[nm] for t in t500], axis=0) for nm in HP_PANEL}
    mean2000 = {nm: np.mean([t[nm] for t in t2000], axis=0)
                for nm in HP_PANEL}
    raw_gap = dist(t500[0], t2000[0])
    ok_closer = dist(mean500, lim) < raw_gap and dist(mean2000, lim) < raw_gap
    verdict(10, ok_self and ok_order and ok_closer,
            f"self-convergence={self_diff:.3f} err500={err500:.3f} "
            f"err2000={err2000:.3f} ensemble-vs-limit "
            f"{dist(mean500, lim):.3f}/{dist(mean2000, lim):.3f} "
            f"raw-run gap={raw_gap:.3f}")
