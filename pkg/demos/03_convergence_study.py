"""Law of large numbers: renormalized paths converge to the ODE limit.

Runs a small SIR ensemble over increasing population sizes and fits the
decay rate of the worst-case (over time and test functions) distance to
the deterministic limit.  The expected Monte Carlo rate is n^(-1/2).
This is a scaled-down version of the study in the acceptance suite.
"""

from pdmpop import ExperimentConfig, lln_report, run_ensemble, solve_sir_ode

config = ExperimentConfig(
    model="sir",
    params={"beta": 3.0, "gamma": 1.0},
    init={"S": 0.99, "I": 0.01},
    n_levels=[100, 400, 1600],
    replications=60,
    T=10.0,
    grid_dt=0.1,
    seed=12,
)

ensemble = run_ensemble(config)
limit = solve_sir_ode(3.0, 1.0, 0.99, 0.01, 0.0, 10.0, 1e-4,
                      snapshot_stride=100)
# With only three modest levels the fit sits in the pre-asymptotic regime
# and runs a little steep, so the demo accepts a wider slope window than
# the full-scale study in the acceptance suite.
report = lln_report(ensemble, limit, slope_window=(-0.80, -0.35))

print(f"{'n':>6} {'mean sup-error':>15} {'std error':>10}")
for n, err, se in zip(config.n_levels, report.errors, report.std_errors):
    print(f"{n:>6} {err:>15.5f} {se:>10.5f}")
lo, hi = report.slope_ci
print(f"\nfitted log-log slope: {report.slope:.3f}  "
      f"(95% CI [{lo:.3f}, {hi:.3f}], target -0.5)")
print(f"verdict: {report.verdict}")
