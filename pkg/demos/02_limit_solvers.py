"""Solve the deterministic large-population limits of each model.

Each solver returns a LimitSolution whose snapshots can be paired with any
test function, so all four limits expose the same interface even though
the numerics differ: RK4 for the SIR ordinary differential equations,
method of characteristics for the age-structured PDE, finite-volume upwind
for growth-fragmentation, and a weighted-particle method with resampling
for the host-pathogen measure flow.
"""

import numpy as np

from pdmpop import (AtomicMeasure, LogNormalJitter, build_sir,
                    build_host_pathogen, default_bell_anderson,
                    model_from_config, solve_age_sir_pde,
                    solve_bell_anderson_pde, solve_host_pathogen_particles,
                    solve_sir_ode)

# 1. SIR: epidemic peak from the classical ODE system.
sir = solve_sir_ode(3.0, 1.0, 0.99, 0.01, 0.0, T=15.0, dt=1e-3,
                    snapshot_stride=10)
h_i = build_sir(3.0, 1.0).observables["I"]
i_vals = np.array([sir.pair(t, h_i) for t in sir.times])
peak = sir.times[np.argmax(i_vals)]
print(f"SIR ODE: infected peak {i_vals.max():.4f} at t = {peak:.2f}")

# 2. Age-structured SIR with saturating infectivity beta(a) = 3a/(1+a).
beta = lambda a: 3.0 * np.asarray(a, dtype=float) / (1.0 + np.asarray(a))
gamma = lambda a: np.ones_like(np.asarray(a, dtype=float))
i0 = lambda a: np.where(np.asarray(a) < 0.5, 0.02, 0.0)
age = solve_age_sir_pde(beta, gamma, 0.99, i0, 0.0, T=15.0, dt=5e-3,
                        da=5e-3, a_max=20.0, snapshot_stride=200)
age_model = model_from_config({"model": "age_sir", "n": 1})
for t in (0.0, 5.0, 10.0, 15.0):
    s = age.pair(t, age_model.observables["S"])
    i = age.pair(t, age_model.observables["I"])
    print(f"age-SIR PDE t={t:>4.1f}: S={s:.4f} I={i:.4f}")

# 3. Growth-fragmentation: exponential mass growth once division dominates.
g = lambda x: np.asarray(x, dtype=float)
b = lambda x: np.where(np.asarray(x) >= 2.0, 1.0, 0.0)
d = lambda x: np.full_like(np.asarray(x, dtype=float), 0.1)
n0 = lambda x: np.where((np.asarray(x) >= 1.0) & (np.asarray(x) <= 2.0),
                        1.0, 0.0)
ba = solve_bell_anderson_pde(g, b, d, n0, T=4.0, dt=2.5e-4, dx=0.02,
                             x_max=48.0, snapshot_stride=800)
mass = default_bell_anderson(1).observables["mass"]
m = [ba.pair(t, mass) for t in (0.0, 2.0, 4.0)]
print(f"growth-fragmentation mass: {m[0]:.3f} -> {m[1]:.3f} -> {m[2]:.3f}")

# 4. Host-pathogen measure flow via weighted particles.
psi = LogNormalJitter()
cloud = AtomicMeasure(np.full(4000, 1.0 / 4000), np.zeros(4000, dtype=int),
                      np.column_stack([np.ones(4000), np.ones(4000)]))
hp = solve_host_pathogen_particles(2.0, 1.0, 1.0, 0.5, psi, cloud,
                                   T=4.0, dt=1e-2, cap=4000, seed=3,
                                   snapshot_stride=50)
obs = build_host_pathogen(2.0, 1.0, 1.0, 0.5, psi, n=1).observables
for t in (0.0, 2.0, 4.0):
    print(f"host-pathogen t={t:.0f}: mass={hp.pair(t, obs['mass']):.3f} "
          f"P_mean={hp.pair(t, obs['P_mean']):.3f} "
          f"B_mean={hp.pair(t, obs['B_mean']):.3f}")
