import math

import numpy as np
import pytest

from pdmpop.audit import audit_assumptions
from pdmpop.engine import simulate, RecordSpec, total_rate
from pdmpop.measures import AtomicMeasure, Individual, pair
from pdmpop.models import (InvalidParam, LogNormalJitter, build_age_sir,
                           build_bell_anderson, build_host_pathogen,
                           build_sir, build_sir_unscaled,
                           default_age_profiles, default_bell_anderson,
                           initial_measure, model_from_config,
                           pathogen_first_integral)

S, I, R = 0, 1, 2


def test_sir_rate_arithmetic():
    model = build_sir(beta=1.0, gamma=2.0, n=1)
    m = initial_measure(model, {"S": 2, "I": 3})
    assert total_rate(model, m) == pytest.approx(2.0 * 3 + 1.0 * 3 * 2)


def test_sir_scaling_identity_per_capita_rate():
    # at level n the infection rate upon one S atom is beta*I(nu)/n = beta*I(m_hat)
    n = 10
    model = build_sir(beta=3.0, gamma=1.0, n=n)
    m = initial_measure(model, {"S": 5 * n, "I": 2 * n})
    s_idx = int(np.where(m.compartments == S)[0][0])
    infection = next(ch for ch in model.channels if ch.name == "infection")
    assert infection.rate(m, s_idx) == pytest.approx(3.0 * 2.0)


def test_sir_rates_vanish_without_infected():
    model = build_sir(beta=3.0, gamma=1.0)
    m = initial_measure(model, {"S": 4, "I": 0})
    for ch in model.channels:
        for i in range(len(m)):
            assert ch.rate(m, i) == 0.0


def test_sir_rejects_nonpositive_params():
    with pytest.raises(InvalidParam):
        build_sir(beta=-1.0, gamma=1.0)
    with pytest.raises(InvalidParam):
        build_sir(beta=1.0, gamma=0.0)


def test_age_sir_new_infection_enters_at_age_zero():
    beta, gamma, b_sup, g_sup = default_age_profiles()
    model = build_age_sir(beta, gamma, n=1, beta_sup=b_sup, gamma_sup=g_sup)
    m = initial_measure(model, {"S": 1, "I": [[2.0, 1]]})
    infection = next(ch for ch in model.channels if ch.name == "infection")
    s_idx = int(np.where(m.compartments == S)[0][0])
    rng = np.random.default_rng(0)
    out_deposits = infection.make_deposits(m, s_idx, rng)
    adds = [d for d in out_deposits if hasattr(d, "trait")]
    assert len(adds) == 1
    assert adds[0].compartment == I
    assert adds[0].trait == (0.0,)


def test_age_sir_constant_rates_match_basic_sir():
    b0 = lambda a: np.full_like(np.asarray(a, dtype=float), 3.0)
    g0 = lambda a: np.full_like(np.asarray(a, dtype=float), 1.0)
    age = build_age_sir(b0, g0, n=1, beta_sup=3.0, gamma_sup=1.0)
    basic = build_sir(beta=3.0, gamma=1.0, n=1)
    m_age = initial_measure(age, {"S": 4, "I": [[0.7, 2]], "R": 1})
    m_basic = initial_measure(basic, {"S": 4, "I": 2, "R": 1})
    assert total_rate(age, m_age) == pytest.approx(total_rate(basic, m_basic))


def test_age_sir_no_infected_no_infection():
    beta, gamma, b_sup, g_sup = default_age_profiles()
    model = build_age_sir(beta, gamma, n=1, beta_sup=b_sup, gamma_sup=g_sup)
    m = initial_measure(model, {"S": 6})
    assert total_rate(model, m) == 0.0


def test_host_pathogen_constant_total_rate():
    psi = LogNormalJitter()
    model = build_host_pathogen(2.0, 1.0, 1.0, gamma_mut=0.3, psi=psi, n=1)
    m = initial_measure(model, {"count": 7, "P": 1.0, "B": 1.0})
    assert total_rate(model, m) == pytest.approx(2.1)


def test_host_pathogen_mutation_preserves_atom_count():
    psi = LogNormalJitter()
    model = build_host_pathogen(2.0, 1.0, 1.0, gamma_mut=0.5, psi=psi, n=1)
    m = initial_measure(model, {"count": 5, "P": 1.0, "B": 1.0})
    traj = simulate(model, m, 2.0, seed=1, record=RecordSpec(grid_dt=2.0))
    assert traj.final.total_mass() == pytest.approx(5.0)
    assert len(traj.final) == 5


def test_host_pathogen_flow_only_first_integral():
    psi = LogNormalJitter()
    model = build_host_pathogen(2.0, 1.0, 1.0, gamma_mut=1e-12, psi=psi, n=1)
    m = initial_measure(model, {"count": 1, "P": 1.2, "B": 0.7})
    h0 = pathogen_first_integral(2.0, 1.0, 1.0, 1.2, 0.7)
    traj = simulate(model, m, 3.0, seed=2, record=RecordSpec(grid_dt=3.0))
    p, b = traj.final.traits[0]
    h1 = pathogen_first_integral(2.0, 1.0, 1.0, p, b)
    assert abs(h1 - h0) / 3.0 <= 1e-8


def test_lognormal_jitter_expectation_quadrature():
    psi = LogNormalJitter(delta_p=0.5, delta_b=0.3, sigma=0.2)
    # E[log P'] = log P + delta_p under the kernel
    val = psi.expect((1.0, 1.0), lambda p, b: np.log(p) + 0.0 * b)
    assert val == pytest.approx(0.5, abs=1e-10)
    val_b = psi.expect((1.0, 1.0), lambda p, b: np.log(b) + 0.0 * p)
    assert val_b == pytest.approx(-0.3, abs=1e-10)


def test_bell_anderson_division_splits_in_half():
    model = default_bell_anderson()
    m = AtomicMeasure.from_atoms([(1.0, Individual(0, (3.0,)))])
    division = next(ch for ch in model.channels if ch.name == "division")
    rng = np.random.default_rng(3)
    from pdmpop.measures import apply_deposits
    out = apply_deposits(m, division.make_deposits(m, 0, rng))
    assert len(out) == 2
    assert np.allclose(out.traits[:, 0], 1.5)


def test_bell_anderson_no_division_below_threshold():
    model = default_bell_anderson()
    m = AtomicMeasure.from_atoms([(1.0, Individual(0, (s,)))
                                  for s in (1.0, 1.4, 1.9)])
    division = next(ch for ch in model.channels if ch.name == "division")
    for i in range(3):
        assert division.rate(m, i) == 0.0


def test_bell_anderson_death_removes_one_unit():
    model = default_bell_anderson()
    m = AtomicMeasure.from_atoms([(1.0, Individual(0, (1.5,)))] * 4)
    death = next(ch for ch in model.channels if ch.name == "death")
    from pdmpop.measures import apply_deposits
    out = apply_deposits(m, death.make_deposits(m, 1, np.random.default_rng(4)))
    assert out.total_mass() == pytest.approx(3.0)


def test_bell_anderson_rejects_initial_size_outside_band():
    model = default_bell_anderson()
    with pytest.raises(InvalidParam):
        initial_measure(model, {"atoms": [[2.5, 1]]})


def test_initial_measure_bell_anderson_band():
    model = default_bell_anderson()
    m = initial_measure(model, {"count": 10})
    assert np.all((m.traits[:, 0] >= 1.0) & (m.traits[:, 0] <= 2.0))


@pytest.mark.parametrize("config", [
    {"model": "sir", "params": {"beta": 3.0, "gamma": 1.0}, "n": 10},
    {"model": "age_sir", "n": 10},
    {"model": "age_sir", "params": {"beta0": 2.0, "gamma0": 1.0}, "n": 10},
    {"model": "host_pathogen", "n": 10},
    {"model": "bell_anderson", "n": 10},
])
def test_model_from_config_builds(config):
    model = model_from_config(config)
    assert model.n == 10


def test_model_from_config_unknown_model():
    with pytest.raises(InvalidParam):
        model_from_config({"model": "predator_prey"})


@pytest.mark.parametrize("build", [
    lambda: build_sir(3.0, 1.0, n=4),
    lambda: build_age_sir(*default_age_profiles()[:2], n=4,
                          beta_sup=default_age_profiles()[2],
                          gamma_sup=default_age_profiles()[3]),
    lambda: build_host_pathogen(2.0, 1.0, 1.0, 0.5, LogNormalJitter(), n=4),
    lambda: default_bell_anderson(n=4),
])
def test_shipped_models_pass_audit(build):
    report = audit_assumptions(build(), trials=200, seed=5)
    assert report.passed, str(report)


def test_unscaled_sir_fails_scaling_audit():
    report = audit_assumptions(build_sir_unscaled(3.0, 1.0, n=10),
                               trials=200, seed=6)
    failures = [e for e in report.entries if not e.passed]
    assert any(e.check == "scaling_identity" for e in failures)
