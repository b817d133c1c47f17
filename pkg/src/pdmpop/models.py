"""The four shipped population models, each built as a ModelSpec in raw form
or at scaling level n, plus the assumption audit run before trusting a model
in the law-of-large-numbers harness.

Compartment conventions:
  sir           S=0, I=1, R=2, no traits, frozen flow
  age_sir       S=0, R=2 frozen; I=1 carries age, unit-speed drift
  host_pathogen single compartment, trait (P, B) > 0, ODE flow
  bell_anderson single compartment, trait = cell size, growth flow
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .engine import ChannelSpec, CompartmentSpec, ModelSpec
from .flows import Frozen, Translate, VectorField
from .measures import (Add, AtomicMeasure, Individual, Remove, TestFunction,
                       constant, gaussian_bump, indicator, trait_moment)

S, I, R = 0, 1, 2


class InvalidParam(ValueError):
    pass


def _require_positive(**kwargs) -> None:
    for name, v in kwargs.items():
        if not (v > 0):
            raise InvalidParam(f"{name} must be positive, got {v}")


def _replace_pairings(ch: ChannelSpec, target_eval: Callable) -> ChannelSpec:
    """Pairings for remove-self-and-add-one-fixed-target kernels:
    <k, h> = h(target(x)) - h(x)."""

    def prof(m, h, te=target_eval):
        hv = h.eval_array(m.compartments, m.traits)
        return te(m, h) - hv

    def prof_sq(m, h, te=target_eval):
        hv = h.eval_array(m.compartments, m.traits)
        return (te(m, h) - hv) ** 2

    def scalar(m, i, h, te=target_eval):
        row = prof(AtomicMeasure(m.weights[i:i + 1], m.compartments[i:i + 1],
                                 m.traits[i:i + 1]), h)
        return float(row[0])

    ch.jump_pairing_profile = prof
    ch.jump_pairing_sq_profile = prof_sq
    ch.jump_pairing = scalar
    ch.jump_pairing_sq = lambda m, i, h: scalar(m, i, h) ** 2
    return ch


# ---------------------------------------------------------------------------
# Basic SIR

def build_sir(beta: float, gamma: float, n: int = 1) -> ModelSpec:
    """Three-compartment SIR: recovery at rate gamma, pairwise infection at
    per-capita rate beta / n (the level-n scaling of the interaction)."""
    _require_positive(beta=beta, gamma=gamma, n=n)
    beta_n = beta / n

    def recovery_profile(m):
        return gamma * (m.compartments == I).astype(float)

    def infection_profile(m):
        lam = beta_n * m.compartment_mass(I)
        return lam * (m.compartments == S).astype(float)

    recovery = ChannelSpec(
        name="recovery",
        rate_profile=recovery_profile,
        make_deposits=lambda m, i, rng: [Remove(i), Add(R)],
        rate_bound=lambda m: gamma * m.compartment_mass(I),
        tv_bound=2.0,
        constant_along_flow=True,
    )
    _replace_pairings(recovery, lambda m, h: h.eval(Individual(R)))

    infection = ChannelSpec(
        name="infection",
        rate_profile=infection_profile,
        make_deposits=lambda m, i, rng: [Remove(i), Add(I)],
        rate_bound=lambda m: beta_n * m.compartment_mass(I) * m.compartment_mass(S),
        tv_bound=2.0,
        constant_along_flow=True,
    )
    _replace_pairings(infection, lambda m, h: h.eval(Individual(I)))

    obs = {
        "S": indicator("S", S), "I": indicator("I", I),
        "R": indicator("R", R), "mass": constant(1.0),
    }
    return ModelSpec(
        name="sir",
        compartments=[CompartmentSpec("S"), CompartmentSpec("I"),
                      CompartmentSpec("R")],
        channels=[recovery, infection],
        n=n,
        observables=obs,
        params={"beta": beta, "gamma": gamma},
        scaled_family=lambda nn: build_sir(beta, gamma, nn),
        audit_bounds={
            "C_q": 0.0,                       # no mass-increasing channel
            "C1": 2.0 * beta_n,
            "C2": lambda m, r=1.0: max(gamma, beta_n * (m.total_mass() + r)),
        },
    )


def build_sir_unscaled(beta: float, gamma: float, n: int = 1) -> ModelSpec:
    """Deliberately broken variant: the infection rate is NOT rescaled with
    n, so the scaling-identity audit must fail for n > 1.  Test fixture."""
    model = build_sir(beta * n, gamma, n)  # net per-capita rate beta at any n
    model = replace(model, name="sir_unscaled",
                    params={"beta": beta, "gamma": gamma},
                    scaled_family=lambda nn: build_sir_unscaled(beta, gamma, nn))
    return model


# ---------------------------------------------------------------------------
# Age-since-infection structured SIR

def build_age_sir(beta: Callable, gamma: Callable, n: int = 1,
                  beta_sup: float = None, gamma_sup: float = None) -> ModelSpec:
    """SIR where infectivity beta(a) and recovery gamma(a) depend on the age
    since infection; infected atoms drift in age at unit speed.

    beta and gamma must be numpy-vectorized and bounded by the supplied
    sup-norms (used as the thinning rate bounds)."""
    if beta_sup is None or gamma_sup is None:
        raise InvalidParam("beta_sup and gamma_sup bounds are required")
    _require_positive(beta_sup=beta_sup, gamma_sup=gamma_sup, n=n)

    def i_mask(m):
        return (m.compartments == I).astype(float)

    def recovery_profile(m):
        return gamma(m.traits[:, 0]) * i_mask(m)

    def force_of_infection(m):
        return float(m.weights @ (beta(m.traits[:, 0]) * i_mask(m)))

    def infection_profile(m):
        lam = force_of_infection(m) / n
        return lam * (m.compartments == S).astype(float)

    recovery = ChannelSpec(
        name="recovery",
        rate_profile=recovery_profile,
        make_deposits=lambda m, i, rng: [Remove(i), Add(R)],
        rate_bound=lambda m: gamma_sup * m.compartment_mass(I),
        tv_bound=2.0,
        constant_along_flow=False,
    )
    _replace_pairings(recovery, lambda m, h: h.eval(Individual(R)))

    infection = ChannelSpec(
        name="infection",
        rate_profile=infection_profile,
        make_deposits=lambda m, i, rng: [Remove(i), Add(I, (0.0,))],
        rate_bound=lambda m: (beta_sup / n) * m.compartment_mass(I)
                             * m.compartment_mass(S),
        tv_bound=2.0,
        constant_along_flow=False,
    )
    _replace_pairings(infection, lambda m, h: h.eval(Individual(I, (0.0,))))

    unit_speed = lambda v: np.ones_like(v)
    obs = {
        "S": indicator("S", S), "I": indicator("I", I),
        "R": indicator("R", R), "mass": constant(1.0),
        "age_mean": trait_moment("age_mean", I, 1, flow_rate=unit_speed),
        "age_sq": trait_moment("age_sq", I, 2, flow_rate=unit_speed),
        "age_bump_1": gaussian_bump("age_bump_1", I, 1.0, 0.5),
        "age_bump_3": gaussian_bump("age_bump_3", I, 3.0, 1.0),
    }
    age_sampler = lambda rng: (float(rng.exponential(1.0)),)
    return ModelSpec(
        name="age_sir",
        compartments=[
            CompartmentSpec("S"),
            CompartmentSpec("I", trait_dim=1, flow=Translate(0)),
            CompartmentSpec("R"),
        ],
        channels=[recovery, infection],
        n=n,
        observables=obs,
        params={"beta": beta, "gamma": gamma, "beta_sup": beta_sup,
                "gamma_sup": gamma_sup,
                "trait_samplers": {I: age_sampler}},
        scaled_family=lambda nn: build_age_sir(beta, gamma, nn,
                                               beta_sup=beta_sup,
                                               gamma_sup=gamma_sup),
        audit_bounds={
            "C_q": 0.0,
            "C1": 2.0 * beta_sup / n,
            "C2": lambda m, r=1.0: max(gamma_sup,
                                       beta_sup * (m.total_mass() + r) / n),
        },
    )


def default_age_profiles():
    """Default test shapes: constant recovery, saturating infectivity."""
    beta = lambda a: 3.0 * a / (1.0 + a)
    gamma = lambda a: np.ones_like(np.asarray(a, dtype=float))
    return beta, gamma, 3.0, 1.0   # beta, gamma, beta_sup, gamma_sup


# ---------------------------------------------------------------------------
# Host-pathogen interaction with mutation

class LogNormalJitter:
    """Mutation kernel: independent log-normal jitter of both loads.

    log P' ~ N(log P + delta_p, sigma^2), log B' ~ N(log B - delta_b,
    sigma^2): an injection of pathogens and a destruction of immune cells.
    A probability density, so mutation conserves mass.  Supplies a sampler,
    a pointwise density, and Gauss-Hermite mean pairings for the generator
    probe.
    """

    def __init__(self, delta_p: float = 0.5, delta_b: float = 0.3,
                 sigma: float = 0.2, gh_order: int = 16):
        _require_positive(sigma=sigma)
        self.delta_p = delta_p
        self.delta_b = delta_b
        self.sigma = sigma
        t, w = np.polynomial.hermite.hermgauss(gh_order)
        self._gh_z = np.sqrt(2.0) * t          # nodes for a standard normal
        self._gh_w = w / np.sqrt(np.pi)

    def _means(self, trait):
        p, b = trait[0], trait[1]
        return np.log(p) + self.delta_p, np.log(b) - self.delta_b

    def sample(self, trait, rng: np.random.Generator) -> tuple:
        mu_p, mu_b = self._means(trait)
        z = rng.standard_normal(2)
        return (float(np.exp(mu_p + self.sigma * z[0])),
                float(np.exp(mu_b + self.sigma * z[1])))

    def sample_array(self, traits: np.ndarray,
                     rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(traits.shape)
        out = np.empty_like(traits)
        out[:, 0] = np.exp(np.log(traits[:, 0]) + self.delta_p
                           + self.sigma * z[:, 0])
        out[:, 1] = np.exp(np.log(traits[:, 1]) - self.delta_b
                           + self.sigma * z[:, 1])
        return out

    def pdf(self, trait_from, z) -> float:
        mu_p, mu_b = self._means(trait_from)
        p, b = z[0], z[1]
        if p <= 0 or b <= 0:
            return 0.0
        s = self.sigma
        d = ((np.log(p) - mu_p) ** 2 + (np.log(b) - mu_b) ** 2) / (2 * s * s)
        return float(np.exp(-d) / (2 * np.pi * s * s * p * b))

    def expect(self, trait_from, fn) -> float:
        """Tensor Gauss-Hermite expectation of fn(P', B') under the kernel."""
        mu_p, mu_b = self._means(trait_from)
        ps = np.exp(mu_p + self.sigma * self._gh_z)
        bs = np.exp(mu_b + self.sigma * self._gh_z)
        vals = fn(ps[:, None], bs[None, :])
        return float(self._gh_w @ vals @ self._gh_w)


def build_host_pathogen(r: float, c: float, a_stim: float, gamma_mut: float,
                        psi: Optional[LogNormalJitter] = None,
                        n: int = 1) -> ModelSpec:
    """Within-host pathogen/immune dynamics with mutation jumps.

    Each atom carries (P, B) > 0 following dP/dt = rP - cBP, dB/dt = aBP;
    at constant rate gamma_mut it is replaced by one atom sampled from the
    mutation density psi (mutate-and-replace, mass neutral)."""
    _require_positive(r=r, c=c, a_stim=a_stim, gamma_mut=gamma_mut, n=n)
    if psi is None:
        psi = LogNormalJitter()
    if not (hasattr(psi, "sample") and hasattr(psi, "pdf")):
        raise InvalidParam("psi must supply both a sampler and a density")

    def fieldfn(x):
        p, b = x[:, 0], x[:, 1]
        return np.stack([r * p - c * b * p, a_stim * b * p], axis=1)

    flow = VectorField(fieldfn, dim=2, lower=(1e-12, 1e-12),
                       floor_at_lower=True)

    def make_deposits(m, i, rng):
        return [Remove(i), Add(0, psi.sample(tuple(m.traits[i]), rng))]

    def jump_pairing(m, i, h):
        x = m.atom(i)
        mean_h = psi.expect(x.trait,
                            lambda p, b: _eval_grid(h, p, b))
        return mean_h - h.eval(x)

    def jump_pairing_sq(m, i, h):
        x = m.atom(i)
        hx = h.eval(x)
        mean_sq = psi.expect(x.trait,
                             lambda p, b: (_eval_grid(h, p, b) - hx) ** 2)
        return mean_sq

    mutation = ChannelSpec(
        name="mutation",
        rate_profile=lambda m: np.full(len(m), gamma_mut),
        make_deposits=make_deposits,
        rate_bound=lambda m: gamma_mut * m.total_mass(),
        tv_bound=2.0,
        constant_along_flow=True,
        jump_pairing=jump_pairing,
        jump_pairing_sq=jump_pairing_sq,
    )

    def p_flow(comps, traits):
        return r * traits[:, 0] - c * traits[:, 1] * traits[:, 0]

    def b_flow(comps, traits):
        return a_stim * traits[:, 1] * traits[:, 0]

    h_p = trait_moment("P_mean", 0, 1, coord=0)
    h_p.flow_derivative_array = p_flow
    h_p.flow_derivative = lambda x: r * x.trait[0] - c * x.trait[1] * x.trait[0]
    h_b = trait_moment("B_mean", 0, 1, coord=1)
    h_b.flow_derivative_array = b_flow
    h_b.flow_derivative = lambda x: a_stim * x.trait[1] * x.trait[0]

    obs = {
        "mass": constant(1.0),
        "P_mean": h_p, "B_mean": h_b,
        "P_sq": trait_moment("P_sq", 0, 2, coord=0),
        "B_sq": trait_moment("B_sq", 0, 2, coord=1),
        "P_bump": gaussian_bump("P_bump", 0, 1.0, 0.5, coord=0),
        "B_bump": gaussian_bump("B_bump", 0, 2.0, 1.0, coord=1),
    }
    trait_sampler = lambda rng: (float(np.exp(0.5 * rng.standard_normal())),
                                 float(np.exp(0.5 * rng.standard_normal())))
    return ModelSpec(
        name="host_pathogen",
        compartments=[CompartmentSpec("host", trait_dim=2, flow=flow)],
        channels=[mutation],
        n=n,
        observables=obs,
        params={"r": r, "c": c, "a_stim": a_stim, "gamma_mut": gamma_mut,
                "psi": psi, "trait_samplers": {0: trait_sampler}},
        scaled_family=lambda nn: build_host_pathogen(r, c, a_stim, gamma_mut,
                                                     psi, nn),
        audit_bounds={
            "C_q": 0.0,
            "C1": 0.0,
            "C2": lambda m, r_ball=1.0: gamma_mut,
        },
    )


def _eval_grid(h: TestFunction, p: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Evaluate a test function on a (P, B) tensor grid of trait values."""
    P, B = np.broadcast_arrays(p, b)
    comps = np.zeros(P.size, dtype=np.int64)
    traits = np.stack([P.ravel(), B.ravel()], axis=1)
    if h.eval_array is not None:
        return h.eval_array(comps, traits).reshape(P.shape)
    vals = np.array([h.eval(Individual(0, (pp, bb)))
                     for pp, bb in zip(P.ravel(), B.ravel())])
    return vals.reshape(P.shape)


def pathogen_first_integral(r: float, c: float, a_stim: float,
                            p: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a P + c B - r log B, constant along the host-pathogen flow."""
    return a_stim * p + c * b - r * np.log(b)


# ---------------------------------------------------------------------------
# Bell-Anderson growth-fragmentation

def build_bell_anderson(g: Callable, b: Callable, d: Callable,
                        a_min: float = 1.0, n: int = 1,
                        g_sup: float = None, b_sup: float = None,
                        d_sup: float = None,
                        oversize_warn_frac: float = 0.01) -> ModelSpec:
    """Cells of size x grow at speed g(x), die at rate d(x), and split into
    two halves at rate b(x), with division impossible below size 2 a_min.

    The size domain is [a_min, inf); a soft warning fires when more than
    ``oversize_warn_frac`` of the mass sits above 4 a_min.  g, b, d must be
    numpy-vectorized; b_sup and d_sup over the working domain are required
    (thinning bounds)."""
    _require_positive(a_min=a_min, n=n)
    if b_sup is None or d_sup is None:
        raise InvalidParam("b_sup and d_sup are required")

    def b_eff(x):
        return np.where(x >= 2.0 * a_min, b(x), 0.0)

    flow = VectorField(lambda x: np.asarray(g(x), dtype=float), dim=1,
                       lower=(a_min * (1 - 1e-9),))

    death = ChannelSpec(
        name="death",
        rate_profile=lambda m: d(m.traits[:, 0]),
        make_deposits=lambda m, i, rng: [Remove(i)],
        rate_bound=lambda m: d_sup * m.total_mass(),
        tv_bound=1.0,
        constant_along_flow=False,
    )
    death.jump_pairing_profile = lambda m, h: -h.eval_array(m.compartments,
                                                            m.traits)
    death.jump_pairing_sq_profile = lambda m, h: h.eval_array(
        m.compartments, m.traits) ** 2
    death.jump_pairing = lambda m, i, h: -h.eval(m.atom(i))
    death.jump_pairing_sq = lambda m, i, h: h.eval(m.atom(i)) ** 2

    def divide(m, i, rng):
        half = float(m.traits[i, 0]) / 2.0
        return [Remove(i), Add(0, (half,)), Add(0, (half,))]

    def div_pairing_profile(m, h):
        hv = h.eval_array(m.compartments, m.traits)
        hv_half = h.eval_array(m.compartments, m.traits / 2.0)
        return 2.0 * hv_half - hv

    division = ChannelSpec(
        name="division",
        rate_profile=lambda m: b_eff(m.traits[:, 0]),
        make_deposits=divide,
        rate_bound=lambda m: b_sup * m.total_mass(),
        tv_bound=3.0,
        mass_increasing=True,
        constant_along_flow=False,
    )
    division.jump_pairing_profile = div_pairing_profile
    division.jump_pairing_sq_profile = lambda m, h: div_pairing_profile(m, h) ** 2
    division.jump_pairing = lambda m, i, h: (
        2.0 * h.eval(Individual(0, (m.traits[i, 0] / 2.0,))) - h.eval(m.atom(i)))
    division.jump_pairing_sq = lambda m, i, h: division.jump_pairing(m, i, h) ** 2

    def oversize_warning(m):
        total = m.total_mass()
        if total <= 0:
            return None
        over = float(m.weights[m.traits[:, 0] > 4.0 * a_min].sum())
        if over > oversize_warn_frac * total:
            return (f"{over / total:.1%} of mass above size {4 * a_min} "
                    "(declared working range exceeded)")
        return None

    size_speed = lambda v: g(v)
    obs = {
        "mass": constant(1.0),
        "size_mean": trait_moment("size_mean", 0, 1, flow_rate=size_speed),
        "size_sq": trait_moment("size_sq", 0, 2, flow_rate=size_speed),
        "size_bump_lo": gaussian_bump("size_bump_lo", 0, 1.5 * a_min,
                                      0.5 * a_min),
        "size_bump_hi": gaussian_bump("size_bump_hi", 0, 3.0 * a_min, a_min),
    }
    size_sampler = lambda rng: (float(rng.uniform(a_min, 4.0 * a_min)),)
    return ModelSpec(
        name="bell_anderson",
        compartments=[CompartmentSpec("cell", trait_dim=1, flow=flow)],
        channels=[death, division],
        n=n,
        observables=obs,
        params={"g": g, "b": b, "d": d, "a_min": a_min,
                "b_sup": b_sup, "d_sup": d_sup,
                "trait_samplers": {0: size_sampler}},
        scaled_family=lambda nn: build_bell_anderson(
            g, b, d, a_min, nn, g_sup=g_sup, b_sup=b_sup, d_sup=d_sup,
            oversize_warn_frac=oversize_warn_frac),
        audit_bounds={
            "C_q": b_sup,
            "C1": 0.0,
            "C2": lambda m, r_ball=1.0: b_sup + d_sup,
        },
        state_warning=oversize_warning,
    )


def default_bell_anderson(n: int = 1) -> ModelSpec:
    g = lambda x: np.asarray(x, dtype=float)
    b = lambda x: np.ones_like(np.asarray(x, dtype=float))
    d = lambda x: np.full_like(np.asarray(x, dtype=float), 0.1)
    return build_bell_anderson(g, b, d, a_min=1.0, n=n, b_sup=1.0, d_sup=0.1)


# ---------------------------------------------------------------------------
# Initial measures

def initial_measure(model: ModelSpec, init: dict) -> AtomicMeasure:
    """Build a deterministic initial population from a JSON-style dict.

    sir / age_sir: {"S": count, "I": count-or-[[age, count], ...], "R": count}
    host_pathogen: {"atoms": [[P, B, count], ...]} or {"count": k, "P": p, "B": b}
    bell_anderson: {"count": k} (sizes stratified over [a_min, 2 a_min]) or
                   {"atoms": [[size, count], ...]}
    """
    dim = model.trait_dim
    atoms: list[tuple[float, Individual]] = []
    if model.name in ("sir", "sir_unscaled"):
        for comp, key in ((S, "S"), (I, "I"), (R, "R")):
            atoms += [(1.0, Individual(comp))] * int(init.get(key, 0))
    elif model.name == "age_sir":
        atoms += [(1.0, Individual(S))] * int(init.get("S", 0))
        inf = init.get("I", 0)
        if isinstance(inf, int):
            atoms += [(1.0, Individual(I, (0.0,)))] * inf
        else:
            for age, count in inf:
                if age < 0:
                    raise InvalidParam(f"age {age} < 0")
                atoms += [(1.0, Individual(I, (float(age),)))] * int(count)
        atoms += [(1.0, Individual(R))] * int(init.get("R", 0))
    elif model.name == "host_pathogen":
        if "atoms" in init:
            for p, b, count in init["atoms"]:
                if p <= 0 or b <= 0:
                    raise InvalidParam(f"(P, B) = ({p}, {b}) not positive")
                atoms += [(1.0, Individual(0, (float(p), float(b))))] * int(count)
        else:
            p, b = float(init.get("P", 1.0)), float(init.get("B", 1.0))
            atoms += [(1.0, Individual(0, (p, b)))] * int(init["count"])
    elif model.name == "bell_anderson":
        a_min = model.params["a_min"]
        if "atoms" in init:
            sizes = [(float(s), int(cnt)) for s, cnt in init["atoms"]]
        else:
            k = int(init["count"])
            sizes = [(a_min * (1.0 + (j + 0.5) / k), 1) for j in range(k)]
        for size, count in sizes:
            if not (a_min <= size <= 2.0 * a_min):
                raise InvalidParam(
                    f"initial size {size} outside [{a_min}, {2 * a_min}]")
            atoms += [(1.0, Individual(0, (size,)))] * count
    else:
        raise InvalidParam(f"unknown model {model.name}")
    if not atoms:
        return AtomicMeasure.empty(dim)
    return AtomicMeasure.from_atoms(atoms, trait_dim=dim)


MODEL_BUILDERS = {
    "sir": lambda params, n: build_sir(n=n, **params),
    "age_sir": lambda params, n: _age_sir_from_config(params, n),
    "host_pathogen": lambda params, n: _host_pathogen_from_config(params, n),
    "bell_anderson": lambda params, n: _bell_anderson_from_config(params, n),
}


def _age_sir_from_config(params: dict, n: int) -> ModelSpec:
    if not params:
        beta, gamma, b_sup, g_sup = default_age_profiles()
    elif set(params) <= {"beta0", "gamma0"}:
        b0, g0 = float(params.get("beta0", 3.0)), float(params.get("gamma0", 1.0))
        beta = lambda a: np.full_like(np.asarray(a, dtype=float), b0)
        gamma = lambda a: np.full_like(np.asarray(a, dtype=float), g0)
        b_sup, g_sup = b0, g0
    else:
        raise InvalidParam("age_sir config supports constant rates only "
                           "(beta0, gamma0) or defaults")
    return build_age_sir(beta, gamma, n, beta_sup=b_sup, gamma_sup=g_sup)


def _host_pathogen_from_config(params: dict, n: int) -> ModelSpec:
    p = {"r": 2.0, "c": 1.0, "a_stim": 1.0, "gamma_mut": 0.5}
    psi_kwargs = {}
    for key in ("delta_p", "delta_b", "sigma"):
        if key in params:
            psi_kwargs[key] = params[key]
    p.update({k: v for k, v in params.items() if k in p})
    return build_host_pathogen(psi=LogNormalJitter(**psi_kwargs), n=n, **p)


def _bell_anderson_from_config(params: dict, n: int) -> ModelSpec:
    a_min = float(params.get("a_min", 1.0))
    b0 = float(params.get("b0", 1.0))
    d0 = float(params.get("d0", 0.1))
    g = lambda x: np.asarray(x, dtype=float)
    b = lambda x: np.full_like(np.asarray(x, dtype=float), b0)
    d = lambda x: np.full_like(np.asarray(x, dtype=float), d0)
    return build_bell_anderson(g, b, d, a_min=a_min, n=n, b_sup=b0, d_sup=d0)


def model_from_config(config: dict) -> ModelSpec:
    """Build a model from {"model": name, "params": {...}, "n": int}."""
    name = config["model"]
    if name not in MODEL_BUILDERS:
        raise InvalidParam(f"unknown model {name!r}")
    return MODEL_BUILDERS[name](dict(config.get("params") or {}),
                                int(config.get("n", 1)))
