"""Empirical audit of the regularity conditions a model must satisfy before
its law-of-large-numbers scaling limit is trusted: bounded kernel variation,
linear growth of mass-increasing rates, total-variation Lipschitz kernels,
locally bounded per-individual rates, and the level-n scaling identity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .engine import ModelSpec
from .measures import Add, AtomicMeasure, Individual, Remove

_TOL = 1e-9


@dataclass
class AuditEntry:
    check: str
    channel: str
    value: float
    bound: float
    passed: bool
    note: str = ""


@dataclass
class AuditReport:
    model: str
    trials: int
    entries: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def add(self, check, channel, value, bound, passed, note=""):
        self.entries.append(AuditEntry(check, channel, float(value),
                                       float(bound), bool(passed), note))

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "trials": self.trials,
            "passed": self.passed,
            "entries": [vars(e) for e in self.entries],
        }

    def __str__(self) -> str:
        lines = [f"audit of {self.model}: "
                 f"{'PASS' if self.passed else 'FAIL'} ({self.trials} states)"]
        for e in self.entries:
            flag = "ok " if e.passed else "FAIL"
            lines.append(f"  [{flag}] {e.check:<18} {e.channel:<12} "
                         f"value={e.value:.6g} bound={e.bound:.6g} {e.note}")
        return "\n".join(lines)


def default_state_sampler(model: ModelSpec,
                          max_atoms: int = 40) -> Callable:
    """Random admissible populations for the audit: random compartments,
    traits drawn from each compartment's declared sampler."""
    samplers = model.params.get("trait_samplers", {})

    def sample(rng: np.random.Generator) -> AtomicMeasure:
        k = int(rng.integers(1, max_atoms + 1))
        atoms = []
        for _ in range(k):
            ci = int(rng.integers(len(model.compartments)))
            comp = model.compartments[ci]
            if comp.trait_dim == 0:
                trait = ()
            elif ci in samplers:
                trait = samplers[ci](rng)
            else:
                trait = tuple(rng.exponential(1.0, comp.trait_dim))
            atoms.append((1.0, Individual(ci, trait)))
        return AtomicMeasure.from_atoms(atoms, trait_dim=model.trait_dim)

    return sample


def _deposit_tv(deposits, m: AtomicMeasure) -> float:
    tv = 0.0
    for d in deposits:
        if isinstance(d, Remove):
            tv += m.weights[d.index] if d.weight is None else d.weight
        elif isinstance(d, Add):
            tv += d.weight
    return tv


def _deposit_mass(deposits, m: AtomicMeasure) -> float:
    mass = 0.0
    for d in deposits:
        if isinstance(d, Remove):
            mass -= m.weights[d.index] if d.weight is None else d.weight
        elif isinstance(d, Add):
            mass += d.weight
    return mass


def audit_assumptions(model: ModelSpec, state_sampler: Optional[Callable] = None,
                      trials: int = 1000, seed: int = 0,
                      scaling_levels: tuple = (3, 10)) -> AuditReport:
    """Sample random states and check every declared regularity constant.

    Failures never raise; they become failed report entries."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xA0D17)))
    if state_sampler is None:
        state_sampler = default_state_sampler(model)
    report = AuditReport(model=model.name, trials=trials)
    states = [state_sampler(rng) for _ in range(trials)]

    # 1. kernel variation norm: realized jumps never move more than tv_bound
    for ci, ch in enumerate(model.channels):
        max_tv, max_mass = 0.0, 0.0
        for m in states:
            prof = ch.rate_profile(m)
            live = np.flatnonzero(prof > 0)
            if len(live) == 0:
                continue
            i = int(live[rng.integers(len(live))])
            deps = ch.make_deposits(m, i, rng)
            max_tv = max(max_tv, _deposit_tv(deps, m))
            max_mass = max(max_mass, abs(_deposit_mass(deps, m)))
        report.add("kernel_tv", ch.name, max_tv, ch.tv_bound,
                   max_tv <= ch.tv_bound + _TOL)
        report.add("jump_mass_step", ch.name, max_mass, ch.tv_bound,
                   max_mass <= ch.tv_bound + _TOL,
                   "per-jump mass change within the variation bound")

    # 2. growth control: mass-increasing channels at most linear in mass
    c_q = float(model.audit_bounds.get("C_q", 0.0))
    increasing = [ch for ch in model.channels if ch.mass_increasing]
    if not increasing:
        report.add("growth_control", "-", 0.0, c_q, True,
                   "no mass-increasing channel")
    for ch in increasing:
        worst = 0.0
        for m in states:
            q_i = ch.weighted_total(m)
            worst = max(worst, q_i / (1.0 + m.total_mass()))
        report.add("growth_control", ch.name, worst, c_q,
                   worst <= c_q + _TOL)

    # 3. TV-Lipschitz of the weighted kernel under atomic perturbations
    c1 = float(model.audit_bounds.get("C1", np.inf))
    eps = 0.1
    for ci, ch in enumerate(model.channels):
        if ch.kernel_depends_on_state:
            report.add("kernel_lipschitz", ch.name, np.nan, c1, False,
                       "state-dependent kernel not auditable by rate "
                       "perturbation")
            continue
        worst = 0.0
        for m in states:
            m2 = m.copy()
            j = int(rng.integers(len(m2)))
            m2.weights[j] += eps
            d = np.max(np.abs(ch.rate_profile(m) - ch.rate_profile(m2)))
            worst = max(worst, d * ch.tv_bound / eps)
        report.add("kernel_lipschitz", ch.name, worst, c1,
                   worst <= c1 + _TOL)

    # 4. locally bounded rates over a perturbation ball
    c2_fn = model.audit_bounds.get("C2")
    for ch in model.channels:
        worst, worst_bound, ok = 0.0, 0.0, True
        for m in states:
            m2 = m.copy()
            j = int(rng.integers(len(m2)))
            m2.weights[j] += rng.uniform(0.0, 1.0)
            a_max = float(np.max(ch.rate_profile(m2))) if len(m2) else 0.0
            bound = c2_fn(m) if c2_fn is not None else np.inf
            if a_max > bound + _TOL:
                ok = False
            if a_max > worst:
                worst, worst_bound = a_max, bound
        report.add("rate_bound", ch.name, worst, worst_bound, ok)

    # 5. scaling identity: alpha^(n)(n m, x) == alpha^(1)(m, x)
    if model.scaled_family is None:
        report.add("scaling_identity", "-", np.nan, 0.0, False,
                   "model declares no scaled family")
    else:
        base = model.scaled_family(1)
        worst = 0.0
        for n_level in scaling_levels:
            scaled = model.scaled_family(n_level)
            for m in states[:min(50, len(states))]:
                nu = m.copy()
                nu.weights = nu.weights * n_level
                for ch_b, ch_s in zip(base.channels, scaled.channels):
                    diff = np.max(np.abs(ch_s.rate_profile(nu)
                                         - ch_b.rate_profile(m)))
                    denom = max(1.0, float(np.max(np.abs(ch_b.rate_profile(m)))))
                    worst = max(worst, diff / denom)
        report.add("scaling_identity", "all", worst, 1e-12,
                   worst <= 1e-12,
                   f"levels {scaling_levels}")
    return report
