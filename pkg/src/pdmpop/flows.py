"""Deterministic inter-jump dynamics: per-compartment flows and their
generator action on observables.

Three flow kinds cover the shipped models: Frozen (identity), Translate
(unit-speed drift of one coordinate, e.g. age), and VectorField (smooth ODE
integrated by fixed-substep RK4).  Flows act on individuals and lift to
measures by moving every atom, leaving weights untouched.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .measures import AtomicMeasure, Individual, TestFunction


class DomainExit(RuntimeError):
    """A trajectory left the declared domain of its compartment."""


@dataclass(frozen=True)
class StepControl:
    max_h: float = 1e-3


@dataclass(frozen=True)
class Frozen:
    pass


@dataclass(frozen=True)
class Translate:
    coord: int = 0


@dataclass(frozen=True)
class VectorField:
    """ODE flow dx/dt = field(x), with field vectorized over (k, d) arrays.

    ``lower`` is an optional per-coordinate lower bound; with
    ``floor_at_lower`` the trajectory is clamped there (for flows that only
    approach the boundary asymptotically), otherwise crossing it raises
    DomainExit.
    """
    field: Callable[[np.ndarray], np.ndarray]
    dim: int = 1
    lower: Optional[tuple] = None
    floor_at_lower: bool = False


Flow = object  # Frozen | Translate | VectorField


def _rk4_step(field, x: np.ndarray, h: float) -> np.ndarray:
    k1 = field(x)
    k2 = field(x + 0.5 * h * k1)
    k3 = field(x + 0.5 * h * k2)
    k4 = field(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def advance_traits(flow, traits: np.ndarray, dt: float,
                   step_control: StepControl = StepControl()) -> np.ndarray:
    """Advance an array of trait rows by dt under one flow.  Returns a new
    array; the input is not modified.  Negative dt is allowed for
    VectorField and Translate (used by finite-difference probes)."""
    if isinstance(flow, Frozen) or dt == 0.0:
        return traits.copy()
    if isinstance(flow, Translate):
        out = traits.copy()
        out[:, flow.coord] += dt
        return out
    if isinstance(flow, VectorField):
        n_sub = max(1, int(np.ceil(abs(dt) / step_control.max_h)))
        h = dt / n_sub
        x = traits[:, :flow.dim].copy()
        for _ in range(n_sub):
            x = _rk4_step(flow.field, x, h)
            if flow.lower is not None:
                lo = np.asarray(flow.lower)
                if flow.floor_at_lower:
                    np.maximum(x, lo, out=x)
                elif np.any(x < lo):
                    bad = int(np.argmax(np.any(x < lo, axis=1)))
                    raise DomainExit(f"trajectory left domain at row {bad}: {x[bad]}")
            if not np.all(np.isfinite(x)):
                raise DomainExit("non-finite trajectory value")
        out = traits.copy()
        out[:, :flow.dim] = x
        return out
    raise TypeError(f"unknown flow {flow!r}")


def advance_individual(flow, x: Individual, dt: float,
                       step_control: StepControl = StepControl()) -> Individual:
    if dt < 0 and not isinstance(flow, Frozen):
        # permitted for probes; the public contract is dt >= 0
        pass
    traits = np.array([x.trait], dtype=float)
    if traits.shape[1] == 0:
        return x
    out = advance_traits(flow, traits, dt, step_control)
    return Individual(x.compartment, tuple(out[0]))


def advance_measure(comp_flows: Sequence, m: AtomicMeasure, dt: float,
                    step_control: StepControl = StepControl(),
                    in_place: bool = False) -> AtomicMeasure:
    """Push every atom through its compartment's flow; weights and atom
    count are unchanged.  ``comp_flows[c]`` is the flow of compartment c."""
    if not in_place:
        m = m.copy()
    if dt == 0.0 or len(m) == 0:
        return m
    live = set(np.unique(m.compartments))
    for comp in live:
        flow = comp_flows[comp]
        if isinstance(flow, Frozen):
            continue
        mask = m.compartments == comp
        if mask.all():
            try:
                m.traits = advance_traits(flow, m.traits, dt, step_control)
            except DomainExit as e:
                raise DomainExit(f"compartment {comp}: {e}") from e
        else:
            try:
                m.traits[mask] = advance_traits(flow, m.traits[mask], dt,
                                                step_control)
            except DomainExit as e:
                raise DomainExit(f"compartment {comp}: {e}") from e
    return m


def generator_apply(h: TestFunction, x: Individual, flow,
                    step_control: StepControl = StepControl()) -> float:
    """The generator action: d/dt h(flow_t(x)) at t = 0.

    Uses the declared flow_derivative when available; otherwise a central
    finite difference along the flow with step 1e-5 (1 + |x|)."""
    if isinstance(flow, Frozen):
        return 0.0
    if h.flow_derivative is not None:
        return float(h.flow_derivative(x))
    s = 1e-5 * (1.0 + float(np.linalg.norm(x.trait)))
    xp = advance_individual(flow, x, s, step_control)
    xm = advance_individual(flow, x, -s, step_control)
    return (h.eval(xp) - h.eval(xm)) / (2.0 * s)
