"""Event-loop simulator for measure-valued piecewise deterministic Markov
processes.

A model is a set of compartments (each with a flow) plus jump channels.
Between jumps every atom follows its compartment's flow; jump times come
from an exact exponential clock when all channel rates are constant along
the flow, and from thinning against a dominating rate bound otherwise.
Each accepted jump picks a (channel, atom) pair proportionally to
weight * rate and applies the channel's deposits.
"""
from __future__ import annotations

import logging
import time as _time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .flows import Frozen, StepControl, advance_measure
from .measures import (AtomicMeasure, Deposit, TestFunction, apply_deposits,
                       pair)

log = logging.getLogger(__name__)


class BoundViolation(RuntimeError):
    """A thinning acceptance ratio exceeded 1: the channel's rate_bound is
    invalid.  This is a model bug and is never silently clipped."""


class ExplosionGuard(RuntimeError):
    """Jump count exceeded the configured cap: runaway mass growth."""


@dataclass
class ChannelSpec:
    """One jump channel: per-individual rate, realized kernel, and the
    bookkeeping the engine and audits need.

    ``rate_profile(m)`` returns the per-atom rate array (not weighted).
    ``rate_bound(m)`` must dominate the weighted total channel rate along
    the flowed state until the next accepted jump.  ``jump_pairing(m, i, h)``
    is the mean pairing <k(m, x_i), h> of the kernel against an observable
    (``jump_pairing_sq`` its second moment), used by the generator and
    martingale probes; vectorized ``*_profile`` variants are preferred when
    present.
    """

    name: str
    rate_profile: Callable[[AtomicMeasure], np.ndarray]
    make_deposits: Callable[[AtomicMeasure, int, np.random.Generator],
                            list[Deposit]]
    rate_bound: Callable[[AtomicMeasure], float]
    tv_bound: float
    mass_increasing: bool = False
    constant_along_flow: bool = False
    kernel_depends_on_state: bool = False
    jump_pairing: Optional[Callable] = None
    jump_pairing_sq: Optional[Callable] = None
    jump_pairing_profile: Optional[Callable] = None
    jump_pairing_sq_profile: Optional[Callable] = None

    def rate(self, m: AtomicMeasure, i: int) -> float:
        return float(self.rate_profile(m)[i])

    def weighted_total(self, m: AtomicMeasure) -> float:
        if len(m) == 0:
            return 0.0
        return float(m.weights @ self.rate_profile(m))


@dataclass(frozen=True)
class CompartmentSpec:
    name: str
    trait_dim: int = 0
    flow: object = Frozen()


@dataclass
class ModelSpec:
    """Everything the engine needs: compartments with flows, jump channels,
    the scaling level n, and a registry of named observables."""

    name: str
    compartments: list[CompartmentSpec]
    channels: list[ChannelSpec]
    n: int = 1
    observables: dict[str, TestFunction] = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    scaled_family: Optional[Callable[[int], "ModelSpec"]] = None
    audit_bounds: dict = field(default_factory=dict)
    state_warning: Optional[Callable[[AtomicMeasure], Optional[str]]] = None

    @property
    def flows(self) -> list:
        return [c.flow for c in self.compartments]

    @property
    def trait_dim(self) -> int:
        return max((c.trait_dim for c in self.compartments), default=0)

    @property
    def all_frozen(self) -> bool:
        return all(isinstance(c.flow, Frozen) for c in self.compartments)

    def panel(self, names: Optional[Sequence[str]] = None) -> list[TestFunction]:
        if names is None:
            names = list(self.observables)
        return [self.observables[n] for n in names]

    def compartment_index(self, name: str) -> int:
        for i, c in enumerate(self.compartments):
            if c.name == name:
                return i
        raise KeyError(name)


@dataclass(frozen=True)
class RecordSpec:
    grid_dt: float = 0.1
    observables: Optional[tuple] = None   # None = full model registry
    log_events: bool = False


@dataclass
class Trajectory:
    times: np.ndarray
    observables: dict[str, np.ndarray]
    events: list                      # (time, channel name, pre mass, post mass)
    jump_counts: dict[str, int]
    final: AtomicMeasure
    wall_time: float
    warnings: list = field(default_factory=list)

    def observable(self, name: str) -> np.ndarray:
        return self.observables[name]

    def to_csv(self, path) -> None:
        import csv
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["time", "observable", "value"])
            for name, vals in self.observables.items():
                for t, v in zip(self.times, vals):
                    wr.writerow([repr(float(t)), name, repr(float(v))])

    def summary(self) -> dict:
        return {
            "jump_counts": dict(sorted(self.jump_counts.items())),
            "final_mass": self.final.total_mass(),
            "wall_time": self.wall_time,
        }


def exponential_time(u: float, q: float) -> float:
    """Inverse-CDF exponential waiting time from a uniform draw in [0, 1)."""
    if q <= 0.0:
        return np.inf
    return -np.log1p(-u) / q


def total_rate(model: ModelSpec, m: AtomicMeasure) -> float:
    """q(m): the weighted total jump rate over all channels and atoms."""
    return sum(ch.weighted_total(m) for ch in model.channels)


def select_jump(model: ModelSpec, flowed_m: AtomicMeasure,
                rng: np.random.Generator) -> tuple[int, int]:
    """Draw a (channel, atom) pair with probability weight * rate / q."""
    profiles = [ch.rate_profile(flowed_m) for ch in model.channels]
    weighted = [flowed_m.weights * p for p in profiles]
    totals = np.array([w.sum() for w in weighted])
    q = totals.sum()
    if q <= 0.0:
        raise ValueError("select_jump requires a positive total rate")
    u = rng.random() * q
    ci = int(np.searchsorted(np.cumsum(totals), u, side="right"))
    ci = min(ci, len(totals) - 1)
    u_res = u - (np.cumsum(totals)[ci] - totals[ci])
    cum = np.cumsum(weighted[ci])
    ai = int(np.searchsorted(cum, u_res, side="right"))
    ai = min(ai, len(cum) - 1)
    return ci, ai


def sample_jump_time(model: ModelSpec, m: AtomicMeasure,
                     rng: np.random.Generator,
                     step_control: StepControl = StepControl(),
                     force_thinning: bool = False,
                     max_candidates: int = 10 ** 7):
    """Sample the waiting time to the next jump from the current state.

    Returns ``(dt, flowed_m)`` with ``flowed_m`` the measure advanced by the
    flow to the jump time.  ``dt`` is +inf when all rates and bounds vanish
    (absorbed state).  With constant-along-flow channels this is one exact
    inverse-CDF exponential draw; otherwise thinning against the sum of the
    channel rate bounds.
    """
    m = m.copy()
    if all(ch.constant_along_flow for ch in model.channels) and not force_thinning:
        q = total_rate(model, m)
        if q <= 0.0:
            return np.inf, m
        dt = exponential_time(rng.random(), q)
        advance_measure(model.flows, m, dt, step_control, in_place=True)
        return dt, m
    q_bar = sum(ch.rate_bound(m) for ch in model.channels)
    if q_bar <= 0.0:
        return np.inf, m
    t = 0.0
    for _ in range(max_candidates):
        dt_c = exponential_time(rng.random(), q_bar)
        advance_measure(model.flows, m, dt_c, step_control, in_place=True)
        t += dt_c
        q = total_rate(model, m)
        ratio = q / q_bar
        if ratio > 1.0 + 1e-9:
            raise BoundViolation(
                f"acceptance ratio {ratio} > 1: rate_bound invalid at t={t}")
        if rng.random() < ratio:
            return t, m
    raise RuntimeError("thinning produced no accepted jump "
                       f"within {max_candidates} candidates")


class GeneratorProbe:
    """Accumulates, along one trajectory, the compensator U_t of the
    observable f(m) = <m, h> and the pathwise predictable quadratic
    variation of its martingale part.

    Between jumps, Lf and the quadratic-variation rate vary only through
    the flow; on frozen models they are constant per segment, otherwise
    both are integrated by per-substep Simpson quadrature while the flow is
    advanced.
    """

    def __init__(self, h: TestFunction):
        if h.flow_derivative is None and h.flow_derivative_array is None:
            raise ValueError("martingale probe needs h with a flow derivative")
        self.h = h
        self.U = 0.0
        self.QV = 0.0

    def _flow_term(self, m: AtomicMeasure) -> float:
        h = self.h
        if len(m) == 0:
            return 0.0
        if h.flow_derivative_array is not None:
            return float(m.weights @ h.flow_derivative_array(m.compartments,
                                                             m.traits))
        return float(sum(w * h.flow_derivative(x) for w, x in m.atoms()))

    def _channel_sums(self, model: ModelSpec, m: AtomicMeasure) -> tuple[float, float]:
        lf, qv = 0.0, 0.0
        if len(m) == 0:
            return lf, qv
        for ch in model.channels:
            prof = ch.rate_profile(m)
            if ch.jump_pairing_profile is not None:
                pr = ch.jump_pairing_profile(m, self.h)
                lf += float(m.weights @ (prof * pr))
            elif ch.jump_pairing is not None:
                lf += float(sum(m.weights[i] * prof[i] *
                                ch.jump_pairing(m, i, self.h)
                                for i in range(len(m)) if prof[i] > 0))
            else:
                raise ValueError(f"channel {ch.name} has no jump pairing")
            if ch.jump_pairing_sq_profile is not None:
                pr2 = ch.jump_pairing_sq_profile(m, self.h)
                qv += float(m.weights @ (prof * pr2))
            elif ch.jump_pairing_sq is not None:
                qv += float(sum(m.weights[i] * prof[i] *
                                ch.jump_pairing_sq(m, i, self.h)
                                for i in range(len(m)) if prof[i] > 0))
            else:
                raise ValueError(f"channel {ch.name} has no jump pairing")
        return lf, qv

    def rates(self, model: ModelSpec, m: AtomicMeasure) -> tuple[float, float]:
        lf_jump, qv = self._channel_sums(model, m)
        return self._flow_term(m) + lf_jump, qv

    def advance(self, model: ModelSpec, m: AtomicMeasure, tau: float,
                step_control: StepControl) -> None:
        """Advance m in place by tau while accumulating U and QV."""
        if tau <= 0.0:
            return
        if model.all_frozen:
            lf, qv = self.rates(model, m)
            self.U += tau * lf
            self.QV += tau * qv
            return
        n_sub = max(1, int(np.ceil(tau / step_control.max_h)))
        h_sub = tau / n_sub
        lf0, qv0 = self.rates(model, m)
        for _ in range(n_sub):
            advance_measure(model.flows, m, 0.5 * h_sub, step_control,
                            in_place=True)
            lfm, qvm = self.rates(model, m)
            advance_measure(model.flows, m, 0.5 * h_sub, step_control,
                            in_place=True)
            lf1, qv1 = self.rates(model, m)
            self.U += h_sub * (lf0 + 4.0 * lfm + lf1) / 6.0
            self.QV += h_sub * (qv0 + 4.0 * qvm + qv1) / 6.0
            lf0, qv0 = lf1, qv1


def simulate(model: ModelSpec, m0: AtomicMeasure, T: float, seed,
             record: RecordSpec = RecordSpec(),
             step_control: StepControl = StepControl(),
             force_thinning: bool = False,
             jump_cap: int = 10 ** 8,
             probe: Optional[GeneratorProbe] = None) -> Trajectory:
    """Run the full event loop to horizon T.

    Deterministic given (model, m0, T, seed, record): every stochastic
    decision consumes, in a fixed order, from a single generator seeded by
    ``seed`` (an int or a numpy SeedSequence).  Observables are recorded on
    the flowed state at grid times.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    t_start = _time.perf_counter()
    rng = np.random.default_rng(seed if isinstance(seed, np.random.SeedSequence)
                                else np.random.SeedSequence(seed))
    m = m0.copy()
    t = 0.0
    grid = np.arange(0.0, T + 0.5 * record.grid_dt, record.grid_dt)
    if grid[-1] < T - 1e-12:
        grid = np.append(grid, T)
    grid[-1] = min(grid[-1], T)
    obs_names = (list(model.observables) if record.observables is None
                 else list(record.observables))
    obs_fns = [model.observables[n] for n in obs_names]
    values: dict[str, list] = {n: [] for n in obs_names}
    times: list[float] = []
    events: list = []
    warnings: list = []
    jump_counts: dict[str, int] = defaultdict(int)
    g_idx = 0
    max_tv = max((ch.tv_bound for ch in model.channels), default=0.0)
    all_const = (all(ch.constant_along_flow for ch in model.channels)
                 and not force_thinning)

    def advance_to(target: float) -> None:
        nonlocal t
        tau = target - t
        if tau > 0.0:
            if probe is not None:
                probe.advance(model, m, tau, step_control)
            else:
                advance_measure(model.flows, m, tau, step_control,
                                in_place=True)
            t = target

    def record_until(target: float) -> None:
        nonlocal g_idx
        while g_idx < len(grid) and grid[g_idx] <= target + 1e-12:
            advance_to(min(grid[g_idx], target))
            times.append(grid[g_idx])
            for name, fn in zip(obs_names, obs_fns):
                values[name].append(pair(m, fn))
            if model.state_warning is not None:
                w = model.state_warning(m)
                if w:
                    warnings.append((grid[g_idx], w))
                    log.warning("t=%.4g: %s", grid[g_idx], w)
            g_idx += 1

    n_jumps = 0
    while True:
        # --- sample the next jump time from (t, m)
        if all_const:
            q = total_rate(model, m)
            dt = exponential_time(rng.random(), q)
            jump_t = t + dt
            if jump_t >= T:
                record_until(T)
                advance_to(T)
                break
            record_until(jump_t)
            advance_to(jump_t)
        else:
            q_bar = sum(ch.rate_bound(m) for ch in model.channels)
            if q_bar <= 0.0:
                record_until(T)
                advance_to(T)
                break
            accepted = False
            hit_horizon = False
            while not accepted:
                dt_c = exponential_time(rng.random(), q_bar)
                cand_t = t + dt_c
                if cand_t >= T:
                    record_until(T)
                    advance_to(T)
                    hit_horizon = True
                    break
                record_until(cand_t)
                advance_to(cand_t)
                q = total_rate(model, m)
                ratio = q / q_bar
                if ratio > 1.0 + 1e-9:
                    raise BoundViolation(
                        f"acceptance ratio {ratio} > 1 at t={t} "
                        f"(rate_bound invalid)")
                if rng.random() < ratio:
                    accepted = True
            if hit_horizon:
                break
        # --- perform the jump on the flowed state
        ci, ai = select_jump(model, m, rng)
        ch = model.channels[ci]
        pre_mass = m.total_mass()
        deps = ch.make_deposits(m, ai, rng)
        apply_deposits(m, deps, in_place=True)
        post_mass = m.total_mass()
        if abs(post_mass - pre_mass) > max_tv + 1e-9:
            raise RuntimeError(
                f"channel {ch.name} changed mass by {post_mass - pre_mass}, "
                f"beyond the declared kernel variation bound {max_tv}")
        jump_counts[ch.name] += 1
        n_jumps += 1
        if record.log_events:
            events.append((t, ch.name, pre_mass, post_mass))
        if n_jumps > jump_cap:
            raise ExplosionGuard(f"jump count exceeded cap {jump_cap}")

    return Trajectory(
        times=np.array(times),
        observables={n: np.array(v) for n, v in values.items()},
        events=events,
        jump_counts=dict(jump_counts),
        final=m,
        wall_time=_time.perf_counter() - t_start,
        warnings=warnings,
    )


def martingale_probe(model: ModelSpec, m0: AtomicMeasure, T: float,
                     h: TestFunction, seed,
                     step_control: StepControl = StepControl(),
                     ) -> tuple[float, float]:
    """One simulation accumulating the compensator of f(m) = <m, h>.

    Returns ``(M_T, predicted_qv)``: the terminal martingale increment
    f(X_T) - f(X_0) - U_T and the pathwise quadrature of the predictable
    quadratic variation."""
    probe = GeneratorProbe(h)
    f0 = pair(m0, h)
    traj = simulate(model, m0, T, seed,
                    record=RecordSpec(grid_dt=T, observables=()),
                    step_control=step_control, probe=probe)
    f_T = pair(traj.final, h)
    return f_T - f0 - probe.U, probe.QV
