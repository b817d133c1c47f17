"""Finite atomic measures on a hybrid compartment/trait state space.

The population state is a finite positive measure represented as a list of
weighted atoms.  An atom is an individual: an integer compartment tag plus
an optional continuous trait vector (0, 1 or 2 coordinates).  Internally the
atoms live in parallel numpy arrays so that rate evaluations and flow pushes
vectorize over the whole population.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np


class NegativeMassError(ValueError):
    """A removal would drive an atom weight below zero."""


@dataclass(frozen=True)
class Individual:
    compartment: int
    trait: tuple = ()


@dataclass
class TestFunction:
    """A bounded observable h on individuals, with optional flow derivative.

    ``eval`` maps one Individual to a real.  ``eval_array`` is an optional
    vectorized version acting on (compartments, traits) arrays; the engine
    prefers it when present.  ``flow_derivative`` gives the derivative of
    t -> h(state flowed by t) at t = 0 (zero on frozen compartments).
    """

    name: str
    eval: Callable[[Individual], float]
    sup_norm: float = np.inf
    flow_derivative: Optional[Callable[[Individual], float]] = None
    eval_array: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    flow_derivative_array: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None


class AtomicMeasure:
    """Finite positive measure as weighted atoms in parallel arrays.

    Atoms are a multiset: never deduplicated, never sorted.  ``traits`` has
    one row per atom padded with zeros up to the model's maximal trait
    dimension.  The object is either an exclusively owned mutable buffer
    (inside the engine loop) or treated as an immutable snapshot.
    """

    __slots__ = ("weights", "compartments", "traits")

    def __init__(self, weights, compartments, traits=None, trait_dim: int = 0):
        self.weights = np.atleast_1d(np.asarray(weights, dtype=float))
        self.compartments = np.atleast_1d(np.asarray(compartments, dtype=np.int64))
        if traits is None:
            traits = np.zeros((len(self.weights), trait_dim))
        traits = np.asarray(traits, dtype=float)
        if traits.ndim != 2:
            if traits.size == 0:
                traits = traits.reshape(len(self.weights), trait_dim)
            else:
                traits = traits.reshape(len(self.weights), -1)
        self.traits = traits
        if len(self.compartments) != len(self.weights):
            raise ValueError("weights and compartments length mismatch")

    @classmethod
    def empty(cls, trait_dim: int = 0) -> "AtomicMeasure":
        return cls(np.zeros(0), np.zeros(0, dtype=np.int64),
                   np.zeros((0, trait_dim)))

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[float, Individual]],
                   trait_dim: Optional[int] = None) -> "AtomicMeasure":
        atoms = list(atoms)
        if trait_dim is None:
            trait_dim = max((len(ind.trait) for _, ind in atoms), default=0)
        w = np.array([a[0] for a in atoms], dtype=float)
        c = np.array([a[1].compartment for a in atoms], dtype=np.int64)
        t = np.zeros((len(atoms), trait_dim))
        for k, (_, ind) in enumerate(atoms):
            t[k, :len(ind.trait)] = ind.trait
        return cls(w, c, t)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def trait_dim(self) -> int:
        return self.traits.shape[1]

    def atom(self, i: int) -> Individual:
        return Individual(int(self.compartments[i]), tuple(self.traits[i]))

    def atoms(self):
        for i in range(len(self)):
            yield float(self.weights[i]), self.atom(i)

    def total_mass(self) -> float:
        return float(self.weights.sum())

    def copy(self) -> "AtomicMeasure":
        return AtomicMeasure(self.weights.copy(), self.compartments.copy(),
                             self.traits.copy())

    def compartment_mass(self, comp: int) -> float:
        return float(self.weights[self.compartments == comp].sum())


def pair(m: AtomicMeasure, h: TestFunction) -> float:
    """The pairing <m, h> = sum of weight * h(atom)."""
    if len(m) == 0:
        return 0.0
    if h.eval_array is not None:
        return float(m.weights @ h.eval_array(m.compartments, m.traits))
    return float(sum(w * h.eval(x) for w, x in m.atoms()))


def total_mass(m: AtomicMeasure) -> float:
    return m.total_mass()


def panel_distance(m1: AtomicMeasure, m2: AtomicMeasure,
                   panel: Sequence[TestFunction]) -> float:
    """Max over the panel of |<m1,h> - <m2,h>|, a finite surrogate for the
    weak distance between measures."""
    if not panel:
        raise ValueError("panel must be nonempty")
    return max(abs(pair(m1, h) - pair(m2, h)) for h in panel)


# ---------------------------------------------------------------------------
# Deposits: the realized jump m -> m + k(m, x)

@dataclass(frozen=True)
class Remove:
    """Remove ``weight`` from atom ``index`` (None = the whole atom)."""
    index: int
    weight: Optional[float] = None


@dataclass(frozen=True)
class Add:
    compartment: int
    trait: tuple = ()
    weight: float = 1.0


Deposit = Union[Remove, Add]


def apply_deposits(m: AtomicMeasure, deposits: Sequence[Deposit],
                   in_place: bool = False) -> AtomicMeasure:
    """Apply removals then additions.  Removal is by atom index, chosen by
    the engine; an over-removal below -1e-12 raises NegativeMassError."""
    if not in_place:
        m = m.copy()
    if not deposits:
        return m
    removals = [d for d in deposits if isinstance(d, Remove)]
    adds = [d for d in deposits if isinstance(d, Add)]

    # Fast path: full single removal replaced by a single add reuses the slot.
    if (len(removals) == 1 and removals[0].weight is None and len(adds) == 1
            and abs(adds[0].weight - m.weights[removals[0].index]) < 1e-15):
        i, a = removals[0].index, adds[0]
        m.compartments[i] = a.compartment
        m.traits[i, :] = 0.0
        m.traits[i, :len(a.trait)] = a.trait
        return m

    dead = []
    for r in removals:
        w_r = m.weights[r.index] if r.weight is None else r.weight
        new_w = m.weights[r.index] - w_r
        if new_w < -1e-12:
            raise NegativeMassError(
                f"removal of {w_r} from atom {r.index} with weight "
                f"{m.weights[r.index]}")
        m.weights[r.index] = new_w
        if new_w <= 0.0:
            dead.append(r.index)
    if dead:
        keep = np.ones(len(m), dtype=bool)
        keep[dead] = False
        m.weights = m.weights[keep]
        m.compartments = m.compartments[keep]
        m.traits = m.traits[keep]
    if adds:
        d = m.trait_dim
        new_t = np.zeros((len(adds), d))
        for k, a in enumerate(adds):
            new_t[k, :len(a.trait)] = a.trait
        m.weights = np.concatenate([m.weights, [a.weight for a in adds]])
        m.compartments = np.concatenate(
            [m.compartments, np.array([a.compartment for a in adds], dtype=np.int64)])
        m.traits = np.concatenate([m.traits, new_t])
    return m


# ---------------------------------------------------------------------------
# Observable constructors

def indicator(name: str, comp: int) -> TestFunction:
    return TestFunction(
        name=name,
        eval=lambda x, c=comp: 1.0 if x.compartment == c else 0.0,
        sup_norm=1.0,
        flow_derivative=lambda x: 0.0,
        eval_array=lambda comps, traits, c=comp: (comps == c).astype(float),
        flow_derivative_array=lambda comps, traits: np.zeros(len(comps)),
    )


def constant(value: float = 1.0, name: str = "mass") -> TestFunction:
    return TestFunction(
        name=name,
        eval=lambda x, v=value: v,
        sup_norm=abs(value),
        flow_derivative=lambda x: 0.0,
        eval_array=lambda comps, traits, v=value: np.full(len(comps), v),
        flow_derivative_array=lambda comps, traits: np.zeros(len(comps)),
    )


def trait_moment(name: str, comp: int, power: int = 1, coord: int = 0,
                 flow_rate: Optional[Callable] = None) -> TestFunction:
    """Moment x_coord^power restricted to one compartment.  Unbounded;
    usable as observable, not as a sup-norm-audited test function.

    ``flow_rate``, if given, is the numpy-vectorized speed dx/dt of the
    tracked coordinate as a function of its value, so the flow derivative
    p x^(p-1) flow_rate(x) is available analytically.
    """

    def _eval(x, c=comp, p=power, j=coord):
        return x.trait[j] ** p if x.compartment == c else 0.0

    def _eval_arr(comps, traits, c=comp, p=power, j=coord):
        return np.where(comps == c, traits[:, j] ** p, 0.0)

    tf = TestFunction(name=name, eval=_eval, sup_norm=np.inf,
                      eval_array=_eval_arr)
    if flow_rate is not None:
        tf.flow_derivative = lambda x, c=comp, p=power, j=coord: (
            p * x.trait[j] ** (p - 1) * float(flow_rate(x.trait[j]))
            if x.compartment == c else 0.0)
        tf.flow_derivative_array = lambda comps, traits, c=comp, p=power, j=coord: (
            np.where(comps == c,
                     p * traits[:, j] ** (p - 1) * flow_rate(traits[:, j]), 0.0))
    return tf


def gaussian_bump(name: str, comp: int, center: float, width: float,
                  coord: int = 0) -> TestFunction:
    def _eval(x, c=comp, mu=center, s=width, j=coord):
        if x.compartment != c:
            return 0.0
        return float(np.exp(-0.5 * ((x.trait[j] - mu) / s) ** 2))

    def _eval_arr(comps, traits, c=comp, mu=center, s=width, j=coord):
        return np.where(comps == c,
                        np.exp(-0.5 * ((traits[:, j] - mu) / s) ** 2), 0.0)

    return TestFunction(name=name, eval=_eval, sup_norm=1.0,
                        eval_array=_eval_arr)


def write_measure_csv(m: AtomicMeasure, path,
                      comp_trait_dims: Optional[dict] = None) -> None:
    """Dump atoms as ``weight, compartment, trait_0, trait_1`` with empty
    cells for absent trait dimensions."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["weight", "compartment", "trait_0", "trait_1"])
        for i in range(len(m)):
            comp = int(m.compartments[i])
            dim = m.trait_dim if comp_trait_dims is None else comp_trait_dims.get(comp, 0)
            row = [repr(float(m.weights[i])), comp]
            for j in range(2):
                row.append(repr(float(m.traits[i, j])) if j < dim else "")
            wr.writerow(row)
