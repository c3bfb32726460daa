"""States, effects and measurements for the two concrete finite-dimensional
models (quantum density matrices / classical probability vectors), together
with the pairing rule, coarse-graining and parallel composition.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import ModelMismatchError, ValidationError

QUANTUM = "quantum"
CLASSICAL = "classical"

_tolerance = 1e-9


def tolerance() -> float:
    """Current global numerical tolerance for matrix-identity and PSD checks."""
    return _tolerance


def set_tolerance(tol: float) -> None:
    """Override the global tolerance (exploratory use; default 1e-9)."""
    global _tolerance
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    _tolerance = float(tol)


def outcome_labels(n: int) -> tuple[str, ...]:
    """Zero-padded decimal outcome labels '0'..'n-1' so that the canonical
    (lexicographic) order matches numeric order."""
    width = len(str(max(n - 1, 0)))
    return tuple(str(i).zfill(width) for i in range(n))


@dataclass(frozen=True)
class System:
    """A finite-dimensional system: quantum (Hilbert dimension d) or
    classical (sample space of size d)."""

    model: str
    dimension: int

    def __post_init__(self):
        if self.model not in (QUANTUM, CLASSICAL):
            raise ValidationError(f"unknown model {self.model!r}")
        if self.dimension < 1:
            raise ValidationError("dimension must be >= 1")


def qubit() -> System:
    return System(QUANTUM, 2)


def _coerce_data(system: System, data) -> np.ndarray:
    d = system.dimension
    if system.model == QUANTUM:
        arr = np.array(data, dtype=complex)
        if arr.shape != (d, d):
            raise ValidationError(f"expected a {d}x{d} matrix, got shape {arr.shape}")
    else:
        arr = np.array(data, dtype=float)
        if arr.shape != (d,):
            raise ValidationError(f"expected a length-{d} vector, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class State:
    """A preparation: density matrix (quantum) or probability vector
    (classical).  Construction checks shape only; `validate` reports
    invariant violations without raising."""

    system: System
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _coerce_data(self.system, self.data))


@dataclass(frozen=True, eq=False)
class Effect:
    """A single measurement event: 0 <= E <= I operator (quantum) or a
    vector with entries in [0, 1] (classical)."""

    system: System
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _coerce_data(self.system, self.data))


class Measurement:
    """A finite outcome-indexed family of effects summing to the unit.

    Outcome labels are strings; iteration order is the canonical sorted
    order of the labels.
    """

    def __init__(self, system: System, effects: Mapping[str, Effect]):
        if not effects:
            raise ValidationError("a measurement needs at least one outcome")
        for label, eff in effects.items():
            if eff.system != system:
                raise ModelMismatchError(
                    f"effect for outcome {label!r} lives on {eff.system}, not {system}")
        self.system = system
        self._effects = {str(k): effects[k] for k in sorted(effects, key=str)}
        self.outcomes = tuple(self._effects)

    def effect(self, outcome: str) -> Effect:
        return self._effects[outcome]

    def effects(self) -> dict[str, Effect]:
        return dict(self._effects)

    def items(self):
        return self._effects.items()

    def __len__(self):
        return len(self._effects)

    def __repr__(self):
        return (f"Measurement({self.system.model}, d={self.system.dimension}, "
                f"outcomes={list(self.outcomes)})")


@dataclass(frozen=True)
class Violation:
    """A failed invariant, by name, with the numerical residual."""

    invariant: str
    residual: float

    def __str__(self):
        return f"{self.invariant}: residual {self.residual:.3e}"


def _herm_residual(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - a.conj().T, 2))


def _eig_range(a: np.ndarray) -> tuple[float, float]:
    w = np.linalg.eigvalsh((a + a.conj().T) / 2)
    return float(w[0]), float(w[-1])


def validate_state(state: State) -> list[Violation]:
    out = []
    tol = tolerance()
    if state.system.model == QUANTUM:
        h = _herm_residual(state.data)
        if h > tol:
            out.append(Violation("hermitian", h))
        lo, _ = _eig_range(state.data)
        if lo < -tol:
            out.append(Violation("positive-semidefinite", -lo))
        tr = abs(np.trace(state.data) - 1.0)
        if tr > tol:
            out.append(Violation("unit-trace", float(tr)))
    else:
        neg = float(max(0.0, -state.data.min()))
        if neg > tol:
            out.append(Violation("nonnegative", neg))
        s = abs(float(state.data.sum()) - 1.0)
        if s > tol:
            out.append(Violation("normalized", s))
    return out


def validate_effect(effect: Effect) -> list[Violation]:
    out = []
    tol = tolerance()
    if effect.system.model == QUANTUM:
        h = _herm_residual(effect.data)
        if h > tol:
            out.append(Violation("hermitian", h))
        lo, hi = _eig_range(effect.data)
        if lo < -tol:
            out.append(Violation("positive-semidefinite", -lo))
        if hi > 1.0 + tol:
            out.append(Violation("below-unit", hi - 1.0))
    else:
        neg = float(max(0.0, -effect.data.min()))
        if neg > tol:
            out.append(Violation("nonnegative", neg))
        hi = float(max(0.0, effect.data.max() - 1.0))
        if hi > tol:
            out.append(Violation("below-unit", hi))
    return out


def validate_measurement(m: Measurement) -> list[Violation]:
    out = []
    for label, eff in m.items():
        for v in validate_effect(eff):
            out.append(Violation(f"effect[{label}].{v.invariant}", v.residual))
    total = sum(eff.data for eff in m.effects().values())
    u = unit(m.system).data
    if m.system.model == QUANTUM:
        res = float(np.linalg.norm(total - u, 2))
    else:
        res = float(np.abs(total - u).max())
    if res > tolerance():
        out.append(Violation("causality (effects sum to unit)", res))
    return out


def pair(effect: Effect, state: State) -> float:
    """Outcome probability of `effect` on `state`, clamped to [0, 1].

    Quantum model: Re tr(E rho); classical model: dot product.
    """
    if effect.system != state.system:
        raise ModelMismatchError(
            f"effect on {effect.system} paired with state on {state.system}")
    if effect.system.model == QUANTUM:
        p = float(np.trace(effect.data @ state.data).real)
    else:
        p = float(np.dot(effect.data, state.data))
    return min(1.0, max(0.0, p))


def unit(system: System) -> Effect:
    """The unit effect: identity matrix / all-ones vector."""
    if system.model == QUANTUM:
        return Effect(system, np.eye(system.dimension))
    return Effect(system, np.ones(system.dimension))


def zero_effect(system: System) -> Effect:
    if system.model == QUANTUM:
        return Effect(system, np.zeros((system.dimension, system.dimension)))
    return Effect(system, np.zeros(system.dimension))


def coarse_grain(m: Measurement, partition: Mapping[str, str]) -> Measurement:
    """Join outcomes into groups: the effect of group z is the sum of the
    effects of the outcomes mapped to z."""
    missing = [x for x in m.outcomes if x not in partition]
    if missing:
        raise ValidationError(f"partition does not cover outcomes {missing}")
    groups: dict[str, np.ndarray] = {}
    for x in m.outcomes:
        z = str(partition[x])
        data = m.effect(x).data
        groups[z] = data if z not in groups else groups[z] + data
    return Measurement(m.system, {z: Effect(m.system, a) for z, a in groups.items()})


def _tensor_system(a: System, b: System) -> System:
    if a.model != b.model:
        raise ModelMismatchError(f"cannot compose {a.model} with {b.model}; "
                                 "promote the classical side with as_quantum first")
    return System(a.model, a.dimension * b.dimension)


def tensor(a: Union[State, Effect], b: Union[State, Effect]):
    """Parallel composition (Kronecker product of the data arrays)."""
    if isinstance(a, State) and isinstance(b, State):
        return State(_tensor_system(a.system, b.system), np.kron(a.data, b.data))
    if isinstance(a, Effect) and isinstance(b, Effect):
        return Effect(_tensor_system(a.system, b.system), np.kron(a.data, b.data))
    raise ValidationError("tensor combines two states or two effects")


def product_measurement(m: Measurement, n: Measurement) -> Measurement:
    """Two measurements performed in parallel; outcome labels are 'x,y'."""
    system = _tensor_system(m.system, n.system)
    effects = {}
    for x, ex in m.items():
        for y, ey in n.items():
            effects[f"{x},{y}"] = Effect(system, np.kron(ex.data, ey.data))
    return Measurement(system, effects)


def as_quantum(obj):
    """Embed a classical state/effect/measurement as its diagonal quantum
    counterpart (one tensor code path for hybrid compositions)."""
    if isinstance(obj, State):
        if obj.system.model == QUANTUM:
            return obj
        return State(System(QUANTUM, obj.system.dimension), np.diag(obj.data))
    if isinstance(obj, Effect):
        if obj.system.model == QUANTUM:
            return obj
        return Effect(System(QUANTUM, obj.system.dimension), np.diag(obj.data))
    if isinstance(obj, Measurement):
        if obj.system.model == QUANTUM:
            return obj
        sys_q = System(QUANTUM, obj.system.dimension)
        return Measurement(sys_q, {x: Effect(sys_q, np.diag(e.data))
                                   for x, e in obj.items()})
    raise ValidationError(f"cannot promote {type(obj).__name__}")


def pure(amplitudes: Sequence[complex]) -> State:
    """Pure quantum state from an amplitude vector (normalized here)."""
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValidationError("zero vector is not a state")
    v = v / norm
    return State(System(QUANTUM, v.size), np.outer(v, v.conj()))


def projector(amplitudes: Sequence[complex]) -> Effect:
    """Rank-1 projector effect onto the given (normalized here) vector."""
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValidationError("zero vector spans no subspace")
    v = v / norm
    return Effect(System(QUANTUM, v.size), np.outer(v, v.conj()))


def basis_state(d: int, i: int) -> State:
    v = np.zeros(d)
    v[i] = 1.0
    return pure(v)


def maximally_mixed(d: int) -> State:
    return State(System(QUANTUM, d), np.eye(d) / d)


def basis_measurement(d: int) -> Measurement:
    """Projective measurement in the computational basis."""
    system = System(QUANTUM, d)
    labels = outcome_labels(d)
    effects = {}
    for i, lab in enumerate(labels):
        p = np.zeros((d, d))
        p[i, i] = 1.0
        effects[lab] = Effect(system, p)
    return Measurement(system, effects)


def spanning_states(d: int) -> list[State]:
    """d^2 density matrices spanning the Hermitian operators on C^d.

    By linearity, two measurements agreeing on these agree on every state.
    """
    out = []
    for i in range(d):
        out.append(basis_state(d, i))
    for i in range(d):
        for j in range(i + 1, d):
            v = np.zeros(d, dtype=complex)
            v[i] = 1.0
            v[j] = 1.0
            out.append(pure(v))
            v[j] = 1.0j
            out.append(pure(v))
    return out
