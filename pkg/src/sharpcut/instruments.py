"""Non-demolition measurements (instruments) on the quantum model: operator-sum
transformations, repeatability / non-disturbance / refinement checks, the
projector-conjugation (Lueders) construction, sequential joint measurement of
mutually orthogonal projectors, and projective dilations with an ancilla.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import (
    QUANTUM,
    Effect,
    Measurement,
    State,
    System,
    Violation,
    outcome_labels,
    pair,
    spanning_states,
    tensor,
    tolerance,
    validate_measurement,
)
from .errors import (
    ModelMismatchError,
    OrthogonalityError,
    ValidationError,
    ZeroProbabilityError,
)

_opnorm = lambda a: float(np.linalg.norm(a, 2))


@dataclass(frozen=True, eq=False)
class Transformation:
    """One measurement branch in operator-sum form: rho -> sum_k A_k rho A_k†.

    Trace-nonincreasing: sum_k A_k† A_k <= I.
    """

    system: System
    operators: tuple

    def __post_init__(self):
        if self.system.model != QUANTUM:
            raise ValidationError("instruments are implemented for the quantum model only")
        d = self.system.dimension
        ops = []
        for a in self.operators:
            arr = np.array(a, dtype=complex)
            if arr.shape != (d, d):
                raise ValidationError(f"operator shape {arr.shape}, expected {(d, d)}")
            arr.setflags(write=False)
            ops.append(arr)
        if not ops:
            raise ValidationError("a transformation needs at least one operator")
        object.__setattr__(self, "operators", tuple(ops))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Schroedinger action on a density matrix (unnormalized result)."""
        return sum(a @ rho @ a.conj().T for a in self.operators)

    def heisenberg(self, effect: np.ndarray) -> np.ndarray:
        """Adjoint action on an effect operator: sum_k A_k† E A_k."""
        return sum(a.conj().T @ effect @ a for a in self.operators)

    def total_effect(self) -> np.ndarray:
        return self.heisenberg(np.eye(self.system.dimension))


class Instrument:
    """An outcome-indexed family of transformations whose total is
    trace-preserving."""

    def __init__(self, system: System, branches: Mapping[str, Transformation]):
        if not branches:
            raise ValidationError("an instrument needs at least one outcome")
        for label, tr in branches.items():
            if tr.system != system:
                raise ModelMismatchError(
                    f"branch {label!r} lives on {tr.system}, not {system}")
        self.system = system
        self._branches = {str(k): branches[k] for k in sorted(branches, key=str)}
        self.outcomes = tuple(self._branches)

    def branch(self, outcome: str) -> Transformation:
        return self._branches[outcome]

    def items(self):
        return self._branches.items()

    def __len__(self):
        return len(self._branches)

    def __repr__(self):
        return (f"Instrument(d={self.system.dimension}, "
                f"outcomes={list(self.outcomes)})")


@dataclass(frozen=True, eq=False)
class Dilation:
    """Realization of a measurement as a projective one on system (x) ancilla
    with the ancilla in a fixed state."""

    system: System
    ancilla: System
    ancilla_state: State
    measurement: Measurement


@dataclass(frozen=True, eq=False)
class SharedDilation:
    """One ancilla and one ancilla state realizing a whole family of
    measurements as projective measurements on system (x) ancilla."""

    system: System
    ancilla: System
    ancilla_state: State
    measurements: dict


def validate_transformation(tr: Transformation) -> list[Violation]:
    out = []
    total = tr.total_effect()
    hi = float(np.linalg.eigvalsh((total + total.conj().T) / 2)[-1])
    if hi > 1.0 + tolerance():
        out.append(Violation("trace-nonincreasing", hi - 1.0))
    return out


def validate_instrument(instr: Instrument) -> list[Violation]:
    out = []
    for label, tr in instr.items():
        for v in validate_transformation(tr):
            out.append(Violation(f"branch[{label}].{v.invariant}", v.residual))
    total = sum(tr.total_effect() for tr in dict(instr.items()).values())
    res = _opnorm(total - np.eye(instr.system.dimension))
    if res > tolerance():
        out.append(Violation("trace-preserving total", res))
    return out


def induced_measurement(instr: Instrument) -> Measurement:
    """The demolition measurement describing the instrument's statistics:
    m_x = sum_k A_{x,k}† A_{x,k}."""
    bad = validate_instrument(instr)
    if bad:
        raise ValidationError("invalid instrument: " + "; ".join(map(str, bad)))
    effects = {x: Effect(instr.system, tr.total_effect()) for x, tr in instr.items()}
    return Measurement(instr.system, effects)


def apply_instrument(instr: Instrument, rho: State, outcome: str):
    """Probability of `outcome` on `rho` and the normalized post-measurement
    state.  Raises ZeroProbabilityError when the outcome probability is below
    tolerance (no post-state exists)."""
    if rho.system != instr.system:
        raise ModelMismatchError(f"state on {rho.system}, instrument on {instr.system}")
    tr = instr.branch(outcome)
    post = tr.apply(rho.data)
    p = float(np.trace(post).real)
    if p <= tolerance():
        raise ZeroProbabilityError(
            f"outcome {outcome!r} has probability {p:.3e}; no post-state")
    return min(1.0, max(0.0, p)), State(instr.system, post / p)


def is_repeatable(instr: Instrument):
    """Whether a second run of the instrument reproduces the first outcome
    with certainty: the adjoint of each branch fixes its own induced effect.

    Returns (flag, residual) with residual the max operator-norm deviation.
    """
    m = induced_measurement(instr)
    residual = 0.0
    for x, tr in instr.items():
        dev = _opnorm(tr.heisenberg(m.effect(x).data) - m.effect(x).data)
        residual = max(residual, dev)
    return residual <= tolerance(), residual


def disturbs(instr: Instrument, n: Measurement):
    """Whether running the instrument (outcome discarded) changes the
    statistics of measurement `n`.  Returns (flag, residual); flag is True
    when some effect of `n` is not preserved by the total adjoint map."""
    if n.system != instr.system:
        raise ModelMismatchError(f"measurement on {n.system}, instrument on {instr.system}")
    residual = 0.0
    for _, eff in n.items():
        total = sum(tr.heisenberg(eff.data) for _, tr in instr.items())
        residual = max(residual, _opnorm(total - eff.data))
    return residual > tolerance(), residual


def satisfies_refinement_identity(instr: Instrument, refinement: Measurement,
                                  grouping: Mapping[str, str]):
    """Check that each branch adjoint fixes every effect of a measurement
    refining the instrument's statistics.

    `grouping` maps each outcome of `refinement` to an outcome of the
    instrument; group sums must reproduce the induced effects.  Returns
    (flag, residual).
    """
    m = induced_measurement(instr)
    missing = [y for y in refinement.outcomes if y not in grouping]
    if missing:
        raise ValidationError(f"grouping does not cover outcomes {missing}")
    sums = {x: np.zeros_like(m.effect(x).data) for x in m.outcomes}
    for y in refinement.outcomes:
        x = str(grouping[y])
        if x not in sums:
            raise ValidationError(f"grouping target {x!r} is not an instrument outcome")
        sums[x] = sums[x] + refinement.effect(y).data
    for x in m.outcomes:
        dev = _opnorm(sums[x] - m.effect(x).data)
        if dev > tolerance():
            raise ValidationError(
                f"not a refinement: group {x!r} sums off by {dev:.3e}")
    residual = 0.0
    for y in refinement.outcomes:
        x = str(grouping[y])
        r = refinement.effect(y).data
        residual = max(residual, _opnorm(instr.branch(x).heisenberg(r) - r))
    return residual <= tolerance(), residual


def _is_projector(a: np.ndarray) -> bool:
    tol = tolerance()
    return (_opnorm(a - a.conj().T) <= tol and _opnorm(a @ a - a) <= tol)


def is_sharp(instr: Instrument) -> bool:
    """Structural test for the ideal instruments of the quantum model:
    each branch must be conjugation by one projector of a mutually
    orthogonal family.

    Checks (i) each induced effect is a projector, (ii) the effects are
    mutually orthogonal, (iii) each branch channel equals P_x . P_x on a
    full operator basis.
    """
    if instr.system.model != QUANTUM:
        raise ValidationError("sharpness test applies to the quantum model")
    m = induced_measurement(instr)
    projs = {x: m.effect(x).data for x in m.outcomes}
    for p in projs.values():
        if not _is_projector(p):
            return False
    labels = list(projs)
    tol = tolerance()
    for i, x in enumerate(labels):
        for y in labels[i + 1:]:
            if _opnorm(projs[x] @ projs[y]) > tol:
                return False
    d = instr.system.dimension
    for x, tr in instr.items():
        p = projs[x]
        for i in range(d):
            for j in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1.0
                if _opnorm(tr.apply(e) - p @ e @ p) > tol:
                    return False
    return True


def _check_projector_family(effects: Sequence[Effect], orthogonal: bool = True):
    if not effects:
        raise ValidationError("need at least one effect")
    system = effects[0].system
    if system.model != QUANTUM:
        raise ValidationError("projector families live in the quantum model")
    tol = tolerance()
    for k, e in enumerate(effects):
        if e.system != system:
            raise ModelMismatchError("effects on different systems")
        if not _is_projector(e.data):
            raise ValidationError(f"effect {k} is not a projector within {tol:g}")
    if orthogonal:
        for k in range(len(effects)):
            for l in range(k + 1, len(effects)):
                res = _opnorm(effects[k].data @ effects[l].data)
                if res > tol:
                    raise OrthogonalityError(
                        f"effects {k} and {l} are not orthogonal (residual {res:.3e})",
                        pair=(k, l), residual=res)
    return system


def luders(projectors: Sequence[Effect]) -> Instrument:
    """Instrument with branches rho -> P_x rho P_x for mutually orthogonal
    projectors.  If the projectors do not sum to the identity, the deficit
    (itself a projector) is appended as one extra branch."""
    system = _check_projector_family(projectors)
    d = system.dimension
    ops = [p.data for p in projectors]
    total = sum(ops)
    deficit = np.eye(d) - total
    if _opnorm(deficit) > tolerance():
        ops = ops + [deficit]
    labels = outcome_labels(len(ops))
    branches = {lab: Transformation(system, (op,)) for lab, op in zip(labels, ops)}
    return Instrument(system, branches)


def measure_and_prepare(m: Measurement, states: Mapping[str, State]) -> Instrument:
    """Measure `m` destructively and re-prepare a fixed pure state per
    outcome: branch operators |phi_x><psi_{x,k}| from the effect
    decomposition m_x = sum_k |psi_{x,k}><psi_{x,k}|."""
    if m.system.model != QUANTUM:
        raise ValidationError("measure-and-prepare is implemented for the quantum model")
    branches = {}
    for x, eff in m.items():
        if x not in states:
            raise ValidationError(f"no re-preparation state for outcome {x!r}")
        rho = states[x]
        if rho.system != m.system:
            raise ModelMismatchError("re-preparation state on a different system")
        w, v = np.linalg.eigh((rho.data + rho.data.conj().T) / 2)
        if w[-1] < 1.0 - tolerance() * 10:
            raise ValidationError(f"re-preparation state for {x!r} is not pure")
        phi = v[:, -1]
        we, ve = np.linalg.eigh((eff.data + eff.data.conj().T) / 2)
        ops = []
        for lam, col in zip(we, ve.T):
            if lam > tolerance():
                psi = np.sqrt(lam) * col
                ops.append(np.outer(phi, psi.conj()))
        if not ops:
            ops = [np.zeros_like(eff.data)]
        branches[x] = Transformation(m.system, tuple(ops))
    return Instrument(m.system, branches)


def joint_from_orthogonal(effects: Sequence[Effect], witnesses=None):
    """Joint measurement of mutually orthogonal sharp effects m_1..m_K via a
    chain of binary projector instruments: run the k-th instrument only if
    all previous ones answered "no".

    In the quantum model orthogonality is checked directly as m_k m_l = 0;
    `witnesses` (a mapping (k, l) -> Measurement containing both effects) is
    accepted and verified when supplied.  Returns (instrument, measurement);
    the first K induced effects reproduce the inputs and outcome K+1 carries
    the remainder.
    """
    system = _check_projector_family(effects)
    if witnesses is not None:
        for (k, l), wit in witnesses.items():
            _verify_witness(effects[k], effects[l], wit)
    d = system.dimension
    eye = np.eye(d)
    K = len(effects)
    labels = outcome_labels(K + 1)
    chain = eye  # product Q_{k-1} ... Q_1 of the "no" projectors so far
    branches = {}
    for k, eff in enumerate(effects):
        branches[labels[k]] = Transformation(system, (eff.data @ chain,))
        chain = (eye - eff.data) @ chain
    branches[labels[K]] = Transformation(system, (chain,))
    instr = Instrument(system, branches)
    return instr, induced_measurement(instr)


def _verify_witness(a: Effect, b: Effect, witness: Measurement):
    tol = tolerance()
    data = [eff.data for _, eff in witness.items()]
    if not any(_opnorm(m - a.data) <= tol for m in data):
        raise ValidationError("witness measurement does not contain the first effect")
    if not any(_opnorm(m - b.data) <= tol for m in data):
        raise ValidationError("witness measurement does not contain the second effect")


def _sqrt_psd(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def _complete_unitary(columns: np.ndarray) -> np.ndarray:
    """Extend orthonormal columns to a full unitary by Gram-Schmidt over the
    standard basis in index order (deterministic)."""
    dim = columns.shape[0]
    cols = [columns[:, j] for j in range(columns.shape[1])]
    for i in range(dim):
        if len(cols) == dim:
            break
        v = np.zeros(dim, dtype=complex)
        v[i] = 1.0
        for _ in range(2):  # re-orthogonalize once for numerical stability
            for c in cols:
                v = v - c * (c.conj() @ v)
        norm = np.linalg.norm(v)
        if norm > 1e-7:
            cols.append(v / norm)
    if len(cols) != dim:
        raise ValidationError("failed to complete an orthonormal basis")
    return np.column_stack(cols)


def naimark_dilate(m: Measurement) -> Dilation:
    """Projective realization of a measurement on system (x) ancilla.

    Ancilla dimension = number of outcomes, ancilla state |0><0|.  The
    isometry V = sum_x sqrt(m_x) (x) |x> is extended to a unitary U and the
    dilated effects are M_x = U† (I (x) |x><x|) U, so that
    tr[m_x rho] = tr[M_x (rho (x) sigma)] for every state rho.
    """
    bad = validate_measurement(m)
    if bad:
        raise ValidationError("invalid measurement: " + "; ".join(map(str, bad)))
    if m.system.model != QUANTUM:
        raise ValidationError("dilation is implemented for the quantum model")
    d = m.system.dimension
    n = len(m)
    ancilla = System(QUANTUM, n)
    anc_vec = np.zeros(n)
    anc_vec[0] = 1.0
    anc_state = State(ancilla, np.outer(anc_vec, anc_vec))

    # Isometry columns: |i>(x)|0>  ->  sum_x sqrt(m_x)|i> (x) |x>
    roots = [_sqrt_psd(m.effect(x).data) for x in m.outcomes]
    v_iso = np.zeros((d * n, d), dtype=complex)
    for xi, root in enumerate(roots):
        for i in range(d):
            # row index of |j>(x)|x> is j*n + x
            v_iso[xi::n, i] += root[:, i]
    # Place the isometry columns at input positions i*n + 0, then complete.
    u = np.zeros((d * n, d * n), dtype=complex)
    full = _complete_unitary(v_iso)
    # Reorder columns so that column i*n+0 is V e_i and the completions fill
    # the remaining input positions in order.
    rest = list(full[:, d:].T)
    for i in range(d):
        u[:, i * n] = full[:, i]
    k = 0
    for col in range(d * n):
        if col % n == 0:
            continue
        u[:, col] = rest[k]
        k += 1

    composite = System(QUANTUM, d * n)
    effects = {}
    for xi, x in enumerate(m.outcomes):
        sel = np.zeros((n, n))
        sel[xi, xi] = 1.0
        proj = np.kron(np.eye(d), sel)
        effects[x] = Effect(composite, u.conj().T @ proj @ u)
    dilated = Measurement(composite, effects)
    return Dilation(m.system, ancilla, anc_state, dilated)


def dilation_deviation(m: Measurement, dil: Dilation) -> float:
    """Max |tr[m_x rho] - tr[M_x (rho (x) sigma)]| over a spanning set of
    states (hence, by linearity, over all states)."""
    dev = 0.0
    for rho in spanning_states(m.system.dimension):
        joint = tensor(rho, dil.ancilla_state)
        for x in m.outcomes:
            p_direct = pair(m.effect(x), rho)
            p_dilated = pair(dil.measurement.effect(x), joint)
            dev = max(dev, abs(p_direct - p_dilated))
    return dev


def _embed_pair(op: np.ndarray, dims: Sequence[int], site: int) -> np.ndarray:
    """Embed an operator acting on tensor factors (0, site) into the full
    product with factor dimensions `dims`, identity elsewhere."""
    L = len(dims)
    rest = [dims[j] for j in range(1, L) if j != site]
    mat = np.kron(op, np.eye(int(np.prod(rest)))) if rest else op
    order = [0, site] + [j for j in range(1, L) if j != site]
    shape = [dims[k] for k in order]
    t = mat.reshape(shape + shape)
    perm = [order.index(k) for k in range(L)]
    t = np.transpose(t, perm + [L + p for p in perm])
    full_dim = int(np.prod(dims))
    return t.reshape(full_dim, full_dim)


def shared_ancilla_dilation(measurements: Mapping[str, Measurement]) -> SharedDilation:
    """Dilate a finite family of measurements with a single ancilla and a
    single ancilla state.

    The ancilla is the tensor product of the per-measurement ancillas, the
    state the product of their states, and each dilated effect acts as its
    own projective dilation on (system, own ancilla) and as the unit on the
    other ancilla factors.  Every dilated effect remains a projector.
    """
    if not measurements:
        raise ValidationError("need at least one measurement")
    names = sorted(measurements, key=str)
    system = measurements[names[0]].system
    for name in names:
        if measurements[name].system != system:
            raise ModelMismatchError("measurements live on different systems")
    parts = {name: naimark_dilate(measurements[name]) for name in names}
    dims = [system.dimension] + [parts[name].ancilla.dimension for name in names]
    anc_dim = int(np.prod(dims[1:]))
    ancilla = System(QUANTUM, anc_dim)
    anc_data = parts[names[0]].ancilla_state.data
    for name in names[1:]:
        anc_data = np.kron(anc_data, parts[name].ancilla_state.data)
    anc_state = State(ancilla, anc_data)
    composite = System(QUANTUM, system.dimension * anc_dim)
    family = {}
    for t, name in enumerate(names):
        effects = {}
        for x in parts[name].measurement.outcomes:
            op = parts[name].measurement.effect(x).data
            effects[x] = Effect(composite, _embed_pair(op, dims, t + 1))
        family[name] = Measurement(composite, effects)
    return SharedDilation(system, ancilla, anc_state, family)


def shared_dilation_deviation(measurements: Mapping[str, Measurement],
                              sd: SharedDilation) -> float:
    """Max statistics deviation of a shared-ancilla dilation over a spanning
    set of system states, all measurements and all outcomes."""
    dev = 0.0
    for rho in spanning_states(sd.system.dimension):
        joint = tensor(rho, sd.ancilla_state)
        for name in sorted(measurements, key=str):
            m = measurements[name]
            big = sd.measurements[name]
            for x in m.outcomes:
                dev = max(dev, abs(pair(m.effect(x), rho) - pair(big.effect(x), joint)))
    return dev
