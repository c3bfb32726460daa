"""Exclusivity analysis: local-orthogonality event graphs for multiparty
scenarios, orthogonality graphs of projector families, the level-L product
lifting, and the clique-based CE / LO checks.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .core import Effect, State, pair, tolerance
from .errors import ValidationError
from .graphs import ORTHOGONALITY, EventGraph, max_weight_clique
from .instruments import _check_projector_family, _opnorm


@dataclass(frozen=True)
class Scenario:
    """N parties, each with finite input and output label sets."""

    inputs: tuple
    outputs: tuple

    def __post_init__(self):
        if len(self.inputs) != len(self.outputs) or not self.inputs:
            raise ValidationError("need one input set and one output set per party")
        object.__setattr__(self, "inputs", tuple(tuple(map(str, s)) for s in self.inputs))
        object.__setattr__(self, "outputs", tuple(tuple(map(str, s)) for s in self.outputs))
        for s in self.inputs + self.outputs:
            if not s:
                raise ValidationError("input/output sets must be nonempty")
            if len(set(s)) != len(s):
                raise ValidationError("duplicate labels in a party's set")

    @classmethod
    def uniform(cls, parties: int, n_inputs: int, n_outputs: int) -> "Scenario":
        ins = tuple(tuple(str(i) for i in range(n_inputs)) for _ in range(parties))
        outs = tuple(tuple(str(i) for i in range(n_outputs)) for _ in range(parties))
        return cls(ins, outs)

    @property
    def parties(self) -> int:
        return len(self.inputs)

    def joint_inputs(self):
        return list(itertools.product(*self.inputs))

    def joint_outputs(self):
        return list(itertools.product(*self.outputs))

    def events(self):
        """All (input string, output string) pairs, as tuples of labels."""
        return [(x, y) for x in self.joint_inputs() for y in self.joint_outputs()]

    def _sep(self) -> str:
        single = all(len(lab) == 1 for s in self.inputs + self.outputs for lab in s)
        return "" if single else ","

    def joint_str(self, parts: Sequence[str]) -> str:
        return self._sep().join(parts) if self._sep() else "".join(parts)

    def parse_joint(self, s: str, which: str) -> tuple:
        sets = self.inputs if which == "input" else self.outputs
        if self._sep():
            parts = tuple(s.split(","))
        else:
            parts = tuple(s)
        if len(parts) != len(sets):
            raise ValidationError(f"{which} string {s!r} has {len(parts)} parts, "
                                  f"expected {len(sets)}")
        for i, p in enumerate(parts):
            if p not in sets[i]:
                raise ValidationError(f"{which} label {p!r} unknown for party {i}")
        return parts

    def event_str(self, event) -> str:
        x, y = event
        return f"({self.joint_str(x)}|{self.joint_str(y)})"


def locally_orthogonal(e: tuple, f: tuple) -> bool:
    """Two events (x, y), (x', y') are locally orthogonal iff some party got
    the same input but produced a different output."""
    (x1, y1), (x2, y2) = e, f
    return any(a == b and u != v for a, b, u, v in zip(x1, x2, y1, y2))


def lo_graph(scenario: Scenario) -> EventGraph:
    """Orthogonality graph over all events of the scenario: an edge joins
    each locally orthogonal pair."""
    events = scenario.events()
    g = EventGraph(events, (), ORTHOGONALITY)
    for e, f in itertools.combinations(events, 2):
        if locally_orthogonal(e, f):
            g.add_edge_unchecked(e, f)
    return g


def quantum_exclusivity_graph(effects: Sequence[Effect], labels=None) -> EventGraph:
    """Orthogonality graph of a projector family: an edge joins each pair
    with P_i P_j = 0 (within tolerance)."""
    _check_projector_family(effects, orthogonal=False)
    if labels is None:
        labels = [str(i) for i in range(len(effects))]
    if len(labels) != len(effects) or len(set(labels)) != len(labels):
        raise ValidationError("labels must be distinct, one per effect")
    by_label = dict(zip(labels, effects))
    g = EventGraph(labels, (), ORTHOGONALITY)
    tol = tolerance()
    for a, b in itertools.combinations(labels, 2):
        if _opnorm(by_label[a].data @ by_label[b].data) <= tol:
            g.add_edge_unchecked(a, b)
    return g


def lift_graph(g: EventGraph, level: int) -> EventGraph:
    """Level-L lift: vertices are L-tuples of base vertices, adjacent iff some
    coordinate pair is adjacent in the base graph."""
    if level < 1:
        raise ValidationError("hierarchy level must be >= 1")
    if g.semantics != ORTHOGONALITY:
        raise ValidationError("lifting applies to orthogonality-semantics graphs")
    verts = list(itertools.product(g.vertices, repeat=level))
    lifted = EventGraph(verts, (), ORTHOGONALITY)
    vs = lifted.vertices
    idx = [tuple(g.index(c) for c in v) for v in vs]
    masks = [g.adjacency_mask(i) for i in range(g.n)]
    for a in range(len(vs)):
        ia = idx[a]
        for b in range(a + 1, len(vs)):
            ib = idx[b]
            if any(masks[ia[c]] >> ib[c] & 1 for c in range(level)):
                lifted.add_edge_unchecked(vs[a], vs[b])
    return lifted


@dataclass(frozen=True)
class ExclusivityReport:
    """Outcome of a level-L exclusivity check.

    max_sum is the exact optimum of the probability sum over cliques of the
    (lifted) graph; the check passes when it does not exceed 1 + tolerance.
    """

    level: int
    max_sum: float
    exact: Fraction
    witness: tuple
    passed: bool

    def __str__(self):
        verdict = "pass" if self.passed else "FAIL"
        return (f"level {self.level}: max exclusive-probability sum "
                f"{self.max_sum:.9f} -> {verdict}")


def exclusivity_check(graph: EventGraph, weights: Mapping, level: int = 1,
                      limit=None) -> ExclusivityReport:
    """Max weight-sum over cliques of the level-L lift of `graph`, with
    product weights; pass iff the optimum is at most 1 + tolerance.

    Zero-weight vertices are pruned before lifting (they never contribute).
    """
    if graph.semantics != ORTHOGONALITY:
        raise ValidationError("exclusivity checks need orthogonality semantics")
    w = {v: Fraction(weights[v]) for v in graph.vertices}
    if any(x < 0 for x in w.values()):
        raise ValidationError("weights must be nonnegative")
    base = graph.induced([v for v in graph.vertices if w[v] > 0])
    lifted = lift_graph(base, level) if level > 1 else base
    if level > 1:
        lifted_w = {v: _product(w[c] for c in v) for v in lifted.vertices}
    else:
        lifted_w = {v: w[v] for v in lifted.vertices}
    value, witness = max_weight_clique(lifted, lifted_w, limit=limit)
    passed = value <= 1 + Fraction(tolerance())
    return ExclusivityReport(level, float(value), value, witness, passed)


def _product(items) -> Fraction:
    out = Fraction(1)
    for x in items:
        out *= x
    return out


def check_ce(effects: Sequence[Effect], state: State, level: int = 1,
             labels=None, limit=None) -> ExclusivityReport:
    """Consistent-exclusivity check for a projector family and a state: the
    probability sum over any set of mutually exclusive outcomes (a clique of
    the orthogonality graph, lifted to L independent copies) must not exceed
    one."""
    g = quantum_exclusivity_graph(effects, labels=labels)
    if labels is None:
        labels = [str(i) for i in range(len(effects))]
    weights = {lab: pair(eff, state) for lab, eff in zip(labels, effects)}
    return exclusivity_check(g, weights, level=level, limit=limit)


def check_lo(box, scenario: Scenario = None, level: int = 1,
             limit=None) -> ExclusivityReport:
    """Local-orthogonality check for a behaviour p(y|x): the probability sum
    over any set of pairwise locally orthogonal events (lifted to level L)
    must not exceed one."""
    if scenario is None:
        scenario = box.scenario
    g = lo_graph(scenario)
    weights = {(x, y): box.prob(x, y) for (x, y) in g.vertices}
    return exclusivity_check(g, weights, level=level, limit=limit)
