"""Event graphs and the exact combinatorial core: maximal-clique enumeration
(pivoting), max-weight clique by branch and bound with greedy-coloring bounds,
exact chromatic number, and the definitional perfect-graph test.

All clique/coloring answers are exact; weights are handled in rational
arithmetic internally so reported optima carry no floating-point error.
"""
from __future__ import annotations

import math
import os
import sys
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import LimitExceeded, ValidationError

ORTHOGONALITY = "orthogonality"
WINNING = "winning"

DEFAULT_MAX_VERTICES = 4096
DEFAULT_PERFECT_LIMIT = 18


def max_vertices() -> int:
    """Clique-search vertex cap (override with SHARPCUT_MAX_VERTICES)."""
    env = os.environ.get("SHARPCUT_MAX_VERTICES")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"SHARPCUT_MAX_VERTICES={env!r} is not an integer")
    return DEFAULT_MAX_VERTICES


def _check_limit(n: int, limit=None):
    cap = max_vertices() if limit is None else limit
    if n > cap:
        raise LimitExceeded(f"graph has {n} vertices, cap is {cap}")


class EventGraph:
    """Undirected graph over event labels with an exclusivity-semantics tag.

    semantics 'orthogonality': an edge joins exclusive/orthogonal events.
    semantics 'winning': an edge joins events that are NOT locally orthogonal.

    Vertices are stored in canonical sorted label order; adjacency uses
    index bitmasks.  No self-loops.
    """

    def __init__(self, vertices: Iterable, edges: Iterable = (), semantics: str = ORTHOGONALITY):
        if semantics not in (ORTHOGONALITY, WINNING):
            raise ValidationError(f"unknown semantics {semantics!r}")
        vs = sorted(set(vertices))
        self.vertices = tuple(vs)
        self.semantics = semantics
        self._index = {v: i for i, v in enumerate(vs)}
        self._adj = [0] * len(vs)
        for u, v in edges:
            self.add_edge_unchecked(u, v)

    def add_edge_unchecked(self, u, v):
        # construction-time helper; graphs are treated as immutable afterwards
        if u == v:
            raise ValidationError(f"self-loop at {u!r}")
        try:
            iu, iv = self._index[u], self._index[v]
        except KeyError as exc:
            raise ValidationError(f"edge endpoint {exc.args[0]!r} is not a vertex")
        self._adj[iu] |= 1 << iv
        self._adj[iv] |= 1 << iu

    @property
    def n(self) -> int:
        return len(self.vertices)

    def index(self, v) -> int:
        return self._index[v]

    def adjacency_mask(self, i: int) -> int:
        return self._adj[i]

    def has_edge(self, u, v) -> bool:
        return bool(self._adj[self._index[u]] >> self._index[v] & 1)

    def neighbors(self, v) -> tuple:
        m = self._adj[self._index[v]]
        return tuple(self.vertices[i] for i in _bits(m))

    def edges(self) -> list:
        out = []
        for i in range(self.n):
            for j in _bits(self._adj[i]):
                if j > i:
                    out.append((self.vertices[i], self.vertices[j]))
        return out

    def degree(self, v) -> int:
        return _popcount(self._adj[self._index[v]])

    def complement(self) -> "EventGraph":
        g = EventGraph(self.vertices, (), self.semantics)
        full = (1 << self.n) - 1
        for i in range(self.n):
            g._adj[i] = full & ~self._adj[i] & ~(1 << i)
        return g

    def induced(self, keep: Iterable) -> "EventGraph":
        keep = set(keep)
        g = EventGraph([v for v in self.vertices if v in keep], (), self.semantics)
        for i, v in enumerate(self.vertices):
            if v not in keep:
                continue
            for j in _bits(self._adj[i]):
                if j > i and self.vertices[j] in keep:
                    g.add_edge_unchecked(v, self.vertices[j])
        return g

    def __repr__(self):
        return (f"EventGraph(n={self.n}, edges={sum(map(_popcount, self._adj)) // 2}, "
                f"semantics={self.semantics!r})")


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def maximal_cliques(g: EventGraph, limit=None) -> list:
    """All inclusion-maximal cliques, each a sorted label tuple, the list in
    lexicographic order.  Recursive enumeration with pivoting."""
    _check_limit(g.n, limit)
    if g.n == 0:
        return []
    adj = g._adj
    found = []
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 2 * g.n + 1000))

    def expand(r: int, p: int, x: int):
        if p == 0 and x == 0:
            found.append(r)
            return
        pivot = max(_bits(p | x), key=lambda u: _popcount(p & adj[u]))
        for v in _bits(p & ~adj[pivot]):
            bit = 1 << v
            expand(r | bit, p & adj[v], x & adj[v])
            p &= ~bit
            x |= bit

    expand(0, (1 << g.n) - 1, 0)
    cliques = [tuple(g.vertices[i] for i in _bits(m)) for m in found]
    cliques.sort()
    return cliques


def _exact_weights(g: EventGraph, weights: Mapping) -> list:
    vals = []
    for v in g.vertices:
        if v not in weights:
            raise ValidationError(f"missing weight for vertex {v!r}")
        w = Fraction(weights[v])
        if w < 0:
            raise ValidationError(f"negative weight {weights[v]!r} at {v!r}")
        vals.append(w)
    return vals


def _scale_to_ints(vals: Sequence[Fraction]):
    denom = math.lcm(*(w.denominator for w in vals)) if vals else 1
    return [int(w * denom) for w in vals], denom


def _color_bound(adj: Sequence[int], w: Sequence[int], cand: int) -> int:
    """Greedy-coloring upper bound: partition candidates into independent
    classes, sum the class maxima.  Any clique meets each class at most once."""
    bound = 0
    rest = cand
    while rest:
        avail = rest
        cls_max = 0
        while avail:
            v = (avail & -avail).bit_length() - 1
            if w[v] > cls_max:
                cls_max = w[v]
            rest &= ~(1 << v)
            avail &= ~adj[v]
            avail &= ~(1 << v)
        bound += cls_max
    return bound


def _wc_best(adj: Sequence[int], w: Sequence[int], cand: int, acc: int, best: int) -> int:
    """Best achievable acc + clique weight within candidate mask (branch and
    bound, candidates scanned in canonical low-index order)."""
    if acc > best:
        best = acc
    while cand:
        if acc + _color_bound(adj, w, cand) <= best:
            return best
        v = (cand & -cand).bit_length() - 1
        cand &= ~(1 << v)
        best = _wc_best(adj, w, cand & adj[v], acc + w[v], best)
    return best


def max_weight_clique(g: EventGraph, weights: Mapping, limit=None):
    """Exact maximum of the weight sum over cliques (empty clique allowed).

    Returns (value, clique) with `value` a Fraction and `clique` the sorted
    label tuple; ties are broken by the lexicographically smallest witness.
    Weights must be nonnegative; they are handled exactly (floats are
    binary-exact rationals).
    """
    _check_limit(g.n, limit)
    vals = _exact_weights(g, weights)
    w_int, denom = _scale_to_ints(vals)
    n = g.n
    adj = list(g._adj)
    # Zero-weight vertices never change the optimum, so the value search
    # skips them; they still take part in witness tie-breaking below.
    nonzero = 0
    for i, w in enumerate(w_int):
        if w > 0:
            nonzero |= 1 << i
    if nonzero == 0:
        return Fraction(0), ()
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 2 * n + 1000))
    full = (1 << n) - 1
    best = _wc_best(adj, w_int, nonzero, 0, 0)
    if best == 0:
        return Fraction(0), ()
    # Lexicographically smallest optimal clique: fix vertices in canonical
    # order whenever an optimal completion exists among later candidates.
    clique = []
    cand = full
    acc = 0
    while acc != best:
        progressed = False
        for v in _bits(cand):
            later = ~((1 << (v + 1)) - 1)
            rest = cand & adj[v] & later
            if acc + w_int[v] + _wc_best(adj, w_int, rest & nonzero, 0, 0) == best:
                clique.append(v)
                acc += w_int[v]
                cand = rest
                progressed = True
                break
        if not progressed:  # unreachable for consistent arithmetic
            raise AssertionError("witness reconstruction failed")
    labels = tuple(g.vertices[i] for i in clique)
    return Fraction(best, denom), labels


def clique_number(g: EventGraph, limit=None) -> int:
    """Exact size of a largest clique."""
    value, _ = max_weight_clique(g, {v: 1 for v in g.vertices}, limit=limit)
    return int(value)


def _greedy_colors(adj: Sequence[int], order: Sequence[int]) -> int:
    color = {}
    used = 0
    for v in order:
        taken = 0
        m = adj[v]
        while m:
            u = (m & -m).bit_length() - 1
            if u in color:
                taken |= 1 << color[u]
            m &= m - 1
        c = 0
        while taken >> c & 1:
            c += 1
        color[v] = c
        used = max(used, c + 1)
    return used


def _colorable(adj: Sequence[int], order: Sequence[int], k: int) -> bool:
    """Backtracking k-colorability with first-fit symmetry breaking."""
    n = len(order)
    colors = [-1] * len(adj)

    def place(idx: int, used: int) -> bool:
        if idx == n:
            return True
        v = order[idx]
        forbidden = 0
        m = adj[v]
        while m:
            u = (m & -m).bit_length() - 1
            if colors[u] >= 0:
                forbidden |= 1 << colors[u]
            m &= m - 1
        top = min(k, used + 1)
        for c in range(top):
            if forbidden >> c & 1:
                continue
            colors[v] = c
            if place(idx + 1, max(used, c + 1)):
                return True
            colors[v] = -1
        return False

    return place(0, 0)


def chromatic_number(g: EventGraph, limit=None) -> int:
    """Exact chromatic number by iterative-deepening backtracking search."""
    _check_limit(g.n, limit)
    if g.n == 0:
        return 0
    adj = g._adj
    order = sorted(range(g.n), key=lambda v: (-_popcount(adj[v]), v))
    lower = clique_number(g, limit=limit)
    upper = _greedy_colors(adj, order)
    for k in range(lower, upper):
        if _colorable(adj, order, k):
            return k
    return upper


def is_perfect(g: EventGraph, limit=None) -> bool:
    """Definitional perfect-graph test: chromatic number equals clique number
    on every induced subgraph, checked exhaustively over all vertex subsets
    (exponential; capped at `limit`, default 18 vertices)."""
    cap = DEFAULT_PERFECT_LIMIT if limit is None else limit
    n = g.n
    if n > cap:
        raise LimitExceeded(f"perfect-graph test capped at {cap} vertices, got {n}")
    adj = g._adj
    omega = [0] * (1 << n)
    for mask in range(1, 1 << n):
        v = (mask & -mask).bit_length() - 1
        rest = mask & (mask - 1)
        omega[mask] = max(omega[rest], 1 + omega[rest & adj[v]])
    for mask in range(1, 1 << n):
        members = list(_bits(mask))
        sub_adj = [adj[v] & mask for v in range(n)]
        greedy = _greedy_colors(sub_adj, members)
        if greedy == omega[mask]:
            continue
        order = sorted(members, key=lambda v: (-_popcount(sub_adj[v]), v))
        chi = greedy
        for k in range(omega[mask], greedy):
            if _colorable(sub_adj, order, k):
                chi = k
                break
        if chi != omega[mask]:
            return False
    return True


def is_disjoint_union_of_cliques(g: EventGraph) -> bool:
    """True iff every connected component is complete."""
    seen = 0
    for start in range(g.n):
        if seen >> start & 1:
            continue
        comp = 1 << start
        frontier = comp
        while frontier:
            nxt = 0
            for v in _bits(frontier):
                nxt |= g._adj[v]
            nxt &= ~comp
            comp |= nxt
            frontier = nxt
        seen |= comp
        for v in _bits(comp):
            if g._adj[v] != comp & ~(1 << v):
                return False
    return True


def edge_list_text(g: EventGraph) -> str:
    """Plain-text edge list: header '<n> <semantics>', a commented vertex
    legend, then one 'i j' line per edge in canonical index order."""
    lines = [f"{g.n} {g.semantics}"]
    for i, v in enumerate(g.vertices):
        lines.append(f"# {i} {_label_text(v)}")
    for u, v in g.edges():
        lines.append(f"{g.index(u)} {g.index(v)}")
    return "\n".join(lines) + "\n"


def _label_text(label) -> str:
    if isinstance(label, tuple):
        return "(" + ",".join(_label_text(x) for x in label) + ")"
    return str(label)
