"""Finite scenario trees and the lattice of stopping times on them.

A scenario tree is a finite rooted tree whose nodes carry time stamps,
state labels and branch probabilities; the filtration is the node structure
itself.  A stopping time is stored as its stop region: the minimal antichain
of nodes meeting every root-to-leaf path exactly once.  Adaptedness is then
structural and never needs a runtime check.

Trees are immutable after construction and all operations here are pure, so
everything can be shared freely across workers.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from itertools import product
from typing import Iterable, Optional, Sequence

#: default cap on brute-force stopping-time enumerations
ENUMERATION_CAP = 10**6

PROB_TOL = Fraction(1, 10**12)


class ModelError(ValueError):
    """Invalid tree / model description."""


class NonLeveledTreeError(ModelError):
    """Operation needs a leveled tree (time determined by depth)."""


class EmptyBandError(ValueError):
    """The requested band (v, rho] contains no stopping time."""


class EnumerationOverflowError(RuntimeError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"enumeration of {count} stopping times exceeds cap {cap}")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class NodeSpec:
    """Raw node description used by build_tree.

    key/parent are arbitrary hashable user identifiers; prob is the branch
    probability of the edge from the parent (None for the root).
    """

    key: object
    parent: object
    time: Fraction
    state: tuple
    prob: object = None


class ScenarioTree:
    """Validated finite tree; node identifiers are breadth-first 0..n-1."""

    __slots__ = (
        "n", "times", "states", "parent", "children", "edge_prob", "depth",
        "leaves", "prob_to", "ancestors_or_self", "subtree", "leaves_under",
        "horizon", "level_times", "is_leveled", "source_key",
    )

    def __init__(self, specs: Sequence[NodeSpec]):
        if not specs:
            raise ModelError("empty tree")
        by_key = {}
        for s in specs:
            if s.key in by_key:
                raise ModelError(f"duplicate node key {s.key!r}")
            by_key[s.key] = s
        roots = [s for s in specs if s.parent is None]
        if len(roots) != 1:
            raise ModelError(f"expected exactly one root, found {len(roots)}")
        kids = {s.key: [] for s in specs}
        for s in specs:
            if s.parent is not None:
                if s.parent not in by_key:
                    raise ModelError(f"node {s.key!r} references unknown parent {s.parent!r}")
                kids[s.parent].append(s.key)

        # breadth-first numbering, children in declaration order
        order = [roots[0].key]
        seen = {roots[0].key}
        i = 0
        while i < len(order):
            for k in kids[order[i]]:
                if k in seen:
                    raise ModelError(f"node {k!r} reachable twice (cycle?)")
                seen.add(k)
                order.append(k)
            i += 1
        if len(order) != len(specs):
            raise ModelError("tree has unreachable nodes")

        index = {k: i for i, k in enumerate(order)}
        n = len(order)
        self.n = n
        self.source_key = tuple(order)
        self.times = tuple(by_key[k].time for k in order)
        self.states = tuple(tuple(by_key[k].state) for k in order)
        self.parent = tuple(None if by_key[k].parent is None else index[by_key[k].parent]
                            for k in order)
        self.children = tuple(tuple(index[c] for c in kids[k]) for k in order)
        self.edge_prob = tuple(Fraction(1) if by_key[k].prob is None else by_key[k].prob
                               for k in order)

        for v in range(1, n):
            p = self.edge_prob[v]
            if not (0 < p <= 1):
                raise ModelError(f"branch probability {p} at node {v} outside (0, 1]")
            if not self.times[v] > self.times[self.parent[v]]:
                raise ModelError(
                    f"time stamps must strictly increase along paths "
                    f"(node {v}: {self.times[v]} after {self.times[self.parent[v]]})")
        for v in range(n):
            if self.children[v]:
                total = sum(self.edge_prob[c] for c in self.children[v])
                if abs(total - 1) > PROB_TOL:
                    raise ModelError(
                        f"child probabilities at node {v} sum to {total}, expected 1")

        self.depth = tuple(self._depths())
        self.leaves = tuple(v for v in range(n) if not self.children[v])
        horizons = {self.times[v] for v in self.leaves}
        if len(horizons) != 1:
            raise ModelError(f"all leaves must share one horizon time, found {sorted(map(float, horizons))}")
        self.horizon = next(iter(horizons))

        prob_to = [Fraction(1)] * n
        for v in range(1, n):
            prob_to[v] = prob_to[self.parent[v]] * self.edge_prob[v]
        self.prob_to = tuple(prob_to)

        anc = [None] * n
        anc[0] = frozenset({0})
        for v in range(1, n):
            anc[v] = anc[self.parent[v]] | {v}
        self.ancestors_or_self = tuple(anc)

        sub = [[] for _ in range(n)]
        for w in range(n):          # BFS ids ascend, so each sub list is BFS-ordered
            for a in self.ancestors_or_self[w]:
                sub[a].append(w)
        self.subtree = tuple(tuple(s) for s in sub)
        self.leaves_under = tuple(tuple(w for w in s if not self.children[w]) for s in self.subtree)

        self.level_times = tuple(sorted(set(self.times)))
        self.is_leveled = all(
            self.times[v] == self.level_times[self.depth[v]] for v in range(n)
        ) and all(self.depth[v] == len(self.level_times) - 1 for v in self.leaves)

    def _depths(self):
        d = [0] * self.n
        for v in range(1, self.n):
            d[v] = d[self.parent[v]] + 1
        return d

    def level_of(self, v: int) -> int:
        if not self.is_leveled:
            raise NonLeveledTreeError("tree is not leveled")
        return self.depth[v]

    def cond_prob(self, v: int, w: int) -> Fraction:
        """P(reach w | reached v); w must be in subtree(v)."""
        return self.prob_to[w] / self.prob_to[v]

    def is_ancestor_or_self(self, a: int, w: int) -> bool:
        return a in self.ancestors_or_self[w]

    def __repr__(self):
        return f"ScenarioTree(n={self.n}, horizon={self.horizon})"


class Ordering(Enum):
    LEQ = "LEQ"
    GEQ = "GEQ"
    EQ = "EQ"
    INCOMPARABLE = "INCOMPARABLE"


class StoppingTime:
    """Canonical stop region on a ScenarioTree.

    `root` is the node the stopping time lives under (the whole tree by
    default); the stop set is the minimal antichain covering every
    root-to-leaf path below `root`.
    """

    __slots__ = ("tree", "root", "stops", "_stop_at_leaf", "_hash")

    def __init__(self, tree: ScenarioTree, stops: Iterable[int], root: int = 0):
        stops = frozenset(stops)
        canon = frozenset(
            w for w in stops
            if not any(a in stops and a != w for a in tree.ancestors_or_self[w])
        )
        stop_at_leaf = {}
        for leaf in tree.leaves_under[root]:
            hits = canon & tree.ancestors_or_self[leaf]
            if len(hits) != 1:
                raise ModelError(
                    f"stop set does not cover the path to leaf {leaf} exactly once")
            (stop_at_leaf[leaf],) = hits
        for w in canon:
            if root not in tree.ancestors_or_self[w]:
                raise ModelError(f"stop node {w} outside subtree of root {root}")
        self.tree = tree
        self.root = root
        self.stops = canon
        self._stop_at_leaf = stop_at_leaf
        self._hash = hash((id(tree), root, canon))

    # -- constructors -------------------------------------------------------
    @staticmethod
    def singleton(tree: ScenarioTree, v: int) -> "StoppingTime":
        return StoppingTime(tree, {v}, root=v)

    @staticmethod
    def at_leaves(tree: ScenarioTree, root: int = 0) -> "StoppingTime":
        return StoppingTime(tree, tree.leaves_under[root], root=root)

    # -- basics -------------------------------------------------------------
    def __eq__(self, other):
        return (isinstance(other, StoppingTime) and self.tree is other.tree
                and self.root == other.root and self.stops == other.stops)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        times = sorted({float(self.tree.times[w]) for w in self.stops})
        return f"StoppingTime(stops={sorted(self.stops)}, times={times})"

    def stop_node_at(self, leaf: int) -> int:
        return self._stop_at_leaf[leaf]

    def time_at(self, leaf: int):
        return self.tree.times[self._stop_at_leaf[leaf]]

    def stop_times(self) -> tuple:
        return tuple(sorted({self.tree.times[w] for w in self.stops}))

    def is_deterministic(self) -> bool:
        return len({self.tree.times[w] for w in self.stops}) == 1

    def strictly_after(self, v: int) -> bool:
        """True when v strictly precedes this stopping time on every path
        through v (no stop node at or above v)."""
        return not (self.stops & self.tree.ancestors_or_self[v])

    def restrict(self, v: int) -> "StoppingTime":
        """Restriction to subtree(v); requires the stop to be at or after v."""
        above = self.stops & (self.tree.ancestors_or_self[v] - {v})
        if above:
            raise ValueError(f"stopping time stops strictly before node {v}")
        if v in self.stops:
            return StoppingTime.singleton(self.tree, v)
        sub = set(self.tree.subtree[v])
        return StoppingTime(self.tree, self.stops & sub, root=v)


def _check_same_lattice(t1: StoppingTime, t2: StoppingTime):
    if t1.tree is not t2.tree:
        raise ValueError("stopping times live on different trees")
    if t1.root != t2.root:
        raise ValueError("stopping times live under different roots")


def order(t1: StoppingTime, t2: StoppingTime) -> Ordering:
    """Pathwise comparison of stop times."""
    _check_same_lattice(t1, t2)
    if t1.stops == t2.stops:
        return Ordering.EQ
    le = ge = True
    depth = t1.tree.depth
    for leaf in t1.tree.leaves_under[t1.root]:
        d1 = depth[t1.stop_node_at(leaf)]
        d2 = depth[t2.stop_node_at(leaf)]
        if d1 > d2:
            le = False
        elif d1 < d2:
            ge = False
    if le:
        return Ordering.LEQ
    if ge:
        return Ordering.GEQ
    return Ordering.INCOMPARABLE


def leq(t1: StoppingTime, t2: StoppingTime) -> bool:
    return order(t1, t2) in (Ordering.LEQ, Ordering.EQ)


def _pick_pathwise(t1: StoppingTime, t2: StoppingTime, later: bool) -> StoppingTime:
    _check_same_lattice(t1, t2)
    depth = t1.tree.depth
    picked = set()
    for leaf in t1.tree.leaves_under[t1.root]:
        a = t1.stop_node_at(leaf)
        b = t2.stop_node_at(leaf)
        if (depth[a] >= depth[b]) == later:
            picked.add(a)
        else:
            picked.add(b)
    return StoppingTime(t1.tree, picked, root=t1.root)


def join(t1: StoppingTime, t2: StoppingTime) -> StoppingTime:
    """Pathwise maximum (stop at the later of the two stops on each path)."""
    return _pick_pathwise(t1, t2, later=True)


def meet(t1: StoppingTime, t2: StoppingTime) -> StoppingTime:
    """Pathwise minimum."""
    return _pick_pathwise(t1, t2, later=False)


# ---------------------------------------------------------------------------
# band enumeration


def band_count(tree: ScenarioTree, v: int, rho: Optional[StoppingTime]) -> int:
    """Number of stopping times in the band (v, rho] on subtree(v), counted by
    per-subtree dynamic programming.  rho=None means no upper cap (all
    stopping times strictly after v)."""

    def count_from(c: int) -> int:
        # stopping times on subtree(c) with stop >= c (stopping at c allowed)
        if not tree.children[c] or (rho is not None and c in rho.stops):
            return 1
        total = 1
        for d in tree.children[c]:
            total *= count_from(d)
        return 1 + total

    total = 1
    for c in tree.children[v]:
        total *= count_from(c)
    return total


def enumerate_band(tree: ScenarioTree, v: int, rho: StoppingTime,
                   cap: int = ENUMERATION_CAP) -> list:
    """All stopping times tau on subtree(v) with tau > time(v) pathwise and
    tau <= rho pathwise, in deterministic order.

    The band is empty (error) when v is at or after a stop node of rho; in
    particular leaves never admit a band.
    """
    if not rho.strictly_after(v):
        raise EmptyBandError(f"node {v} is at or after the cap stopping time")
    count = band_count(tree, v, rho)
    if count > cap:
        raise EnumerationOverflowError(count, cap)

    def options(c: int) -> list:
        if not tree.children[c] or c in rho.stops:
            return [frozenset({c})]
        out = [frozenset({c})]
        for combo in product(*(options(d) for d in tree.children[c])):
            out.append(frozenset().union(*combo))
        return out

    result = []
    for combo in product(*(options(c) for c in tree.children[v])):
        result.append(StoppingTime(tree, frozenset().union(*combo), root=v))
    assert len(result) == count
    return result


def enumerate_all(tree: ScenarioTree, cap: int = ENUMERATION_CAP) -> list:
    """Every stopping time on the tree (stop-at-root included)."""
    total = total_count(tree)
    if total > cap:
        raise EnumerationOverflowError(total, cap)

    def options(c: int) -> list:
        if not tree.children[c]:
            return [frozenset({c})]
        out = [frozenset({c})]
        for combo in product(*(options(d) for d in tree.children[c])):
            out.append(frozenset().union(*combo))
        return out

    return [StoppingTime(tree, stops, root=0) for stops in options(0)]


def total_count(tree: ScenarioTree) -> int:
    """Number of stopping times on the tree (DP count)."""

    def count_from(c: int) -> int:
        if not tree.children[c]:
            return 1
        total = 1
        for d in tree.children[c]:
            total *= count_from(d)
        return 1 + total

    return count_from(0)


# ---------------------------------------------------------------------------
# generators for common shapes


def line_tree(times: Sequence, states: Optional[Sequence] = None) -> ScenarioTree:
    """Deterministic single-path tree (degenerate filtration)."""
    times = [Fraction(t) for t in times]
    if states is None:
        states = [Fraction(0)] * len(times)
    specs = []
    for i, (t, x) in enumerate(zip(times, states)):
        specs.append(NodeSpec(key=i, parent=None if i == 0 else i - 1,
                              time=t, state=(Fraction(x),),
                              prob=None if i == 0 else Fraction(1)))
    return ScenarioTree(specs)


def binomial_tree(depth: int, p, up, down, x0=0, dt=1) -> ScenarioTree:
    """Non-recombining binary tree: state +-steps, times k*dt."""
    p = Fraction(p)
    up, down, x0, dt = Fraction(up), Fraction(down), Fraction(x0), Fraction(dt)
    if not (0 < p < 1):
        raise ModelError(f"binomial probability {p} outside (0, 1)")
    if depth < 1:
        raise ModelError("binomial depth must be >= 1")
    specs = [NodeSpec(key=(), parent=None, time=Fraction(0), state=(x0,))]
    frontier = [((), x0)]
    for k in range(1, depth + 1):
        nxt = []
        for key, x in frontier:
            for branch, move, prob in (("u", up, p), ("d", down, 1 - p)):
                ck = key + (branch,)
                cx = x + move
                specs.append(NodeSpec(key=ck, parent=key, time=k * dt, state=(cx,), prob=prob))
                nxt.append((ck, cx))
        frontier = nxt
    return ScenarioTree(specs)


def build_tree(specs: Sequence[NodeSpec]) -> ScenarioTree:
    """Validate raw node descriptions into a ScenarioTree."""
    return ScenarioTree(specs)
