"""Equilibrium machinery on finite trees.

The central object is the map F sending a candidate deadline rho to the
stopping time that halts, on each path, at the first node where immediate
stopping strictly beats every stopping option up to rho (capped at rho).
Fixed points of F are the approachable times; iterating F from the horizon
produces the naive chain; its fixed point is the sophisticated (equilibrium)
time, which brute-force enumeration confirms as the join of all approachable
times.

Why the naive chain is exactly the delimiting chain on a finite tree: the
delimiting set is the smallest family that contains the horizon, is closed
under F, and is closed under infima of totally ordered subfamilies.  The
F-orbit of the horizon is decreasing (F never stops later), so on a finite
lattice it stabilizes at a fixed point after finitely many steps; the orbit
is totally ordered and any chain inside it attains its infimum at its own
minimum element, so the orbit is already closed under both operations, and
every admissible family must contain it.  Hence orbit = delimiting set, and
its minimum is the fixed point the chain reaches.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .numeric import CMP_EPS, Principle, dominates
from .preferences import PreferenceFlow, TableFlow, sup_band
from .tree import (
    ENUMERATION_CAP,
    ModelError,
    NodeSpec,
    NonLeveledTreeError,
    ScenarioTree,
    StoppingTime,
    enumerate_all,
    join,
)


class IterationCapError(RuntimeError):
    """Naive iteration hit its cap without a fixed point (defensive; cannot
    happen on a finite tree)."""


@dataclass
class BisFamily:
    """Backward-induction solution: one stopping time per node, on its subtree."""

    tree: ScenarioTree
    by_node: dict

    def at(self, v: int) -> StoppingTime:
        return self.by_node[v]

    def root(self) -> StoppingTime:
        return self.by_node[0]

    def times_by_level(self) -> list:
        """On a line tree, the classic per-time table of planned stop times."""
        out = []
        for v in range(self.tree.n):
            st = self.by_node[v]
            out.append((self.tree.times[v], st.stop_times()))
        return out


@dataclass
class NaiveChain:
    chain: tuple            # rho^(0) = horizon, rho^(1), ...
    status: str             # "fixed_point" | "cap_reached"

    @property
    def order(self) -> int:
        return len(self.chain) - 1

    def fixed_point(self) -> StoppingTime:
        if self.status != "fixed_point":
            raise IterationCapError("chain did not reach a fixed point")
        return self.chain[-1]


def _dominated_at(flow: PreferenceFlow, v: int, rho: StoppingTime,
                  principle: Principle, eps: float) -> bool:
    return sup_band(flow, v, rho, principle=principle, eps=eps).strictly_dominated


def f_map(tree: ScenarioTree, flow: PreferenceFlow, rho: StoppingTime,
          principle: Principle = Principle.LATER, eps: float = CMP_EPS) -> StoppingTime:
    """First time immediate stopping strictly beats every option up to rho.

    Pathwise: stop at the first node strictly before rho whose band is
    strictly dominated, otherwise where rho stops.  The result never stops
    later than rho.
    """
    result, _ = _f_map_with_witness(tree, flow, rho, principle, eps)
    return result


def _f_map_with_witness(tree, flow, rho, principle, eps):
    stops = []
    witness = None

    def walk(v: int):
        nonlocal witness
        if v in rho.stops:
            stops.append(v)
            return
        if _dominated_at(flow, v, rho, principle, eps):
            stops.append(v)
            if witness is None or v < witness:
                witness = v
            return
        for c in tree.children[v]:
            walk(c)

    walk(rho.root)
    return StoppingTime(tree, stops, root=rho.root), witness


def bis(tree: ScenarioTree, flow: PreferenceFlow,
        principle: Principle = Principle.LATER, eps: float = CMP_EPS) -> BisFamily:
    """Backward-induction solution on a leveled tree.

    At a leaf the plan is to stop there; at an earlier node, stop now only if
    that strictly beats the pasted continuation plan (maximal tie-breaking:
    ties continue under the stop-later principle).
    """
    if not tree.is_leveled:
        raise NonLeveledTreeError("backward induction needs a leveled tree")
    fam = {}
    for v in sorted(range(tree.n), key=lambda w: -tree.depth[w]):
        if not tree.children[v]:
            fam[v] = StoppingTime.singleton(tree, v)
            continue
        cont_stops = frozenset().union(*(fam[c].stops for c in tree.children[v]))
        cont = StoppingTime(tree, cont_stops, root=v)
        j_stop = flow.immediate(v)
        j_cont = flow.evaluate(cont, v)
        fam[v] = StoppingTime.singleton(tree, v) if dominates(j_stop, j_cont, principle, eps) else cont
    return BisFamily(tree, fam)


def bis_iterative(tree: ScenarioTree, flow: PreferenceFlow,
                  principle: Principle = Principle.LATER, eps: float = CMP_EPS) -> BisFamily:
    """Same family computed by the level-indexed first-hitting recursion.

    Level T stops at the leaves; at level t the plan stops at the first node
    (at or after t) whose immediate value beats the value of the level-(t+1)
    plan, capped pathwise by the level-(t+1) plan.
    """
    if not tree.is_leveled:
        raise NonLeveledTreeError("backward induction needs a leveled tree")
    last = len(tree.level_times) - 1
    by_level = {last: StoppingTime.at_leaves(tree)}

    dominating = {}
    for v in range(tree.n):
        if not tree.children[v]:
            dominating[v] = True

    for level in range(last - 1, -1, -1):
        nxt = by_level[level + 1]
        for v in range(tree.n):
            if tree.depth[v] == level and tree.children[v]:
                dominating[v] = dominates(flow.immediate(v), flow.evaluate(nxt, v),
                                          principle, eps)
        stops = []

        def walk(v: int):
            if tree.depth[v] >= level and dominating.get(v, False):
                stops.append(v)
                return
            if v in nxt.stops:
                stops.append(v)
                return
            for c in tree.children[v]:
                walk(c)

        walk(0)
        by_level[level] = StoppingTime(tree, stops)

    fam = {v: by_level[tree.depth[v]].restrict(v) for v in range(tree.n)}
    return BisFamily(tree, fam)


def naive_chain(tree: ScenarioTree, flow: PreferenceFlow, max_iter: int = 1000,
                principle: Principle = Principle.LATER, eps: float = CMP_EPS) -> NaiveChain:
    """Iterate F from the horizon until the chain repeats (or hits the cap,
    which a finite tree never does: the chain strictly decreases in a finite
    lattice)."""
    chain = [StoppingTime.at_leaves(tree)]
    for _ in range(max_iter):
        nxt = f_map(tree, flow, chain[-1], principle, eps)
        chain.append(nxt)
        if nxt == chain[-2]:
            return NaiveChain(tuple(chain), "fixed_point")
    return NaiveChain(tuple(chain), "cap_reached")


def is_approachable(tree: ScenarioTree, flow: PreferenceFlow, tau: StoppingTime,
                    principle: Principle = Principle.LATER,
                    eps: float = CMP_EPS) -> tuple:
    """(approachable?, witness): tau is approachable when F(tau) = tau; the
    witness is the earliest strictly-dominating node otherwise."""
    witness = None
    for v in range(tree.n):           # BFS ids: earliest node first
        if not tau.strictly_after(v):
            continue
        if _dominated_at(flow, v, tau, principle, eps):
            witness = v
            break
    return witness is None, witness


def sophisticated(tree: ScenarioTree, flow: PreferenceFlow, max_iter: int = 1000,
                  principle: Principle = Principle.LATER,
                  eps: float = CMP_EPS) -> StoppingTime:
    """Fixed point of the naive chain; asserted approachable before returning."""
    chain = naive_chain(tree, flow, max_iter, principle, eps)
    if chain.status != "fixed_point":
        raise IterationCapError(f"no fixed point within {max_iter} iterations")
    result = chain.fixed_point()
    ok, witness = is_approachable(tree, flow, result, principle, eps)
    assert ok, f"chain fixed point not approachable (witness node {witness})"
    return result


def sophisticated_bruteforce(tree: ScenarioTree, flow: PreferenceFlow,
                             principle: Principle = Principle.LATER,
                             cap: int = ENUMERATION_CAP,
                             eps: float = CMP_EPS) -> StoppingTime:
    """Join of all approachable stopping times, by full enumeration.

    Desk-scale oracle: enumerates every stopping time (cap guarded), filters
    the approachable ones and folds their join, asserting the join is itself
    approachable.
    """
    survivors = []
    for tau in enumerate_all(tree, cap=cap):
        ok, _ = is_approachable(tree, flow, tau, principle, eps)
        if ok:
            survivors.append(tau)
    out = survivors[0]
    for tau in survivors[1:]:
        out = join(out, tau)
    ok, witness = is_approachable(tree, flow, out, principle, eps)
    assert ok, f"join of approachable times not approachable (witness node {witness})"
    return out


def delimiting_chain(tree: ScenarioTree, flow: PreferenceFlow, max_iter: int = 1000,
                     principle: Principle = Principle.LATER,
                     eps: float = CMP_EPS) -> list:
    """Distinct elements of the naive chain, sorted decreasing.

    On a finite tree this is the whole delimiting set (see module docstring);
    its minimum is asserted to be the sophisticated time.
    """
    chain = naive_chain(tree, flow, max_iter, principle, eps)
    out = [chain.chain[0]]
    for tau in chain.chain[1:]:
        if tau != out[-1]:
            out.append(tau)
    if chain.status == "fixed_point":
        soph = sophisticated(tree, flow, max_iter, principle, eps)
        assert out[-1] == soph, "minimal delimiting time differs from the fixed point"
    return out


def truncate_horizon(tree: ScenarioTree, flow, t) -> tuple:
    """Shorten a leveled tree to horizon t (nodes at time t become leaves).

    Returns (tree', flow', node_map) where node_map sends new ids to the ids
    of the original tree.  Preference entries are restricted untouched.
    """
    if not tree.is_leveled:
        raise NonLeveledTreeError("horizon truncation needs a leveled tree")
    t = Fraction(t)
    if t not in tree.level_times:
        raise ModelError(f"time {t} is not a level of the tree")
    keep = [v for v in range(tree.n) if tree.times[v] <= t]
    specs = [NodeSpec(key=v, parent=tree.parent[v], time=tree.times[v],
                      state=tree.states[v],
                      prob=None if tree.parent[v] is None else tree.edge_prob[v])
             for v in keep]
    tree2 = ScenarioTree(specs)
    node_map = dict(enumerate(tree2.source_key))
    if isinstance(flow, TableFlow):
        entries = {tt: e for tt, e in flow.entries.items() if tt <= t}
        flow2 = TableFlow(tree2, entries, default=flow.default)
    else:
        raise TypeError("cannot restrict this preference flow automatically")
    return tree2, flow2, node_map
