"""Preference flows: conditional objectives J(tau; node) on scenario trees.

A preference flow evaluates a stopping time from a node, using only the
subtree below that node (measurability by construction) and only the
restriction of the stopping time to it (replication consistency).

Two built-in families cover the model format:

* discounted reward: J(tau; v) = sum_w P(w|v) * D(time(w)-time(v)) * g(x_w)
* time functional:   J(tau; v) = sum_w P(w|v) * f_{time(v)}(time(w))

Both expose a per-node reward seen from the evaluation node, which lets
``sup_band`` run a Snell-style backward recursion on the band instead of
enumerating it.  Arbitrary in-process flows plug in through ``CallableFlow``
and are treated as black boxes (enumeration only).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from .numeric import CMP_EPS, Principle, dominates, strictly_greater, values_equal
from .pwl import PiecewiseLinear
from .tree import (
    ENUMERATION_CAP,
    EmptyBandError,
    Ordering,
    ScenarioTree,
    StoppingTime,
    enumerate_band,
    order,
)


class PreferenceError(ValueError):
    pass


# ---------------------------------------------------------------------------
# discount curves


@dataclass(frozen=True)
class DiscountCurve:
    """Closed-form discount family: exponential, hyperbolic or tabulated.

    Exponential discounting is evaluated in floats; hyperbolic and rational
    tables stay exact so strict comparisons on rational models never flip on
    rounding noise.
    """

    family: str                      # "exponential" | "hyperbolic" | "table"
    rate: Optional[Fraction] = None  # r or beta
    table: Optional[tuple] = None    # ((t, D(t)), ...) with t strictly increasing

    def __post_init__(self):
        if self.family in ("exponential", "hyperbolic"):
            if self.rate is None or self.rate <= 0:
                raise PreferenceError(f"{self.family} discounting needs a positive rate")
        elif self.family == "table":
            tab = self.table
            if not tab or tab[0][0] != 0 or tab[0][1] != 1:
                raise PreferenceError("discount table must start with D(0) = 1")
            for (t0, d0), (t1, d1) in zip(tab, tab[1:]):
                if t1 <= t0:
                    raise PreferenceError("discount table times must strictly increase")
                if d1 > d0:
                    raise PreferenceError("discount curve must be nonincreasing")
            if any(d <= 0 for _, d in tab):
                raise PreferenceError("discount values must be positive")
        else:
            raise PreferenceError(f"unknown discount family {self.family!r}")

    def discount(self, dt):
        if dt < 0:
            raise PreferenceError("discounting needs a nonnegative elapsed time")
        if self.family == "exponential":
            return math.exp(-float(self.rate) * float(dt))
        if self.family == "hyperbolic":
            return Fraction(1) / (1 + self.rate * Fraction(dt))
        # tabulated: linear interpolation inside the table
        tab = self.table
        if dt > tab[-1][0]:
            raise PreferenceError(f"discount table does not cover t={dt}")
        for (t0, d0), (t1, d1) in zip(tab, tab[1:]):
            if dt <= t1:
                w = (Fraction(dt) - t0) / (t1 - t0)
                return d0 + (d1 - d0) * w
        return tab[0][1]

    def check_decreasing_impatience(self, grid) -> bool:
        """D(t)D(s) <= D(t+s) on the sampled grid (where defined)."""
        for t in grid:
            for s in grid:
                try:
                    lhs = self.discount(t) * self.discount(s)
                    rhs = self.discount(Fraction(t) + Fraction(s))
                except PreferenceError:
                    continue
                if strictly_greater(lhs, rhs, 1e-12):
                    return False
        return True


# ---------------------------------------------------------------------------
# per-time preference entries


@dataclass(frozen=True)
class FunctionalEntry:
    """Objective E[f(tau)] with f piecewise-linear in the stop time."""

    fn: PiecewiseLinear

    def reward(self, tree: ScenarioTree, v: int, w: int):
        return self.fn.eval(tree.times[w])


@dataclass(frozen=True)
class DiscountedEntry:
    """Objective E[D(tau - t) * g(X_tau)] with g piecewise-linear in state."""

    curve: DiscountCurve
    reward_fn: PiecewiseLinear

    def reward(self, tree: ScenarioTree, v: int, w: int):
        dt = tree.times[w] - tree.times[v]
        return self.curve.discount(dt) * self.reward_fn.eval(tree.states[w][0])


class PreferenceFlow:
    """Base contract: evaluate(tau, v) -> value.

    Subclasses may expose node_reward(v, w) when J(tau; v) is an expectation
    of a per-stop-node reward; sup_band then uses the backward recursion.
    """

    tree: ScenarioTree
    expectation_form: bool = False

    def evaluate(self, tau: StoppingTime, v: int):
        raise NotImplementedError

    def node_reward(self, v: int, w: int):
        return None

    def immediate(self, v: int):
        """J(stop-at-v; v)."""
        return self.evaluate(StoppingTime.singleton(self.tree, v), v)


class TableFlow(PreferenceFlow):
    """Preference flow assembled from per-decision-time entries."""

    def __init__(self, tree: ScenarioTree, entries: dict, default=None):
        self.tree = tree
        self.entries = dict(entries)
        self.default = default
        missing = sorted(
            {float(tree.times[v]) for v in range(tree.n)
             if tree.times[v] not in self.entries}
        ) if default is None else []
        if missing:
            raise PreferenceError(
                f"no preference entry for decision times {missing} and no default")
        ents = {self._entry_at(t) for t in set(tree.times)}
        self.expectation_form = (len(ents) == 1
                                 and isinstance(next(iter(ents)), DiscountedEntry))
        self._cache = {}

    def _entry_at(self, t):
        return self.entries.get(t, self.default)

    def node_reward(self, v: int, w: int):
        return self._entry_at(self.tree.times[v]).reward(self.tree, v, w)

    def evaluate(self, tau: StoppingTime, v: int):
        restricted = tau.restrict(v)
        key = (v, restricted.stops)
        if key in self._cache:
            return self._cache[key]
        tree = self.tree
        entry = self._entry_at(tree.times[v])
        value = sum(tree.cond_prob(v, w) * entry.reward(tree, v, w)
                    for w in restricted.stops)
        self._cache[key] = value
        return value


class CallableFlow(PreferenceFlow):
    """User-registered in-process flow; treated as a black box."""

    def __init__(self, tree: ScenarioTree, fn: Callable[[ScenarioTree, StoppingTime, int], object]):
        self.tree = tree
        self.fn = fn

    def evaluate(self, tau: StoppingTime, v: int):
        return self.fn(self.tree, tau.restrict(v), v)


# ---------------------------------------------------------------------------
# band supremum


@dataclass
class SupBand:
    value: object
    argmax: StoppingTime
    strictly_dominated: bool


def sup_band(flow: PreferenceFlow, v: int, rho: StoppingTime,
             principle: Principle = Principle.LATER,
             cap: int = ENUMERATION_CAP, eps: float = CMP_EPS) -> SupBand:
    """Best value over stopping times in the band (v, rho] seen from v.

    The argmax is the latest maximizer in lattice order among ties under the
    stop-later principle (earliest under stop-earlier).  strictly_dominated
    reports whether stopping at v beats the whole band, with the strictness
    dictated by the principle.
    """
    if not rho.strictly_after(v):
        raise EmptyBandError(f"band at node {v} is empty")
    if flow.node_reward(v, v) is not None:
        value, argmax = _sup_band_recursion(flow, v, rho, principle, eps)
    else:
        value, argmax = _sup_band_enumerate(flow, v, rho, principle, cap, eps)
    immediate = flow.immediate(v)
    return SupBand(value, argmax, dominates(immediate, value, principle, eps))


def _sup_band_recursion(flow: PreferenceFlow, v: int, rho: StoppingTime,
                        principle: Principle, eps: float):
    """Snell-style backward recursion on the band, re-discounted from v.

    Valid because the evaluation node is fixed: J(.; v) is the expectation of
    a per-node reward, so optimal stopping below v is ordinary dynamic
    programming even when the discount curve is not exponential.
    """
    tree = flow.tree
    rho_stops = rho.stops
    value = {}
    stop_here = {}

    def visit(w: int):
        r = flow.node_reward(v, w)
        if w in rho_stops or not tree.children[w]:
            value[w] = r
            stop_here[w] = True
            return
        cont = 0
        for c in tree.children[w]:
            visit(c)
            cont += tree.edge_prob[c] * value[c]
        if dominates(r, cont, principle, eps):
            value[w] = r
            stop_here[w] = True
        else:
            value[w] = cont
            stop_here[w] = False

    total = 0
    for c in tree.children[v]:
        visit(c)
        total += tree.edge_prob[c] * value[c]

    stops = []
    stack = list(tree.children[v])
    while stack:
        w = stack.pop()
        if stop_here[w]:
            stops.append(w)
        else:
            stack.extend(tree.children[w])
    return total, StoppingTime(tree, stops, root=v)


def _sup_band_enumerate(flow: PreferenceFlow, v: int, rho: StoppingTime,
                        principle: Principle, cap: int, eps: float):
    best_value = None
    best = None
    for tau in enumerate_band(flow.tree, v, rho, cap=cap):
        val = flow.evaluate(tau, v)
        if best is None or strictly_greater(val, best_value, eps):
            best_value, best = val, tau
        elif values_equal(val, best_value, eps):
            rel = order(tau, best)
            if principle is Principle.LATER and rel in (Ordering.GEQ,):
                best = tau
            elif principle is Principle.EARLIER and rel in (Ordering.LEQ,):
                best = tau
    return best_value, best
