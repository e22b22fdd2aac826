"""Comparison helpers shared by the solvers.

Strict inequalities decide everything downstream (domination, tie-breaking),
so comparisons are exact whenever both operands are rational (int/Fraction)
and tolerance-based otherwise.  Float ties resolve as non-strict.
"""
from __future__ import annotations

from enum import Enum
from numbers import Rational

#: default float comparison tolerance for strict-domination checks
CMP_EPS = 1e-9


class Principle(str, Enum):
    """Tie-breaking rule: continue on ties (maximal solution) or stop."""

    LATER = "later"
    EARLIER = "earlier"


def is_exact(value) -> bool:
    return isinstance(value, Rational)


def strictly_greater(a, b, eps: float = CMP_EPS) -> bool:
    if is_exact(a) and is_exact(b):
        return a > b
    return float(a) > float(b) + eps


def at_least(a, b, eps: float = CMP_EPS) -> bool:
    """a >= b, with float slack: not (b strictly greater than a)."""
    return not strictly_greater(b, a, eps)


def values_equal(a, b, eps: float = CMP_EPS) -> bool:
    if is_exact(a) and is_exact(b):
        return a == b
    return abs(float(a) - float(b)) <= eps


def dominates(immediate, best_wait, principle: Principle, eps: float = CMP_EPS) -> bool:
    """Does immediate stopping beat the best waiting option?

    Strict under the stop-later principle; ties count as domination under
    stop-earlier.
    """
    if principle is Principle.LATER:
        return strictly_greater(immediate, best_wait, eps)
    return at_least(immediate, best_wait, eps)
