"""Built-in regression problems.

Three stress cases the solvers must reproduce exactly, plus the trivial
time-consistent baselines.  The discrete ones are shipped as model-format
text so the parser is on the regression path too.
"""
from __future__ import annotations

from .line import HarmonicRegimeLine, TimeConsistentLine
from .modelfmt import parse_model

#: horizon-5 line where backward induction stops at 0 but the equilibrium
#: waits until 4 (immediate value at 0 beats its own continuation plan, yet
#: no time strictly dominates every option up to 4).
BIS_GAP_MODEL = """\
tree line 0..5
pref t=4..5 functional "5 - tau"
pref t=1..3 functional "tau"
pref t=0 functional "5 - |tau - 1|"
principle later
"""

#: horizon-5 line whose backward-induction solution jumps later when the
#: horizon is cut from 5 to 4 (1 -> 2), while the equilibrium moves the
#: monotone way (5 -> 2).
HORIZON_SENSITIVITY_MODEL = """\
tree line 0..5
pref t=3..5 functional "tau"
pref t=2 functional "|tau - 16/5|"
pref t=1 functional "5 - |tau - 2|"
pref t=0 functional "tau"
principle later
"""

#: time-consistent baseline: maximize the expected stop time itself.
TIME_CONSISTENT_MODEL = """\
tree line 0..5
pref t=* functional "tau"
principle later
"""


def bis_gap_case():
    """(tree, flow, principle) for the BIS-vs-equilibrium gap example."""
    return parse_model(BIS_GAP_MODEL).build()


def horizon_sensitivity_case():
    return parse_model(HORIZON_SENSITIVITY_MODEL).build()


def time_consistent_case():
    return parse_model(TIME_CONSISTENT_MODEL).build()


def harmonic_line_problem(**kw) -> HarmonicRegimeLine:
    """The continuous-time iteration-failure problem (defaults pinned)."""
    return HarmonicRegimeLine(**kw)


def time_consistent_line(horizon: float = 3.0) -> TimeConsistentLine:
    return TimeConsistentLine(horizon)
