"""Equilibrium solutions of time-inconsistent optimal stopping problems."""

from .engine import (
    BisFamily,
    NaiveChain,
    bis,
    bis_iterative,
    delimiting_chain,
    f_map,
    is_approachable,
    naive_chain,
    sophisticated,
    sophisticated_bruteforce,
    truncate_horizon,
)
from .hyperbolic import (
    HyperbolicModel,
    ThresholdPolicy,
    a_star,
    class_d_bound_check,
    equilibrium_threshold,
    eta,
    exit_laplace,
    mc_exit_time,
    x_star,
)
from .line import (
    HarmonicRegimeLine,
    LineProblem,
    f_scalar,
    is_approachable_scalar,
    naive_chain_scalar,
    sophisticated_scalar,
    sup_tail,
)
from .modelfmt import ModelSpec, ParseError, format_model, parse_model, stopping_time_to_csv
from .numeric import Principle
from .preferences import DiscountCurve, PreferenceFlow, SupBand, TableFlow, sup_band
from .tree import (
    EnumerationOverflowError,
    ModelError,
    Ordering,
    ScenarioTree,
    StoppingTime,
    build_tree,
    enumerate_band,
    join,
    meet,
    order,
)

__version__ = "0.1.0"
