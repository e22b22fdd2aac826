"""Line-oriented text model format.

    # comments and blank lines are ignored
    tree line 0..5
    tree binomial depth=4 p=0.5 up=+1 down=-1 x0=0 dt=1
    tree custom
    node 0 t=0 x=0
    node 1 parent=0 p=1/2 t=1 x=1
    pref t=4 functional "5 - |tau - 0|*1"
    pref t=0..3 discounted hyperbolic beta=1 reward "abs(x)"
    pref t=* functional "tau"          # declared default
    principle later

Numbers may be integers, decimals or fractions (1/3); all are kept exact.
Diagnostics carry 1-based line:column positions.  ``format_model`` prints a
canonical document and ``parse_model(format_model(spec)) == spec``.
"""
from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .numeric import Principle
from .preferences import DiscountCurve, DiscountedEntry, FunctionalEntry, TableFlow
from .pwl import ExprError, format_expr, parse_expr
from .tree import ModelError, NodeSpec, ScenarioTree, StoppingTime, binomial_tree, line_tree


class ParseError(ModelError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class TreeSpec:
    kind: str                 # "line" | "binomial" | "custom"
    params: tuple             # canonical (name, value) pairs
    nodes: tuple = ()         # NodeSpec tuple for "custom"

    def build(self) -> ScenarioTree:
        p = dict(self.params)
        if self.kind == "line":
            times = list(range(int(p["start"]), int(p["stop"]) + 1))
            return line_tree(times)
        if self.kind == "binomial":
            return binomial_tree(int(p["depth"]), p["p"], p["up"], p["down"],
                                 p.get("x0", 0), p.get("dt", 1))
        return ScenarioTree(list(self.nodes))


@dataclass(frozen=True)
class PrefSpec:
    times: tuple              # explicit decision times, or () for the default
    entry: object             # FunctionalEntry | DiscountedEntry


@dataclass(frozen=True)
class ModelSpec:
    tree: TreeSpec
    prefs: tuple
    principle: Principle = Principle.LATER

    def build(self):
        """(ScenarioTree, TableFlow, Principle) with dangling times checked."""
        tree = self.tree.build()
        entries = {}
        default = None
        tree_times = set(tree.times)
        for pref in self.prefs:
            if not pref.times:
                default = pref.entry
                continue
            for t in pref.times:
                if t not in tree_times:
                    raise ModelError(f"preference references time {t} not present in the tree")
                entries[t] = pref.entry
        flow = TableFlow(tree, entries, default=default)
        return tree, flow, self.principle


_NUM_RE = r"[+-]?\d+(?:\.\d+)?(?:/\d+)?"


def _num(text: str, line: int, col: int) -> Fraction:
    try:
        if "/" in text:
            a, b = text.split("/")
            return Fraction(Fraction(a), Fraction(b))
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ParseError(line, col, f"bad number {text!r}")


def _split_kv(token: str, line: int, col: int):
    if "=" not in token:
        raise ParseError(line, col, f"expected key=value, got {token!r}")
    k, v = token.split("=", 1)
    return k, v


class _Lines:
    """Tokenizer that remembers line/column for diagnostics."""

    def __init__(self, text: str):
        self.raw = text.splitlines()

    def statements(self):
        for i, raw in enumerate(self.raw, start=1):
            stripped = raw.split("#", 1)[0].rstrip()
            if not stripped.strip():
                continue
            yield i, stripped


_QUOTED = re.compile(r'"([^"]*)"')


def parse_model(text: str) -> ModelSpec:
    """Parse a model document; raises ParseError with line:column on failure."""
    lines = _Lines(text)
    tree_spec: Optional[TreeSpec] = None
    custom_nodes = []
    in_custom = False
    prefs = []
    principle = Principle.LATER

    statements = list(lines.statements())
    if not statements:
        raise ParseError(1, 1, "empty model document")

    for lineno, stmt in statements:
        indent = len(stmt) - len(stmt.lstrip())
        words = stmt.split()
        head = words[0]
        col = indent + 1
        if head == "tree":
            if tree_spec is not None or in_custom:
                raise ParseError(lineno, col, "duplicate tree declaration")
            tree_spec, in_custom = _parse_tree_line(words, lineno, stmt)
        elif head == "node":
            if not in_custom:
                raise ParseError(lineno, col, "node lines are only allowed after 'tree custom'")
            custom_nodes.append(_parse_node_line(words, lineno, stmt))
        elif head == "pref":
            prefs.append(_parse_pref_line(words, lineno, stmt))
        elif head == "principle":
            if len(words) != 2 or words[1] not in ("later", "earlier"):
                raise ParseError(lineno, stmt.find(head) + len(head) + 2,
                                 "principle must be 'later' or 'earlier'")
            principle = Principle(words[1])
        else:
            raise ParseError(lineno, col, f"unknown directive {head!r}")

    if tree_spec is None:
        raise ParseError(1, 1, "model has no tree declaration")
    if in_custom:
        if not custom_nodes:
            raise ParseError(1, 1, "tree custom declared but no node lines follow")
        tree_spec = TreeSpec("custom", (), tuple(custom_nodes))
    if not prefs:
        raise ParseError(1, 1, "model has no preference entries")
    return ModelSpec(tree_spec, tuple(prefs), principle)


def _parse_tree_line(words, lineno, stmt):
    col_of = lambda w: stmt.find(w) + 1
    if len(words) < 2:
        raise ParseError(lineno, len(stmt) + 1, "tree needs a kind (line|binomial|custom)")
    kind = words[1]
    if kind == "line":
        if len(words) != 3 or ".." not in words[2]:
            raise ParseError(lineno, col_of(kind), "usage: tree line <start>..<stop>")
        a, b = words[2].split("..", 1)
        start = _num(a, lineno, col_of(words[2]))
        stop = _num(b, lineno, col_of(words[2]))
        if start.denominator != 1 or stop.denominator != 1 or stop <= start:
            raise ParseError(lineno, col_of(words[2]),
                             "line range must be increasing integers")
        return TreeSpec("line", (("start", start), ("stop", stop))), False
    if kind == "binomial":
        params = {}
        for w in words[2:]:
            k, v = _split_kv(w, lineno, col_of(w))
            if k not in ("depth", "p", "up", "down", "x0", "dt"):
                raise ParseError(lineno, col_of(w), f"unknown binomial parameter {k!r}")
            params[k] = _num(v, lineno, col_of(w))
        for req in ("depth", "p", "up", "down"):
            if req not in params:
                raise ParseError(lineno, col_of(kind), f"binomial needs {req}=")
        return TreeSpec("binomial", tuple(sorted(params.items()))), False
    if kind == "custom":
        if len(words) != 2:
            raise ParseError(lineno, col_of(kind), "tree custom takes no parameters")
        return None, True
    raise ParseError(lineno, col_of(kind), f"unknown tree kind {kind!r}")


def _parse_node_line(words, lineno, stmt):
    col_of = lambda w: stmt.find(w) + 1
    if len(words) < 2:
        raise ParseError(lineno, len(stmt) + 1, "node needs an identifier")
    key = words[1]
    fields = {}
    for w in words[2:]:
        k, v = _split_kv(w, lineno, col_of(w))
        if k not in ("parent", "p", "t", "x"):
            raise ParseError(lineno, col_of(w), f"unknown node field {k!r}")
        fields[k] = (v, col_of(w))
    if "t" not in fields:
        raise ParseError(lineno, col_of(key), "node needs t=<time>")
    time = _num(*((fields["t"][0],) + (lineno, fields["t"][1])))
    state = _num(fields["x"][0], lineno, fields["x"][1]) if "x" in fields else Fraction(0)
    parent = fields["parent"][0] if "parent" in fields else None
    prob = _num(fields["p"][0], lineno, fields["p"][1]) if "p" in fields else None
    if parent is not None and prob is None:
        raise ParseError(lineno, col_of(key), "non-root node needs p=<branch probability>")
    return NodeSpec(key=key, parent=parent, time=time, state=(state,), prob=prob)


def _parse_pref_line(words, lineno, stmt):
    col_of = lambda w: stmt.find(w) + 1
    if len(words) < 3 or not words[1].startswith("t="):
        raise ParseError(lineno, col_of(words[0]), "usage: pref t=<times> <family> ...")
    tspec = words[1][2:]
    if tspec == "*":
        times = ()
    elif ".." in tspec:
        a, b = tspec.split("..", 1)
        lo = _num(a, lineno, col_of(words[1]))
        hi = _num(b, lineno, col_of(words[1]))
        if lo.denominator != 1 or hi.denominator != 1 or hi < lo:
            raise ParseError(lineno, col_of(words[1]), "time range must be increasing integers")
        times = tuple(Fraction(k) for k in range(int(lo), int(hi) + 1))
    elif "," in tspec:
        times = tuple(_num(part, lineno, col_of(words[1])) for part in tspec.split(","))
    else:
        times = (_num(tspec, lineno, col_of(words[1])),)

    family = words[2]
    m = _QUOTED.search(stmt)
    if family == "functional":
        if m is None:
            raise ParseError(lineno, len(stmt) + 1, 'functional needs a quoted "expression"')
        fn = _parse_quoted_expr(m, "tau", lineno)
        return PrefSpec(times, FunctionalEntry(fn))
    if family == "discounted":
        if len(words) < 4:
            raise ParseError(lineno, col_of(family), "discounted needs a curve family")
        curve_kind = words[3]
        if curve_kind == "hyperbolic" or curve_kind == "exponential":
            key = "beta" if curve_kind == "hyperbolic" else "r"
            kv = [w for w in words[4:] if w.startswith(key + "=")]
            if not kv:
                raise ParseError(lineno, col_of(curve_kind), f"{curve_kind} needs {key}=")
            rate = _num(kv[0].split("=", 1)[1], lineno, col_of(kv[0]))
            curve = DiscountCurve("hyperbolic" if curve_kind == "hyperbolic" else "exponential",
                                  rate=rate)
        elif curve_kind == "table":
            if len(words) < 5:
                raise ParseError(lineno, col_of(curve_kind), "table needs t0:d0,t1:d1,...")
            pairs = []
            for item in words[4].split(","):
                if ":" not in item:
                    raise ParseError(lineno, col_of(words[4]), f"bad table pair {item!r}")
                a, b = item.split(":", 1)
                pairs.append((_num(a, lineno, col_of(words[4])),
                              _num(b, lineno, col_of(words[4]))))
            curve = DiscountCurve("table", table=tuple(pairs))
        else:
            raise ParseError(lineno, col_of(curve_kind),
                             f"unknown discount family {curve_kind!r}")
        if m is None or "reward" not in stmt:
            raise ParseError(lineno, len(stmt) + 1, 'discounted needs reward "expression"')
        g = _parse_quoted_expr(m, "x", lineno)
        return PrefSpec(times, DiscountedEntry(curve, g))
    raise ParseError(lineno, col_of(family), f"unknown preference family {family!r}")


def _parse_quoted_expr(match, var, lineno):
    try:
        return parse_expr(match.group(1), var)
    except ExprError as exc:
        raise ParseError(lineno, match.start(1) + 1 + exc.offset, str(exc))


# ---------------------------------------------------------------------------
# printing


def _fmt_num(q: Fraction) -> str:
    return str(q)


def format_model(spec: ModelSpec) -> str:
    out = []
    tree = spec.tree
    if tree.kind == "line":
        p = dict(tree.params)
        out.append(f"tree line {p['start']}..{p['stop']}")
    elif tree.kind == "binomial":
        parts = " ".join(f"{k}={_fmt_num(v)}" for k, v in tree.params)
        out.append(f"tree binomial {parts}")
    else:
        out.append("tree custom")
        for n in tree.nodes:
            bits = [f"node {n.key}"]
            if n.parent is not None:
                bits.append(f"parent={n.parent}")
                bits.append(f"p={_fmt_num(n.prob)}")
            bits.append(f"t={_fmt_num(n.time)}")
            bits.append(f"x={_fmt_num(n.state[0])}")
            out.append(" ".join(bits))
    for pref in spec.prefs:
        times = "*" if not pref.times else _times_spec(pref.times)
        entry = pref.entry
        if isinstance(entry, FunctionalEntry):
            out.append(f'pref t={times} functional "{format_expr(entry.fn, "tau")}"')
        else:
            curve = entry.curve
            if curve.family == "hyperbolic":
                cpart = f"hyperbolic beta={_fmt_num(curve.rate)}"
            elif curve.family == "exponential":
                cpart = f"exponential r={_fmt_num(curve.rate)}"
            else:
                pairs = ",".join(f"{_fmt_num(t)}:{_fmt_num(d)}" for t, d in curve.table)
                cpart = f"table {pairs}"
            out.append(f'pref t={times} discounted {cpart} reward "{format_expr(entry.reward_fn, "x")}"')
    out.append(f"principle {spec.principle.value}")
    return "\n".join(out) + "\n"


def _times_spec(times: tuple) -> str:
    ints = [t for t in times]
    if (len(ints) > 1 and all(t.denominator == 1 for t in ints)
            and all(b - a == 1 for a, b in zip(ints, ints[1:]))):
        return f"{ints[0]}..{ints[-1]}"
    return ",".join(_fmt_num(t) for t in ints) if len(ints) > 1 else _fmt_num(ints[0])


# ---------------------------------------------------------------------------
# stopping-time CSV


def stopping_time_to_csv(tau: StoppingTime) -> str:
    """Columns node_id,time,stopped over all nodes of the tree."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node_id", "time", "stopped"])
    for v in range(tau.tree.n):
        w.writerow([v, _fmt_num(tau.tree.times[v]), int(v in tau.stops)])
    return buf.getvalue()


def stopping_time_from_csv(tree: ScenarioTree, text: str) -> StoppingTime:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:3] != ["node_id", "time", "stopped"]:
        raise ModelError("stopping-time CSV must have header node_id,time,stopped")
    stops = set()
    for row in rows[1:]:
        if not row:
            continue
        if int(row[2]):
            stops.add(int(row[0]))
    return StoppingTime(tree, stops)
