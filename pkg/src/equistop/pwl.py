"""Piecewise-linear expressions over a single variable.

This is the expression grammar of the model format: constants, the variable
(``tau`` for time functionals, ``x`` for state rewards), ``|...|`` or
``abs(...)``, ``+``, ``-``, and multiplication by scalars.  Everything is kept
in exact rational arithmetic so strict comparisons downstream stay sound.

A ``PiecewiseLinear`` is stored canonically as strictly increasing breakpoints
plus one (intercept, slope) pair per interval; continuity holds by
construction.  ``format_expr`` prints the canonical
``alpha + beta*var + sum gamma_i*|var - b_i|`` form, and
``parse_expr(format_expr(p)) == p`` exactly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator


class ExprError(ValueError):
    """Expression rejected; ``offset`` is the 0-based column in the source."""

    def __init__(self, message: str, offset: int):
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function of one variable.

    breakpoints: strictly increasing Fractions (may be empty)
    pieces: len(breakpoints)+1 pairs (intercept, slope); piece i applies on
        [breakpoints[i-1], breakpoints[i]] with open ends at +-infinity.
    """

    breakpoints: tuple
    pieces: tuple

    @staticmethod
    def constant(c) -> "PiecewiseLinear":
        return PiecewiseLinear((), ((Fraction(c), Fraction(0)),))

    @staticmethod
    def identity() -> "PiecewiseLinear":
        return PiecewiseLinear((), ((Fraction(0), Fraction(1)),))

    @staticmethod
    def _canonical(breaks, pieces) -> "PiecewiseLinear":
        # drop breakpoints where neither slope nor intercept changes
        kept_b, kept_p = [], [pieces[0]]
        for b, nxt in zip(breaks, pieces[1:]):
            if nxt == kept_p[-1]:
                continue
            kept_b.append(b)
            kept_p.append(nxt)
        return PiecewiseLinear(tuple(kept_b), tuple(kept_p))

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        i = 0
        for b in self.breakpoints:
            if t > b:
                i += 1
            else:
                break
        a, c = self.pieces[i]
        return a + c * t

    def _zip_with(self, other: "PiecewiseLinear", op) -> "PiecewiseLinear":
        breaks = sorted(set(self.breakpoints) | set(other.breakpoints))
        pieces = []
        probes = _interval_probes(breaks)
        for p in probes:
            a1, c1 = self._piece_at(p)
            a2, c2 = other._piece_at(p)
            pieces.append(op((a1, c1), (a2, c2)))
        return PiecewiseLinear._canonical(breaks, pieces)

    def _piece_at(self, t):
        i = 0
        for b in self.breakpoints:
            if t > b:
                i += 1
            else:
                break
        return self.pieces[i]

    def __add__(self, other):
        return self._zip_with(other, lambda p, q: (p[0] + q[0], p[1] + q[1]))

    def __sub__(self, other):
        return self._zip_with(other, lambda p, q: (p[0] - q[0], p[1] - q[1]))

    def __neg__(self):
        return PiecewiseLinear(self.breakpoints, tuple((-a, -c) for a, c in self.pieces))

    def scale(self, k) -> "PiecewiseLinear":
        k = Fraction(k)
        if k == 0:
            return PiecewiseLinear.constant(0)
        return PiecewiseLinear(self.breakpoints, tuple((k * a, k * c) for a, c in self.pieces))

    def abs(self) -> "PiecewiseLinear":
        # split every piece at its root, then flip negative pieces
        breaks = set(self.breakpoints)
        for i, (a, c) in enumerate(self.pieces):
            if c == 0:
                continue
            root = Fraction(-a, c)
            lo = self.breakpoints[i - 1] if i > 0 else None
            hi = self.breakpoints[i] if i < len(self.breakpoints) else None
            if (lo is None or root > lo) and (hi is None or root < hi):
                breaks.add(root)
        breaks = sorted(breaks)
        pieces = []
        for p in _interval_probes(breaks):
            a, c = self._piece_at(p)
            if a + c * p < 0:
                a, c = -a, -c
            pieces.append((a, c))
        return PiecewiseLinear._canonical(tuple(breaks), pieces)

    def as_abs_combination(self):
        """Return (alpha, beta, [(gamma_i, b_i)...]) with
        f(t) = alpha + beta*t + sum gamma_i * |t - b_i|."""
        slopes = [c for _, c in self.pieces]
        gammas = [(slopes[i + 1] - slopes[i]) / 2 for i in range(len(self.breakpoints))]
        beta = (slopes[0] + slopes[-1]) / 2
        alpha = self.eval(Fraction(0)) - sum(g * abs(b) for g, b in zip(gammas, self.breakpoints))
        terms = [(g, b) for g, b in zip(gammas, self.breakpoints) if g != 0]
        return alpha, beta, terms


def _interval_probes(breaks) -> list:
    """One interior probe point per interval induced by sorted breakpoints."""
    if not breaks:
        return [Fraction(0)]
    pts = [breaks[0] - 1]
    for a, b in zip(breaks, breaks[1:]):
        pts.append((a + b) / 2)
    pts.append(breaks[-1] + 1)
    return pts


# ---------------------------------------------------------------------------
# parsing


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:/\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*()|]))"
)


def _tokens(text: str) -> Iterator[tuple]:
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprError(f"unexpected character {text[pos:pos + 1]!r}", pos)
        if m.group("num"):
            yield ("num", m.group("num"), m.start("num"))
        elif m.group("name"):
            yield ("name", m.group("name"), m.start("name"))
        else:
            yield ("op", m.group("op"), m.start("op"))
        pos = m.end()
    yield ("end", "", len(text))


class _Parser:
    def __init__(self, text: str, var: str):
        self.var = var
        self.toks = list(_tokens(text))
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.take()
        if val != value:
            raise ExprError(f"expected {value!r}", off)

    def parse(self) -> PiecewiseLinear:
        result = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected trailing {val!r}", off)
        return result

    def expr(self, inside_abs: bool = False) -> PiecewiseLinear:
        out = self.term(inside_abs)
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term(inside_abs)
                out = out + rhs if val == "+" else out - rhs
            else:
                return out

    def term(self, inside_abs: bool) -> PiecewiseLinear:
        out = self.factor(inside_abs)
        while True:
            kind, val, off = self.peek()
            if kind == "op" and val == "*":
                self.take()
                rhs = self.factor(inside_abs)
                out = _pwl_mul(out, rhs, off)
            else:
                return out

    def factor(self, inside_abs: bool) -> PiecewiseLinear:
        kind, val, off = self.take()
        if kind == "num":
            return PiecewiseLinear.constant(_parse_number(val))
        if kind == "name":
            if val == self.var:
                return PiecewiseLinear.identity()
            if val == "abs":
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return inner.abs()
            raise ExprError(f"unknown name {val!r} (variable here is {self.var!r})", off)
        if kind == "op":
            if val == "-":
                return -self.factor(inside_abs)
            if val == "+":
                return self.factor(inside_abs)
            if val == "(":
                inner = self.expr()
                self.expect(")")
                return inner
            if val == "|":
                if inside_abs:
                    raise ExprError("nested |...| is ambiguous; use abs(...)", off)
                inner = self.expr(inside_abs=True)
                self.expect("|")
                return inner.abs()
        raise ExprError("expected a number, variable, abs(...) or |...|", off)


def _parse_number(text: str) -> Fraction:
    if "/" in text:
        num, den = text.split("/")
        return Fraction(Fraction(num), Fraction(den))
    return Fraction(text)


def _pwl_mul(lhs: PiecewiseLinear, rhs: PiecewiseLinear, off: int) -> PiecewiseLinear:
    lconst = not lhs.breakpoints and lhs.pieces[0][1] == 0
    rconst = not rhs.breakpoints and rhs.pieces[0][1] == 0
    if rconst:
        return lhs.scale(rhs.pieces[0][0])
    if lconst:
        return rhs.scale(lhs.pieces[0][0])
    raise ExprError("product of two non-constant expressions is not piecewise-linear", off)


def parse_expr(text: str, var: str) -> PiecewiseLinear:
    """Parse an expression into a PiecewiseLinear over variable `var`."""
    return _Parser(text, var).parse()


def format_expr(p: PiecewiseLinear, var: str) -> str:
    """Canonical textual form; round-trips exactly through parse_expr."""
    alpha, beta, terms = p.as_abs_combination()
    parts = []

    def frac(q: Fraction) -> str:
        return str(q)

    if alpha != 0 or (beta == 0 and not terms):
        parts.append(frac(alpha))
    if beta != 0:
        coeff = "" if beta == 1 else f"{frac(abs(beta))}*"
        parts.append(("-" if beta < 0 else "+") + f" {coeff}{var}")
    for gamma, b in terms:
        inner = var if b == 0 else (f"{var} - {frac(b)}" if b > 0 else f"{var} + {frac(-b)}")
        coeff = "" if abs(gamma) == 1 else f"{frac(abs(gamma))}*"
        parts.append(("-" if gamma < 0 else "+") + f" {coeff}|{inner}|")
    text = " ".join(parts)
    if text.startswith("+ "):
        text = text[2:]
    elif text.startswith("- "):
        text = "-" + text[2:]
    return text
