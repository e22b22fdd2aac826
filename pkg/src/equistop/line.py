"""Deterministic continuous-time engine on [0, T].

The filtration is trivial, so stopping times are plain reals and the whole
solver works with scalar functions J(t, tau) supplied as a registry of
closed-form regimes.  A regime description provides, for each evaluation
time t, the tail curve tau -> J(t, tau) as ordered half-open linear pieces
(lo, hi] plus the exact "critical" t-values where the curve family changes
(regime boundaries, kinks, accumulation points of boundaries).

Suprema over half-open bands are computed in closed form per linear piece
and carry an attainment flag: a decreasing piece approaches its supremum at
the open left end without reaching it.  Strict-domination checks then use
``>`` against attained suprema and ``>=`` against unattained ones, which is
the exact content of the definition instead of the usual epsilon-inside
fudge.  Regimes registered as nonlinear fall back to a grid scan at
resolution h.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence


@dataclass(frozen=True)
class Piece:
    """Linear piece value = a + b*tau on the half-open interval (lo, hi]."""

    lo: float
    hi: float
    a: float
    b: float

    def value(self, tau: float) -> float:
        return self.a + self.b * tau


@dataclass(frozen=True)
class TailSup:
    value: float
    argmax: float
    attained: bool


@dataclass
class LineChain:
    values: list            # rho^(0) = T, rho^(1), ...
    fixed_point: bool
    limit: float


class LineProblem:
    """Scalar stopping problem on [0, T] with a regime registry.

    Subclasses implement value/self_value/tail_pieces and describe their
    critical structure; the solver functions below never look inside J other
    than through this interface.
    """

    horizon: float
    eps: float = 1e-6       # comparison + bisection tolerance
    grid: float = 1e-4      # fallback / scan resolution

    def value(self, t: float, tau: float) -> float:
        raise NotImplementedError

    def self_value(self, t: float) -> float:
        return self.value(t, t)

    def tail_pieces(self, t: float) -> Optional[Sequence[Piece]]:
        """Pieces covering (t, T]; None marks a nonlinear regime (grid scan)."""
        return None

    def critical_points(self, lo: float, hi: float) -> list:
        """Exact regime/kink t-values in (lo, hi), coarser than eps spacing."""
        return []

    def criticals_below(self, x: float, count: int = 4) -> list:
        """The `count` nearest exact critical t-values strictly below x."""
        pts = [p for p in self.critical_points(0.0, x) if p < x]
        return sorted(pts)[-count:]

    def accumulation_points(self) -> tuple:
        return ()


class TimeConsistentLine(LineProblem):
    """J(t, tau) = tau: always wait; the solution is the horizon."""

    def __init__(self, horizon: float = 3.0):
        self.horizon = float(horizon)

    def value(self, t, tau):
        return tau

    def tail_pieces(self, t):
        return [Piece(t, self.horizon, 0.0, 1.0)]


class ConstantLine(LineProblem):
    """J(t, tau) = c: everything ties; stop-later keeps waiting."""

    def __init__(self, c: float, horizon: float = 3.0):
        self.horizon = float(horizon)
        self.c = float(c)

    def value(self, t, tau):
        return self.c

    def tail_pieces(self, t):
        return [Piece(t, self.horizon, self.c, 0.0)]


class HarmonicRegimeLine(LineProblem):
    """The built-in iteration-failure problem.

    Three regime families on [0, T], with boundaries m + s/k accumulating at
    m from above (write t_k = m + s/k, so t_1 = m + s):

    * t >= m + s:            J(t, tau) = (m + s) - tau
    * t in [t_{k+1}, t_k):   J(t, tau) = |tau - t_k|        for tau <= t_k
                                         tau                for tau >  t_k
    * t in [0, m]:           J(t, tau) = 1 - |tau - kink|   for tau <= m
                                         tau                for tau >  m

    The defaults (m=1, s=1, kink=1/2, T=3) give the chain rho^(n) = 1 + 1/n,
    the non-approachable limit 1, and the equilibrium 1/2.
    """

    def __init__(self, m: float = 1.0, s: float = 1.0, kink: float = 0.5,
                 horizon: float = 3.0, eps: float = 1e-6, grid: float = 1e-4):
        if not (0 < kink < m < m + s <= horizon):
            raise ValueError("need 0 < kink < m < m+s <= horizon")
        self.m = float(m)
        self.s = float(s)
        self.kink = float(kink)
        self.horizon = float(horizon)
        self.eps = float(eps)
        self.grid = float(grid)

    # boundary sequence -----------------------------------------------------
    def boundary(self, k: int) -> float:
        return self.m + self.s / k

    def cell_index(self, t: float) -> int:
        """k with t in [t_{k+1}, t_k); requires m < t < t_1."""
        raw = self.s / (t - self.m)
        k = math.ceil(raw) - 1
        # snap float boundary hits: t == t_{k+1} belongs to cell k+1... cell k
        while self.boundary(k + 1) > t:
            k += 1
        while k > 1 and self.boundary(k) <= t:
            k -= 1
        return max(k, 1)

    # registry ----------------------------------------------------------------
    def value(self, t, tau):
        if t >= self.m + self.s:
            return (self.m + self.s) - tau
        if t > self.m:
            tk = self.boundary(self.cell_index(t))
            return abs(tau - tk) if tau <= tk else tau
        return (1.0 - abs(tau - self.kink)) if tau <= self.m else tau

    def tail_pieces(self, t):
        T = self.horizon
        top = self.m + self.s
        if t >= top:
            return [Piece(t, T, top, -1.0)]
        if t > self.m:
            tk = self.boundary(self.cell_index(t))
            pieces = [Piece(t, min(tk, T), tk, -1.0)]
            if T > tk:
                pieces.append(Piece(tk, T, 0.0, 1.0))
            return pieces
        pieces = []
        if t < self.kink:
            pieces.append(Piece(t, min(self.kink, T), 1.0 - self.kink, 1.0))
            lo = self.kink
        else:
            lo = t
        if self.m > lo:
            pieces.append(Piece(lo, min(self.m, T), 1.0 + self.kink, -1.0))
        if T > self.m:
            pieces.append(Piece(self.m, T, 0.0, 1.0))
        return pieces

    def critical_points(self, lo, hi):
        pts = {self.kink, self.m, self.m + self.s}
        kmax = int(math.isqrt(int(self.s / self.eps))) + 2
        for k in range(1, kmax):
            b = self.boundary(k)
            if b <= lo:
                break
            pts.add(b)
        return sorted(p for p in pts if lo < p < hi)

    def criticals_below(self, x, count: int = 4):
        out = set()
        for p in (self.kink, self.m, self.m + self.s):
            if p < x:
                out.add(p)
        if self.m < x:
            if x <= self.m + self.s:
                k0 = self.cell_index(min(x, self.m + self.s - 1e-15))
            else:
                k0 = 0
            for k in range(k0 + 1, k0 + 1 + count):
                b = self.boundary(k)
                if b < x:
                    out.add(b)
        return sorted(out)[-count - 2:]

    def accumulation_points(self):
        return (self.m,)


class RegistryLine(LineProblem):
    """User-supplied closed-form J with optional structure hints."""

    def __init__(self, horizon: float, value_fn: Callable[[float, float], float],
                 pieces_fn: Optional[Callable[[float], Sequence[Piece]]] = None,
                 criticals: Sequence[float] = (), accumulations: Sequence[float] = (),
                 eps: float = 1e-6, grid: float = 1e-4):
        self.horizon = float(horizon)
        self._value = value_fn
        self._pieces = pieces_fn
        self._criticals = tuple(sorted(criticals))
        self._acc = tuple(sorted(accumulations))
        self.eps = eps
        self.grid = grid

    def value(self, t, tau):
        return self._value(t, tau)

    def tail_pieces(self, t):
        return None if self._pieces is None else self._pieces(t)

    def critical_points(self, lo, hi):
        return [p for p in self._criticals if lo < p < hi]

    def accumulation_points(self):
        return self._acc


# ---------------------------------------------------------------------------
# tail supremum


def sup_tail(problem: LineProblem, t: float, rho: float) -> TailSup:
    """Supremum of J(t, .) over the band (t, rho].

    Closed-form per linear piece; an unattained supremum (open left end of a
    decreasing piece) is flagged.  Latest maximizer wins ties, attained
    maximizers win over unattained ones at equal value.
    """
    if not t < rho <= problem.horizon + 1e-12:
        raise ValueError(f"need t < rho <= horizon, got t={t}, rho={rho}")
    pieces = problem.tail_pieces(t)
    if pieces is None:
        return _sup_tail_grid(problem, t, rho)

    tiny = 1e-12
    best: Optional[TailSup] = None
    for p in pieces:
        lo = max(p.lo, t)
        hi = min(p.hi, rho)
        if hi <= lo + 0.0:
            continue
        if p.b >= 0:
            cand = TailSup(p.value(hi), hi, True)
        else:
            cand = TailSup(p.value(lo), lo, False)
        if best is None or cand.value > best.value + tiny:
            best = cand
        elif cand.value > best.value - tiny:
            # tie: prefer attained; then the later argmax
            if (cand.attained and not best.attained) or (
                    cand.attained == best.attained and cand.argmax > best.argmax):
                best = cand
    if best is None:
        raise ValueError(f"no tail pieces cover ({t}, {rho}]")
    return best


def _sup_tail_grid(problem: LineProblem, t: float, rho: float) -> TailSup:
    h = problem.grid
    n = max(int((rho - t) / h), 1)
    best_v, best_tau = -math.inf, rho
    for i in range(n + 1):
        tau = min(t + (i + 1) * h, rho) if i < n else rho
        v = problem.value(t, tau)
        if v >= best_v - 1e-15:
            if v > best_v + 1e-15 or tau > best_tau:
                best_v, best_tau = max(v, best_v), tau
    return TailSup(best_v, best_tau, True)


def _dominated(problem: LineProblem, t: float, rho: float) -> bool:
    """Immediate stopping strictly beats every option in (t, rho].

    Attained supremum: strict >.  Unattained supremum (open end): J(t,t)
    equal to the supremum still dominates, since no tau reaches it.
    """
    s = sup_tail(problem, t, rho)
    jt = problem.self_value(t)
    if s.attained:
        return jt > s.value + 1e-12
    return jt >= s.value - 1e-12


def _candidates(problem: LineProblem, hi: float) -> list:
    """Ascending scan points in [0, hi): grid + exact criticals (+ near-hi)."""
    h = problem.grid
    pts = set()
    n = int(hi / h)
    for i in range(n + 1):
        p = i * h
        if p < hi - 1e-15:
            pts.add(p)
    for p in problem.critical_points(0.0, hi):
        pts.add(p)
    for p in problem.criticals_below(hi):
        if 0.0 <= p < hi - 1e-15:
            pts.add(p)
    for p in problem.accumulation_points():
        if 0.0 < p < hi - 1e-15:
            pts.add(p)
    return sorted(pts)


def f_scalar(problem: LineProblem, rho: float) -> float:
    """inf{t < rho : immediate stopping strictly dominates (t, rho]} ∧ rho.

    Regime-aware bracketing: scan ascending candidates (grid + exact critical
    points) for the first dominated one, then sharpen the onset by bisection
    against the nearest non-dominated candidate.  Exact critical onsets are
    returned exactly.
    """
    if not 0 < rho <= problem.horizon + 1e-12:
        raise ValueError(f"need 0 < rho <= horizon, got {rho}")
    cands = _candidates(problem, rho)
    prev = None
    hit = None
    for t in cands:
        if _dominated(problem, t, rho):
            hit = t
            break
        prev = t
    if hit is None:
        return rho
    if prev is None:
        return hit
    # onset exactly at a critical candidate?
    probe = max(hit - problem.eps, prev)
    if probe < hit and not _dominated(problem, probe, rho):
        return hit
    lo, hi = prev, hit
    while hi - lo > problem.eps:
        mid = 0.5 * (lo + hi)
        if _dominated(problem, mid, rho):
            hi = mid
        else:
            lo = mid
    return hi


def naive_chain_scalar(problem: LineProblem, n_max: int = 20) -> LineChain:
    """Iterate f_scalar from the horizon; report the chain, whether it
    reached a fixed point, and an extrapolated limit otherwise."""
    values = [problem.horizon]
    fixed = False
    for _ in range(n_max):
        nxt = f_scalar(problem, values[-1])
        if abs(nxt - values[-1]) <= problem.eps:
            fixed = True
            break
        values.append(nxt)
    limit = values[-1] if fixed else extrapolate_limit(values)
    return LineChain(values, fixed, limit)


def extrapolate_limit(values: Sequence[float]) -> float:
    """Limit estimate for a decreasing chain.

    Models the tail as L + c/(n + d) (reciprocal differences linear in n),
    which is exact for harmonic-type chains; falls back to Aitken, then to
    the last value.
    """
    if len(values) < 3:
        return values[-1]
    x1, x2, x3 = values[-3], values[-2], values[-1]

    def f(L):
        return 1.0 / (x3 - L) - 2.0 / (x2 - L) + 1.0 / (x1 - L)

    span = max(10.0 * (x1 - x3), 1e-9)
    lo, hi = x3 - span, x3 - 1e-12
    try:
        flo, fhi = f(lo), f(hi)
        if flo == 0:
            return lo
        if flo * fhi < 0:
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if f(lo) * f(mid) <= 0:
                    hi = mid
                else:
                    lo = mid
                if hi - lo < 1e-12:
                    break
            return 0.5 * (lo + hi)
    except ZeroDivisionError:
        pass
    d2 = x3 - 2.0 * x2 + x1
    if d2 != 0:
        return x3 - (x3 - x2) ** 2 / d2
    return x3


def is_approachable_scalar(problem: LineProblem, tau: float) -> tuple:
    """(approachable?, witness): tau is approachable when no scanned t < tau
    strictly dominates the band (t, tau]; the witness is the first failing t.

    Scan points are the h-grid enriched with the registry's exact critical
    values (so onsets hidden between grid points are still caught).
    """
    if not 0 <= tau <= problem.horizon + 1e-12:
        raise ValueError(f"tau outside [0, horizon]: {tau}")
    if tau <= 0:
        return True, None
    for t in _candidates(problem, tau):
        if _dominated(problem, t, tau):
            return False, t
    return True, None


def sophisticated_scalar(problem: LineProblem, spot_checks: int = 12) -> float:
    """Largest approachable time, located from the horizon downward.

    Each failing candidate tau comes with a witness w whose domination of
    (w, tau] certifies that every point of (w, tau] fails too, so the scan
    may jump straight to w.  When witness steps stall (boundaries
    accumulating, as in the built-in problem), the scan jumps below the
    nearest registered accumulation point (or the extrapolated limit of the
    iterates); skipped bands are spot-checked non-approachable and the scan
    resumes from any violation.
    """
    eps = problem.eps
    stall_step = max(10 * eps, 5e-3 * problem.horizon)
    tau = problem.horizon
    history = []
    skipped = []
    stall = 0
    while True:
        ok, witness = is_approachable_scalar(problem, tau)
        if ok:
            break
        history.append(tau)
        nxt = witness
        if tau - nxt <= stall_step:
            stall += 1
        else:
            stall = 0
        if stall >= 3:
            below = [a for a in problem.accumulation_points() if a < nxt - eps]
            target = max(below) if below else extrapolate_limit(history)
            if target < nxt - eps:
                skipped.append((target, nxt))
                nxt = target
                stall = 0
        if nxt <= 0:
            tau = 0.0
            break
        tau = nxt

    for lo, hi in skipped:
        for i in range(1, spot_checks + 1):
            probe = lo + (hi - lo) * i / (spot_checks + 1)
            ok, _ = is_approachable_scalar(problem, probe)
            if ok:
                # certificate failed; resume the slow descent from the probe
                return _descend_from(problem, probe)
    return tau


def _descend_from(problem: LineProblem, start: float, max_steps: int = 100_000) -> float:
    tau = start
    for _ in range(max_steps):
        if tau <= 0:
            return 0.0
        ok, witness = is_approachable_scalar(problem, tau)
        if ok:
            return tau
        tau = witness
    raise RuntimeError("witness descent did not terminate")
