"""Hyperbolic-discounting numerics for the |B| threshold problem.

The objective seen from x is E[|B_tau| / (1 + beta*tau)] with B started at x.
For two-sided exit at level a, the expected hyperbolically discounted payoff

    eta(x, a) = a * E[1 / (1 + beta * tau_a^x)]

is computed through the identity 1/(1+u) = int_0^inf e^{-s} e^{-s u} ds and
the classical exit-time transform E_x[exp(-lambda tau_a)] =
cosh(x sqrt(2 lambda)) / cosh(a sqrt(2 lambda)), leaving one smooth 1-D
integral with an e^{-s} envelope (Gauss-Laguerre nodes; a truncated
Gauss-Legendre fallback is kept for cross-checks).

The critical threshold a* is the boundary between "waiting for |B| to reach
a beats stopping everywhere inside" (min_x eta(x,a) - x >= 0) and "somewhere
inside stopping wins" (min < 0); the equilibrium stop is the first hitting
time of a*.  A chunked Euler Monte Carlo with per-step Brownian-bridge
boundary-crossing correction provides the independent oracle; every
stochastic output carries a standard error.

No numeric value of a* appears in the source material; the regression
constant used in tests is implementer-derived from these two routes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np


class HyperbolicError(ValueError):
    pass


@dataclass(frozen=True)
class HyperbolicModel:
    """Impatience parameter plus quadrature / Monte Carlo settings."""

    beta: float = 1.0
    quad_nodes: int = 96
    quad_truncation: float = 36.0    # e^{-s} tail below 1e-15
    paths: int = 100_000
    dt: float = 1e-4
    seed: int = 20240
    chunk_size: int = 16_384

    def __post_init__(self):
        if self.beta <= 0:
            raise HyperbolicError("beta must be positive")
        if math.exp(-self.quad_truncation) > 1e-12:
            raise HyperbolicError("quadrature truncation leaves a tail above 1e-12")

    def scale(self) -> float:
        """The natural length scale 1/sqrt(beta)."""
        return self.beta ** -0.5


@dataclass(frozen=True)
class ThresholdPolicy:
    """Stop when |B| first hits b."""

    b: float

    def __post_init__(self):
        if self.b <= 0:
            raise HyperbolicError("threshold must be positive")


@dataclass(frozen=True)
class McResult:
    mean_discount: float     # estimate of E[1/(1+beta tau)]
    se: float
    n: int
    mean_tau: float
    samples: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ClassDReport:
    estimate: float          # MC estimate of E[Y_{tau_b}^2]
    se: float
    bound: float             # 1/beta
    ok: bool


@lru_cache(maxsize=None)
def _laguerre_nodes(n: int):
    nodes, weights = np.polynomial.laguerre.laggauss(n)
    return nodes, weights


@lru_cache(maxsize=None)
def _sqrt_clock_nodes(n: int, upper: float):
    """Gauss-Legendre nodes for int_0^upper e^{-u^2} 2u f(u^2) du."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    u = (nodes + 1.0) * (upper / 2.0)
    w = weights * (upper / 2.0) * np.exp(-u * u) * 2.0 * u
    return u, w


def exit_laplace(x, a: float, lam: float):
    """E_x[exp(-lam * tau_a)] for two-sided exit of Brownian motion at +-a.

    cosh(x sqrt(2 lam)) / cosh(a sqrt(2 lam)), evaluated with shifted
    exponentials so large arguments cannot overflow.  Accepts scalar or
    ndarray x.
    """
    x = np.asarray(x, dtype=float)
    if a <= 0:
        raise HyperbolicError("exit level a must be positive")
    if np.any(np.abs(x) > a * (1 + 1e-12)):
        raise HyperbolicError("start point outside [-a, a]")
    if lam < 0:
        raise HyperbolicError("lambda must be nonnegative")
    u = np.abs(x) * math.sqrt(2.0 * lam)
    v = a * math.sqrt(2.0 * lam)
    out = np.exp(u - v) * (1.0 + np.exp(-2.0 * u)) / (1.0 + math.exp(-2.0 * v))
    return out if out.shape else float(out)


def eta(x, a: float, model: HyperbolicModel):
    """a * E[1 / (1 + beta tau_a^x)] by quadrature, accurate to ~1e-12.

    Uses 1/(1+beta tau) = int_0^inf e^{-s} E[e^{-s beta tau}] ds and the
    clock change s = u^2: the integrand becomes an entire function of u with
    a Gaussian envelope (the exit transform decays like exp(-c sqrt(s)),
    which a plain Laguerre rule resolves poorly for large (a-|x|) sqrt(beta)).
    Truncation at u = sqrt(quad_truncation) discards a tail below 1e-15.
    Accepts scalar or ndarray x.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.abs(x_arr) > a * (1 + 1e-12)):
        raise HyperbolicError("start point outside [-a, a]")
    nodes, weights = _sqrt_clock_nodes(2 * model.quad_nodes,
                                       math.sqrt(model.quad_truncation))
    c = math.sqrt(2.0 * model.beta)
    u = np.abs(x_arr)[..., None] * (c * nodes)
    v = a * (c * nodes)
    ratio = np.exp(u - v) * (1.0 + np.exp(-2.0 * u)) / (1.0 + np.exp(-2.0 * v))
    out = a * (ratio * weights).sum(axis=-1)
    return out if out.shape else float(out)


def eta_laguerre(x, a: float, model: HyperbolicModel):
    """Cross-check route: Gauss-Laguerre directly on the e^{-s} weight.

    Accurate when (a-|x|) sqrt(beta) is moderate; kept as an independent
    check of the primary rule.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.abs(x_arr) > a * (1 + 1e-12)):
        raise HyperbolicError("start point outside [-a, a]")
    nodes, weights = _laguerre_nodes(model.quad_nodes)
    u = np.abs(x_arr)[..., None] * np.sqrt(2.0 * model.beta * nodes)
    v = a * np.sqrt(2.0 * model.beta * nodes)
    ratio = np.exp(u - v) * (1.0 + np.exp(-2.0 * u)) / (1.0 + np.exp(-2.0 * v))
    out = a * (ratio * weights).sum(axis=-1)
    return out if out.shape else float(out)


# ---------------------------------------------------------------------------
# Monte Carlo first-passage oracle


def mc_exit_time(x: float, a: float, model: HyperbolicModel,
                 return_samples: bool = False) -> McResult:
    """Euler simulation of tau_a^x with per-step Brownian-bridge correction.

    Naive Euler only notices crossings at step ends and overestimates exit
    times by O(sqrt(dt)); each step therefore also exits with the bridge
    probability exp(-2(a-x0)(a-x1)/dt) + exp(-2(a+x0)(a+x1)/dt).  Paths run
    in fixed-size chunks with streams derived from (seed, chunk index), so
    results are reproducible and order-independent.
    """
    if abs(x) > a:
        raise HyperbolicError("start point outside [-a, a]")
    if model.paths < 100:
        raise HyperbolicError("need at least 100 paths")
    if model.dt <= 0:
        raise HyperbolicError("dt must be positive")
    beta = model.beta
    if abs(x) == a:
        zeros = np.zeros(model.paths) if return_samples else None
        return McResult(1.0, 0.0, model.paths, 0.0, zeros)

    n_left = model.paths
    chunk_idx = 0
    sum_d = 0.0
    sum_d2 = 0.0
    sum_tau = 0.0
    samples = [] if return_samples else None
    max_steps = int(math.ceil(60.0 * max(a * a, 1e-12) / model.dt))

    while n_left > 0:
        n = min(model.chunk_size, n_left)
        taus = _simulate_chunk(x, a, model, n, chunk_idx, max_steps)
        disc = 1.0 / (1.0 + beta * taus)
        sum_d += float(disc.sum())
        sum_d2 += float((disc * disc).sum())
        sum_tau += float(taus.sum())
        if samples is not None:
            samples.append(taus)
        n_left -= n
        chunk_idx += 1

    n = model.paths
    mean = sum_d / n
    var = max(sum_d2 / n - mean * mean, 0.0)
    se = math.sqrt(var / n)
    arr = np.concatenate(samples) if samples is not None else None
    return McResult(mean, se, n, sum_tau / n, arr)


def _simulate_chunk(x: float, a: float, model: HyperbolicModel, n: int,
                    chunk_idx: int, max_steps: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((model.seed, chunk_idx))))
    dt = model.dt
    sqdt = math.sqrt(dt)
    pos = np.full(n, float(x))
    alive = np.arange(n)
    taus = np.empty(n)
    t = 0.0
    for _ in range(max_steps):
        if alive.size == 0:
            return taus
        z = rng.standard_normal(alive.size)
        nxt = pos + sqdt * z
        hit_end = np.abs(nxt) >= a
        # within-step crossing time for endpoint hits (linear interpolation)
        frac = np.ones(alive.size)
        if hit_end.any():
            tgt = np.where(nxt >= a, a, -a)
            denom = nxt - pos
            safe = np.abs(denom) > 1e-300
            frac = np.where(safe, (tgt - pos) / np.where(safe, denom, 1.0), 1.0)
            frac = np.clip(frac, 0.0, 1.0)
        # bridge exit probability for non-hitting steps
        up = np.exp(-2.0 * (a - pos) * (a - nxt) / dt)
        dn = np.exp(-2.0 * (a + pos) * (a + nxt) / dt)
        p_cross = np.clip(up + dn, 0.0, 1.0)
        bridge = (~hit_end) & (rng.random(alive.size) < p_cross)
        exited = hit_end | bridge
        if exited.any():
            idx = alive[exited]
            taus[idx] = t + np.where(hit_end[exited], frac[exited], 1.0) * dt
            keep = ~exited
            alive = alive[keep]
            pos = nxt[keep]
        else:
            pos = nxt
        t += dt
    raise HyperbolicError(
        f"{alive.size} paths failed to exit within {max_steps} steps; "
        "increase the step budget or check the settings")


# ---------------------------------------------------------------------------
# threshold calibration


def _phi(a: float, model: HyperbolicModel, grid_n: int = 256) -> float:
    """min over x in (0, a) of eta(x, a) - x, grid then convex refinement."""
    xs = a * np.arange(1, grid_n + 1) / (grid_n + 1)
    h = eta(xs, a, model) - xs
    j = int(np.argmin(h))
    lo = xs[j - 1] if j > 0 else xs[0] * 0.5
    hi = xs[j + 1] if j < grid_n - 1 else 0.5 * (xs[-1] + a)

    def hval(x):
        return float(eta(x, a, model)) - x

    # ternary search: eta is strictly convex in x, so h is too
    flo, fhi = lo, hi
    for _ in range(80):
        m1 = flo + (fhi - flo) / 3.0
        m2 = fhi - (fhi - flo) / 3.0
        if hval(m1) <= hval(m2):
            fhi = m2
        else:
            flo = m1
    xmin = 0.5 * (flo + fhi)
    return min(float(h[j]), hval(xmin))


def a_star(model: HyperbolicModel, tol: float = 1e-6) -> float:
    """Critical threshold: boundary between min_x(eta - x) >= 0 and < 0.

    Bisection over (0, 1/sqrt(beta) * (1 + 10 tol)); raises when no sign
    bracket exists there (the interval claim would be violated).
    """
    if tol <= 0:
        raise HyperbolicError("tol must be positive")
    scale = model.scale()
    lo = 0.05 * scale
    hi = scale * (1.0 + 10.0 * tol)
    neg_tol = -1e-12
    while _phi(lo, model) < neg_tol:
        lo *= 0.5
        if lo < 1e-9 * scale:
            raise HyperbolicError("no bracket: min_x(eta - x) negative down to 0")
    if _phi(hi, model) >= neg_tol:
        raise HyperbolicError(
            f"no bracket for a* in (0, {hi:.6g}); model violates the interval claim")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _phi(mid, model) >= neg_tol:
            lo = mid
        else:
            hi = mid
    out = 0.5 * (lo + hi)
    if not 0.0 < out < scale:
        raise HyperbolicError(f"a* = {out} escaped (0, beta^-1/2)")
    return out


def x_star(a: float, model: HyperbolicModel, tol: float = 1e-9) -> float:
    """Unique root of eta(x, a) = x in (0, a*) for a above the critical level."""
    astar = _a_star_cached(model)
    if a <= astar:
        raise HyperbolicError(f"x_star needs a > a* = {astar:.6g}, got {a}")

    def h(x):
        return float(eta(x, a, model)) - x

    lo = 1e-9 * astar
    hi = astar
    if h(lo) <= 0 or h(hi) >= 0:
        raise HyperbolicError("sign pattern violated at the bracket ends")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


_A_STAR_CACHE = {}


def _a_star_cached(model: HyperbolicModel, tol: float = 1e-6) -> float:
    key = (model.beta, model.quad_nodes, tol)
    if key not in _A_STAR_CACHE:
        _A_STAR_CACHE[key] = a_star(model, tol)
    return _A_STAR_CACHE[key]


def equilibrium_threshold(model: HyperbolicModel, tol: float = 1e-6,
                          check_points: int = 100) -> ThresholdPolicy:
    """The equilibrium stop: first hitting of |B| at a*.

    Spot-checks approachability: eta(x, a*) >= |x| strictly inside the band.
    """
    astar = a_star(model, tol)
    xs = astar * np.arange(1, check_points + 1) / (check_points + 1)
    vals = eta(xs, astar, model)
    if np.any(vals < xs - 1e-10):
        worst = float(np.min(vals - xs))
        raise HyperbolicError(f"approachability spot-check failed by {worst}")
    return ThresholdPolicy(astar)


def class_d_bound_check(model: HyperbolicModel, policy: ThresholdPolicy) -> ClassDReport:
    """MC check of E[Y_{tau_b}^2] <= 1/beta for Y_t = |B_t|/(1 + beta t).

    At the exit time |B| = b, so Y^2 = (b/(1+beta tau))^2.
    """
    res = mc_exit_time(0.0, policy.b, model, return_samples=True)
    y2 = (policy.b / (1.0 + model.beta * res.samples)) ** 2
    est = float(y2.mean())
    se = float(y2.std(ddof=0) / math.sqrt(y2.size))
    bound = 1.0 / model.beta
    return ClassDReport(est, se, bound, est <= bound + 3.0 * se)


def with_settings(model: HyperbolicModel, **kw) -> HyperbolicModel:
    return replace(model, **kw)
