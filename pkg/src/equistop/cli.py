"""Batch CLI: solve models, reproduce the built-in regressions, fuzz the
engine invariants, and run the continuous-time numerics.

Exit codes for `solve`: 0 success, 2 model error, 3 enumeration cap overflow.
All outputs are plain CSV / key=value text and byte-identical for identical
(input, seed, flags).
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from fractions import Fraction

from . import cases
from .engine import bis, delimiting_chain, is_approachable, naive_chain, sophisticated
from .fuzz import generate_instance, run_properties
from .hyperbolic import (
    PINNED_A_STAR_BETA1,
    HyperbolicModel,
    ThresholdPolicy,
    a_star,
    class_d_bound_check,
    eta,
    mc_exit_time,
    x_star,
)
from .line import is_approachable_scalar, naive_chain_scalar, sophisticated_scalar
from .modelfmt import parse_model, stopping_time_from_csv, stopping_time_to_csv
from .numeric import Principle
from .preferences import sup_band
from .tree import EnumerationOverflowError, ModelError, StoppingTime, total_count

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_MODEL = 2
EXIT_OVERFLOW = 3


def _write(out_dir: str, name: str, text: str):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
        fh.write(text)


def _fmt(value) -> str:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _describe_stop(tau: StoppingTime) -> str:
    times = tau.stop_times()
    if len(times) == 1:
        return _fmt(times[0])
    return "mixed(" + ",".join(_fmt(t) for t in times) + ")"


# ---------------------------------------------------------------------------
# solve


def cmd_solve(args) -> int:
    try:
        with open(args.model, encoding="utf-8") as fh:
            spec = parse_model(fh.read())
        tree, flow, principle = spec.build()
        if args.principle:
            principle = Principle(args.principle)
        count = total_count(tree)
        if count > args.cap:
            raise EnumerationOverflowError(count, args.cap)

        fam = bis(tree, flow, principle)
        chain = naive_chain(tree, flow, max_iter=args.max_iter, principle=principle)
        soph = sophisticated(tree, flow, max_iter=args.max_iter, principle=principle)

        _write(args.out, "bis.csv", stopping_time_to_csv(fam.root()))
        _write(args.out, "sophisticated.csv", stopping_time_to_csv(soph))
        chain_rows = ["n,node_id,time,stopped"]
        for n, tau in enumerate(chain.chain):
            for v in range(tree.n):
                chain_rows.append(f"{n},{v},{_fmt(tree.times[v])},{int(v in tau.stops)}")
        _write(args.out, "naive_chain.csv", "\n".join(chain_rows) + "\n")

        report = [
            f"model = {args.model}",
            f"principle = {principle.value}",
            f"stopping_time_count = {count}",
            f"tau_b_root = {_describe_stop(fam.root())}",
            f"tau_b_root_value = {_fmt(flow.evaluate(fam.root(), 0))}",
            f"naive_chain_len = {len(chain.chain)}",
            f"naive_chain_status = {chain.status}",
            f"tau_star = {_describe_stop(soph)}",
            f"tau_star_value = {_fmt(flow.evaluate(soph, 0))}",
        ]
        _write(args.out, "report.txt", "\n".join(report) + "\n")
        print("\n".join(report))
        return EXIT_OK
    except EnumerationOverflowError as exc:
        print(f"overflow: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    except (ModelError, OSError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL


# ---------------------------------------------------------------------------
# check


def cmd_check(args) -> int:
    try:
        with open(args.model, encoding="utf-8") as fh:
            spec = parse_model(fh.read())
        tree, flow, principle = spec.build()
        if args.principle:
            principle = Principle(args.principle)
        if args.stops_csv:
            with open(args.stops_csv, encoding="utf-8") as fh:
                tau = stopping_time_from_csv(tree, fh.read())
        elif args.stops:
            tau = StoppingTime(tree, {int(s) for s in args.stops.split(",")})
        else:
            print("check needs --stops or --stops-csv", file=sys.stderr)
            return EXIT_MODEL
        ok, witness = is_approachable(tree, flow, tau, principle)
        if ok:
            print("approachable = yes")
            return EXIT_OK
        band = sup_band(flow, witness, tau, principle=principle)
        print("approachable = no")
        print(f"witness_node = {witness}")
        print(f"witness_time = {_fmt(tree.times[witness])}")
        print(f"witness_immediate = {_fmt(flow.immediate(witness))}")
        print(f"witness_band_sup = {_fmt(band.value)}")
        return EXIT_FAIL
    except (ModelError, OSError, ValueError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL


# ---------------------------------------------------------------------------
# counterexample (continuous-time iteration failure)


def cmd_counterexample(args) -> int:
    problem = cases.harmonic_line_problem()
    chain = naive_chain_scalar(problem, n_max=args.n)
    rows = ["n,rho_n,closed_form,abs_err"]
    for n, value in enumerate(chain.values):
        if n == 0:
            continue
        closed = 1.0 + 1.0 / n
        rows.append(f"{n},{value:.10f},{closed:.10f},{abs(value - closed):.3e}")
    _write(args.out, "chain.csv", "\n".join(rows) + "\n")

    limit_ok, limit_wit = is_approachable_scalar(problem, chain.limit)
    soph = sophisticated_scalar(problem)
    wit_rows = ["tau,approachable,witness"]
    for tau in (chain.limit, soph, problem.horizon):
        ok, wit = is_approachable_scalar(problem, tau)
        wit_rows.append(f"{tau:.10f},{int(ok)},{'' if wit is None else f'{wit:.10f}'}")
    _write(args.out, "witness.csv", "\n".join(wit_rows) + "\n")

    report = [
        f"chain_limit = {chain.limit:.10f}",
        f"chain_fixed_point = {int(chain.fixed_point)}",
        f"limit_approachable = {int(limit_ok)}",
        f"limit_witness = {'' if limit_wit is None else f'{limit_wit:.10f}'}",
        f"sophisticated = {soph:.10f}",
        "note = sophisticated value is implementer-derived (grid oracle), not source ground truth",
    ]
    _write(args.out, "report.txt", "\n".join(report) + "\n")
    print("\n".join(report))
    return EXIT_OK


# ---------------------------------------------------------------------------
# hyperbolic


def cmd_hyperbolic(args) -> int:
    model = HyperbolicModel(beta=args.beta, paths=args.paths, dt=args.dt, seed=args.seed)
    astar = a_star(model, tol=args.tol)
    rows = ["x,a,eta,mc_mean,mc_se"]
    for a_mult in (0.5, 1.0, 1.5):
        a = astar * a_mult
        for x_mult in (0.0, 0.5):
            x = a * x_mult
            exact = float(eta(x, a, model))
            mc = mc_exit_time(x, a, model)
            rows.append(f"{x:.8f},{a:.8f},{exact:.10f},{a * mc.mean_discount:.10f},{a * mc.se:.3e}")
    _write(args.out, "eta_grid.csv", "\n".join(rows) + "\n")

    report = [
        f"beta = {_fmt(args.beta)}",
        f"a_star = {astar:.8f}",
        f"a_star_scaled = {astar * math.sqrt(args.beta):.8f}",
    ]
    xstar_points = args.xstar_at or [2.0 * astar]
    for a in xstar_points:
        if a > astar:
            report.append(f"x_star({a:.8f}) = {x_star(a, model):.8f}")
        else:
            report.append(f"x_star({a:.8f}) = not defined (a <= a_star)")
    cls = class_d_bound_check(model, ThresholdPolicy(astar))
    report.append(f"class_d_estimate = {cls.estimate:.8f}")
    report.append(f"class_d_se = {cls.se:.3e}")
    report.append(f"class_d_bound = {cls.bound:.8f}")
    report.append(f"class_d_ok = {int(cls.ok)}")
    _write(args.out, "report.txt", "\n".join(report) + "\n")
    print("\n".join(report))
    return EXIT_OK


# ---------------------------------------------------------------------------
# fuzz


def _fuzz_one(payload):
    seed, principle_value, invert = payload
    instance = generate_instance(seed)
    results = run_properties(instance, Principle(principle_value))
    if invert:
        results = [(name, not ok if name == "chain_decreasing" else ok, d)
                   for name, ok, d in results]
    failures = [(name, detail) for name, ok, detail in results if not ok]
    return seed, failures, instance.text


def cmd_fuzz(args) -> int:
    principle = Principle(args.principle or "later")
    payloads = [(args.seed * 1_000_003 + i, principle.value, args.self_check_invert)
                for i in range(args.n)]
    if args.workers > 1:
        import multiprocessing

        with multiprocessing.Pool(args.workers) as pool:
            results = pool.map(_fuzz_one, payloads)
    else:
        results = [_fuzz_one(p) for p in payloads]

    bad = 0
    for i, (seed, failures, text) in enumerate(results):
        if failures:
            bad += 1
            _write(args.out, f"fuzz_fail_{i:04d}.model", text)
            names = ",".join(name for name, _ in failures)
            print(f"FAIL instance {i:04d} seed {seed}: {names}")
        elif (i + 1) % 50 == 0:
            print(f"ok through instance {i:04d}")
    print(f"fuzz: {args.n - bad}/{args.n} instances clean (seed {args.seed})")
    return EXIT_OK if bad == 0 else EXIT_FAIL


# ---------------------------------------------------------------------------
# examples (built-in regression suite)


def _item_bis_gap(principle: Principle):
    tree, flow, _ = cases.bis_gap_case()
    fam = bis(tree, flow, principle)
    got = tuple(fam.at(v).stop_times()[0] for v in range(tree.n))
    want = (Fraction(0), Fraction(4), Fraction(4), Fraction(4), Fraction(4), Fraction(5))
    if got != want:
        return False, f"bis family {tuple(map(str, got))}"
    chain = naive_chain(tree, flow, principle=principle)
    if [c.stop_times()[0] for c in chain.chain] != [Fraction(5), Fraction(4), Fraction(4)]:
        return False, "chain values differ"
    soph = sophisticated(tree, flow, principle=principle)
    if soph.stop_times() != (Fraction(4),):
        return False, f"equilibrium at {soph.stop_times()}"
    delim = delimiting_chain(tree, flow, principle=principle)
    if [d.stop_times()[0] for d in delim] != [Fraction(5), Fraction(4)]:
        return False, "delimiting chain differs"
    return True, "bis (5,4,4,4,4,0) by time 5..0; equilibrium 4"


def _item_horizon(principle: Principle):
    from .engine import truncate_horizon

    tree, flow, _ = cases.horizon_sensitivity_case()
    fam5 = bis(tree, flow, principle)
    tree4, flow4, _ = truncate_horizon(tree, flow, 4)
    fam4 = bis(tree4, flow4, principle)
    soph5 = sophisticated(tree, flow, principle=principle)
    soph4 = sophisticated(tree4, flow4, principle=principle)
    got = (fam5.root().stop_times(), fam4.root().stop_times(),
           soph5.stop_times(), soph4.stop_times())
    want = ((Fraction(1),), (Fraction(2),), (Fraction(5),), (Fraction(2),))
    if got != want:
        return False, f"got {got}"
    return True, "bis 1 -> 2 under truncation; equilibrium 5 -> 2"


def _item_counterexample(principle: Principle):
    problem = cases.harmonic_line_problem()
    chain = naive_chain_scalar(problem, n_max=20)
    for n, value in enumerate(chain.values):
        if n and abs(value - (1.0 + 1.0 / n)) > 1e-5:
            return False, f"rho_{n} = {value}"
    if abs(chain.limit - 1.0) > 1e-4:
        return False, f"limit {chain.limit}"
    ok, wit = is_approachable_scalar(problem, 1.0)
    if ok or wit is None or abs(wit - 0.5) > 1e-3:
        return False, f"limit approachability ok={ok} witness={wit}"
    soph = sophisticated_scalar(problem)
    if abs(soph - 0.5) > 1e-4:
        return False, f"sophisticated {soph}"
    return True, "chain 1+1/n, limit 1 not approachable, equilibrium 0.5"


def _item_hyperbolic(principle: Principle):
    for a in (0.1, 0.5, 1.0, 2.0):
        model = HyperbolicModel(beta=1.0)
        if abs(float(eta(a, a, model)) - a) > 1e-8:
            return False, f"eta({a},{a}) != {a}"
    scaled = []
    for beta in (0.5, 1.0, 2.0, 4.0):
        model = HyperbolicModel(beta=beta)
        astar = a_star(model, tol=1e-6)
        if not 0 < astar < beta ** -0.5:
            return False, f"a*({beta}) = {astar} outside (0, beta^-1/2)"
        scaled.append(astar * math.sqrt(beta))
    if max(scaled) - min(scaled) > 1e-3:
        return False, f"scaling spread {max(scaled) - min(scaled)}"
    if abs(scaled[1] - PINNED_A_STAR_BETA1) > 5e-3:
        return False, f"a*(1) = {scaled[1]} vs pinned {PINNED_A_STAR_BETA1}"
    model = HyperbolicModel(beta=1.0, paths=20_000, dt=1e-3, seed=7)
    cls = class_d_bound_check(model, ThresholdPolicy(0.5))
    if not cls.ok:
        return False, f"class-D bound violated: {cls.estimate} > {cls.bound}"
    return True, f"a*(1) = {scaled[1]:.6f}; scaling spread {max(scaled) - min(scaled):.1e}"


def _item_agreement(principle: Principle):
    for i in range(25):
        instance = generate_instance(9_000 + i)
        results = run_properties(instance, principle)
        failures = [name for name, ok, _ in results if not ok]
        if failures:
            return False, f"instance seed {instance.seed}: {failures}"
    return True, "25 instances, all engine invariants hold"


_EXAMPLE_ITEMS = (
    ("bis-gap", _item_bis_gap, True),
    ("horizon-monotonicity", _item_horizon, True),
    ("counterexample", _item_counterexample, True),
    ("hyperbolic", _item_hyperbolic, False),
    ("fixed-point-agreement", _item_agreement, True),
)


def cmd_examples(args) -> int:
    principle = Principle(args.principle or "later")
    failed = False
    for name, fn, needs_later in _EXAMPLE_ITEMS:
        if args.only and name != args.only:
            continue
        if needs_later and principle is not Principle.LATER:
            print(f"SKIP {name} (needs the stop-later principle)")
            continue
        ok, detail = fn(principle)
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed = failed or not ok
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="equistop", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="solve a model file")
    p.add_argument("model")
    p.add_argument("--out", default="equistop_out")
    p.add_argument("--principle", choices=["later", "earlier"])
    p.add_argument("--cap", type=int, default=10**6)
    p.add_argument("--max-iter", type=int, default=1000)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("check", help="approachability of a user-supplied stop set")
    p.add_argument("--model", required=True)
    p.add_argument("--stops", help="comma-separated node ids")
    p.add_argument("--stops-csv", help="stopping-time CSV (node_id,time,stopped)")
    p.add_argument("--principle", choices=["later", "earlier"])
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("counterexample", help="continuous-time iteration-failure tables")
    p.add_argument("--out", default="equistop_out")
    p.add_argument("--n", type=int, default=20)
    p.set_defaults(fn=cmd_counterexample)

    p = sub.add_parser("hyperbolic", help="threshold numerics for |B|/(1+beta t)")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--paths", type=int, default=20_000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=20240)
    p.add_argument("--xstar-at", type=float, action="append")
    p.add_argument("--out", default="equistop_out")
    p.set_defaults(fn=cmd_hyperbolic)

    p = sub.add_parser("fuzz", help="random-instance property suite")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="equistop_out")
    p.add_argument("--principle", choices=["later", "earlier"])
    p.add_argument("--self-check-invert", action="store_true",
                   help="invert one property to exercise the failure path")
    p.set_defaults(fn=cmd_fuzz)

    p = sub.add_parser("examples", help="built-in regression suite")
    p.add_argument("--only")
    p.add_argument("--principle", choices=["later", "earlier"])
    p.set_defaults(fn=cmd_examples)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
