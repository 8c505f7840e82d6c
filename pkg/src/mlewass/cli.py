"""Command-line front end: bounds, distance estimates, experiment runs, self-test."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import bounds, harness, linalg, ot, specialfn
from .errors import ContractError, DomainError, ExperimentError
from .mle_families import (
    ExpCanonical,
    ExpNonCanonical,
    InvGammaRateUnknown,
    InvGammaShapeUnknown,
    MvnDiagonal,
    NormalCanonical,
    simulate_W,
)
from .rng_dist import derive_stream

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

BOUND_FAMILIES = (
    "exp-canonical",
    "exp-noncanonical",
    "normal-canonical",
    "mvn-diag",
    "mvn-general",
    "gamma",
    "beta",
)
SIM_FAMILIES = (
    "exp-canonical",
    "exp-noncanonical",
    "normal-canonical",
    "mvn-diag",
    "invgamma-rate",
    "invgamma-shape",
)
TARGETS = ("table1", "table2", "table3", "figure1", "rc4-check")
TABLE_N = (10, 100, 1000, 10000)


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


def render_rows(header, rows, style):
    if style == "csv":
        lines = [",".join(header)] + [",".join(repr(float(c)) if isinstance(c, float) else str(c) for c in r) for r in rows]
        return "\n".join(lines)
    cells = [list(header)] + [[fmt(c) if not isinstance(c, str) else c for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells)


def _emit(text, out):
    out.write(text.rstrip("\n") + "\n")


# ---------------------------------------------------------------------------
# bound


def _wrap(metric, order, value, n, family, label="bound"):
    return bounds.BoundBreakdown(metric, order, [(label, float(value))], n, family)


def _sim_hooks(name, args):
    from . import hooks

    if name == "exp-canonical":
        return hooks.exp_canonical_hooks(ExpCanonical(args.theta)), [args.theta]
    if name == "exp-noncanonical":
        return hooks.exp_noncanonical_hooks(ExpNonCanonical(args.theta)), [args.theta]
    if name == "normal-canonical":
        return hooks.normal_canonical_hooks(NormalCanonical(args.eta1, args.eta2)), [args.eta1, args.eta2]
    if name == "mvn-diag":
        fam = MvnDiagonal.unit(args.p)
        return hooks.mvn_diagonal_hooks(fam), list(fam.theta0)
    raise ContractError(f"no Monte-Carlo hooks for family {name}")


def compute_bound(args) -> bounds.BoundBreakdown:
    fam, n, metric = args.family, args.n, args.metric
    if args.mc_budget:
        hk, th = _sim_hooks(fam, args)
        stream = derive_stream(args.seed, 0)
        if metric == "w1":
            return bounds.bound_general_w1(hk, th, n, args.mc_budget, stream)
        if metric in ("w2", "wp"):
            order = 2.0 if metric == "w2" else args.order
            return bounds.bound_general_wp(hk, th, n, order, args.cp, args.mc_budget, stream)
        raise ContractError(f"metric {metric} has no Monte-Carlo assembler")

    if fam in ("gamma", "beta"):
        if args.alpha is None or args.beta is None or args.mse is None:
            raise ContractError("gamma/beta bounds need --alpha, --beta and --mse")
        make = bounds.gamma_implicit_inputs if fam == "gamma" else bounds.beta_implicit_inputs
        if args.eps is None:
            _, b = bounds.optimize_epsilon(
                lambda e: make(args.alpha, args.beta, e, args.mse), n, 2, 0.999 * min(args.alpha, args.beta)
            )
        else:
            b = bounds.bound_implicit_bw(make(args.alpha, args.beta, args.eps, args.mse), n, 2)
        b.family = fam
        if metric == "kolmogorov":
            return _wrap(bounds.KOLMOGOROV, 1, bounds.kolmogorov_from_bw(b.total), n, fam)
        if metric != "bw":
            raise ContractError("gamma/beta bounds are in the bounded-Wasserstein metric (--metric bw)")
        return b

    if fam == "exp-canonical":
        if metric == "w2":
            b = bounds.bound_exp_canonical_w2(n)
        else:
            b = bounds.bound_exp_canonical_w1(n)
        d = 1
    elif fam == "exp-noncanonical":
        if args.direct_stein:
            return _wrap(bounds.W1, 1, bounds.bound_exp_direct_stein(n), n, fam)
        b = bounds.bound_exp_noncanonical_w1(n)
        d = 1
    elif fam == "normal-canonical":
        b = bounds.bound_normal_canonical_w1(args.eta1, args.eta2, n)
        d = 2
    elif fam == "mvn-diag":
        b = _wrap(bounds.W2, 2, bounds.bound_mvn_diag_w2(args.p, n), n, fam)
        d = 2 * args.p
    elif fam == "mvn-general":
        if args.sigma_star_sq is None or args.root_info_max is None:
            raise ContractError("mvn-general needs --sigma-star-sq and --root-info-max")
        b = bounds.bound_mvn_general_w1(args.p, n, args.sigma_star_sq, args.root_info_max)
        d = args.p + args.p * (args.p + 1) // 2
    else:  # pragma: no cover - argparse restricts choices
        raise ContractError(fam)

    if metric == "kolmogorov":
        conv = bounds.kolmogorov_from_w1(b.total) if d == 1 else bounds.kolmogorov_from_w1_multi(b.total, d)
        return _wrap(bounds.KOLMOGOROV, 1, conv, n, fam)
    if metric == "w2" and b.metric != bounds.W2:
        raise ContractError(f"no closed-form W2 bound for {fam}")
    if metric not in ("w1", "w2"):
        raise ContractError(f"metric {metric} is not available for {fam} in closed form")
    return b


def cmd_bound(args, out):
    b = compute_bound(args)
    if args.format == "json":
        _emit(json.dumps(b.as_dict(), indent=2), out)
    else:
        rows = [(k, v) for k, v in b.terms] + [("total", b.total)]
        _emit(render_rows(("term", "value"), rows, args.format), out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate


def _family(args):
    name = args.family
    if name == "exp-canonical":
        return ExpCanonical(args.theta)
    if name == "exp-noncanonical":
        return ExpNonCanonical(args.theta)
    if name == "normal-canonical":
        return NormalCanonical(args.eta1, args.eta2)
    if name == "mvn-diag":
        return MvnDiagonal.unit(args.p)
    if name == "invgamma-rate":
        return InvGammaRateUnknown(args.alpha, args.beta)
    if name == "invgamma-shape":
        return InvGammaShapeUnknown(args.alpha, args.beta)
    raise ContractError(f"unknown family {name}")


def _transport(X, Y, order, solver, epsilon, cap):
    if solver == "brute":
        return ot.brute_force_wp(X, Y, order)
    if solver == "entropic":
        return ot.w_p_entropic(X, Y, order, epsilon=epsilon)
    if X.shape[1] == 1 and solver == "auto":
        return ot.w_p_1d(X[:, 0], Y[:, 0], order)
    if solver == "exact" or X.shape[0] <= cap:
        return ot.w_p_exact(X, Y, order, cap=max(cap, X.shape[0]) if solver == "exact" else cap)
    return ot.w_p_entropic(X, Y, order, epsilon=epsilon)


def cmd_estimate(args, out):
    if args.x or args.y:
        if not (args.x and args.y):
            raise ContractError("--x and --y must be given together")
        X = ot.load_cloud_csv(args.x)
        Y = ot.load_cloud_csv(args.y)
        source = {"x": args.x, "y": args.y}
    else:
        if args.family is None or args.n is None or args.N is None:
            raise ContractError("give --x/--y files or --family with --n and --N")
        fam = _family(args)
        stream = derive_stream(args.seed, 0)
        X = simulate_W(fam, args.n, args.N, stream).rows
        Y = stream.generator.standard_normal(X.shape)
        source = {"family": fam.describe(), "n": args.n, "N": args.N, "seed": args.seed}
    res = _transport(X, Y, args.order, args.solver, args.epsilon, args.exact_cap)
    record = {
        "wp": res.wp_value,
        "p": res.p,
        "solver": res.solver,
        "gap": res.gap,
        "converged": res.converged,
        "N": int(X.shape[0]),
        "d": int(X.shape[1]),
        "source": source,
    }
    if args.format == "json":
        _emit(json.dumps(record, indent=2, sort_keys=True), out)
    else:
        rows = [("wp", res.wp_value), ("p", res.p), ("solver", res.solver), ("gap", res.gap), ("N", int(X.shape[0]))]
        _emit(render_rows(("field", "value"), rows, args.format), out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# reproduce


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def run_target(target, scale, seed, threads=None):
    """Run one reproduction target; returns (report object, kind)."""
    full = scale == "full"
    if target in ("table1", "table2", "table3"):
        fam = {"table1": ExpCanonical(1.0), "table2": ExpNonCanonical(1.0), "table3": NormalCanonical(0.5, 1.0)}[target]
        N, K = (10_000, 100) if full else (2000, 20)
        cfg = harness.ExperimentConfig(fam, TABLE_N, N, K, 1.0, seed, threads=threads)
        return harness.run_table(cfg), "table"
    if target == "figure1":
        if full:
            p_values, K = list(range(2, 101)), 100
            windows = None
        else:
            p_values, K = list(range(2, 51)), 20
            windows = {"tail": harness.tail_window(len(p_values))}
        rep = harness.run_dimension_scaling(p_values, 1000, 1000, K, seed, windows, threads)
        return rep, "scaling"
    if target == "rc4-check":
        checks = []
        for i, fam in enumerate((InvGammaRateUnknown(3.0, 1.0), InvGammaShapeUnknown(2.0, 1.0))):
            checks.append(harness.rc4_order_check(fam, [50, 100, 200, 400], 200_000, derive_stream(seed, i)))
        return checks, "rc4"
    raise ContractError(f"unknown target {target}")


def cmd_reproduce(args, out):
    rep, kind = run_target(args.target, args.scale, args.seed, args.threads)
    if kind == "rc4":
        header = ("variant", "fourth_moment_slope", "m_squared_slope")
        rows = [(c.variant, c.fourth_slope, c.m_squared_slope) for c in rep]
        csv_text = render_rows(header, rows, "csv") + "\n"
        json_text = json.dumps([c.as_dict() for c in rep], indent=2, sort_keys=True)
        shown = render_rows(header, rows, args.format if args.format != "json" else "table")
    elif kind == "table":
        csv_text, json_text = rep.to_csv(), rep.to_json()
        shown = render_rows(harness.REPORT_COLUMNS, [r.as_tuple() for r in rep.rows], args.format)
    else:
        csv_text, json_text = rep.to_csv(), rep.to_json()
        rows = [(k, v["points"][0], v["points"][1], v["slope"]) for k, v in rep.slopes.items()]
        shown = render_rows(("window", "first", "last", "slope"), rows, args.format)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        stem = os.path.join(args.out, f"{args.target}-{args.scale}")
        _write(stem + ".csv", csv_text)
        _write(stem + ".json", json_text)
    _emit(json_text if args.format == "json" else shown, out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# selftest


def selftest_checks():
    """List of (name, callable returning bool)."""
    rng = np.random.default_rng(20240101)

    def matching():
        for _ in range(60):
            N = int(rng.integers(2, 7))
            d = int(rng.integers(1, 4))
            X, Y = rng.normal(size=(N, d)), rng.normal(size=(N, d))
            for p in (1.0, 2.0):
                if ot.w_p_exact(X, Y, p).total_cost != ot.brute_force_wp(X, Y, p).total_cost:
                    return False
        return True

    def psd_root():
        for _ in range(20):
            A = rng.normal(size=(5, 5))
            S = A @ A.T + 0.1 * np.eye(5)
            R = linalg.sqrt_psd(S)
            if np.max(np.abs(R @ R - S)) > 1e-9 * max(1.0, np.max(np.abs(S))):
                return False
        return True

    def polygamma():
        zeta3 = 1.2020569031595942
        return abs(specialfn.polygamma(1, 1.0) - math.pi**2 / 6) < 1e-10 and abs(
            specialfn.polygamma(2, 1.0) + 2 * zeta3
        ) < 1e-10

    def inv_digamma():
        xs = np.array([0.05, 0.5, 1.0, 3.7, 40.0, 1e4])
        return bool(np.all(np.abs(specialfn.inv_digamma(specialfn.digamma(xs)) - xs) <= 1e-8 * xs))

    def table_bounds():
        want = {
            "c": (bounds.bound_exp_canonical_w1, (2.303, 0.649, 0.203, 0.064)),
            "nc": (bounds.bound_exp_noncanonical_w1, (7.499, 1.498, 0.458, 0.144)),
        }
        for fn, vals in want.values():
            for n, v in zip(TABLE_N, vals):
                if abs(fn(n).total - v) > 1e-3:
                    return False
        for n, v in zip(TABLE_N, (8962.830, 2834.296, 896.283, 283.430)):
            if abs(bounds.bound_normal_canonical_w1(0.5, 1.0, n).total - v) > 1e-3:
                return False
        return abs(bounds.bound_mvn_diag_w2(3, 1000) - 3.0672) < 1e-4

    return [
        ("matching equals brute force", matching),
        ("PSD square root residual", psd_root),
        ("polygamma identities", polygamma),
        ("inverse digamma round trip", inv_digamma),
        ("closed-form bound values", table_bounds),
    ]


def cmd_selftest(args, out):
    failed = []
    t0 = time.time()
    for name, check in selftest_checks():
        try:
            ok = bool(check())
        except Exception as exc:  # a crash counts as a failure
            ok = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        _emit(f"{'PASS' if ok else 'FAIL'}  {name}", out)
        if not ok:
            failed.append(name)
    _emit(f"{len(failed)} failed, {time.time() - t0:.1f}s", out)
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="artifact", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=("table", "csv", "json"), default="table")

    b = sub.add_parser("bound", help="evaluate a bound and its terms")
    common(b)
    b.add_argument("--family", choices=BOUND_FAMILIES, required=True)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--metric", choices=("w1", "w2", "wp", "bw", "kolmogorov"), default="w1")
    b.add_argument("--order", type=float, default=2.0, help="Wasserstein order for --metric wp")
    b.add_argument("--theta", type=float, default=1.0)
    b.add_argument("--eta1", type=float, default=0.5)
    b.add_argument("--eta2", type=float, default=1.0)
    b.add_argument("--p", type=int, default=1, help="dimension for the multivariate normal families")
    b.add_argument("--sigma-star-sq", type=float)
    b.add_argument("--root-info-max", type=float)
    b.add_argument("--alpha", type=float)
    b.add_argument("--beta", type=float)
    b.add_argument("--eps", type=float)
    b.add_argument("--mse", type=float)
    b.add_argument("--cp", type=float, default=1.0)
    b.add_argument("--direct-stein", action="store_true")
    b.add_argument("--mc-budget", type=int, default=0, help="use the Monte-Carlo assembler with this budget")
    b.add_argument("--seed", type=int, default=1)
    b.set_defaults(func=cmd_bound)

    e = sub.add_parser("estimate", help="empirical Wasserstein distance")
    common(e)
    e.add_argument("--x")
    e.add_argument("--y")
    e.add_argument("--family", choices=SIM_FAMILIES)
    e.add_argument("--theta", type=float, default=1.0)
    e.add_argument("--eta1", type=float, default=0.5)
    e.add_argument("--eta2", type=float, default=1.0)
    e.add_argument("--p", type=int, default=2, help="dimension for mvn-diag")
    e.add_argument("--alpha", type=float, default=3.0)
    e.add_argument("--beta", type=float, default=1.0)
    e.add_argument("--n", type=int)
    e.add_argument("--N", type=int)
    e.add_argument("--order", type=float, default=1.0)
    e.add_argument("--solver", choices=("auto", "exact", "entropic", "brute"), default="auto")
    e.add_argument("--epsilon", type=float)
    e.add_argument("--exact-cap", type=int, default=ot.EXACT_CAP)
    e.add_argument("--seed", type=int, default=1)
    e.set_defaults(func=cmd_estimate)

    r = sub.add_parser("reproduce", help="rerun a table, the scaling study or the order checks")
    common(r)
    r.add_argument("target", choices=TARGETS)
    r.add_argument("--scale", choices=("desk", "full"), default="desk")
    r.add_argument("--seed", type=int, default=1)
    r.add_argument("--out", help="directory for CSV and JSON output")
    r.add_argument("--threads", type=int, default=None)
    r.set_defaults(func=cmd_reproduce)

    s = sub.add_parser("selftest", help="fast invariant checks")
    s.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except (DomainError, ContractError, ExperimentError, ArithmeticError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
