"""Simulation experiments: distance-vs-bound tables, dimension scaling and
order-in-n checks for the inverse-gamma dominating functions."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import bounds
from .errors import ContractError, DomainError, ExperimentError
from .mle_families import (
    ExpCanonical,
    ExpNonCanonical,
    Family,
    InvGammaRateUnknown,
    InvGammaShapeUnknown,
    MvnDiagonal,
    MvnGeneral,
    NormalCanonical,
    simulate_W,
)
from .ot import EXACT_CAP, w1_1d_fast, w_p_1d, w_p_entropic, w_p_exact
from .rng_dist import derive_stream

AUTO, EXACT, ENTROPIC = "auto", "exact", "entropic"
REPORT_COLUMNS = ("n", "dhat_mean", "dhat_stderr", "bound", "gap")
# dominance is only declared violated beyond this many standard errors
DOMINANCE_SE = 5.0


def default_threads() -> int:
    return os.cpu_count() or 1


def closed_form_bound(family: Family, n: int, p: float = 1.0) -> float:
    """Registered closed-form bound on d_Wp(W, Z) for the family."""
    if isinstance(family, ExpCanonical):
        if p == 1:
            return bounds.bound_exp_canonical_w1(n).total
        if p == 2:
            return bounds.bound_exp_canonical_w2(n).total
    elif isinstance(family, ExpNonCanonical):
        if p == 1:
            return bounds.bound_exp_noncanonical_w1(n).total
    elif isinstance(family, NormalCanonical):
        if p == 1:
            return bounds.bound_normal_canonical_w1(family.eta1, family.eta2, n).total
    elif isinstance(family, MvnDiagonal):
        # W1 <= W2, so the W2 bound also covers p = 1
        if p in (1, 2):
            return bounds.bound_mvn_diag_w2(family.p, n)
    elif isinstance(family, MvnGeneral):
        if p == 1:
            s2, norm = bounds.mvn_general_bound_inputs(family)
            return bounds.bound_mvn_general_w1(family.p, n, s2, norm).total
    raise ContractError(f"no closed-form bound registered for {family.tag} at order p={p}")


@dataclass
class ExperimentConfig:
    family: Family
    n_values: Sequence[int]
    N: int
    K: int
    p: float = 1.0
    master_seed: int = 1
    solver: str = AUTO
    rel_epsilon: float = 0.005
    exact_cap: int = EXACT_CAP
    threads: Optional[int] = None

    def __post_init__(self):
        if self.K < 1:
            raise DomainError("K must be >= 1")
        if self.N < 2:
            raise DomainError("N must be >= 2")
        if not self.n_values or any(int(n) < 1 for n in self.n_values):
            raise DomainError("n_values must be positive")
        if self.solver not in (AUTO, EXACT, ENTROPIC):
            raise DomainError(f"unknown solver {self.solver!r}")
        self.n_values = [int(n) for n in self.n_values]

    def metadata(self) -> dict:
        return {
            "family": self.family.describe(),
            "n_values": list(self.n_values),
            "N": self.N,
            "K": self.K,
            "p": self.p,
            "master_seed": self.master_seed,
            "solver": self.solver,
            "rel_epsilon": self.rel_epsilon,
            "exact_cap": self.exact_cap,
        }


def empirical_distance(W: np.ndarray, Z: np.ndarray, p: float, solver=AUTO, exact_cap=EXACT_CAP, rel_epsilon=0.005):
    """(distance, solver tag, gap) between two equal-size clouds."""
    N, d = W.shape
    if d == 1 and solver != ENTROPIC:
        if p == 1:
            return w1_1d_fast(W[:, 0], Z[:, 0]), "sorted1d", 0.0
        r = w_p_1d(W[:, 0], Z[:, 0], p)
        return r.wp_value, r.solver, 0.0
    if solver == EXACT or (solver == AUTO and N <= exact_cap):
        r = w_p_exact(W, Z, p, cap=max(exact_cap, N) if solver == EXACT else exact_cap)
    else:
        r = w_p_entropic(W, Z, p, rel_epsilon=rel_epsilon)
    return r.wp_value, r.solver, r.gap


def _one_distance(config: ExperimentConfig, n: int, rep: int):
    stream = derive_stream(config.master_seed, rep)
    W = simulate_W(config.family, n, config.N, stream).rows
    Z = stream.generator.standard_normal(W.shape)
    return empirical_distance(W, Z, config.p, config.solver, config.exact_cap, config.rel_epsilon)


def _run_tasks(fn: Callable, tasks: list, threads: Optional[int]):
    """Evaluate fn over tasks, results in task order."""
    threads = threads or default_threads()

    def guarded(task):
        try:
            return fn(*task)
        except Exception as exc:  # re-raised with the task identified
            n, rep = task[-2], task[-1]
            raise ExperimentError(f"n={n}, repetition={rep}: {type(exc).__name__}: {exc}", n, rep) from exc

    if threads <= 1:
        return [guarded(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(guarded, tasks))


@dataclass
class ReportRow:
    n: int
    dhat_mean: float
    dhat_stderr: float
    bound: float
    gap: float
    solver_gap: float = 0.0

    def as_tuple(self):
        return (self.n, self.dhat_mean, self.dhat_stderr, self.bound, self.gap)


@dataclass
class ExperimentReport:
    rows: list
    metadata: dict = field(default_factory=dict)

    def dominance_violations(self, n_se: float = DOMINANCE_SE) -> list:
        """Rows whose d-hat exceeds the bound by more than n_se standard errors."""
        return [r for r in self.rows if r.dhat_mean - n_se * r.dhat_stderr > r.bound]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([r.n] + [repr(float(v)) for v in r.as_tuple()[1:]])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [dict(zip(REPORT_COLUMNS, r.as_tuple()), solver_gap=r.solver_gap) for r in self.rows]
        return json.dumps({"metadata": self.metadata, "rows": rows}, indent=2, sort_keys=True)


def _mean_se(vals):
    a = np.asarray(vals, dtype=float)
    se = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0
    return float(math.fsum(a) / a.size), se


def run_table(config: ExperimentConfig, bound_fn: Optional[Callable[[int], float]] = None) -> ExperimentReport:
    """Mean empirical distance over K repetitions for each n, paired with the bound.

    Repetition r draws everything from derive_stream(master_seed, r).
    """
    if bound_fn is None:
        bound_fn = lambda n: closed_form_bound(config.family, n, config.p)  # noqa: E731
    bnds = [bound_fn(n) for n in config.n_values]
    tasks = [(config, n, r) for n in config.n_values for r in range(config.K)]
    results = _run_tasks(_one_distance, tasks, config.threads)
    rows = []
    solvers = set()
    for i, n in enumerate(config.n_values):
        chunk = results[i * config.K:(i + 1) * config.K]
        mean, se = _mean_se([c[0] for c in chunk])
        solvers.update(c[1] for c in chunk)
        sgap = float(np.mean([c[2] for c in chunk]))
        rows.append(ReportRow(n, mean, se, bnds[i], bnds[i] - mean, sgap))
    meta = config.metadata()
    meta["solvers_used"] = sorted(solvers)
    return ExperimentReport(rows, meta)


# ---------------------------------------------------------------------------
# dimension scaling


def fit_loglog_slope(xs, ys, start: int = 0, stop: Optional[int] = None) -> float:
    """OLS slope of log y on log x over the inclusive index window [start, stop]."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ContractError("xs and ys differ in length")
    if stop is None:
        stop = xs.size - 1
    if not (0 <= start < stop < xs.size):
        raise DomainError(f"need 0 <= start < stop < {xs.size}, got [{start}, {stop}]")
    x = xs[start:stop + 1]
    y = ys[start:stop + 1]
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("log-log fit needs positive values")
    lx, ly = np.log(x), np.log(y)
    lx = lx - lx.mean()
    return float(np.sum(lx * (ly - ly.mean())) / np.sum(lx * lx))


@dataclass
class ScalingReport:
    p_values: list
    dhat: list
    dhat_stderr: list
    slopes: dict  # label -> {"points": [first, last] (1-based), "slope": value}
    n: int
    N: int
    K: int
    master_seed: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("p", "dhat_mean", "dhat_stderr"))
        for p, m, s in zip(self.p_values, self.dhat, self.dhat_stderr):
            w.writerow([p, repr(float(m)), repr(float(s))])
        return buf.getvalue()

    def to_json(self) -> str:
        out = {
            "metadata": {"n": self.n, "N": self.N, "K": self.K, "master_seed": self.master_seed},
            "p_values": list(self.p_values),
            "dhat_mean": [float(v) for v in self.dhat],
            "dhat_stderr": [float(v) for v in self.dhat_stderr],
            "slopes": self.slopes,
        }
        return json.dumps(out, indent=2, sort_keys=True)


def _scaling_distance(n, N, seed, exact_cap, p, rep):
    config = ExperimentConfig(MvnDiagonal.unit(p), [n], N, 1, 1.0, seed, AUTO, exact_cap=exact_cap)
    return _one_distance(config, n, rep)[0]


def run_dimension_scaling(
    p_values: Sequence[int],
    n: int = 1000,
    N: int = 1000,
    K: int = 100,
    master_seed: int = 1,
    windows: Optional[dict] = None,
    threads: Optional[int] = None,
    exact_cap: int = EXACT_CAP,
) -> ScalingReport:
    """d-hat(p) for the unit-parameter diagonal normal family, p = dimension.

    ``windows`` maps a label to 1-based inclusive data-point positions
    (first, last); the default is the two tail windows (70, 99) and (90, 99),
    clipped to the available points.
    """
    p_values = [int(p) for p in p_values]
    if len(p_values) < 2 or any(p < 1 for p in p_values):
        raise DomainError("need at least two positive dimensions")
    if windows is None:
        windows = {"70-99": (70, 99), "90-99": (90, 99)}
    tasks = [(n, N, master_seed, exact_cap, p, r) for p in p_values for r in range(K)]
    res = _run_tasks(_scaling_distance, tasks, threads)
    means, ses = [], []
    for i in range(len(p_values)):
        m, s = _mean_se(res[i * K:(i + 1) * K])
        means.append(m)
        ses.append(s)
    slopes = {}
    last = len(p_values)
    for label, (a, b) in windows.items():
        b = min(b, last)
        if a >= b:
            continue
        slopes[label] = {"points": [a, b], "slope": fit_loglog_slope(p_values, means, a - 1, b - 1)}
    return ScalingReport(p_values, means, ses, slopes, n, N, K, master_seed)


def tail_window(count: int, fraction: float = 0.3) -> tuple:
    """1-based (first, last) positions covering the final fraction of points."""
    k = max(2, int(math.ceil(fraction * count)))
    return count - k + 1, count


# ---------------------------------------------------------------------------
# order-in-n checks for the inverse-gamma dominating functions


@dataclass
class OrderCheck:
    variant: str
    n_values: list
    fourth_moment: list
    fourth_moment_se: list
    m_squared: list
    fourth_slope: float
    m_squared_slope: float

    def as_dict(self):
        return dict(self.__dict__)


def rc4_order_check(family: Family, n_values: Sequence[int], mc_budget: int, stream) -> OrderCheck:
    """Fit log-log slopes in n of E[(theta_hat - theta0)^4] and of
    max over {theta_hat, theta0} of E[M(theta; X)^2]."""
    if not isinstance(family, (InvGammaRateUnknown, InvGammaShapeUnknown)):
        raise ContractError("order check is defined for the inverse-gamma variants")
    n_values = [int(n) for n in n_values]
    if len(n_values) < 2:
        raise DomainError("need at least two sample sizes")
    if not family.alpha0 > 4.0 / min(n_values):
        raise DomainError("moments need alpha0 > 4/min(n)")
    gen = stream.generator if hasattr(stream, "generator") else stream
    th0 = float(family.theta0[0])
    q4, q4se, m2 = [], [], []
    for n in n_values:
        est = family.draw_mle(gen, n, mc_budget)[:, 0]
        est = est[np.isfinite(est)]
        v = (est - th0) ** 4
        q4.append(float(v.mean()))
        q4se.append(float(v.std(ddof=1) / math.sqrt(v.size)))
        at_mle = float(np.mean(family.dominating(est, n) ** 2))
        at_true = float(family.dominating(th0, n) ** 2)
        m2.append(max(at_mle, at_true))
    return OrderCheck(
        family.tag,
        n_values,
        q4,
        q4se,
        m2,
        fit_loglog_slope(n_values, q4),
        fit_loglog_slope(n_values, m2),
    )
