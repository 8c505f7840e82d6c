"""Empirical p-Wasserstein distances between equal-size point clouds."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np
from scipy.special import logsumexp

from .errors import CapacityError, CloudParseError, ContractError, DomainError

EXACT_CAP = 5000
BRUTE_CAP = 8

SORTED_1D = "sorted1d"
EXACT = "exact_matching"
ENTROPIC = "entropic"
BRUTE = "brute_force"


@dataclass
class TransportResult:
    assignment: Optional[np.ndarray]  # assignment[i] = j pairs X_i with Y_j
    total_cost: float
    wp_value: float
    p: float
    solver: str
    gap: float = 0.0
    converged: bool = True
    info: dict = field(default_factory=dict)


def as_cloud(points) -> np.ndarray:
    a = np.asarray(points, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] < 1:
        raise ContractError(f"point cloud must be (N, d), got shape {np.shape(points)}")
    if not np.all(np.isfinite(a)):
        raise ContractError("point cloud has non-finite entries")
    return a


def load_cloud_csv(path) -> np.ndarray:
    """Read a headerless CSV with one point per row and d columns."""
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                raise CloudParseError(f"non-numeric field in {rec!r}", path, lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise CloudParseError("non-finite value", path, lineno)
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise CloudParseError(f"expected {width} columns, found {len(vals)}", path, lineno)
            rows.append(vals)
    if not rows:
        raise CloudParseError("no points found", path)
    return np.array(rows, dtype=float)


def _check_pair(X, Y):
    X = as_cloud(X)
    Y = as_cloud(Y)
    if X.shape != Y.shape:
        raise ContractError(f"clouds differ in shape: {X.shape} vs {Y.shape}")
    return X, Y


def _check_p(p):
    if not p >= 1:
        raise DomainError("Wasserstein order p must be >= 1")
    return float(p)


def _wp(total, N, p):
    return (total / N) ** (1.0 / p)


def cost_matrix(X, Y, p: float) -> np.ndarray:
    """|X_i - Y_j|^p with the Euclidean norm."""
    X = np.ascontiguousarray(X, dtype=float)
    Y = np.ascontiguousarray(Y, dtype=float)
    C = np.empty((X.shape[0], Y.shape[0]))
    _fill_cost(X, Y, float(p), C)
    return C


@numba.njit(parallel=False, cache=True, nogil=True)
def _fill_cost(X, Y, p, C):
    N, d = X.shape
    M = Y.shape[0]
    for i in range(N):
        for j in range(M):
            if d == 1:
                r = abs(X[i, 0] - Y[j, 0])
            elif d <= 3:
                # scaled norm to avoid overflow in the squares
                big = 0.0
                for k in range(d):
                    a = abs(X[i, k] - Y[j, k])
                    if a > big:
                        big = a
                if big == 0.0:
                    r = 0.0
                else:
                    s = 0.0
                    for k in range(d):
                        q = (X[i, k] - Y[j, k]) / big
                        s += q * q
                    r = big * math.sqrt(s)
            else:
                s = 0.0
                for k in range(d):
                    q = X[i, k] - Y[j, k]
                    s += q * q
                r = math.sqrt(s)
            if p == 1.0:
                C[i, j] = r
            elif p == 2.0:
                C[i, j] = r * r
            else:
                C[i, j] = r**p


def _total(C, assignment):
    return math.fsum(C[np.arange(C.shape[0]), assignment])


# ---------------------------------------------------------------------------
# 1-D


def w_p_1d(x, y, p: float = 1.0) -> TransportResult:
    p = _check_p(p)
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size or x.size == 0:
        raise ContractError("1-D samples must be non-empty and of equal length")
    ox = np.argsort(x, kind="stable")
    oy = np.argsort(y, kind="stable")
    diff = np.abs(x[ox] - y[oy])
    terms = diff if p == 1.0 else diff**p
    total = math.fsum(terms)
    assignment = np.empty(x.size, dtype=np.int64)
    assignment[ox] = oy
    return TransportResult(assignment, total, _wp(total, x.size, p), p, SORTED_1D)


def w1_1d_fast(x, y) -> float:
    """W1 between equal-size 1-D samples (sorted coupling, plain summation)."""
    return float(np.mean(np.abs(np.sort(x) - np.sort(y))))


# ---------------------------------------------------------------------------
# exact matching: shortest augmenting paths with dual potentials


@numba.njit(cache=True, nogil=True)
def _lsap(C):
    n = C.shape[0]
    inf = np.inf
    u = np.zeros(n)
    v = np.zeros(n)
    col4row = -np.ones(n, dtype=np.int64)
    row4col = -np.ones(n, dtype=np.int64)
    path = -np.ones(n, dtype=np.int64)
    dist = np.empty(n)
    SR = np.zeros(n, dtype=np.bool_)
    SC = np.zeros(n, dtype=np.bool_)
    remaining = np.empty(n, dtype=np.int64)

    for cur in range(n):
        # Dijkstra on reduced costs from row `cur`
        for j in range(n):
            remaining[j] = j
            dist[j] = inf
            SR[j] = False
            SC[j] = False
        nrem = n
        min_val = 0.0
        i = cur
        sink = -1
        while sink == -1:
            SR[i] = True
            best = -1
            lowest = inf
            for it in range(nrem):
                j = remaining[it]
                r = min_val + C[i, j] - u[i] - v[j]
                if r < dist[j]:
                    path[j] = i
                    dist[j] = r
                dj = dist[j]
                if best == -1 or dj < lowest:
                    lowest = dj
                    best = it
                elif dj == lowest:
                    # prefer a free column, then the lowest column index
                    jb = remaining[best]
                    fj = row4col[j] == -1
                    fb = row4col[jb] == -1
                    if (fj and not fb) or (fj == fb and j < jb):
                        best = it
            min_val = lowest
            if min_val == inf:
                return col4row, u, v, False
            j = remaining[best]
            SC[j] = True
            nrem -= 1
            remaining[best] = remaining[nrem]
            if row4col[j] == -1:
                sink = j
            else:
                i = row4col[j]

        # dual update
        u[cur] += min_val
        for r_ in range(n):
            if SR[r_] and r_ != cur:
                u[r_] += min_val - dist[col4row[r_]]
        for j in range(n):
            if SC[j]:
                v[j] -= min_val - dist[j]
        # augment along the path
        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            tmp = col4row[i]
            col4row[i] = j
            j = tmp
            if i == cur:
                break
    return col4row, u, v, True


@numba.njit(cache=True, nogil=True)
def _dual_violation(C, u, v):
    worst = 0.0
    n = C.shape[0]
    for i in range(n):
        for j in range(n):
            r = u[i] + v[j] - C[i, j]
            if r > worst:
                worst = r
    return worst


@numba.njit(cache=True, nogil=True)
def _near_tight(C, u, v, col4row, tol):
    """Edges off the matching whose reduced cost is within tol."""
    n = C.shape[0]
    count = 0
    for i in range(n):
        for j in range(n):
            if j != col4row[i] and C[i, j] - u[i] - v[j] <= tol:
                count += 1
    out = np.empty((count, 2), dtype=np.int64)
    k = 0
    for i in range(n):
        for j in range(n):
            if j != col4row[i] and C[i, j] - u[i] - v[j] <= tol:
                out[k, 0] = i
                out[k, 1] = j
                k += 1
    return out


def _to_ints(vals, base):
    out = []
    for x in vals:
        if x == 0.0:
            out.append(0)
            continue
        m, e = math.frexp(float(x))
        out.append(int(m * (1 << 53)) << (e - 53 - base))
    return out


def _min_exponent(vals):
    exps = [math.frexp(float(x))[1] - 53 for x in vals if x != 0.0]
    return min(exps) if exps else None


_LIMB = 62
_LIMB_MASK = (1 << _LIMB) - 1


@numba.njit(cache=True, nogil=True)
def _pred_cycle(start, pred, stamp, mark):
    """A node on a parent-graph cycle reached from start, or -1."""
    x = start
    while x != -1:
        if stamp[x] == mark:
            return x
        if stamp[x] != 0:
            return -1
        stamp[x] = mark
        x = pred[x]
    return -1


@numba.njit(cache=True, nogil=True)
def _cancel_cycles(n, ei, ej, whi, wlo, nhi, nlo, col4row):
    """Cancel negative cycles of the residual graph until none is left.

    Edge k joins row ei[k] and column ej[k]; it is traversed row -> column
    when unmatched and backwards otherwise.  Its exact reduced cost w is
    stored as hi * 2**62 + lo with 0 <= lo < 2**62, (whi, wlo) encoding w
    and (nhi, nlo) encoding -w.  Labels are kept across cancellations: a
    cycle in the parent graph is always negative, and a pass with no
    update leaves feasible potentials, which certifies that none is left.
    """
    V = 2 * n
    top = np.int64(1) << 62
    dhi = np.zeros(V, dtype=np.int64)
    dlo = np.zeros(V, dtype=np.int64)
    pred = -np.ones(V, dtype=np.int64)
    pedge = -np.ones(V, dtype=np.int64)
    stamp = np.zeros(V, dtype=np.int64)
    m = ei.shape[0]
    while True:
        updated = False
        for k in range(m):
            i = ei[k]
            j = n + ej[k]
            if col4row[ei[k]] == ej[k]:
                a, b, h, l = j, i, nhi[k], nlo[k]
            else:
                a, b, h, l = i, j, whi[k], wlo[k]
            lo = dlo[a] + l
            hi = dhi[a] + h
            if lo >= top:
                lo -= top
                hi += 1
            if hi < dhi[b] or (hi == dhi[b] and lo < dlo[b]):
                dhi[b] = hi
                dlo[b] = lo
                pred[b] = a
                pedge[b] = k
                updated = True
        if not updated:
            return col4row
        x = -1
        mark = 0
        for s in range(V):
            if pred[s] != -1 and stamp[s] == 0:
                mark += 1
                x = _pred_cycle(s, pred, stamp, mark)
                if x != -1:
                    break
        stamp[:] = 0
        if x == -1:
            continue
        y = x
        while True:
            k = pedge[y]
            if y >= n:  # reached a column through an unmatched edge
                col4row[ei[k]] = ej[k]
            y = pred[y]
            if y == x:
                break
        pred[:] = -1
        pedge[:] = -1
        if dhi.min() < -(np.int64(1) << 60):  # restart labels long before overflow
            dhi[:] = 0
            dlo[:] = 0


def _split(vals):
    hi = np.array([r >> _LIMB for r in vals], dtype=np.int64)
    lo = np.array([r & _LIMB_MASK for r in vals], dtype=np.int64)
    return hi, lo


def _cancel_cycles_py(n, ei, ej, w, col4row):
    """Same as _cancel_cycles with unbounded Python integers."""
    V = 2 * n
    while True:
        dist = [0] * V
        pred = [-1] * V
        pedge = [-1] * V
        last = -1
        for _ in range(V):
            last = -1
            for k in range(len(ei)):
                i, j = int(ei[k]), n + int(ej[k])
                if col4row[ei[k]] == ej[k]:
                    a, b, wt = j, i, -w[k]
                else:
                    a, b, wt = i, j, w[k]
                if dist[a] + wt < dist[b]:
                    dist[b] = dist[a] + wt
                    pred[b] = a
                    pedge[b] = k
                    last = b
            if last == -1:
                return col4row
        x = last
        for _ in range(V):
            x = pred[x]
        y = x
        while True:
            k = pedge[y]
            if y >= n:
                col4row[ei[k]] = ej[k]
            y = pred[y]
            if y == x:
                break


def _exact_tie_refine(C, col4row, u, v):
    """Make the matching optimal for the float costs taken as exact numbers.

    The float shortest-path solve is optimal up to rounding, so a matching
    whose exact cost is lower can differ from it only on edges with
    near-zero reduced cost.  Those edges are collected and negative cycles
    among them are cancelled using exact reduced costs.
    """
    n = C.shape[0]
    eps = np.finfo(float).eps
    own = C[np.arange(n), col4row] - u - v
    scale = float(np.max(np.abs(C))) + float(np.max(np.abs(u))) + float(np.max(np.abs(v)))
    tol = max(float(np.sum(own)), 0.0) + (n - 1) * _dual_violation(C, u, v) + 16 * n * eps * scale
    extra = _near_tight(C, u, v, col4row, tol)
    if extra.shape[0] == 0:
        return col4row
    row_of = np.empty(n, dtype=np.int64)
    row_of[col4row] = np.arange(n)
    rows = np.union1d(extra[:, 0], row_of[extra[:, 1]])
    ei = np.concatenate([extra[:, 0], rows])
    ej = np.concatenate([extra[:, 1], col4row[rows]])
    cvals, uvals, vvals = C[ei, ej], u[ei], v[ej]
    found = [e for e in map(_min_exponent, (cvals, uvals, vvals)) if e is not None]
    base = min(found) if found else 0
    red = [c - a - b for c, a, b in zip(_to_ints(cvals, base), _to_ints(uvals, base), _to_ints(vvals, base))]
    col4row = col4row.copy()
    big = max(abs(r) for r in red)
    if big * 2 * (2 * n + 1) < 2**122:
        whi, wlo = _split(red)
        nhi, nlo = _split([-r for r in red])
        return _cancel_cycles(n, ei, ej, whi, wlo, nhi, nlo, col4row)
    return _cancel_cycles_py(n, ei, ej, red, col4row)


def solve_assignment(C: np.ndarray):
    """Optimal permutation for a square cost matrix plus dual potentials."""
    C = np.ascontiguousarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ContractError("cost matrix must be square")
    if not np.all(np.isfinite(C)):
        raise ContractError("cost matrix has non-finite entries")
    col4row, u, v, ok = _lsap(C)
    if not ok:
        raise ContractError("assignment problem infeasible")
    return _exact_tie_refine(C, col4row, u, v), u, v


def w_p_exact(X, Y, p: float = 1.0, cap: int = EXACT_CAP, certify: bool = False) -> TransportResult:
    p = _check_p(p)
    X, Y = _check_pair(X, Y)
    N = X.shape[0]
    if N > cap:
        raise CapacityError(f"N={N} exceeds the exact-solver cap {cap}; use w_p_entropic")
    C = cost_matrix(X, Y, p)
    assignment, u, v = solve_assignment(C)
    total = _total(C, assignment)
    info = {"dual_objective": float(np.sum(u) + np.sum(v))}
    if certify:
        info["max_dual_violation"] = float(_dual_violation(C, u, v))
    return TransportResult(assignment, total, _wp(total, N, p), p, EXACT, 0.0, True, info)


# ---------------------------------------------------------------------------
# brute force oracle


def brute_force_wp(X, Y, p: float = 1.0) -> TransportResult:
    p = _check_p(p)
    X, Y = _check_pair(X, Y)
    N = X.shape[0]
    if N > BRUTE_CAP:
        raise CapacityError(f"brute force is limited to N <= {BRUTE_CAP}")
    C = cost_matrix(X, Y, p)
    best = None
    best_total = math.inf
    for perm in itertools.permutations(range(N)):
        total = math.fsum(C[i, perm[i]] for i in range(N))
        if total < best_total:
            best_total = total
            best = perm
    assignment = np.array(best, dtype=np.int64)
    return TransportResult(assignment, best_total, _wp(best_total, N, p), p, BRUTE)


# ---------------------------------------------------------------------------
# entropic approximation


def _round_to_feasible(P, a, b):
    """Project a positive plan onto exact marginals (a, b)."""
    r = P.sum(axis=1)
    x = np.minimum(a / np.where(r > 0, r, 1.0), 1.0)
    P = P * x[:, None]
    c = P.sum(axis=0)
    y = np.minimum(b / np.where(c > 0, c, 1.0), 1.0)
    P = P * y[None, :]
    ea = a - P.sum(axis=1)
    eb = b - P.sum(axis=0)
    s = ea.sum()
    if s > 0:
        P = P + np.outer(ea, eb) / s
    return P


def w_p_entropic(
    X,
    Y,
    p: float = 1.0,
    epsilon: Optional[float] = None,
    max_iter: int = 5000,
    tol: float = 1e-9,
    rel_epsilon: float = 0.005,
) -> TransportResult:
    """Log-domain Sinkhorn, rounded to an exactly feasible coupling.

    ``epsilon`` defaults to ``rel_epsilon`` times the median cost.  The
    reported value is the cost of a feasible coupling (so an upper bound on
    the optimum) and ``gap`` bounds its excess over the optimum.
    """
    p = _check_p(p)
    X, Y = _check_pair(X, Y)
    N = X.shape[0]
    C = cost_matrix(X, Y, p)
    if epsilon is None:
        med = float(np.median(C))
        epsilon = rel_epsilon * med if med > 0 else 1e-3
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    a = np.full(N, 1.0 / N)
    loga = np.log(a)
    K = -C / epsilon
    f = np.zeros(N)
    g = np.zeros(N)
    converged = False
    err = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        f = epsilon * (loga - logsumexp(K + g[None, :] / epsilon, axis=1))
        g = epsilon * (loga - logsumexp(K + f[:, None] / epsilon, axis=0))
        if it % 10 == 0 or it == max_iter:
            row = np.exp(logsumexp(K + (f[:, None] + g[None, :]) / epsilon, axis=1))
            err = float(np.sum(np.abs(row - a)))
            if err < tol:
                converged = True
                break
    P = np.exp(K + (f[:, None] + g[None, :]) / epsilon)
    viol = float(np.sum(np.abs(P.sum(axis=1) - a)) + np.sum(np.abs(P.sum(axis=0) - a)))
    P = _round_to_feasible(P, a, a)
    mean_cost = float(np.sum(P * C))
    total = mean_cost * N
    # entropic suboptimality plus the cost of repairing the marginals
    gap = epsilon * math.log(N) + 2.0 * viol * float(C.max())
    info = {"epsilon": epsilon, "iterations": it, "marginal_violation": viol}
    return TransportResult(None, total, _wp(total, N, p), p, ENTROPIC, gap, converged, info)
