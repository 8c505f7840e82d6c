"""Log-gamma, digamma/polygamma (orders 0..3) and the inverse digamma."""
from __future__ import annotations

import numpy as np
from scipy import special

from .errors import DomainError

NEWTON_CAP = 64


def _positive(x):
    a = np.asarray(x, dtype=float)
    if np.any(~(a > 0)):
        raise DomainError("argument must be positive")
    return a


def _out(a):
    return float(a) if np.ndim(a) == 0 else a


def loggamma(x):
    return _out(special.gammaln(_positive(x)))


def digamma(x):
    return _out(special.digamma(_positive(x)))


def polygamma(m: int, x):
    """psi_m(x) for m in {0, 1, 2, 3} and x > 0."""
    if m not in (0, 1, 2, 3):
        raise DomainError(f"polygamma order must be 0..3, got {m}")
    a = _positive(x)
    if m == 0:
        return _out(special.digamma(a))
    return _out(special.polygamma(m, a))


def inv_digamma_bracket(y):
    """Open interval (1/log(1+e^-y), e^y + 1/2) known to contain psi^{-1}(y)."""
    y = np.asarray(y, dtype=float)
    lo = 1.0 / np.logaddexp(0.0, -y)
    hi = np.exp(y) + 0.5
    return lo, hi


def inv_digamma(y, tol: float = 1e-12):
    """x > 0 with digamma(x) == y, by Newton safeguarded with bisection."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise DomainError("inv_digamma needs finite input")
    lo, hi = inv_digamma_bracket(y)
    lo = np.minimum(lo, hi)
    with np.errstate(divide="ignore", over="ignore"):
        x = np.where(y >= -2.22, np.exp(y) + 0.5, -1.0 / (y + np.euler_gamma))
    x = np.clip(x, lo, hi)
    for _ in range(NEWTON_CAP):
        f = special.digamma(x) - y
        # keep the bracket tight: digamma is increasing
        lo = np.where(f < 0, np.maximum(lo, x), lo)
        hi = np.where(f > 0, np.minimum(hi, x), hi)
        step = f / special.polygamma(1, x)
        cand = x - step
        bad = ~((cand > lo) & (cand < hi)) | ~np.isfinite(cand)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        done = np.abs(cand - x) <= tol * np.abs(x)
        x = cand
        if np.all(done):
            break
    return _out(x)
