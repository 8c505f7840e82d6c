"""Derivative hooks feeding the generic bound assemblers.

A hook set describes a d-parameter family through vectorized callbacks:

* ``grad(theta, x)``  -> (..., d)       gradient of log f(x | theta)
* ``hessian(theta, x)`` -> (..., d, d)  per-observation Hessian
* ``third(theta, x)`` -> (..., d, d, d) per-observation third derivatives
* ``dominating(theta, data)`` -> (reps, d, d, d) bound on |d^3 l(theta; data)|
  for the whole-sample log-likelihood, theta shaped (reps, d)
* ``mle(data)`` -> (reps, d) and ``sample(gen, n, reps)`` -> (reps, n, t)
* ``fisher(theta)`` -> (d, d) per-observation information

``x`` always carries a trailing observation axis of length t.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, EvaluationError
from .mle_families import (
    ExpCanonical,
    ExpNonCanonical,
    InvGammaRateUnknown,
    InvGammaShapeUnknown,
    MvnDiagonal,
    NormalCanonical,
    normal_canonical_fisher,
)
from .specialfn import digamma, polygamma


@dataclass(frozen=True)
class ExpFamilyStructure:
    """k''(theta0) and Var T(X) for a one-parameter exponential family."""

    k2: float
    var_t: float


@dataclass(frozen=True)
class GeneralFamilyHooks:
    d: int
    sample: Callable
    mle: Callable
    grad: Callable
    hessian: Callable
    dominating: Callable
    fisher: Callable
    third: Optional[Callable] = None
    logpdf: Optional[Callable] = None
    exp_family: Optional[Callable] = None  # theta0 -> ExpFamilyStructure
    name: str = "custom"


def _finite(name, arr, theta, x=None):
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"{name} returned non-finite values", theta, x)
    return arr


def check_dominating(hooks: GeneralFamilyHooks, theta0, n: int, gen, trials: int = 50, spread: float = 0.5):
    """Spot-check |sum_i third(theta, x_i)| <= dominating(theta, x) at random (theta, x).

    Returns the worst ratio found (<= 1 means no violation seen).
    """
    if hooks.third is None:
        raise DomainError("hooks carry no third-derivative callback")
    theta0 = np.asarray(theta0, dtype=float)
    data = hooks.sample(gen, n, trials)
    worst = 0.0
    for r in range(trials):
        theta = theta0 * (1.0 + spread * gen.uniform(-1, 1, theta0.shape))
        t3 = np.abs(hooks.third(theta, data[r]).sum(axis=0))
        m = hooks.dominating(theta[None, :], data[r:r + 1])[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(t3 > 0, t3 / m, 0.0)
        worst = max(worst, float(np.max(ratio)))
    return worst


def _bcast(arr, x, shape):
    """Broadcast a parameter-only array over the observation batch of x."""
    lead = np.shape(x)[:-1]
    return np.broadcast_to(arr, lead + shape).copy()


def exp_canonical_hooks(family: ExpCanonical | None = None) -> GeneralFamilyHooks:
    fam = family or ExpCanonical(1.0)

    def grad(theta, x):
        return 1.0 / theta[0] - np.asarray(x)

    def hessian(theta, x):
        return _bcast(np.array([[-1.0 / theta[0] ** 2]]), x, (1, 1))

    def third(theta, x):
        return _bcast(np.array([[[2.0 / theta[0] ** 3]]]), x, (1, 1, 1))

    def dominating(theta, data):
        n = data.shape[1]
        return (2.0 * n / theta[:, 0] ** 3)[:, None, None, None]

    return GeneralFamilyHooks(
        d=1,
        sample=fam.sample,
        mle=fam.mle,
        grad=grad,
        hessian=hessian,
        third=third,
        dominating=dominating,
        fisher=lambda th: np.array([[1.0 / th[0] ** 2]]),
        exp_family=lambda th: ExpFamilyStructure(0.0, 1.0 / th[0] ** 2),
        name="exp-canonical",
    )


def exp_noncanonical_hooks(family: ExpNonCanonical | None = None) -> GeneralFamilyHooks:
    fam = family or ExpNonCanonical(1.0)

    def grad(theta, x):
        th = theta[0]
        return -1.0 / th + np.asarray(x) / th**2

    def hessian(theta, x):
        th = theta[0]
        return (1.0 / th**2 - 2.0 * np.asarray(x) / th**3)[..., None]

    def third(theta, x):
        th = theta[0]
        return (-2.0 / th**3 + 6.0 * np.asarray(x) / th**4)[..., None, None]

    def dominating(theta, data):
        n = data.shape[1]
        th = theta[:, 0]
        xbar = data[:, :, 0].mean(axis=1)
        return (2.0 * n / th**3 * np.abs(1.0 + 3.0 * xbar / th))[:, None, None, None]

    # k(theta) = -1/theta, T(x) = x
    return GeneralFamilyHooks(
        d=1,
        sample=fam.sample,
        mle=fam.mle,
        grad=grad,
        hessian=hessian,
        third=third,
        dominating=dominating,
        fisher=lambda th: np.array([[1.0 / th[0] ** 2]]),
        exp_family=lambda th: ExpFamilyStructure(-2.0 / th[0] ** 3, th[0] ** 2),
        name="exp-noncanonical",
    )


def _normal_third(e1, e2):
    t = np.zeros((2, 2, 2))
    t[0, 0, 0] = 1.0 / e1**3 + 1.5 * e2**2 / e1**4
    for idx in set(itertools.permutations((0, 0, 1))):
        t[idx] = -e2 / e1**3
    for idx in set(itertools.permutations((0, 1, 1))):
        t[idx] = 0.5 / e1**2
    return t


def normal_canonical_hooks(family: NormalCanonical | None = None) -> GeneralFamilyHooks:
    fam = family or NormalCanonical(0.5, 1.0)

    def grad(theta, x):
        e1, e2 = theta
        x = np.asarray(x)[..., 0]
        return np.stack([0.5 / e1 + e2**2 / (4 * e1**2) - x**2, x - e2 / (2 * e1)], axis=-1)

    def hessian(theta, x):
        # second derivatives do not involve x: exactly minus the information
        return _bcast(-normal_canonical_fisher(theta[0], theta[1]), x, (2, 2))

    def third(theta, x):
        return _bcast(_normal_third(theta[0], theta[1]), x, (2, 2, 2))

    def dominating(theta, data):
        n = data.shape[1]
        e1 = theta[:, 0]
        e2 = np.abs(theta[:, 1])
        m = np.zeros((theta.shape[0], 2, 2, 2))
        m[:, 0, 0, 0] = n / e1**3 + 1.5 * n * e2**2 / e1**4
        for idx in set(itertools.permutations((0, 0, 1))):
            m[(slice(None),) + idx] = n * e2 / e1**3
        for idx in set(itertools.permutations((0, 1, 1))):
            m[(slice(None),) + idx] = 0.5 * n / e1**2
        return m

    return GeneralFamilyHooks(
        d=2,
        sample=fam.sample,
        mle=fam.mle,
        grad=grad,
        hessian=hessian,
        third=third,
        dominating=dominating,
        fisher=lambda th: normal_canonical_fisher(th[0], th[1]),
        name="normal-canonical",
    )


def mvn_diagonal_hooks(family: MvnDiagonal) -> GeneralFamilyHooks:
    """Hooks for independent normal coordinates, theta = (mu, s2)."""
    p = family.p

    def grad(theta, x):
        mu, s2 = theta[:p], theta[p:]
        r = np.asarray(x) - mu
        return np.concatenate([r / s2, (r**2 - s2) / (2 * s2**2)], axis=-1)

    def hessian(theta, x):
        mu, s2 = theta[:p], theta[p:]
        r = np.asarray(x) - mu
        lead = r.shape[:-1]
        h = np.zeros(lead + (2 * p, 2 * p))
        k = np.arange(p)
        h[..., k, k] = -1.0 / s2
        h[..., k, p + k] = -r / s2**2
        h[..., p + k, k] = -r / s2**2
        h[..., p + k, p + k] = 0.5 / s2**2 - r**2 / s2**3
        return h

    def third(theta, x):
        mu, s2 = theta[:p], theta[p:]
        r = np.asarray(x) - mu
        lead = r.shape[:-1]
        t = np.zeros(lead + (2 * p,) * 3)
        for k in range(p):
            a, b = k, p + k
            for idx in set(itertools.permutations((a, a, b))):
                t[(Ellipsis,) + idx] = 1.0 / s2[k] ** 2
            for idx in set(itertools.permutations((a, b, b))):
                t[(Ellipsis,) + idx] = 2.0 * r[..., k] / s2[k] ** 3
            t[..., b, b, b] = -1.0 / s2[k] ** 3 + 3.0 * r[..., k] ** 2 / s2[k] ** 4
        return t

    def dominating(theta, data):
        reps, n, _ = data.shape
        mu, s2 = theta[:, :p], theta[:, p:]
        r = data - mu[:, None, :]
        s1 = np.abs(r).sum(axis=1)
        sq = (r**2).sum(axis=1)
        m = np.zeros((reps,) + (2 * p,) * 3)
        for k in range(p):
            a, b = k, p + k
            for idx in set(itertools.permutations((a, a, b))):
                m[(slice(None),) + idx] = n / s2[:, k] ** 2
            for idx in set(itertools.permutations((a, b, b))):
                m[(slice(None),) + idx] = 2.0 * s1[:, k] / s2[:, k] ** 3
            m[:, b, b, b] = n / s2[:, k] ** 3 + 3.0 * sq[:, k] / s2[:, k] ** 4
        return m

    def fisher(theta):
        s2 = theta[p:]
        return np.diag(np.concatenate([1.0 / s2, 0.5 / s2**2]))

    return GeneralFamilyHooks(
        d=2 * p,
        sample=family.sample,
        mle=family.mle,
        grad=grad,
        hessian=hessian,
        third=third,
        dominating=dominating,
        fisher=fisher,
        name="mvn-diag",
    )


def invgamma_rate_hooks(family: InvGammaRateUnknown) -> GeneralFamilyHooks:
    a0 = family.alpha0

    def grad(theta, x):
        return a0 / theta[0] - 1.0 / np.asarray(x)

    def hessian(theta, x):
        return _bcast(np.array([[-a0 / theta[0] ** 2]]), x, (1, 1))

    def third(theta, x):
        return _bcast(np.array([[[2.0 * a0 / theta[0] ** 3]]]), x, (1, 1, 1))

    def dominating(theta, data):
        return family.dominating(theta[:, 0], data.shape[1])[:, None, None, None]

    return GeneralFamilyHooks(
        d=1,
        sample=family.sample,
        mle=family.mle,
        grad=grad,
        hessian=hessian,
        third=third,
        dominating=dominating,
        fisher=lambda th: np.array([[a0 / th[0] ** 2]]),
        name="invgamma-rate",
    )


def invgamma_shape_hooks(family: InvGammaShapeUnknown) -> GeneralFamilyHooks:
    b0 = family.beta0

    def grad(theta, x):
        return np.log(b0) - digamma(theta[0]) - np.log(np.asarray(x))

    def hessian(theta, x):
        return _bcast(np.array([[-polygamma(1, theta[0])]]), x, (1, 1))

    def third(theta, x):
        return _bcast(np.array([[[-polygamma(2, theta[0])]]]), x, (1, 1, 1))

    def dominating(theta, data):
        return family.dominating(theta[:, 0], data.shape[1])[:, None, None, None]

    return GeneralFamilyHooks(
        d=1,
        sample=family.sample,
        mle=family.mle,
        grad=grad,
        hessian=hessian,
        third=third,
        dominating=dominating,
        fisher=lambda th: np.array([[polygamma(1, th[0])]]),
        name="invgamma-shape",
    )
