"""Worked families: data sampling, MLEs, Fisher information, standardized W.

Every family exposes vectorized methods over a leading replicate axis:
``sample(gen, n, reps)`` returns data shaped (reps, n, t) and
``mle(data)`` returns estimates shaped (reps, d).  ``draw_mle`` is the
fast path used by simulations; for the closed-form families it samples
the sufficient statistics directly from their exact laws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ContractError, DegenerateDataError, DomainError, SupportError
from .linalg import (
    cholesky,
    duplication_matrix,
    inv_sqrt_psd,
    sqrt_psd,
    vech,
    vech_indices,
)
from .rng_dist import as_generator
from .specialfn import digamma, inv_digamma, polygamma

# tags
EXP_CANONICAL = "ExpCanonical"
EXP_NONCANONICAL = "ExpNonCanonical"
NORMAL_CANONICAL = "NormalCanonical"
MVN_DIAGONAL = "MvnDiagonal"
MVN_GENERAL = "MvnGeneral"
INVGAMMA_RATE = "InvGammaRateUnknown"
INVGAMMA_SHAPE = "InvGammaShapeUnknown"


def _as_data(sample, t: int) -> np.ndarray:
    """Coerce to (reps, n, t)."""
    a = np.asarray(sample, dtype=float)
    if a.ndim == 1:
        if t != 1:
            raise ContractError(f"expected observations of dimension {t}")
        a = a[None, :, None]
    elif a.ndim == 2:
        if a.shape[1] != t:
            if t == 1:
                a = a[:, :, None]
                return a
            raise ContractError(f"expected {t} columns, got {a.shape[1]}")
        a = a[None]
    if a.ndim != 3 or a.shape[2] != t:
        raise ContractError(f"bad sample shape {np.shape(sample)}")
    if not np.all(np.isfinite(a)):
        raise ContractError("sample has non-finite entries")
    return a


class Family:
    tag: str = ""
    d: int = 1  # parameter dimension
    t: int = 1  # observation dimension
    min_n: int = 1

    def __init__(self):
        self._root = None
        self._vtilde = None

    # -- parameters / information --------------------------------------
    @property
    def theta0(self) -> np.ndarray:
        raise NotImplementedError

    def fisher(self) -> np.ndarray:
        raise NotImplementedError

    def root_info(self) -> np.ndarray:
        if self._root is None:
            self._root = sqrt_psd(self.fisher())
        return self._root

    def v_tilde(self) -> np.ndarray:
        if self._vtilde is None:
            self._vtilde = inv_sqrt_psd(self.fisher())
        return self._vtilde

    # -- data ------------------------------------------------------------
    def sample(self, gen, n: int, reps: int) -> np.ndarray:
        raise NotImplementedError

    def check_support(self, data: np.ndarray) -> None:
        pass

    def mle(self, data: np.ndarray) -> np.ndarray:
        """MLE per replicate; rows are NaN where the MLE does not exist."""
        raise NotImplementedError

    def draw_mle(self, gen, n: int, reps: int) -> np.ndarray:
        return self.mle(self.sample(gen, n, reps))

    def score(self, x: np.ndarray) -> np.ndarray:
        """Gradient of log f(x | theta0); x shaped (..., t), result (..., d)."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"tag": self.tag, "theta0": [float(v) for v in self.theta0]}


class ExpCanonical(Family):
    """Exp(rate) observations, rate parameter."""

    tag = EXP_CANONICAL

    def __init__(self, rate: float = 1.0):
        super().__init__()
        if not rate > 0:
            raise DomainError("rate must be positive")
        self.rate = float(rate)

    @property
    def theta0(self):
        return np.array([self.rate])

    def fisher(self):
        return np.array([[1.0 / self.rate**2]])

    def sample(self, gen, n, reps):
        return as_generator(gen).standard_exponential((reps, n, 1)) / self.rate

    def check_support(self, data):
        if np.any(data < 0):
            raise SupportError("exponential data must be non-negative")

    def mle(self, data):
        m = data.mean(axis=1)
        with np.errstate(divide="ignore"):
            return np.where(m > 0, 1.0 / m, np.nan)

    def draw_mle(self, gen, n, reps):
        # n * xbar * rate ~ Gamma(n, 1); scale coupling keeps W free of rate
        g = as_generator(gen).standard_gamma(n, reps)
        return (n * self.rate / g)[:, None]

    def score(self, x):
        return 1.0 / self.rate - np.asarray(x, dtype=float)


class ExpNonCanonical(Family):
    """Exp observations parametrised by the mean."""

    tag = EXP_NONCANONICAL

    def __init__(self, mean: float = 1.0):
        super().__init__()
        if not mean > 0:
            raise DomainError("mean must be positive")
        self.mean = float(mean)

    @property
    def theta0(self):
        return np.array([self.mean])

    def fisher(self):
        return np.array([[1.0 / self.mean**2]])

    def sample(self, gen, n, reps):
        return as_generator(gen).standard_exponential((reps, n, 1)) * self.mean

    def check_support(self, data):
        if np.any(data < 0):
            raise SupportError("exponential data must be non-negative")

    def mle(self, data):
        return data.mean(axis=1)

    def draw_mle(self, gen, n, reps):
        g = as_generator(gen).standard_gamma(n, reps)
        return (g * self.mean / n)[:, None]

    def score(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.mean**2


class NormalCanonical(Family):
    """N(mu, s2) in natural parameters eta = (1/(2 s2), mu/s2)."""

    tag = NORMAL_CANONICAL
    d = 2
    min_n = 2

    def __init__(self, eta1: float = 0.5, eta2: float = 1.0):
        super().__init__()
        if not eta1 > 0:
            raise DomainError("eta1 must be positive")
        self.eta1 = float(eta1)
        self.eta2 = float(eta2)

    @classmethod
    def from_mean_var(cls, mu, s2):
        return cls(1.0 / (2.0 * s2), mu / s2)

    @property
    def mu(self):
        return self.eta2 / (2.0 * self.eta1)

    @property
    def var(self):
        return 1.0 / (2.0 * self.eta1)

    @property
    def theta0(self):
        return np.array([self.eta1, self.eta2])

    def fisher(self):
        return normal_canonical_fisher(self.eta1, self.eta2)

    def sample(self, gen, n, reps):
        z = as_generator(gen).standard_normal((reps, n, 1))
        return self.mu + math.sqrt(self.var) * z

    def mle(self, data):
        xbar = data[:, :, 0].mean(axis=1)
        ss = np.sum((data[:, :, 0] - xbar[:, None]) ** 2, axis=1)
        return _normal_mle(data.shape[1], xbar, ss)

    def draw_mle(self, gen, n, reps):
        gen = as_generator(gen)
        xbar = self.mu + math.sqrt(self.var / n) * gen.standard_normal(reps)
        ss = self.var * gen.chisquare(n - 1, reps)
        return _normal_mle(n, xbar, ss)

    def score(self, x):
        x = np.asarray(x, dtype=float)[..., 0]
        e1, e2 = self.eta1, self.eta2
        g1 = 1.0 / (2 * e1) + e2**2 / (4 * e1**2) - x**2
        g2 = x - e2 / (2 * e1)
        return np.stack([g1, g2], axis=-1)


def normal_canonical_fisher(e1, e2):
    return (1.0 / (2.0 * e1)) * np.array([[1.0 / e1 + e2**2 / e1**2, -e2 / e1], [-e2 / e1, 1.0]])


def _normal_mle(n, xbar, ss):
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(ss > 0, n / ss, np.nan)
    return np.stack([0.5 * scale, scale * xbar], axis=-1)


class MvnDiagonal(Family):
    """Independent normal coordinates; theta = (mu_1..mu_p, s2_1..s2_p)."""

    tag = MVN_DIAGONAL
    min_n = 2

    def __init__(self, mu, s2):
        super().__init__()
        self.mu = np.atleast_1d(np.asarray(mu, dtype=float))
        self.s2 = np.atleast_1d(np.asarray(s2, dtype=float))
        if self.mu.shape != self.s2.shape or self.mu.ndim != 1:
            raise DomainError("mu and s2 must be vectors of equal length")
        if np.any(self.s2 <= 0):
            raise DomainError("variances must be positive")
        self.p = self.mu.size
        self.d = 2 * self.p
        self.t = self.p

    @classmethod
    def unit(cls, p):
        return cls(np.ones(p), np.ones(p))

    @property
    def theta0(self):
        return np.concatenate([self.mu, self.s2])

    def fisher(self):
        return np.diag(np.concatenate([1.0 / self.s2, 1.0 / (2.0 * self.s2**2)]))

    def root_info(self):
        return np.diag(np.concatenate([1.0 / np.sqrt(self.s2), 1.0 / (math.sqrt(2.0) * self.s2)]))

    def sample(self, gen, n, reps):
        z = as_generator(gen).standard_normal((reps, n, self.p))
        return self.mu + np.sqrt(self.s2) * z

    def mle(self, data):
        xbar = data.mean(axis=1)
        s2hat = np.mean((data - xbar[:, None, :]) ** 2, axis=1)
        s2hat = np.where(s2hat > 0, s2hat, np.nan)
        return np.concatenate([xbar, s2hat], axis=1)

    def draw_mle(self, gen, n, reps):
        gen = as_generator(gen)
        xbar = self.mu + np.sqrt(self.s2 / n) * gen.standard_normal((reps, self.p))
        s2hat = self.s2 * gen.chisquare(n - 1, (reps, self.p)) / n
        return np.concatenate([xbar, s2hat], axis=1)

    def score(self, x):
        x = np.asarray(x, dtype=float)
        r = x - self.mu
        return np.concatenate([r / self.s2, (r**2 - self.s2) / (2 * self.s2**2)], axis=-1)


class MvnGeneral(Family):
    """MVN(mu, Sigma) with theta = (mu, vech Sigma), vech row-major lower."""

    tag = MVN_GENERAL
    min_n = 2

    def __init__(self, mu, sigma):
        super().__init__()
        self.mu = np.atleast_1d(np.asarray(mu, dtype=float))
        self.sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        self.p = self.mu.size
        if self.sigma.shape != (self.p, self.p):
            raise DomainError("sigma shape does not match mu")
        self.chol = cholesky(self.sigma)
        self.t = self.p
        self.d = self.p + self.p * (self.p + 1) // 2

    @property
    def theta0(self):
        return np.concatenate([self.mu, vech(self.sigma)])

    def fisher(self):
        p = self.p
        prec = np.linalg.inv(self.sigma)
        D = duplication_matrix(p)
        cov_block = 0.5 * D.T @ np.kron(prec, prec) @ D
        out = np.zeros((self.d, self.d))
        out[:p, :p] = prec
        out[p:, p:] = cov_block
        return 0.5 * (out + out.T)

    def sample(self, gen, n, reps):
        z = as_generator(gen).standard_normal((reps, n, self.p))
        return self.mu + z @ self.chol.T

    def mle(self, data):
        reps, n, p = data.shape
        xbar = data.mean(axis=1)
        r = data - xbar[:, None, :]
        # same reduction as the diagonal family so the two agree exactly at p = 1
        cov = np.mean(r[:, :, :, None] * r[:, :, None, :], axis=1)
        idx = vech_indices(p)
        rows = np.array([i for i, _ in idx])
        cols = np.array([j for _, j in idx])
        out = np.concatenate([xbar, cov[:, rows, cols]], axis=1)
        bad = np.linalg.matrix_rank(cov) < p if n <= p else np.zeros(reps, dtype=bool)
        out[bad] = np.nan
        return out

    def score(self, x):
        x = np.asarray(x, dtype=float)
        prec = np.linalg.inv(self.sigma)
        r = (x - self.mu) @ prec
        outer = 0.5 * (np.einsum("...i,...j->...ij", r, r) - prec)
        idx = vech_indices(self.p)
        # d/d sigma_ij counts both symmetric entries off the diagonal
        g = [outer[..., i, j] * (1.0 if i == j else 2.0) for i, j in idx]
        return np.concatenate([r, np.stack(g, axis=-1)], axis=-1)


class InvGammaRateUnknown(Family):
    """Inverse-gamma(alpha0, beta) observations with the scale beta unknown."""

    tag = INVGAMMA_RATE

    def __init__(self, alpha0: float, beta0: float):
        super().__init__()
        if not (alpha0 > 0 and beta0 > 0):
            raise DomainError("inverse-gamma parameters must be positive")
        self.alpha0 = float(alpha0)
        self.beta0 = float(beta0)

    @property
    def theta0(self):
        return np.array([self.beta0])

    def fisher(self):
        return np.array([[self.alpha0 / self.beta0**2]])

    def sample(self, gen, n, reps):
        g = as_generator(gen).standard_gamma(self.alpha0, (reps, n, 1)) / self.beta0
        return 1.0 / g

    def check_support(self, data):
        if np.any(data <= 0):
            raise SupportError("inverse-gamma data must be positive")

    def mle(self, data):
        return data.shape[1] * self.alpha0 / np.sum(1.0 / data, axis=1)

    def draw_mle(self, gen, n, reps):
        # sum of reciprocals ~ Gamma(n alpha0, beta0)
        s = as_generator(gen).standard_gamma(n * self.alpha0, reps) / self.beta0
        return (n * self.alpha0 / s)[:, None]

    def score(self, x):
        return self.alpha0 / self.beta0 - 1.0 / np.asarray(x, dtype=float)

    def dominating(self, theta, n):
        """Dominating function for |l'''| of the n-sample log-likelihood."""
        return 2.0 * n * self.alpha0 / np.asarray(theta, dtype=float) ** 3


class InvGammaShapeUnknown(Family):
    """Inverse-gamma(alpha, beta0) observations with the shape alpha unknown."""

    tag = INVGAMMA_SHAPE

    def __init__(self, alpha0: float, beta0: float):
        super().__init__()
        if not (alpha0 > 0 and beta0 > 0):
            raise DomainError("inverse-gamma parameters must be positive")
        self.alpha0 = float(alpha0)
        self.beta0 = float(beta0)

    @property
    def theta0(self):
        return np.array([self.alpha0])

    def fisher(self):
        return np.array([[polygamma(1, self.alpha0)]])

    def sample(self, gen, n, reps):
        g = as_generator(gen).standard_gamma(self.alpha0, (reps, n, 1)) / self.beta0
        return 1.0 / g

    def check_support(self, data):
        if np.any(data <= 0):
            raise SupportError("inverse-gamma data must be positive")

    def mle(self, data):
        # score: n log(beta0) - n psi(alpha) - sum log x = 0
        y = -np.mean(np.log(data / self.beta0), axis=1)
        return np.asarray(inv_digamma(y)).reshape(-1, 1)

    def draw_mle(self, gen, n, reps):
        # log(1/X) summed needs the raw draws; chunk to bound memory
        gen = as_generator(gen)
        out = np.empty(reps)
        chunk = max(1, 2_000_000 // max(n, 1))
        for s in range(0, reps, chunk):
            m = min(chunk, reps - s)
            g = gen.standard_gamma(self.alpha0, (m, n))
            # X = beta0/g, so -mean log(X/beta0) = mean log g
            out[s:s + m] = inv_digamma(np.mean(np.log(g), axis=1))
        return out[:, None]

    def score(self, x):
        return math.log(self.beta0) - digamma(self.alpha0) - np.log(np.asarray(x, dtype=float))

    def dominating(self, theta, n):
        return -n * np.asarray(polygamma(2, np.asarray(theta, dtype=float)))


FAMILY_CLASSES = {
    EXP_CANONICAL: ExpCanonical,
    EXP_NONCANONICAL: ExpNonCanonical,
    NORMAL_CANONICAL: NormalCanonical,
    MVN_DIAGONAL: MvnDiagonal,
    MVN_GENERAL: MvnGeneral,
    INVGAMMA_RATE: InvGammaRateUnknown,
    INVGAMMA_SHAPE: InvGammaShapeUnknown,
}


# ---------------------------------------------------------------------------
# module-level operations


def mle_estimate(family: Family, sample) -> np.ndarray:
    data = _as_data(sample, family.t)
    if data.shape[0] != 1:
        raise ContractError("mle_estimate takes a single sample")
    family.check_support(data)
    n = data.shape[1]
    if n < family.min_n:
        raise DegenerateDataError(f"{family.tag} needs at least {family.min_n} observations")
    est = family.mle(data)[0]
    if not np.all(np.isfinite(est)):
        raise DegenerateDataError(f"{family.tag}: MLE does not exist for this sample")
    return est


def fisher_info(family: Family) -> np.ndarray:
    return family.fisher()


def standardize(family: Family, sample) -> np.ndarray:
    est = mle_estimate(family, sample)
    n = _as_data(sample, family.t).shape[1]
    return math.sqrt(n) * family.root_info() @ (est - family.theta0)


def standardize_batch(family: Family, est: np.ndarray, n: int) -> np.ndarray:
    return math.sqrt(n) * (est - family.theta0) @ family.root_info().T


@dataclass
class StandardizedSample:
    rows: np.ndarray
    n: int
    resampled: int = 0

    @property
    def N(self):
        return self.rows.shape[0]

    @property
    def d(self):
        return self.rows.shape[1]


def simulate_W(family: Family, n: int, N: int, stream, method: str = "auto") -> StandardizedSample:
    """N independent standardized MLEs, each from a fresh n-observation dataset.

    method "auto" uses exact sufficient-statistic sampling where available,
    "full" always simulates the raw observations.
    """
    if n < family.min_n:
        raise DomainError(f"{family.tag} needs n >= {family.min_n}")
    if N < 1:
        raise DomainError("N must be >= 1")
    gen = as_generator(stream)

    def draw(k):
        if method == "full":
            return family.mle(family.sample(gen, n, k))
        return family.draw_mle(gen, n, k)

    est = draw(N)
    ok = np.all(np.isfinite(est), axis=1)
    redraws = 0
    cap = 100 * N
    while not np.all(ok):
        missing = int(np.count_nonzero(~ok))
        redraws += missing
        if redraws > cap:
            raise DegenerateDataError("resample cap exceeded while simulating W")
        fresh = draw(missing)
        est[~ok] = fresh
        ok = np.all(np.isfinite(est), axis=1)
    return StandardizedSample(standardize_batch(family, est, n), n, redraws)


def score_transform(family: Family, observation) -> np.ndarray:
    """xi = Vtilde @ grad log f(x | theta0) for one or many observations.

    ``observation`` is shaped (t,) or (..., t); scalars are accepted for t == 1.
    """
    x = np.asarray(observation, dtype=float)
    if family.t == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != family.t:
        raise ContractError(f"observation must have {family.t} coordinates")
    family.check_support(x)
    return family.score(x) @ family.v_tilde().T
