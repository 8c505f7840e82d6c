"""Seeded random streams, samplers and a few closed-form moments.

Streams are Philox (counter based) generators keyed by
``(master_seed, stream_index)`` through numpy's SeedSequence, so any
number of independent streams can be derived without coordination.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError
from .linalg import cholesky


class RandomStream:
    """Single-owner random stream; do not share one across threads."""

    def __init__(self, master_seed: int, stream_index: int = 0):
        if master_seed < 0 or stream_index < 0:
            raise DomainError("seeds must be non-negative")
        self.master_seed = int(master_seed)
        self.stream_index = int(stream_index)
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_index,))
        self.generator = np.random.Generator(np.random.Philox(seq))

    def __repr__(self):
        return f"RandomStream(master_seed={self.master_seed}, stream_index={self.stream_index})"


def derive_stream(master_seed: int, stream_index: int = 0) -> RandomStream:
    return RandomStream(master_seed, stream_index)


def as_generator(stream) -> np.random.Generator:
    if isinstance(stream, RandomStream):
        return stream.generator
    if isinstance(stream, np.random.Generator):
        return stream
    raise TypeError(f"expected RandomStream, got {type(stream).__name__}")


def sample_std_normal(stream, count: int) -> np.ndarray:
    if count < 1:
        raise DomainError("count must be >= 1")
    return as_generator(stream).standard_normal(count)


def sample_gamma(stream, shape: float, rate: float, count: int) -> np.ndarray:
    """Gamma(shape, rate) draws, mean shape/rate."""
    if not (shape > 0 and rate > 0):
        raise DomainError(f"gamma needs shape > 0 and rate > 0, got ({shape}, {rate})")
    if count < 1:
        raise DomainError("count must be >= 1")
    return as_generator(stream).standard_gamma(shape, count) / rate


def sample_inv_gamma(stream, shape: float, rate: float, count: int) -> np.ndarray:
    """Inverse-gamma draws as reciprocals of Gamma(shape, rate) draws."""
    return 1.0 / sample_gamma(stream, shape, rate, count)


def sample_mvn(stream, mean, covariance, count: int) -> np.ndarray:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    L = cholesky(covariance)
    if L.shape[0] != mean.shape[0]:
        raise DomainError("mean and covariance dimensions differ")
    if count < 1:
        raise DomainError("count must be >= 1")
    z = as_generator(stream).standard_normal((count, mean.shape[0]))
    return mean + z @ L.T


def inv_chi2_moment(n: int, k: int) -> float:
    """E[V^k] for V ~ Inv-chi^2 with n-1 degrees of freedom.

    k > 0 needs n > 2k+1; k < 0 needs n > 1.
    """
    n = int(n)
    k = int(k)
    if k == 0:
        return 1.0
    if k > 0:
        if n <= 2 * k + 1:
            raise DomainError(f"E[V^{k}] needs n > {2 * k + 1}, got n={n}")
        den = 1.0
        for i in range(1, k + 1):
            den *= n - 2 * i - 1
        return 1.0 / den
    if n <= 1:
        raise DomainError("negative moments need n > 1")
    out = 1.0
    for i in range(-k):
        out *= n - 1 + 2 * i
    return out


def exp_abs_third_central(rate: float) -> float:
    """E|X - 1/rate|^3 for X ~ Exp(rate); equals (12/e - 2)/rate^3."""
    if not rate > 0:
        raise DomainError("rate must be positive")
    return (12.0 / math.e - 2.0) / rate**3
