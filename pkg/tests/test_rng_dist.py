import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from mlewass.errors import DomainError, NotPSDError
from mlewass.rng_dist import (
    derive_stream,
    exp_abs_third_central,
    inv_chi2_moment,
    sample_gamma,
    sample_inv_gamma,
    sample_mvn,
    sample_std_normal,
)

COUNT = 100_000


def test_same_seed_same_draws():
    a = sample_std_normal(derive_stream(7, 0), 100)
    b = sample_std_normal(derive_stream(7, 0), 100)
    assert a.tobytes() == b.tobytes()


def test_distinct_index_or_seed_differs():
    first = sample_std_normal(derive_stream(7, 0), 1)[0]
    assert sample_std_normal(derive_stream(7, 1), 1)[0] != first
    assert sample_std_normal(derive_stream(8, 0), 1)[0] != first


def test_negative_seed_rejected():
    with pytest.raises(DomainError):
        derive_stream(-1, 0)


def test_normal_moments():
    z = sample_std_normal(derive_stream(11, 0), COUNT)
    assert -0.02 <= z.mean() <= 0.02
    assert 0.97 <= z.var() <= 1.03
    assert 0.494 <= np.mean(z <= 0) <= 0.506


def test_normal_single_draw_repeatable():
    assert sample_std_normal(derive_stream(3, 2), 1)[0] == sample_std_normal(derive_stream(3, 2), 1)[0]


def test_gamma_moments():
    g = sample_gamma(derive_stream(12, 0), 1.0, 1.0, COUNT)
    assert 0.99 <= g.mean() <= 1.01
    g = sample_gamma(derive_stream(12, 1), 3.0, 2.0, COUNT)
    se_mean = math.sqrt(0.75 / COUNT)
    assert abs(g.mean() - 1.5) < 4 * se_mean
    # variance of the sample variance for a gamma: (mu4 - sigma^4)/N, mu4 = 3(k+2)/r^4 * k
    k, r = 3.0, 2.0
    mu4 = 3 * k * (k + 2) / r**4
    se_var = math.sqrt((mu4 - 0.75**2) / COUNT)
    assert abs(g.var() - 0.75) < 4 * se_var


def test_inverse_gamma_mean():
    x = sample_inv_gamma(derive_stream(13, 0), 3.0, 2.0, COUNT)
    # Var = r^2/((k-1)^2 (k-2)) = 1
    assert abs(x.mean() - 1.0) < 4 * math.sqrt(1.0 / COUNT)


@pytest.mark.parametrize("shape,rate", [(0.0, 1.0), (1.0, 0.0), (-1.0, 2.0)])
def test_gamma_domain(shape, rate):
    with pytest.raises(DomainError):
        sample_gamma(derive_stream(1), shape, rate, 10)


def test_mvn_identity_and_scaling():
    x = sample_mvn(derive_stream(14, 0), [0, 0], np.eye(2), COUNT)
    assert np.max(np.abs(np.cov(x.T) - np.eye(2))) < 0.02
    x = sample_mvn(derive_stream(14, 1), [0, 0], np.diag([1.0, 4.0]), COUNT)
    assert 3.9 <= x[:, 1].var() <= 4.1
    x = sample_mvn(derive_stream(14, 2), [0, 0], [[1, 0.5], [0.5, 1]], COUNT)
    assert 0.48 <= np.corrcoef(x.T)[0, 1] <= 0.52


def test_mvn_indefinite():
    with pytest.raises(NotPSDError):
        sample_mvn(derive_stream(1), [0, 0], [[1, 2], [2, 1]], 5)


def test_inv_chi2_examples():
    assert inv_chi2_moment(10, 1) == pytest.approx(1 / 7, rel=1e-15)
    assert inv_chi2_moment(10, -1) == 9
    assert inv_chi2_moment(10, 0) == 1


def test_inv_chi2_domain():
    with pytest.raises(DomainError):
        inv_chi2_moment(3, 1)
    with pytest.raises(DomainError):
        inv_chi2_moment(1, -1)


def test_inv_chi2_against_gamma_integral():
    # V = 1/chi2_{n-1}: E[V^k] = 2^{-k} Gamma((n-1)/2 - k)/Gamma((n-1)/2)
    for n in (10, 15, 40):
        for k in (-3, -1, 1, 2, 4):
            if k > 0 and n <= 2 * k + 1:
                continue
            nu = (n - 1) / 2
            want = math.exp(-k * math.log(2) + math.lgamma(nu - k) - math.lgamma(nu))
            assert inv_chi2_moment(n, k) == pytest.approx(want, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=4, max_value=500))
def test_inv_chi2_cauchy_schwarz(n):
    assert inv_chi2_moment(n, 1) * inv_chi2_moment(n, -1) >= 1.0


def test_exp_abs_third():
    v = exp_abs_third_central(1.0)
    assert v < 2.41456
    assert v == pytest.approx(2.41455329405, abs=1e-10)
    assert exp_abs_third_central(2.0) == pytest.approx(v / 8, rel=1e-15)
    quad = integrate.quad(lambda x: abs(x - 1) ** 3 * math.exp(-x), 0, 1)[0] + integrate.quad(
        lambda x: (x - 1) ** 3 * math.exp(-x), 1, np.inf
    )[0]
    assert v == pytest.approx(quad, abs=1e-8)
    with pytest.raises(DomainError):
        exp_abs_third_central(0.0)
