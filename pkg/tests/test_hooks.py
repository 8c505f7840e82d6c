import numpy as np
import pytest

from mlewass.errors import DomainError
from mlewass.hooks import (
    check_dominating,
    exp_canonical_hooks,
    exp_noncanonical_hooks,
    invgamma_rate_hooks,
    invgamma_shape_hooks,
    mvn_diagonal_hooks,
    normal_canonical_hooks,
)
from mlewass.mle_families import (
    InvGammaRateUnknown,
    InvGammaShapeUnknown,
    MvnDiagonal,
    NormalCanonical,
)

CASES = [
    ("exp-canonical", exp_canonical_hooks, np.array([1.0])),
    ("exp-noncanonical", exp_noncanonical_hooks, np.array([1.0])),
    ("normal-canonical", normal_canonical_hooks, np.array([0.5, 1.0])),
    ("mvn-diag", lambda: mvn_diagonal_hooks(MvnDiagonal(np.array([0.3, -1.0]), np.array([1.5, 0.5]))),
     np.array([0.3, -1.0, 1.5, 0.5])),
    ("invgamma-rate", lambda: invgamma_rate_hooks(InvGammaRateUnknown(3.0, 1.0)), np.array([1.0])),
    ("invgamma-shape", lambda: invgamma_shape_hooks(InvGammaShapeUnknown(2.0, 1.0)), np.array([2.0])),
]


@pytest.mark.parametrize("name,make,theta0", CASES, ids=[c[0] for c in CASES])
def test_shapes(name, make, theta0):
    h = make()
    d = h.d
    assert theta0.size == d
    data = h.sample(np.random.default_rng(0), 20, 3)
    assert data.shape[:2] == (3, 20)
    assert h.grad(theta0, data).shape == (3, 20, d)
    assert h.hessian(theta0, data).shape == (3, 20, d, d)
    assert h.third(theta0, data).shape == (3, 20, d, d, d)
    thetas = np.broadcast_to(theta0, (3, d)).copy()
    assert h.dominating(thetas, data).shape == (3, d, d, d)
    assert h.mle(data).shape == (3, d)
    assert np.asarray(h.fisher(theta0)).shape == (d, d)


@pytest.mark.parametrize("name,make,theta0", CASES, ids=[c[0] for c in CASES])
def test_dominating_spot_check(name, make, theta0):
    # spread kept small enough that every perturbed parameter stays valid
    worst = check_dominating(make(), theta0, 30, np.random.default_rng(1), trials=40, spread=0.3)
    assert worst <= 1.0 + 1e-12


@pytest.mark.parametrize("name,make,theta0", CASES, ids=[c[0] for c in CASES])
def test_score_mean_zero_and_information(name, make, theta0):
    h = make()
    data = h.sample(np.random.default_rng(2), 200_000, 1)
    g = h.grad(theta0, data)[0]
    hess = h.hessian(theta0, data)[0]
    fisher = np.asarray(h.fisher(theta0))
    se = g.std(axis=0) / np.sqrt(g.shape[0])
    assert np.all(np.abs(g.mean(axis=0)) < 5 * se + 1e-12)
    # information equality: Cov(score) = -E[hessian] = I
    cov = np.cov(g.T).reshape(fisher.shape)
    np.testing.assert_allclose(cov, fisher, rtol=0.05, atol=0.02 * np.max(np.abs(fisher)))
    np.testing.assert_allclose(-hess.mean(axis=0), fisher, rtol=0.05, atol=0.02 * np.max(np.abs(fisher)))


@pytest.mark.parametrize("name,make,theta0", CASES, ids=[c[0] for c in CASES])
def test_derivatives_by_finite_differences(name, make, theta0):
    h = make()
    x = h.sample(np.random.default_rng(3), 4, 1)[0]
    d = h.d
    step = 1e-6
    for k in range(d):
        e = np.zeros(d)
        e[k] = step * max(1.0, abs(theta0[k]))
        dg = (h.grad(theta0 + e, x) - h.grad(theta0 - e, x)) / (2 * e[k])
        np.testing.assert_allclose(dg, h.hessian(theta0, x)[:, :, k], rtol=1e-5, atol=1e-5)
        dh = (h.hessian(theta0 + e, x) - h.hessian(theta0 - e, x)) / (2 * e[k])
        np.testing.assert_allclose(dh, h.third(theta0, x)[:, :, :, k], rtol=1e-5, atol=1e-5)


def test_normal_canonical_hessian_is_deterministic():
    h = normal_canonical_hooks(NormalCanonical(0.5, 1.0))
    theta = np.array([0.5, 1.0])
    x = h.sample(np.random.default_rng(4), 50, 2)
    hess = h.hessian(theta, x)
    np.testing.assert_array_equal(hess + np.asarray(h.fisher(theta)), 0.0)


def test_check_dominating_needs_third():
    import dataclasses

    h = dataclasses.replace(exp_canonical_hooks(), third=None)
    with pytest.raises(DomainError):
        check_dominating(h, np.array([1.0]), 10, np.random.default_rng(0))


def test_check_dominating_detects_violation():
    import dataclasses

    h = exp_canonical_hooks()
    weak = dataclasses.replace(h, dominating=lambda th, data: 0.5 * h.dominating(th, data))
    worst = check_dominating(weak, np.array([1.0]), 10, np.random.default_rng(0), trials=5)
    assert worst > 1.0
