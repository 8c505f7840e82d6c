import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlewass import linalg
from mlewass.bounds import normal_canonical_vtilde
from mlewass.errors import NotPSDError, SingularError


def test_cholesky_examples():
    assert np.array_equal(linalg.cholesky(np.eye(3)), np.eye(3))
    L = linalg.cholesky([[4.0, 2.0], [2.0, 2.0]])
    assert np.allclose(L, [[2, 0], [1, 1]], atol=1e-15)
    with pytest.raises(NotPSDError):
        linalg.cholesky([[1.0, 2.0], [2.0, 1.0]])


def test_cholesky_semidefinite():
    v = np.array([1.0, 2.0, 3.0])
    m = np.outer(v, v)
    L = linalg.cholesky(m)
    assert np.max(np.abs(L @ L.T - m)) <= 1e-10 * np.max(np.abs(m))


def test_upper_triangle_authoritative():
    m = np.array([[4.0, 2.0], [99.0, 2.0]])
    assert np.allclose(linalg.cholesky(m), [[2, 0], [1, 1]])


def test_sqrt_examples():
    assert np.allclose(linalg.sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    assert np.allclose(linalg.sqrt_psd(np.eye(4)), np.eye(4), atol=1e-14)


def test_inv_sqrt_normal_fisher():
    info = np.array([[6.0, -2.0], [-2.0, 1.0]])
    S = linalg.inv_sqrt_psd(info)
    want = np.array([[0.54452, 0.45109], [0.45109, 1.67226]])
    assert np.max(np.abs(S - want)) < 1e-4
    # independent closed form
    assert np.max(np.abs(S - normal_canonical_vtilde(0.5, 1.0))) < 1e-12
    assert np.max(np.abs(S @ S - np.linalg.inv(info))) < 1e-9


def test_singular_and_indefinite():
    with pytest.raises(SingularError):
        linalg.inv_sqrt_psd(np.diag([1.0, 0.0]))
    with pytest.raises(NotPSDError):
        linalg.sqrt_psd([[1.0, 2.0], [2.0, 1.0]])


def test_norms():
    m = np.array([[3.0, 4.0], [4.0, 0.0]])
    assert linalg.frobenius_norm(m) == pytest.approx(np.sqrt(41))
    assert linalg.max_abs_norm(m) == 4
    assert linalg.frobenius_norm(np.eye(5)) == pytest.approx(np.sqrt(5))
    assert linalg.max_abs_norm(np.eye(5)) == 1
    assert linalg.frobenius_norm(np.zeros((3, 3))) == 0
    assert linalg.max_abs_norm(np.zeros((3, 3))) == 0


def test_vech_round_trip_and_duplication():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 4))
    S = A + A.T
    v = linalg.vech(S)
    assert v.size == 10
    assert np.array_equal(linalg.unvech(v, 4), S)
    D = linalg.duplication_matrix(4)
    assert np.allclose(D @ v, S.reshape(-1, order="F"))


@st.composite
def psd_matrices(draw):
    d = draw(st.integers(min_value=1, max_value=10))
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    A = np.random.default_rng(seed).normal(size=(d, d))
    return A @ A.T + 1e-6 * np.eye(d)


@settings(max_examples=80, deadline=None)
@given(psd_matrices())
def test_roots_property(m):
    R = linalg.sqrt_psd(m)
    assert np.max(np.abs(R @ R - m)) <= 1e-9 * max(1.0, np.max(np.abs(m)))
    assert np.allclose(R, R.T)
    V = linalg.inv_sqrt_psd(m)
    assert np.max(np.abs(V @ m @ V - np.eye(m.shape[0]))) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(psd_matrices())
def test_eigh_reconstruction(m):
    w, Q = linalg.eigh_sym(m)
    rho = np.max(np.abs(w))
    assert np.max(np.abs(Q @ np.diag(w) @ Q.T - m)) <= 1e-10 * max(rho, 1.0)


@settings(max_examples=60, deadline=None)
@given(psd_matrices())
def test_cholesky_property(m):
    L = linalg.cholesky(m)
    assert np.allclose(L, np.tril(L))
    assert np.max(np.abs(L @ L.T - m)) <= 1e-10 * np.max(np.abs(m))
