"""Small dense symmetric-matrix helpers (Fisher roots, factorizations, norms)."""
from __future__ import annotations

import numpy as np

from .errors import DomainError, NotPSDError, SingularError

CLAMP_REL = 1e-12
PIVOT_REL = 1e-12


def _as_symmetric(m) -> np.ndarray:
    a = np.atleast_2d(np.asarray(m, dtype=float))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    # upper triangle is authoritative
    up = np.triu(a)
    return up + np.triu(a, 1).T


def cholesky(m) -> np.ndarray:
    """Lower factor L with L @ L.T == m for PSD m.

    Pivots within PIVOT_REL * max(diag) of zero are treated as exact zeros
    (semi-definite input); a more negative pivot raises NotPSDError.
    """
    a = _as_symmetric(m)
    d = a.shape[0]
    tol = PIVOT_REL * max(float(np.max(np.abs(np.diag(a)))), 0.0)
    L = np.zeros_like(a)
    for j in range(d):
        piv = a[j, j] - L[j, :j] @ L[j, :j]
        if piv < -tol:
            raise NotPSDError(f"negative pivot {piv:.3g} at column {j}")
        if piv <= tol:
            # zero column; the remaining entries of this column must vanish too
            # PSD forces |rest_i|^2 <= pivot * (remaining diagonal)
            rest = a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]
            room = np.sqrt(max(tol, 0.0) * np.maximum(np.diag(a)[j + 1:], 0.0))
            if np.any(np.abs(rest) > 4.0 * room):
                raise NotPSDError(f"zero pivot with non-zero column at {j}")
            continue
        L[j, j] = np.sqrt(piv)
        L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def eigh_sym(m):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    return np.linalg.eigh(_as_symmetric(m))


def _clamped_eigs(m):
    w, v = eigh_sym(m)
    rho = float(np.max(np.abs(w))) if w.size else 0.0
    if w.size and w[0] < -CLAMP_REL * rho:
        raise NotPSDError(f"smallest eigenvalue {w[0]:.3g} is negative")
    return np.clip(w, 0.0, None), v, rho


def sqrt_psd(m) -> np.ndarray:
    w, v, _ = _clamped_eigs(m)
    s = (v * np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)


def inv_sqrt_psd(m) -> np.ndarray:
    w, v, rho = _clamped_eigs(m)
    if rho == 0.0 or w[0] <= CLAMP_REL * rho:
        raise SingularError("matrix is singular to working precision")
    s = (v / np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)


def frobenius_norm(m) -> float:
    return float(np.sqrt(np.sum(np.square(np.asarray(m, dtype=float)))))


def max_abs_norm(m) -> float:
    a = np.asarray(m, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


def vech_indices(p: int):
    """Row-major lower-triangle index pairs (i, j), j <= i."""
    return [(i, j) for i in range(p) for j in range(i + 1)]


def vech(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    return np.array([a[i, j] for i, j in vech_indices(a.shape[0])])


def unvech(v, p: int) -> np.ndarray:
    out = np.zeros((p, p))
    for k, (i, j) in enumerate(vech_indices(p)):
        out[i, j] = out[j, i] = v[k]
    return out


def duplication_matrix(p: int) -> np.ndarray:
    """D with vec(S) = D @ vech(S) (vec column-major, vech row-major lower)."""
    idx = vech_indices(p)
    D = np.zeros((p * p, len(idx)))
    for k, (i, j) in enumerate(idx):
        D[i + j * p, k] = 1.0
        D[j + i * p, k] = 1.0
    return D
