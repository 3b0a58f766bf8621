"""Dense operator and superoperator algebra.

Vectorization is column stacking everywhere in this package: component
``i + d*j`` of ``vectorize(X)`` is ``X[i, j]``.  Under this convention the
superoperator ``X -> L @ X @ R`` is ``kron(R.T, L)``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


def _scale(x) -> float:
    return max(1.0, float(np.max(np.abs(x)))) if np.size(x) else 1.0


def is_hermitian(x: np.ndarray, tol: float = 1e-12) -> bool:
    x = np.asarray(x)
    return bool(np.max(np.abs(x - x.conj().T)) <= tol * _scale(x))


def dag(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.conj(x), -1, -2)


def vectorize(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=complex).reshape(-1, order="F")


def devectorize(v: np.ndarray, d: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if d is None:
        d = int(round(np.sqrt(v.size)))
    return v.reshape((d, d), order="F")


def apply(s: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Act with superoperator ``s`` on operator ``x``."""
    x = np.asarray(x, dtype=complex)
    return devectorize(s @ vectorize(x), x.shape[0])


def superop_from_lr(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> left @ X @ right``."""
    left = np.asarray(left, dtype=complex)
    right = np.asarray(right, dtype=complex)
    if left.shape != right.shape or left.ndim != 2 or left.shape[0] != left.shape[1]:
        raise ValueError(f"dimension mismatch: {left.shape} vs {right.shape}")
    return np.kron(right.T, left)


def superop_from_lr_batch(coeffs: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """``sum_p coeffs[p] * superop_from_lr(left[p], right[p])`` without forming each term."""
    d = left.shape[-1]
    s = np.einsum("p,pij,pba->aibj", coeffs, left, right, optimize=True)
    return s.reshape(d * d, d * d)


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> -i [h, X]``."""
    one = np.eye(h.shape[0])
    return -1j * (superop_from_lr(h, one) - superop_from_lr(one, h))


def unitary_superop(u: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> u X u^dagger``."""
    return superop_from_lr(u, u.conj().T)


@lru_cache(maxsize=16)
def _gellmann(d: int) -> tuple[np.ndarray, ...]:
    mats = []
    for j in range(d):
        for k in range(j + 1, d):
            g = np.zeros((d, d), dtype=complex)
            g[j, k] = g[k, j] = 1 / np.sqrt(2)
            mats.append(g)
    for j in range(d):
        for k in range(j + 1, d):
            g = np.zeros((d, d), dtype=complex)
            g[j, k] = -1j / np.sqrt(2)
            g[k, j] = 1j / np.sqrt(2)
            mats.append(g)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        mats.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    for g in mats:
        g.setflags(write=False)
    return tuple(mats)


def orthonormal_traceless_basis(d: int) -> list[np.ndarray]:
    """Generalized Gell-Mann matrices normalized to ``Tr(G_i G_j) = delta_ij``.

    Ordering: symmetric pairs, antisymmetric pairs, then diagonal, each in
    ascending index order.  For ``d = 2`` this is ``(sx, sy, sz) / sqrt(2)``.
    """
    if d < 2:
        raise ValueError(f"need d >= 2, got {d}")
    return list(_gellmann(d))


def full_basis(d: int) -> list[np.ndarray]:
    """``[1/sqrt(d)] + orthonormal_traceless_basis(d)``."""
    return [np.eye(d, dtype=complex) / np.sqrt(d)] + orthonormal_traceless_basis(d)


def superop_coefficients(s: np.ndarray, basis: list[np.ndarray], tol: float = 1e-10) -> np.ndarray:
    """Coefficients ``c`` with ``S[X] = sum_ab c[a, b] G_a X G_b``.

    ``basis`` must be Hilbert-Schmidt orthonormal.  The products
    ``superop_from_lr(G_a, G_b)`` are then orthonormal in the space of
    superoperators, so ``c`` is a plain projection.
    """
    g = np.asarray(basis, dtype=complex)
    n = g.shape[0]
    gram = np.einsum("aji,bji->ab", g.conj(), g)
    if np.max(np.abs(gram - np.eye(n))) > tol:
        raise ValueError("basis is not orthonormal under the Hilbert-Schmidt inner product")
    d = g.shape[1]
    s4 = np.asarray(s, dtype=complex).reshape(d, d, d, d)  # [a, i, b, j]: row a*d+i, col b*d+j
    # <kron(Gb^T, Ga), S> = sum conj(Gb[b', a']) conj(Ga[i, j]) S[(a', i), (b', j)]
    return np.einsum("xij,yba,aibj->xy", g.conj(), g.conj(), s4, optimize=True)


def reassemble(c: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    g = np.asarray(basis, dtype=complex)
    d = g.shape[1]
    s = np.einsum("xy,xij,yba->aibj", c, g, g, optimize=True)
    return s.reshape(d * d, d * d)
