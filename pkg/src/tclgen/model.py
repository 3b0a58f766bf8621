"""System side of the model: free Hamiltonian, coupling operator, coupling strength."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from tclgen.linalg import is_hermitian


@dataclass(frozen=True)
class SystemModel:
    """Time-independent ``H_S`` and Hermitian coupling operator ``A``.

    The total Hamiltonian is ``H_S + H_E + lam * A (x) B``.  ``a_of_t`` may be
    supplied to override the interaction-picture operator with an arbitrary
    callable ``t -> A_t`` (it must accept a 1-D array of times and return an
    array of shape ``(len(t), d, d)``).
    """

    H: np.ndarray
    A: np.ndarray
    lam: float = 1.0
    a_of_t: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        H = np.array(self.H, dtype=complex)
        A = np.array(self.A, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError(f"H must be square, got shape {H.shape}")
        if A.shape != H.shape:
            raise ValueError(f"A has shape {A.shape}, H has shape {H.shape}")
        if not is_hermitian(H, 1e-12):
            raise ValueError("H is not Hermitian")
        if not is_hermitian(A, 1e-12):
            raise ValueError("A is not Hermitian")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lam must be a finite non-negative number, got {self.lam}")
        H.setflags(write=False)
        A.setflags(write=False)
        energies, vecs = np.linalg.eigh(H)
        a_eig = vecs.conj().T @ A @ vecs
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "_energies", energies)
        object.__setattr__(self, "_vecs", vecs)
        object.__setattr__(self, "_a_eig", a_eig)

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def free_unitary(self, t: float) -> np.ndarray:
        """``exp(-i H t)``."""
        return (self._vecs * np.exp(-1j * self._energies * t)) @ self._vecs.conj().T


def interaction_picture_A(m: SystemModel, t):
    """``A_t = exp(iHt) A exp(-iHt)``; ``t`` may be a scalar or 1-D array."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if m.a_of_t is not None:
        out = np.asarray(m.a_of_t(ts), dtype=complex)
    else:
        phase = np.exp(1j * np.subtract.outer(m._energies, m._energies)[None] * ts[:, None, None])
        out = m._vecs @ (m._a_eig[None] * phase) @ m._vecs.conj().T
    return out[0] if np.ndim(t) == 0 else out


def ordered_product(m: SystemModel, times: Sequence, dagger: bool = False) -> np.ndarray:
    """``A_{t1} A_{t2} ... A_{tk}``, or the reversed product when ``dagger``.

    No ordering is imposed on ``times``.  Entries may be scalars or equal-length
    arrays, in which case a batch of products is returned.
    """
    if len(times) == 0:
        return np.eye(m.dim, dtype=complex)
    seq = list(reversed(times)) if dagger else list(times)
    out = interaction_picture_A(m, seq[0])
    for t in seq[1:]:
        out = out @ interaction_picture_A(m, t)
    return out


def maximally_mixed_average(x: np.ndarray):
    """``Tr(X) / d``; batched over leading axes."""
    x = np.asarray(x)
    return np.trace(x, axis1=-2, axis2=-1) / x.shape[-1]


def traceless_part(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    d = x.shape[-1]
    return x - maximally_mixed_average(x)[..., None, None] * np.eye(d)


def pauli() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return sx, sy, sz


def qubit_model(omega: float, coupling: str = "x", lam: float = 1.0) -> SystemModel:
    """Qubit with ``H_S = omega sz / 2`` coupled through ``sx`` or ``sz``."""
    sx, _, sz = pauli()
    A = {"x": sx, "z": sz}[coupling]
    return SystemModel(H=0.5 * omega * sz, A=A, lam=lam)


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (x + x.conj().T) / 2
