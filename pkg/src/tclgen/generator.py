"""Perturbative TCL generator, its canonical decomposition and the effective Hamiltonian."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from tclgen.bath import BathModel
from tclgen.cumulants import VanishingRule, cumulant_terms, pin_terms
from tclgen.linalg import (apply, commutator_superop, full_basis, orthonormal_traceless_basis,
                           superop_coefficients, superop_from_lr, vectorize)
from tclgen.model import SystemModel, traceless_part
from tclgen.quadrature import QuadratureSpec, integrate_term

MAX_ORDER = 4


class IdentityViolation(ValueError):
    """A superoperator failed one of the structural identities of a TCL generator."""

    def __init__(self, identity: str, residual: float, tol: float):
        self.identity = identity
        self.residual = residual
        super().__init__(f"{identity} violated: residual {residual:.3e} > {tol:.1e}")


def _rule(suppression) -> str:
    return VanishingRule(suppression).value


def _check_order(n: int, limit: int = MAX_ORDER) -> None:
    if not 1 <= n <= limit:
        raise ValueError(f"order {n} outside the supported range 1..{limit}")


def parallel_map(fn: Callable, items: Iterable, threads: int = 1) -> list:
    """Order-preserving map, optionally on a thread pool."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def build_Ln(m: SystemModel, b: BathModel, n: int, t: float,
             q: QuadratureSpec = QuadratureSpec(), suppression="none") -> np.ndarray:
    """Order-``n`` generator ``L_n(t)`` (without the factor ``lam**n``), interaction picture."""
    _check_order(n)
    rule = _rule(suppression)
    d = m.dim
    out = np.zeros((d * d, d * d), dtype=complex)
    for k in range(n + 1):
        pref = 1j ** n * (-1) ** k
        for pt in pin_terms(cumulant_terms(n, k, rule)):
            out += pref * integrate_term(pt, m, b, t, q)
    return out


def build_generator(m: SystemModel, b: BathModel, max_order: int, t: float,
                    q: QuadratureSpec = QuadratureSpec(), suppression="none") -> np.ndarray:
    """``sum_{n<=N} lam^n L_n(t)``."""
    _check_order(max_order)
    d = m.dim
    out = np.zeros((d * d, d * d), dtype=complex)
    if m.lam == 0:
        return out
    for n in range(1, max_order + 1):
        out += m.lam ** n * build_Ln(m, b, n, t, q, suppression)
    return out


@dataclass
class GeneratorSeries:
    """``L_n(t)`` for ``n = 1..max_order`` on a time grid."""

    orders: dict[int, np.ndarray]
    lam: float
    max_order: int
    time_grid: np.ndarray

    def total(self) -> np.ndarray:
        return sum(self.lam ** n * L for n, L in self.orders.items())

    def identity_residuals(self, rng: np.random.Generator, samples: int = 10) -> dict[str, float]:
        """Worst relative trace and Hermiticity residuals over orders, grid and random ``X``."""
        return identity_residuals([L for Ls in self.orders.values() for L in Ls], rng, samples)


def identity_residuals(superops: Iterable[np.ndarray], rng: np.random.Generator,
                       samples: int = 10) -> dict[str, float]:
    """``max |Tr L[X]| / |X|_F`` and ``max |L[X^dagger] - L[X]^dagger| / |X|_F``."""
    trace_res = herm_res = 0.0
    for L in superops:
        d = int(round(np.sqrt(L.shape[0])))
        for _ in range(samples):
            x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            nx = np.linalg.norm(x)
            y = apply(L, x)
            trace_res = max(trace_res, abs(np.trace(y)) / nx)
            herm_res = max(herm_res, float(np.max(np.abs(apply(L, x.conj().T) - y.conj().T))) / nx)
    return {"trace_annihilation": trace_res, "hermiticity_preservation": herm_res}


def build_series(m: SystemModel, b: BathModel, max_order: int, time_grid: Sequence[float],
                 q: QuadratureSpec = QuadratureSpec(), suppression="none",
                 threads: int = 1) -> GeneratorSeries:
    _check_order(max_order)
    grid = np.asarray(time_grid, dtype=float)

    def at(t):
        return [build_Ln(m, b, n, t, q, suppression) for n in range(1, max_order + 1)]

    per_time = parallel_map(at, grid, threads)
    orders = {n: np.array([row[n - 1] for row in per_time]) for n in range(1, max_order + 1)}
    return GeneratorSeries(orders=orders, lam=m.lam, max_order=max_order, time_grid=grid)


@dataclass
class CanonicalForm:
    """``L[X] = -i[K, X] + sum_ij gamma_ij (G_i X G_j - 1/2 {G_j G_i, X})`` with traceless ``G``."""

    K: np.ndarray
    gamma: np.ndarray
    basis: list[np.ndarray] = field(repr=False)
    canonical_rates: np.ndarray = None

    def __post_init__(self):
        if self.canonical_rates is None:
            herm = (self.gamma + self.gamma.conj().T) / 2
            self.canonical_rates = np.sort(np.linalg.eigvalsh(herm))[::-1]


def canonical_reassemble(K: np.ndarray, gamma: np.ndarray, basis: Sequence[np.ndarray]) -> np.ndarray:
    d = K.shape[0]
    one = np.eye(d)
    out = commutator_superop(K)
    for i, gi in enumerate(basis):
        for j, gj in enumerate(basis):
            if gamma[i, j] == 0:
                continue
            gjd = gj.conj().T
            out = out + gamma[i, j] * (superop_from_lr(gi, gjd)
                                       - 0.5 * superop_from_lr(gjd @ gi, one)
                                       - 0.5 * superop_from_lr(one, gjd @ gi))
    return out


def canonical_decompose(s: np.ndarray, tol: float = 1e-8) -> CanonicalForm:
    """Minimal-dissipation decomposition of a trace-annihilating, Hermiticity-preserving ``s``.

    Over the basis ``{1/sqrt(d), G_1, ...}`` write ``S[X] = sum c_ab G_a X G_b``.
    The traceless block of ``c`` is the rate matrix; the ``G_a X 1`` column gives
    ``W = c_a0 G_a / sqrt(d) + c_00 / 2d`` and ``K = (W^dagger - W) / 2i``.
    """
    s = np.asarray(s, dtype=complex)
    d = int(round(np.sqrt(s.shape[0])))
    scale = max(1.0, float(np.max(np.abs(s))))
    trace_row = vectorize(np.eye(d)).conj() @ s
    res = float(np.max(np.abs(trace_row)))
    if res > tol * scale:
        raise IdentityViolation("trace annihilation", res, tol * scale)
    basis = full_basis(d)
    c = superop_coefficients(s, basis)
    res = float(np.max(np.abs(c - c.conj().T)))
    if res > tol * scale:
        raise IdentityViolation("Hermiticity preservation", res, tol * scale)
    g = np.asarray(basis[1:])
    w = np.einsum("a,aij->ij", c[1:, 0], g) / np.sqrt(d) + c[0, 0] / (2 * d) * np.eye(d)
    K = traceless_part((w.conj().T - w) / 2j)
    return CanonicalForm(K=K, gamma=c[1:, 1:].copy(), basis=list(basis[1:]))


def _hermitian_part(x):
    return (x + x.conj().T) / 2


def _antihermitian_part(x):
    return (x - x.conj().T) / 2j


def partial_hamiltonians(m: SystemModel, b: BathModel, n: int, t: float,
                         q: QuadratureSpec = QuadratureSpec(), suppression="none") -> list[np.ndarray]:
    """``K_n^k = (-1)^k int D(tau, s) <A^dagger(s)>_{1/d} A(tau)`` for ``k = 0..n``."""
    rule = _rule(suppression)
    out = []
    for k in range(n + 1):
        acc = np.zeros((m.dim, m.dim), dtype=complex)
        for pt in pin_terms(cumulant_terms(n, k, rule)):
            acc += integrate_term(pt, m, b, t, q, kernel="hamiltonian")
        out.append((-1) ** k * acc)
    return out


def effective_H_direct(m: SystemModel, b: BathModel, n: int, t: float,
                       q: QuadratureSpec = QuadratureSpec(), suppression="none") -> np.ndarray:
    """Order-``n`` effective Hamiltonian from the partial contributions.

    Even orders keep the anti-Hermitian part, odd orders the Hermitian part:
    ``K_2m = (-1)^(m+1) sum_k Im K_2m^k`` and ``K_2m+1 = (-1)^(m+1) sum_k Re K_2m+1^k``
    with ``Im X = (X - X^dagger)/2i`` and ``Re X = (X + X^dagger)/2``.
    """
    _check_order(n)
    total = sum(partial_hamiltonians(m, b, n, t, q, suppression))
    half = n // 2
    if n % 2 == 0:
        k = (-1) ** (half + 1) * _antihermitian_part(total)
    else:
        k = (-1) ** (half + 1) * _hermitian_part(total)
    return traceless_part(k)


def effective_hamiltonian(m: SystemModel, b: BathModel, max_order: int, t: float,
                          q: QuadratureSpec = QuadratureSpec(), suppression="none") -> np.ndarray:
    """``sum_{n<=N} lam^n K_n(t)`` (interaction picture, traceless)."""
    return sum(m.lam ** n * effective_H_direct(m, b, n, t, q, suppression)
               for n in range(1, max_order + 1))


def canonical_rates_over_time(m: SystemModel, b: BathModel, max_order: int,
                              time_grid: Sequence[float], q: QuadratureSpec = QuadratureSpec(),
                              suppression="none", threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Descending eigenvalues of the rate matrix at each grid time.

    No eigenvalue tracking is attempted across times: crossings appear as-is.
    """
    grid = np.asarray(time_grid, dtype=float)

    def at(t):
        return canonical_decompose(build_generator(m, b, max_order, t, q, suppression)).canonical_rates

    return grid, np.array(parallel_map(at, grid, threads))


def rate_sign_changes(time_grid: Sequence[float], rates: np.ndarray,
                      tol: float = 1e-10) -> list[tuple[float, int]]:
    """``(t, slot)`` wherever descending eigenvalue ``slot`` goes from ``> tol`` to ``< -tol``.

    An eigenvalue that leaves zero with a negative sign (common at ``t -> 0``
    for non-secular couplings) is not a sign change: it never was positive.
    """
    grid = np.asarray(time_grid, dtype=float)
    rates = np.asarray(rates, dtype=float)
    out = []
    for j in range(1, grid.size):
        for slot in range(rates.shape[1]):
            if rates[j - 1, slot] > tol and rates[j, slot] < -tol:
                out.append((float(grid[j]), slot))
    return out


def traceless_basis(d: int) -> list[np.ndarray]:
    return orthonormal_traceless_basis(d)
