"""Integration of pinned cumulant products against the operator kernel.

Every block orders its ``tau`` arguments and its ``s`` arguments separately,
so the support of a product is a Cartesian product of descending chains, each
with upper limit ``t``.  A chain ``u1 > u2 > ... > uL`` is mapped to the unit
cube by ``u1 = t x1, u_j = u_{j-1} x_j`` and integrated with tensor
Gauss-Legendre nodes; chains from different blocks are independent.  No
ordering indicator is ever sampled, so smooth integrands converge spectrally.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from tclgen.bath import BathModel, block_value
from tclgen.cumulants import BlockSpec, PinnedTerm, eval_pinned
from tclgen.linalg import superop_from_lr_batch
from tclgen.model import SystemModel, maximally_mixed_average, ordered_product

MAX_FREE_DIMENSIONS = 4


@dataclass(frozen=True)
class QuadratureSpec:
    nodes: int = 24
    rule: str = "gauss-legendre"

    def __post_init__(self):
        if int(self.nodes) != self.nodes or self.nodes < 4:
            raise ValueError(f"nodes_per_dimension must be an integer >= 4, got {self.nodes}")
        if self.rule != "gauss-legendre":
            raise ValueError(f"unsupported rule {self.rule!r}")


@lru_cache(maxsize=None)
def gauss_legendre_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=256)
def chain_rule(length: int, upper: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``(n**length, length)`` and weights for ``upper > u1 > ... > u_length > 0``."""
    x, w = gauss_legendre_unit(n)
    if length == 0:
        return np.zeros((1, 0)), np.ones(1)
    grids = np.meshgrid(*([x] * length), indexing="ij")
    wgrids = np.meshgrid(*([w] * length), indexing="ij")
    xs = np.stack([g.ravel() for g in grids], axis=1)
    weight = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    pts = upper * np.cumprod(xs, axis=1)
    # Jacobian upper^L * x1^(L-1) * x2^(L-2) * ...
    jac = upper ** length * np.prod(xs[:, :-1] ** np.arange(length - 1, 0, -1), axis=1)
    pts.setflags(write=False)
    return pts, weight * jac


def chains_of(blocks: Sequence[BlockSpec], pinned: Optional[str]) -> list[list[str]]:
    """Descending variable chains of a product, with the pinned variable removed."""
    chains = []
    for b in blocks:
        for chain in ([f"tau{i}" for i in b.tau], [f"s{i}" for i in b.s]):
            chain = [v for v in chain if v != pinned]
            if chain:
                chains.append(chain)
    return chains


def tensor_grid(chains: list[list[str]], t: float, n: int) -> tuple[dict, np.ndarray]:
    """Values of every chain variable on the product grid, plus the product weights."""
    rules = [chain_rule(len(c), float(t), n) for c in chains]
    sizes = [r[1].size for r in rules]
    total = int(np.prod(sizes)) if sizes else 1
    values: dict[str, np.ndarray] = {}
    weights = np.ones(total)
    for axis, (chain, (pts, w)) in enumerate(zip(chains, rules)):
        shape = [1] * len(chains)
        shape[axis] = sizes[axis]
        idx = np.broadcast_to(np.arange(sizes[axis]).reshape(shape), sizes).ravel()
        weights = weights * w[idx]
        for j, var in enumerate(chain):
            values[var] = pts[idx, j]
    return values, weights


def _operator_parts(m: SystemModel, times: dict, k: int, nk: int, size: int):
    left = ordered_product(m, [times[f"tau{i}"] for i in range(1, k + 1)])
    right = ordered_product(m, [times[f"s{i}"] for i in range(1, nk + 1)], dagger=True)
    d = m.dim
    return (np.broadcast_to(left, (size, d, d)), np.broadcast_to(right, (size, d, d)))


def _contract(coeffs, left, right, kernel: str):
    if kernel == "superop":
        return superop_from_lr_batch(coeffs, left, right)
    if kernel == "hamiltonian":
        # <A^dagger(s)>_{1/d} A(tau)
        return np.einsum("p,pij->ij", coeffs * maximally_mixed_average(right), left)
    raise ValueError(f"unknown kernel {kernel!r}")


def integrate_term(term: PinnedTerm, m: SystemModel, b: BathModel, t: float,
                   q: QuadratureSpec = QuadratureSpec(), kernel: str = "superop"):
    """Integral of one pinned product times ``A(tau) . A^dagger(s)`` over ``[0, t]^(n-1)``.

    With ``kernel="superop"`` returns the superoperator
    ``X -> int value * A(tau) X A^dagger(s)``; with ``kernel="hamiltonian"``
    returns the operator ``int value * <A^dagger(s)>_{1/d} A(tau)``.  Signs and
    powers of ``i`` from the generator formula are not included.
    """
    n, k = term.base.n, term.base.k
    if n - 1 > MAX_FREE_DIMENSIONS:
        raise ValueError(f"order {n} needs {n - 1} integration dimensions; "
                         f"at most {MAX_FREE_DIMENSIONS} are supported, use a lower order")
    chains = chains_of(term.base.blocks, term.pinned_variable)
    times, weights = tensor_grid(chains, t, q.nodes)
    value = np.broadcast_to(eval_pinned(term, times, t, b), weights.shape)
    times = dict(times)
    times[term.pinned_variable] = float(t)
    left, right = _operator_parts(m, times, k, n - k, weights.size)
    return _contract(weights * value, left, right, kernel)


def integrate_moment(m: SystemModel, b: BathModel, n: int, k: int, t: float,
                     q: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
    """``int D(tau, s) A(tau) . A^dagger(s)`` over both ordered chains (no sign, no pin)."""
    if n > MAX_FREE_DIMENSIONS:
        raise ValueError(f"moment of order {n} exceeds {MAX_FREE_DIMENSIONS} integration dimensions")
    block = BlockSpec(tuple(range(1, k + 1)), tuple(range(1, n - k + 1)))
    times, weights = tensor_grid(chains_of([block], None), t, q.nodes)
    value = block_value(b, [times[f"tau{i}"] for i in block.tau], [times[f"s{i}"] for i in block.s])
    left, right = _operator_parts(m, times, k, n - k, weights.size)
    return _contract(weights * np.broadcast_to(value, weights.shape), left, right, "superop")


def integral_convergence(term: PinnedTerm, m: SystemModel, b: BathModel, t: float,
                         node_counts: Sequence[int]) -> list[tuple[int, float]]:
    """Frobenius norm of ``integrate_term`` for each node count (ascending)."""
    counts = list(node_counts)
    if counts != sorted(counts):
        raise ValueError("node_counts must be ascending")
    return [(c, float(np.linalg.norm(integrate_term(term, m, b, t, QuadratureSpec(c)))))
            for c in counts]
