"""Closed-form effective Hamiltonians at orders 1-4, written out term by term.

These do not touch the cumulant engine: the integrands are assembled from
explicit bath moments and operator products, and the square/cube domains are
split into all ``m!`` orderings so each piece has a smooth integrand.
"""
from __future__ import annotations

from itertools import permutations

import numpy as np

from tclgen.bath import BathModel, n_point
from tclgen.model import SystemModel, interaction_picture_A, maximally_mixed_average as avg, traceless_part
from tclgen.quadrature import QuadratureSpec, chain_rule


def _cube(integrand, dims: int, t: float, nodes: int):
    """``int_[0,t]^dims integrand(times)`` for integrands smooth off the diagonals."""
    pts, w = chain_rule(dims, float(t), nodes)
    total = 0
    for perm in permutations(range(dims)):
        times = [None] * dims
        for rank, var in enumerate(perm):
            times[var] = pts[:, rank]
        total = total + np.einsum("p,pij->ij", w, integrand(*times))
    return total


def _theta(a, b):
    return (np.asarray(a) > np.asarray(b)).astype(float)


def _hc(x):
    return np.swapaxes(x.conj(), -1, -2)


def _k1(m, b, t):
    mean = n_point(b, [t])
    a_t = interaction_picture_A(m, t)
    return np.real(mean) * (a_t - avg(a_t) * np.eye(m.dim))


def _k2(m, b, t, nodes):
    At = interaction_picture_A(m, t)
    eye = np.eye(m.dim)

    def integrand(t1):
        A1 = interaction_picture_A(m, t1)
        c = n_point(b, [t, t1]) - n_point(b, [t]) * n_point(b, [t1])
        AA = At @ A1
        op = (AA - avg(AA)[:, None, None] * eye + At * avg(A1)[:, None, None]
              - A1 * avg(At))
        z = c[:, None, None] * op
        return (z - _hc(z)) / 2j

    return _cube(integrand, 1, t, nodes)


def _k3(m, b, t, nodes):
    At = interaction_picture_A(m, t)
    eye = np.eye(m.dim)

    def B(*ts):
        return n_point(b, list(ts))

    def integrand(t1, t2):
        A1, A2 = interaction_picture_A(m, t1), interaction_picture_A(m, t2)
        th = _theta(t1, t2)
        f = (B(t, t1, t2) * th - B(t) * B(t1, t2) * th - B(t, t1) * B(t2) + B(t) * B(t1) * B(t2))
        g = (B(t1, t, t2) - B(t) * B(t1, t2) - B(t1, t) * B(t2) - B(t, t2) * B(t1)
             + 2 * B(t) * B(t1) * B(t2))
        AAA = At @ A1 @ A2
        X = (AAA - avg(AAA)[:, None, None] * eye - (A1 @ A2) * avg(At)
             + At * avg(A1 @ A2)[:, None, None])
        Y = (At @ A2) * avg(A1)[:, None, None] - A1 * avg(At @ A2)[:, None, None]
        z = f[:, None, None] * X - g[:, None, None] * Y
        return -0.5 * (z + _hc(z))

    return _cube(integrand, 2, t, nodes)


def _k4(m, b, t, nodes, balanced=True):
    At = interaction_picture_A(m, t)
    eye = np.eye(m.dim)

    def B(*ts):
        return n_point(b, list(ts))

    def integrand(t1, t2, t3):
        A1, A2, A3 = (interaction_picture_A(m, x) for x in (t1, t2, t3))
        th123 = _theta(t1, t2) * _theta(t2, t3)
        th23 = _theta(t2, t3)
        fb = B(t, t1, t2, t3) * th123 - B(t, t1) * B(t2, t3) * th23
        gb = (B(t1, t, t2, t3) * th23 - B(t1, t) * B(t2, t3) * th23 - B(t, t2) * B(t1, t3))
        A4 = At @ A1 @ A2 @ A3
        Xb = (A4 - avg(A4)[:, None, None] * eye - (A1 @ A2 @ A3) * avg(At)
              + At * avg(A1 @ A2 @ A3)[:, None, None])
        Yb = (At @ A2 @ A3) * avg(A1)[:, None, None] - A1 * avg(At @ A2 @ A3)[:, None, None]
        z = fb[:, None, None] * Xb - gb[:, None, None] * Yb
        if balanced:
            z = z + _k4_balanced(A1, A2, A3, At, B, t, t1, t2, t3)
        return -(z - _hc(z)) / 2j

    return _cube(integrand, 3, t, nodes)


def _k4_balanced(A1, A2, A3, At, B, t, t1, t2, t3):
    """Two left and two right arguments: ``A A <A A>`` terms absent from the f/g/X/Y grouping."""
    th12, th23 = _theta(t1, t2), _theta(t2, t3)
    # tau_1 = t, (tau_2, s_1, s_2) = (t1, t2, t3)
    h = (B(t3, t2, t, t1) * th23 - B(t2, t) * B(t3, t1) - B(t, t1) * B(t3, t2) * th23)
    op = (At @ A1) * avg(A3 @ A2)[:, None, None]
    # s_1 = t, (tau_1, tau_2, s_2) = (t1, t2, t3)
    hp = (B(t3, t, t1, t2) * th12 - B(t, t1) * B(t3, t2) - B(t3, t) * B(t1, t2) * th12)
    opp = (A1 @ A2) * avg(A3 @ At)[:, None, None]
    return h[:, None, None] * op + hp[:, None, None] * opp


def effective_H_fixture(m: SystemModel, b: BathModel, n: int, t: float,
                        q: QuadratureSpec = QuadratureSpec(), balanced: bool = True) -> np.ndarray:
    """Order-``n`` effective Hamiltonian from the explicit low-order formulas (traceless).

    At fourth order the f/g/X/Y-style grouping only carries the partial
    contributions with one or three arguments on a side (plus the fully
    one-sided ones).  ``balanced=True`` adds the two-left/two-right part, which
    is needed whenever ``<A_s2 A_s1>`` is not a multiple of the identity's
    trace, e.g. any non-dephasing model; ``balanced=False`` is the grouping alone.
    """
    if n == 1:
        return traceless_part(_k1(m, b, t))
    if t == 0:
        return np.zeros((m.dim, m.dim), dtype=complex)
    if n == 2:
        return traceless_part(_k2(m, b, t, q.nodes))
    if n == 3:
        return traceless_part(_k3(m, b, t, q.nodes))
    if n == 4:
        if not b.mean_is_zero:
            raise ValueError("the fourth-order closed form assumes <B_t> = 0")
        return traceless_part(_k4(m, b, t, q.nodes, balanced))
    raise ValueError(f"no closed form for order {n}")
