"""Propagation under the truncated generator and exact single-mode reference dynamics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from tclgen.bath import BathModel
from tclgen.generator import build_Ln, parallel_map
from tclgen.linalg import commutator_superop, devectorize, is_hermitian, superop_from_lr, vectorize
from tclgen.model import SystemModel
from tclgen.quadrature import QuadratureSpec, integrate_moment

TAIL_TOL = 1e-10
COND_LIMIT = 1e8


class GeneratorSingularity(RuntimeError):
    """The dynamical map is (numerically) not invertible."""


def _uniform_step(grid: np.ndarray) -> float:
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("time grid needs at least two points")
    h = np.diff(grid)
    if np.any(h <= 0) or np.max(np.abs(h - h[0])) > 1e-9 * max(1.0, abs(h[0])):
        raise ValueError("time grid must be ascending and uniform")
    return float(h[0])


# ---------------------------------------------------------------- propagation

@dataclass
class Trajectory:
    time_grid: np.ndarray
    states: np.ndarray
    picture: str = "interaction"
    min_eigenvalues: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.min_eigenvalues is None:
            herm = (self.states + self.states.conj().transpose(0, 2, 1)) / 2
            self.min_eigenvalues = np.linalg.eigvalsh(herm)[:, 0]

    def to_schroedinger(self, m: SystemModel) -> "Trajectory":
        if self.picture == "schroedinger":
            return self
        us = [m.free_unitary(t) for t in self.time_grid]
        states = np.array([u @ r @ u.conj().T for u, r in zip(us, self.states)])
        return Trajectory(self.time_grid, states, "schroedinger")


def check_density(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got {rho.shape}")
    if not is_hermitian(rho, tol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError(f"density matrix has trace {np.trace(rho).real:.6g}, expected 1")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0] < -tol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def _rk4(gen: Callable[[float], np.ndarray], y0: np.ndarray, grid: np.ndarray) -> list[np.ndarray]:
    h = _uniform_step(grid)
    ys = [y0]
    y = y0
    for t in grid[:-1]:
        mid = gen(t + h / 2)
        k1 = gen(t) @ y
        k2 = mid @ (y + h / 2 * k1)
        k3 = mid @ (y + h / 2 * k2)
        k4 = gen(t + h) @ (y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys.append(y)
    return ys


def propagate(gen: Callable[[float], np.ndarray], rho0: np.ndarray, grid: Sequence[float],
              picture: str = "interaction") -> Trajectory:
    """Classical RK4 for ``d vec(rho)/dt = gen(t) vec(rho)`` on a uniform grid."""
    rho0 = check_density(rho0)
    grid = np.asarray(grid, dtype=float)
    ys = _rk4(gen, vectorize(rho0), grid)
    d = rho0.shape[0]
    return Trajectory(grid, np.array([devectorize(y, d) for y in ys]), picture)


def propagate_map(gen: Callable[[float], np.ndarray], grid: Sequence[float]) -> "ExactMapGrid":
    """RK4 propagation of the full map ``dPhi/dt = gen(t) Phi``, ``Phi(grid[0]) = id``."""
    grid = np.asarray(grid, dtype=float)
    d2 = gen(grid[0]).shape[0]
    maps = _rk4(gen, np.eye(d2, dtype=complex), grid)
    return ExactMapGrid(grid, np.array(maps), {"source": "propagate_map"}, "custom")


# ------------------------------------------------------------ exact reference

@dataclass
class ExactMapGrid:
    time_grid: np.ndarray
    maps: np.ndarray
    params: dict
    picture: str = "schroedinger"


def _mode(mode) -> tuple[float, float, float]:
    if isinstance(mode, BathModel):
        if mode.kind != "single_mode_thermal":
            raise ValueError("exact reference dynamics need a single_mode_thermal bath")
        p = mode.params
        return float(p["omega"]), float(p["g"]), float(p["nbar"])
    omega, g, nbar = mode
    return float(omega), float(g), float(nbar)


def suggested_cutoff(nbar: float, tol: float = TAIL_TOL) -> int:
    if nbar == 0:
        return 1
    r = nbar / (nbar + 1)
    return max(1, math.ceil(math.log(tol) / math.log(r)) - 1)


def rotating_wave_parts(m: SystemModel) -> tuple[np.ndarray, np.ndarray]:
    """Energy-raising and -lowering parts of ``A`` in the eigenbasis of ``H_S``.

    Diagonal (energy-conserving) elements are dropped, so for a qubit with
    ``A = sx`` this is ``(s+, s-)``.
    """
    e, v = np.linalg.eigh(m.H)
    a = v.conj().T @ m.A @ v
    up = np.where(e[:, None] > e[None, :] + 1e-12, a, 0)
    raise_op = v @ up @ v.conj().T
    return raise_op, raise_op.conj().T


class _JointSystem:
    """Qudit plus one truncated bosonic mode, diagonalized once."""

    def __init__(self, m: SystemModel, mode, cutoff: int, rotating_wave: bool = False):
        omega, g, nbar = _mode(mode)
        if nbar > 0:
            tail = (nbar / (nbar + 1)) ** (cutoff + 1)
            if tail >= TAIL_TOL:
                raise ValueError(f"fock_cutoff {cutoff} leaves thermal tail {tail:.2e}; "
                                 f"use at least {suggested_cutoff(nbar)}")
        M = cutoff + 1
        a = np.diag(np.sqrt(np.arange(1, M)), 1)
        n_op = np.diag(np.arange(M, dtype=float))
        d = m.dim
        H = np.kron(m.H, np.eye(M)) + omega * np.kron(np.eye(d), n_op)
        if rotating_wave:
            up, down = rotating_wave_parts(m)
            H = H + m.lam * g * (np.kron(up, a) + np.kron(down, a.T))
        else:
            H = H + m.lam * g * np.kron(m.A, a + a.T)
        self.d, self.M, self.H = d, M, H
        self.energies, self.vecs = np.linalg.eigh(H)
        if nbar > 0:
            p = (nbar / (nbar + 1)) ** np.arange(M)
            self.pops = p / p.sum()
        else:
            self.pops = np.eye(M)[0]
        self.model = m

    def _u4(self, u):
        return u.reshape(self.d, self.M, self.d, self.M)

    def unitary(self, t: float) -> np.ndarray:
        return (self.vecs * np.exp(-1j * self.energies * t)) @ self.vecs.conj().T

    def _trace_map(self, u, v):
        # S[(b, a), (e, c)] = sum_mn p_n U[a,m,c,n] conj(V[b,m,e,n])
        d = self.d
        s = np.einsum("amcn,n,bmen->baec", self._u4(u), self.pops, self._u4(v).conj(), optimize=True)
        return s.reshape(d * d, d * d)

    def map_and_derivative(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        u = self.unitary(t)
        du = -1j * self.H @ u
        return self._trace_map(u, u), self._trace_map(du, u) + self._trace_map(u, du)

    def to_interaction(self, t: float, phi: np.ndarray, dphi: np.ndarray | None = None):
        u0 = self.model.free_unitary(t)
        conj = superop_from_lr(u0.conj().T, u0)
        phi_i = conj @ phi
        if dphi is None:
            return phi_i
        return phi_i, -commutator_superop(self.model.H) @ phi_i + conj @ dphi


def exact_map_single_mode(m: SystemModel, mode, fock_cutoff: int, grid: Sequence[float],
                          picture: str = "schroedinger", threads: int = 1,
                          rotating_wave: bool = False) -> ExactMapGrid:
    """``Phi_t[rho] = Tr_E U_t (rho (x) rho_E) U_t^dagger`` for a single thermal mode.

    ``mode`` is ``(omega, g, nbar)`` or a ``single_mode_thermal`` bath; the
    coupling is ``lam * A (x) g (a + a^dagger)``, or with ``rotating_wave``
    ``lam * g (A_+ (x) a + A_- (x) a^dagger)`` (Jaynes-Cummings for ``A = sx``).
    """
    if picture not in ("schroedinger", "interaction"):
        raise ValueError(f"unknown picture {picture!r}")
    joint = _JointSystem(m, mode, fock_cutoff, rotating_wave)
    grid = np.asarray(grid, dtype=float)

    def at(t):
        phi, _ = joint.map_and_derivative(t)
        return joint.to_interaction(t, phi) if picture == "interaction" else phi

    maps = np.array(parallel_map(at, grid, threads))
    omega, g, nbar = _mode(mode)
    params = {"omega": omega, "g": g, "nbar": nbar, "lam": m.lam, "fock_cutoff": fock_cutoff,
              "rotating_wave": rotating_wave}
    return ExactMapGrid(grid, maps, params, picture)


def exact_generator(m: SystemModel, mode, fock_cutoff: int, t: float,
                    picture: str = "interaction", rotating_wave: bool = False) -> np.ndarray:
    """``dPhi/dt o Phi^-1`` at one time, with the map derivative taken analytically."""
    joint = _JointSystem(m, mode, fock_cutoff, rotating_wave)
    phi, dphi = joint.map_and_derivative(t)
    if picture == "interaction":
        phi, dphi = joint.to_interaction(t, phi, dphi)
    cond = np.linalg.cond(phi)
    if cond > COND_LIMIT:
        raise GeneratorSingularity(f"map condition number {cond:.2e} at t={t}")
    return np.linalg.solve(phi.T, dphi.T).T


@dataclass
class TCLGrid:
    """Generator samples on a grid; calling it interpolates linearly."""

    time_grid: np.ndarray
    generators: np.ndarray
    condition_numbers: np.ndarray

    def __call__(self, t: float) -> np.ndarray:
        grid = self.time_grid
        if t <= grid[0]:
            return self.generators[0]
        if t >= grid[-1]:
            return self.generators[-1]
        j = int(np.searchsorted(grid, t)) - 1
        w = (t - grid[j]) / (grid[j + 1] - grid[j])
        return (1 - w) * self.generators[j] + w * self.generators[j + 1]


def fd_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite differences along axis 0 (one-sided near the ends)."""
    f = np.asarray(values)
    if f.shape[0] < 5:
        raise ValueError("need at least 5 samples for fourth-order differences")
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    out[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    out[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    out[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    out[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return out


def exact_tcl_from_map(g: ExactMapGrid) -> TCLGrid:
    """``L_t = dPhi_t/dt o Phi_t^-1`` with the derivative from finite differences."""
    grid = np.asarray(g.time_grid, dtype=float)
    h = _uniform_step(grid)
    dphi = fd_derivative(g.maps, h)
    conds = np.array([np.linalg.cond(p) for p in g.maps])
    bad = np.flatnonzero(conds > COND_LIMIT)
    if bad.size:
        j = bad[0]
        raise GeneratorSingularity(f"map condition number {conds[j]:.2e} at t={grid[j]:.6g}; "
                                   "the exact TCL generator is singular there")
    gens = np.array([np.linalg.solve(p.T, dp.T).T for p, dp in zip(g.maps, dphi)])
    return TCLGrid(grid, gens, conds)


def map_validity(g: ExactMapGrid) -> np.ndarray:
    """Operator norm ``|Phi_t - id|`` per grid time (series validity needs < 1)."""
    eye = np.eye(g.maps.shape[-1])
    return np.array([np.linalg.norm(p - eye, 2) for p in g.maps])


# -------------------------------------------------------------------- oracles

def dephasing_oracle(b: BathModel, lam: float, grid: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Exact decoherence for ``A = sz`` and a mean-zero Gaussian bath.

    Interaction-picture coherence obeys ``rho01(t) = rho01(0) exp(-(Gamma + i phi))``
    with ``Gamma + i phi = 2 lam^2 int_0^t int_0^t C(t1, t2)``.  For a Hermitian
    two-point function ``phi`` vanishes and ``Gamma = 4 lam^2 Re int_{t1>t2} C``.
    """
    if not b.is_gaussian or not b.mean_is_zero:
        raise ValueError("dephasing oracle needs a mean-zero Gaussian bath")
    grid = np.asarray(grid, dtype=float)

    def sym(t1, t2):
        # both orderings of the square, so no Hermiticity of C is assumed
        return b.two_point(t1, t2) + b.two_point(t2, t1)

    def part(fn, t1):
        return integrate.quad(lambda t2: fn(sym(t1, t2)), 0, t1, epsabs=1e-12, epsrel=1e-12)[0]

    gam, phase = [], []
    for t in grid:
        re = integrate.quad(lambda t1: part(np.real, t1), 0, t, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
        im = integrate.quad(lambda t1: part(np.imag, t1), 0, t, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
        gam.append(2 * lam ** 2 * re)
        phase.append(2 * lam ** 2 * im)
    return np.array(gam), np.array(phase)


def map_moment(m: SystemModel, b: BathModel, n: int, k: int, t: float,
               q: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
    """``mu_n^k = (-1)^(n-k) int D(tau, s) A(tau) . A^dagger(s)``."""
    if not 1 <= n <= 4:
        raise ValueError(f"moment order {n} outside the supported range 1..4")
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    return (-1) ** (n - k) * integrate_moment(m, b, n, k, t, q)


def truncated_map(m: SystemModel, b: BathModel, max_order: int, t: float,
                  q: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
    """``id + sum_{n<=N} (-i lam)^n sum_k mu_n^k`` (interaction picture)."""
    d = m.dim
    out = np.eye(d * d, dtype=complex)
    for n in range(1, max_order + 1):
        out += (-1j * m.lam) ** n * sum(map_moment(m, b, n, k, t, q) for k in range(n + 1))
    return out


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class ConvergenceStudy:
    lambdas: np.ndarray
    residuals: np.ndarray
    slope: float


def convergence_study(m: SystemModel, b: BathModel, max_order: int, t: float,
                      lambdas: Sequence[float], q: QuadratureSpec = QuadratureSpec(),
                      fock_cutoff: int = 12, suppression="none", threads: int = 1) -> ConvergenceStudy:
    """Residual ``|L_exact(t) - sum_{n<=N} lam^n L_n(t)|_F`` over a coupling sweep.

    ``L_n`` does not depend on ``lam`` and is built once.
    """
    orders = [build_Ln(m, b, n, t, q, suppression) for n in range(1, max_order + 1)]
    lams = np.asarray(lambdas, dtype=float)

    def residual(lam):
        exact = exact_generator(_with_lam(m, lam), b, fock_cutoff, t)
        approx = sum(lam ** n * L for n, L in enumerate(orders, start=1))
        return float(np.linalg.norm(exact - approx))

    res = np.array(parallel_map(residual, lams, threads))
    return ConvergenceStudy(lams, res, loglog_slope(lams, res))


def _with_lam(m: SystemModel, lam: float) -> SystemModel:
    return SystemModel(H=m.H, A=m.A, lam=lam, a_of_t=m.a_of_t)
