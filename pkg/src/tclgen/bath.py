"""Environment correlation functions and the time-ordered blocks built from them.

All evaluation functions accept scalar times or equal-length 1-D arrays of
times; arrays are evaluated pointwise (the quadrature relies on this).

Custom baths supply ``n_point`` directly and must be safe for concurrent
invocation.  The conjugation symmetry ``D(taus, ss) = conj(D(ss, taus))`` holds
for Hermitian ``B`` and a stationary environment state; for a custom
non-stationary bath it is an assumption the test suite makes, not something
the engine relies on.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

GAUSSIAN_KINDS = ("gaussian_generic", "single_mode_thermal")
KINDS = GAUSSIAN_KINDS + ("custom",)


@dataclass(frozen=True)
class BathModel:
    kind: str
    two_point: Optional[Callable] = None
    mean: Optional[Callable] = None
    n_point_fn: Optional[Callable] = None
    params: dict = field(default_factory=dict)
    mean_is_zero: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown bath kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in GAUSSIAN_KINDS and self.two_point is None:
            raise ValueError(f"{self.kind} bath needs a two-point function")

    @property
    def is_gaussian(self) -> bool:
        return self.kind in GAUSSIAN_KINDS


def single_mode_thermal(g: float, omega: float, nbar: float = 0.0) -> BathModel:
    """``B = g (a + a^dagger)`` for one mode of frequency ``omega`` in a thermal state."""
    if g <= 0:
        raise ValueError(f"g must be positive, got {g}")
    if nbar < 0:
        raise ValueError(f"nbar must be non-negative, got {nbar}")

    def two_point(t, s):
        dt = np.subtract(t, s)
        return g**2 * ((nbar + 1) * np.exp(-1j * omega * dt) + nbar * np.exp(1j * omega * dt))

    return BathModel(
        kind="single_mode_thermal",
        two_point=two_point,
        mean=lambda t: np.zeros_like(np.asarray(t, dtype=float), dtype=complex),
        params={"g": g, "omega": omega, "nbar": nbar},
        mean_is_zero=True,
    )


def displaced_mode(g: float, omega: float, nbar: float, alpha: complex) -> BathModel:
    """Single mode in a displaced thermal state ``D(alpha) rho_th D(alpha)^dagger``.

    Still Gaussian, but with ``<B_t> = 2 g Re(alpha e^{-i omega t})``.
    """
    thermal = single_mode_thermal(g, omega, nbar).two_point

    def mean(t):
        return 2 * g * np.real(alpha * np.exp(-1j * omega * np.asarray(t, dtype=float))) + 0j

    def two_point(t, s):
        return thermal(t, s) + mean(t) * mean(s)

    return BathModel(
        kind="gaussian_generic",
        two_point=two_point,
        mean=mean,
        params={"g": g, "omega": omega, "nbar": nbar, "alpha": alpha},
        mean_is_zero=(alpha == 0),
    )


def gaussian_generic(two_point: Callable, mean: Optional[Callable] = None, **params) -> BathModel:
    """Gaussian bath from the full two-point function ``<B_t B_s>`` and the mean ``<B_t>``."""
    zero = mean is None
    if zero:
        mean = lambda t: np.zeros_like(np.asarray(t, dtype=float), dtype=complex)
    return BathModel(kind="gaussian_generic", two_point=two_point, mean=mean,
                     params=dict(params), mean_is_zero=zero)


def tabulated_stationary(taus: Sequence[float], values: Sequence[complex]) -> BathModel:
    """Mean-zero Gaussian bath with stationary ``<B_tau B_0>`` tabulated on ``taus >= 0``.

    Cubic-spline interpolation; negative lags use ``C(-tau) = conj(C(tau))``.
    Lags beyond the table raise.
    """
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=complex)
    if taus.ndim != 1 or taus.size < 4 or taus[0] != 0 or np.any(np.diff(taus) <= 0):
        raise ValueError("taus must be ascending, start at 0 and have at least 4 samples")
    if values.shape != taus.shape:
        raise ValueError("values must match taus")
    if abs(values[0].imag) > 1e-12 * max(1.0, abs(values[0])):
        raise ValueError("C(0) must be real")
    re = CubicSpline(taus, values.real)
    im = CubicSpline(taus, values.imag)
    tmax = taus[-1]

    def two_point(t, s):
        dt = np.subtract(t, s)
        lag = np.abs(dt)
        if np.any(lag > tmax * (1 + 1e-12)):
            raise ValueError(f"lag {np.max(lag)} beyond tabulated range {tmax}")
        c = re(lag) + 1j * im(lag)
        return np.where(dt >= 0, c, np.conj(c))

    return BathModel(kind="gaussian_generic", two_point=two_point,
                     mean=lambda t: np.zeros_like(np.asarray(t, dtype=float), dtype=complex),
                     params={"tabulated": True, "t_max": float(tmax)}, mean_is_zero=True)


def custom(n_point: Callable, mean_is_zero: bool = False, **params) -> BathModel:
    """Arbitrary (possibly non-Gaussian) bath defined by its ordered n-point function."""
    return BathModel(kind="custom", n_point_fn=n_point, params=dict(params), mean_is_zero=mean_is_zero)


def _wick(times: list, mean: Optional[Callable], cc: Callable):
    """Moments of a Gaussian state: sum over partitions into pairs and singletons."""
    memo: dict[tuple, object] = {}

    def rec(idx: tuple):
        if not idx:
            return 1.0
        if idx in memo:
            return memo[idx]
        first, rest = idx[0], idx[1:]
        total = 0.0
        if mean is not None:
            total = mean(times[first]) * rec(rest)
        for j, other in enumerate(rest):
            total = total + cc(times[first], times[other]) * rec(rest[:j] + rest[j + 1:])
        memo[idx] = total
        return total

    return rec(tuple(range(len(times))))


def n_point(b: BathModel, times: Sequence):
    """``<B_{t1} B_{t2} ... B_{tn}>`` in the listed order."""
    times = list(times)
    if not times:
        raise ValueError("n_point needs at least one time")
    if b.kind == "custom":
        if b.n_point_fn is None:
            raise ValueError("custom bath without an n_point callable")
        return b.n_point_fn(times)
    if b.mean_is_zero:
        if len(times) % 2:
            shape = np.broadcast(*[np.asarray(t) for t in times]).shape
            return np.zeros(shape, dtype=complex) if shape else 0j
        return _wick(times, None, b.two_point)

    def centered(t, s):
        return b.two_point(t, s) - b.mean(t) * b.mean(s)

    return _wick(times, b.mean, centered)


def _descending(xs: Sequence) -> bool:
    return all(np.all(np.asarray(a) >= np.asarray(b)) for a, b in zip(xs, xs[1:]))


def block_value(b: BathModel, taus: Sequence, ss: Sequence):
    """``Tr{B_tau1 ... B_tauk rho_E B_sm ... B_s1}`` without the ordering factors."""
    if not taus and not ss:
        raise ValueError("a block needs at least one time argument")
    return n_point(b, list(reversed(ss)) + list(taus))


def d_block(b: BathModel, taus: Sequence, ss: Sequence):
    """Ordered block ``D(taus, ss)``: zero unless both lists are non-increasing.

    Equal neighbouring times count as ordered.  With array arguments the
    ordering is checked pointwise.
    """
    taus, ss = list(taus), list(ss)
    if not taus and not ss:
        raise ValueError("a block needs at least one time argument")
    value = block_value(b, taus, ss)
    if all(np.ndim(x) == 0 for x in taus + ss):
        return value if _descending(taus) and _descending(ss) else 0j
    mask = np.ones(np.broadcast(*[np.asarray(x) for x in taus + ss]).shape, dtype=bool)
    for seq in (taus, ss):
        for a, c in zip(seq, seq[1:]):
            mask &= np.asarray(a) >= np.asarray(c)
    return np.where(mask, value, 0)
