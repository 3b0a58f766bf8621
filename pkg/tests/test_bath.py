import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tclgen.bath import (block_value, custom, d_block, displaced_mode, gaussian_generic, n_point,
                         single_mode_thermal, tabulated_stationary)

from fock import fock_n_point


def test_thermal_one_point_is_zero():
    b = single_mode_thermal(0.8, 1.2, 0.3)
    assert n_point(b, [0.7]) == 0


def test_thermal_equal_time_two_point():
    g, nbar = 0.8, 0.3
    b = single_mode_thermal(g, 1.2, nbar)
    assert n_point(b, [1.1, 1.1]) == pytest.approx(g ** 2 * (2 * nbar + 1), abs=1e-14)
    assert fock_n_point(g, 1.2, nbar, [1.1, 1.1]) == pytest.approx(g ** 2 * (2 * nbar + 1), abs=1e-8)


def test_four_point_is_sum_of_three_pairings():
    b = single_mode_thermal(1.0, 0.9, 0.0)
    ts = [0.3, 1.7, 0.2, 2.5]
    C = b.two_point
    wick = C(ts[0], ts[1]) * C(ts[2], ts[3]) + C(ts[0], ts[2]) * C(ts[1], ts[3]) + C(ts[0], ts[3]) * C(ts[1], ts[2])
    assert n_point(b, ts) == pytest.approx(wick, abs=1e-14)
    assert fock_n_point(1.0, 0.9, 0.0, ts) == pytest.approx(wick, abs=1e-8)


@pytest.mark.parametrize("nbar", [0.0, 0.4, 1.0])
def test_thermal_n_point_against_truncated_fock(nbar):
    rng = np.random.default_rng(int(nbar * 10))
    g, omega = 0.7, 1.3
    cutoff = 80 if nbar else 12
    b = single_mode_thermal(g, omega, nbar)
    for n in range(1, 5):
        for _ in range(5):
            ts = list(rng.uniform(0, 4, n))
            assert n_point(b, ts) == pytest.approx(fock_n_point(g, omega, nbar, ts, cutoff), abs=1e-8)


def test_displaced_mode_against_truncated_fock():
    # coherent displacement alpha on top of the thermal state
    from scipy.linalg import expm
    from fock import b_at, thermal_mode

    g, omega, nbar, alpha = 0.6, 1.1, 0.2, 0.4 - 0.3j
    a, B, rho, e = thermal_mode(g, omega, nbar, 60)
    D = expm(alpha * a.conj().T - np.conj(alpha) * a)
    rho = D @ rho @ D.conj().T
    b = displaced_mode(g, omega, nbar, alpha)
    rng = np.random.default_rng(7)
    for n in range(1, 5):
        ts = list(rng.uniform(0, 3, n))
        prod = rho.astype(complex)
        for t in ts:
            prod = prod @ b_at(B, e, t)
        assert n_point(b, ts) == pytest.approx(np.trace(prod), abs=1e-8)


def test_d_block_examples():
    b = single_mode_thermal(1.0, 1.0, 0.2)
    C = b.two_point
    assert d_block(b, [2.0, 1.0], []) == pytest.approx(C(2.0, 1.0))
    assert d_block(b, [1.0, 2.0], []) == 0
    assert d_block(b, [3.0], [2.0]) == pytest.approx(C(2.0, 3.0))
    assert d_block(b, [3.0], [2.0]) == pytest.approx(fock_n_point(1.0, 1.0, 0.2, [2.0, 3.0], 80), abs=1e-8)
    # ties count as ordered
    assert d_block(b, [], [1.5, 1.5]) == pytest.approx(C(1.5, 1.5))
    with pytest.raises(ValueError):
        d_block(b, [], [])


def test_d_block_pointwise_arrays():
    b = single_mode_thermal(1.0, 1.0, 0.0)
    t1 = np.array([1.0, 0.5, 2.0])
    t2 = np.array([0.5, 1.0, 2.0])
    got = d_block(b, [t1, t2], [])
    assert got[1] == 0
    assert got[0] == pytest.approx(b.two_point(1.0, 0.5))
    assert got[2] == pytest.approx(b.two_point(2.0, 2.0))


def test_two_point_hermiticity():
    rng = np.random.default_rng(3)
    for b in (single_mode_thermal(0.9, 1.4, 0.6), displaced_mode(0.9, 1.4, 0.6, 0.2j)):
        for _ in range(50):
            t, s = rng.uniform(-5, 5, 2)
            assert abs(b.two_point(t, s) - np.conj(b.two_point(s, t))) < 1e-12


def test_custom_bath_requires_callable():
    b = custom(None)
    with pytest.raises(ValueError):
        n_point(b, [0.1])


def test_custom_non_gaussian_bath_used_verbatim():
    # two-level environment: B = sx, state |0><0|, H_E = w sz / 2 (not Gaussian)
    w = 0.8

    def npt(times):
        sx = np.array([[0, 1], [1, 0]], dtype=complex)
        prod = np.diag([1.0, 0.0]).astype(complex)
        for t in times:
            u = np.diag(np.exp(1j * w * np.array([0.5, -0.5]) * t))
            prod = prod @ u @ sx @ u.conj().T
        return np.trace(prod)

    b = custom(npt, mean_is_zero=True)
    ts = [0.3, 1.0, 2.0, 0.1]
    assert n_point(b, ts) == pytest.approx(npt(ts))
    # non-Gaussian: four-point differs from the Wick sum of its two-point functions
    C = lambda a, c: npt([a, c])
    wick = C(ts[0], ts[1]) * C(ts[2], ts[3]) + C(ts[0], ts[2]) * C(ts[1], ts[3]) + C(ts[0], ts[3]) * C(ts[1], ts[2])
    assert abs(n_point(b, ts) - wick) > 1e-3


@pytest.mark.parametrize("b", [gaussian_generic(lambda t, s: np.exp(-np.abs(t - s)) + 0j),
                               single_mode_thermal(1.0, 2.0, 0.5)])
def test_gaussian_odd_moments_vanish(b):
    assert n_point(b, [0.1, 0.2, 0.3]) == 0
    assert n_point(b, [0.1, 0.2, 0.3, 0.4, 0.5]) == 0
    assert d_block(b, [0.3, 0.2], [0.1]) == 0


def test_tabulated_matches_analytic():
    ref = single_mode_thermal(0.7, 1.1, 0.0)
    taus = np.linspace(0, 6, 601)
    b = tabulated_stationary(taus, ref.two_point(taus, 0.0))
    for t, s in [(1.3, 0.2), (0.2, 1.3), (5.0, 4.1)]:
        assert abs(b.two_point(t, s) - ref.two_point(t, s)) < 1e-8
    with pytest.raises(ValueError):
        b.two_point(7.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), k=st.integers(0, 3), m=st.integers(0, 3))
def test_d_block_conjugation_symmetry(seed, k, m):
    if k + m == 0:
        return
    rng = np.random.default_rng(seed)
    b = displaced_mode(0.8, 1.3, 0.3, 0.5 + 0.1j)
    taus = sorted(rng.uniform(0, 3, k), reverse=True)
    ss = sorted(rng.uniform(0, 3, m), reverse=True)
    assert abs(d_block(b, taus, ss) - np.conj(d_block(b, ss, taus))) < 1e-12 * max(1, abs(d_block(b, taus, ss)))


def test_block_value_orders_s_side_first_and_reversed():
    b = displaced_mode(0.8, 1.3, 0.3, 0.5 + 0.1j)
    assert block_value(b, [2.0, 1.0], [1.5, 0.5]) == pytest.approx(n_point(b, [0.5, 1.5, 2.0, 1.0]))
