import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from tclgen.bath import displaced_mode, gaussian_generic, single_mode_thermal
from tclgen.fixtures import effective_H_fixture
from tclgen.generator import (IdentityViolation, build_generator, build_Ln, build_series,
                              canonical_decompose, canonical_rates_over_time, canonical_reassemble,
                              effective_H_direct, effective_hamiltonian, identity_residuals,
                              rate_sign_changes)
from tclgen.linalg import commutator_superop, orthonormal_traceless_basis, superop_from_lr
from tclgen.model import SystemModel, interaction_picture_A, pauli, qubit_model, random_hermitian
from tclgen.quadrature import QuadratureSpec

SX, SY, SZ = pauli()
I2 = np.eye(2)
Q8 = QuadratureSpec(8)


def _dissipator(jump, rate=1.0):
    jd = jump.conj().T
    return rate * (superop_from_lr(jump, jd) - 0.5 * superop_from_lr(jd @ jump, I2)
                   - 0.5 * superop_from_lr(I2, jd @ jump))


# ------------------------------------------------------------------ build_Ln

def test_mean_zero_first_order_vanishes():
    m = qubit_model(1.0, "x", 0.5)
    b = single_mode_thermal(1.0, 1.0, 0.4)
    for t in (0.0, 0.8, 2.1):
        assert np.allclose(build_Ln(m, b, 1, t, Q8), 0, atol=0)


def test_gaussian_third_order_vanishes():
    m = qubit_model(1.0, "x", 0.5)
    b = single_mode_thermal(1.0, 1.2, 0.4)
    for t in (0.6, 1.9):
        assert np.max(np.abs(build_Ln(m, b, 3, t, QuadratureSpec(12)))) < 1e-12


def test_first_order_at_time_zero_is_coherent_mean_drive():
    m = qubit_model(1.0, "x", 0.5)
    b = displaced_mode(0.7, 1.0, 0.0, 0.4 + 0.2j)
    L = build_Ln(m, b, 1, 0.0, Q8)
    mean0 = b.mean(0.0)
    assert np.allclose(L, -1j * mean0 * (superop_from_lr(SX, I2) - superop_from_lr(I2, SX)), atol=1e-14)
    for n in (2, 3, 4):
        assert np.allclose(build_Ln(m, b, n, 0.0, Q8), 0, atol=0)


def test_dephasing_second_order_matches_adaptive_rate():
    m = qubit_model(1.3, "z", 1.0)
    b = single_mode_thermal(0.9, 1.1, 0.3)
    # L_2 = r(t) (sz . sz - id),  r(t) = 2 Re int_0^t C(t, s) ds
    for t in (0.4, 1.7, 3.2):
        r = 2 * integrate.quad(lambda s: b.two_point(t, s).real, 0, t, epsabs=1e-13)[0]
        L = build_Ln(m, b, 2, t, QuadratureSpec(24))
        assert np.allclose(L, r * (superop_from_lr(SZ, SZ) - np.eye(4)), atol=1e-10)


def test_order_out_of_range():
    m = qubit_model(1.0, "x", 0.5)
    b = single_mode_thermal(1.0, 1.0, 0.0)
    with pytest.raises(ValueError, match="order 5"):
        build_Ln(m, b, 5, 1.0)
    with pytest.raises(ValueError):
        build_generator(m, b, 0, 1.0)


# ----------------------------------------------------------- build_generator

def test_zero_coupling_gives_zero_generator():
    m = qubit_model(1.0, "x", 0.0)
    b = single_mode_thermal(1.0, 1.0, 0.0)
    assert np.array_equal(build_generator(m, b, 4, 1.2, Q8), np.zeros((4, 4)))


def test_second_order_truncation_is_lambda_squared_l2():
    m = qubit_model(1.0, "x", 0.3)
    b = single_mode_thermal(1.0, 1.0, 0.0)
    assert np.allclose(build_generator(m, b, 2, 1.2, Q8), 0.09 * build_Ln(m, b, 2, 1.2, Q8), atol=1e-15)


def test_fourth_minus_second_scales_as_lambda_four():
    m0 = qubit_model(1.0, "x", 1.0)
    b = single_mode_thermal(1.0, 1.0, 0.0)
    lams = np.geomspace(0.05, 0.5, 4)
    diffs = []
    for lam in lams:
        m = SystemModel(m0.H, m0.A, lam)
        diffs.append(np.linalg.norm(build_generator(m, b, 4, 1.0, Q8) - build_generator(m, b, 2, 1.0, Q8)))
    slope = np.polyfit(np.log(lams), np.log(diffs), 1)[0]
    assert slope == pytest.approx(4.0, abs=0.05)


def test_series_identities_and_parallel_determinism():
    rng = np.random.default_rng(3)
    m = SystemModel(random_hermitian(3, rng), random_hermitian(3, rng), 0.4)
    b = single_mode_thermal(0.8, 1.3, 0.2)
    grid = np.linspace(0, 1.5, 4)
    s1 = build_series(m, b, 3, grid, QuadratureSpec(6))
    s2 = build_series(m, b, 3, grid, QuadratureSpec(6), threads=3)
    for n in (1, 2, 3):
        assert np.array_equal(s1.orders[n], s2.orders[n])
    res = s1.identity_residuals(np.random.default_rng(0))
    assert res["trace_annihilation"] < 1e-10
    assert res["hermiticity_preservation"] < 1e-10
    assert np.allclose(s1.total(), sum(0.4 ** n * s1.orders[n] for n in (1, 2, 3)))


# -------------------------------------------------------- canonical_decompose

def test_coherent_generator():
    f = canonical_decompose(commutator_superop(SZ))
    assert np.allclose(f.K, SZ, atol=1e-14)
    assert np.allclose(f.gamma, 0, atol=1e-14)


def test_pure_dephasing_generator():
    g0 = 0.37
    f = canonical_decompose(g0 * (superop_from_lr(SZ, SZ) - np.eye(4)))
    assert np.allclose(f.K, 0, atol=1e-14)
    assert f.canonical_rates == pytest.approx([2 * g0, 0, 0], abs=1e-14)
    w, v = np.linalg.eigh(f.gamma)
    direction = sum(c * g for c, g in zip(v[:, -1], f.basis))
    assert abs(abs(np.vdot(direction.ravel(), SZ.ravel() / np.sqrt(2))) - 1) < 1e-12


def test_amplitude_damping_generator():
    g0 = 0.8
    sm = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|, lowers from the upper level |0>
    S = _dissipator(sm, g0)
    f = canonical_decompose(S)
    assert f.canonical_rates == pytest.approx([g0, 0, 0], abs=1e-14)
    assert np.allclose(f.K, 0, atol=1e-14)
    assert np.max(np.abs(canonical_reassemble(f.K, f.gamma, f.basis) - S)) < 1e-12


def test_decompose_rejects_trace_violation():
    with pytest.raises(IdentityViolation, match="trace annihilation") as exc:
        canonical_decompose(np.eye(4) * 0.1)
    assert exc.value.identity == "trace annihilation"


def test_decompose_rejects_hermiticity_violation():
    S = 1j * (superop_from_lr(SZ, SZ) - np.eye(4))
    with pytest.raises(IdentityViolation, match="Hermiticity preservation"):
        canonical_decompose(S)


def test_canonical_basis_is_traceless_and_gamma_hermitian():
    rng = np.random.default_rng(1)
    m = SystemModel(random_hermitian(3, rng), random_hermitian(3, rng), 0.5)
    b = single_mode_thermal(1.0, 0.7, 0.1)
    f = canonical_decompose(build_generator(m, b, 2, 1.1, Q8))
    assert all(np.trace(g) == 0 for g in f.basis)
    assert np.max(np.abs(f.gamma - f.gamma.conj().T)) < 1e-10
    assert np.max(np.abs(f.K - f.K.conj().T)) < 1e-10
    assert abs(np.trace(f.K)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2 ** 32 - 1))
def test_decompose_inverts_reassembly(d, seed):
    rng = np.random.default_rng(seed)
    basis = orthonormal_traceless_basis(d)
    K = random_hermitian(d, rng)
    K -= np.trace(K) / d * np.eye(d)
    n = d * d - 1
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    gamma = x + x.conj().T
    f = canonical_decompose(canonical_reassemble(K, gamma, basis))
    assert np.allclose(f.K, K, atol=1e-10)
    assert np.allclose(f.gamma, gamma, atol=1e-10)


def test_identity_residuals_detect_bad_superop():
    res = identity_residuals([np.eye(4)], np.random.default_rng(0), 3)
    assert res["trace_annihilation"] > 0.1


# ------------------------------------------------------ effective Hamiltonian

def test_first_order_hamiltonian_is_mean_drive():
    m = qubit_model(1.0, "x", 0.5)
    b = displaced_mode(0.7, 1.0, 0.2, 0.4 + 0.2j)
    t = 1.3
    At = interaction_picture_A(m, t)
    mean = b.mean(t)
    assert abs(mean.imag) < 1e-15 and abs(mean) > 0.1
    want = mean.real * (At - np.trace(At) / 2 * I2)
    assert np.allclose(effective_H_direct(m, b, 1, t, Q8), want, atol=1e-14)
    assert np.allclose(effective_H_fixture(m, b, 1, t), want, atol=1e-14)


def test_dephasing_second_order_hamiltonian_vanishes():
    m = qubit_model(1.0, "z", 1.0)
    b = single_mode_thermal(1.0, 1.4, 0.3)
    assert np.allclose(effective_H_direct(m, b, 2, 1.7, Q8), 0, atol=1e-14)


def test_gaussian_third_order_hamiltonian_vanishes():
    m = qubit_model(1.0, "x", 1.0)
    b = single_mode_thermal(1.0, 1.4, 0.3)
    assert np.allclose(effective_H_direct(m, b, 3, 1.7, Q8), 0, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_direct_hamiltonian_equals_canonical_k(n):
    m = qubit_model(1.0, "x", 1.0)
    b = displaced_mode(0.8, 1.0, 0.0, 0.3) if n < 4 else single_mode_thermal(0.8, 1.0, 0.0)
    t = 1.4
    direct = effective_H_direct(m, b, n, t, Q8)
    via = canonical_decompose(build_Ln(m, b, n, t, Q8)).K
    assert np.linalg.norm(direct - via) < 1e-10


def test_effective_hamiltonian_sums_orders():
    m = qubit_model(1.0, "x", 0.3)
    b = displaced_mode(0.8, 1.0, 0.0, 0.3)
    want = sum(0.3 ** n * effective_H_direct(m, b, n, 1.0, Q8) for n in (1, 2, 3))
    assert np.allclose(effective_hamiltonian(m, b, 3, 1.0, Q8), want, atol=0)


def test_fixture_second_order_matches_engine():
    m = qubit_model(1.0, "x", 1.0)
    b = single_mode_thermal(1.0, 1.0, 0.2)
    for t in (0.5, 2.0):
        fx = effective_H_fixture(m, b, 2, t, QuadratureSpec(24))
        assert np.linalg.norm(fx - effective_H_direct(m, b, 2, t, QuadratureSpec(24))) < 1e-10


def test_fixture_third_order_matches_engine_with_mean():
    m = qubit_model(1.0, "x", 1.0)
    b = displaced_mode(0.9, 1.0, 0.0, 0.5 - 0.2j)
    q = QuadratureSpec(16)
    fx = effective_H_fixture(m, b, 3, 1.2, q)
    assert np.linalg.norm(fx) > 1e-3
    assert np.linalg.norm(fx - effective_H_direct(m, b, 3, 1.2, q)) < 1e-9


def test_fixture_fourth_order_matches_engine():
    m = qubit_model(1.0, "x", 1.0)
    b = single_mode_thermal(1.0, 1.0, 0.0)
    q = QuadratureSpec(24)
    t = 1.3
    fx = effective_H_fixture(m, b, 4, t, q)
    assert np.linalg.norm(fx - effective_H_direct(m, b, 4, t, q, "gaussian_mean_zero")) < 1e-6


def test_fixture_fourth_order_grouping_alone_misses_balanced_terms():
    b = single_mode_thermal(1.0, 1.0, 0.0)
    q = QuadratureSpec(8)
    sx_model = qubit_model(1.0, "x", 1.0)
    engine = effective_H_direct(sx_model, b, 4, 1.3, q)
    assert np.linalg.norm(effective_H_fixture(sx_model, b, 4, 1.3, q, balanced=False) - engine) > 1e-2
    # pure dephasing: <A A> is a multiple of the identity and the extra terms drop out
    sz_model = qubit_model(1.0, "z", 1.0)
    a = effective_H_fixture(sz_model, b, 4, 1.3, q, balanced=False)
    c = effective_H_fixture(sz_model, b, 4, 1.3, q, balanced=True)
    assert np.allclose(a, c, atol=1e-14)


def test_fixture_errors():
    m = qubit_model(1.0, "x", 1.0)
    with pytest.raises(ValueError, match="<B_t> = 0"):
        effective_H_fixture(m, displaced_mode(1.0, 1.0, 0.0, 0.3), 4, 1.0)
    with pytest.raises(ValueError):
        effective_H_fixture(m, single_mode_thermal(1.0, 1.0, 0.0), 5, 1.0)


# -------------------------------------------------------------------- rates

def test_weak_broad_bath_rates_non_negative():
    tau_c = 0.05
    b = gaussian_generic(lambda t, s: np.exp(-np.abs(np.subtract(t, s)) / tau_c) / (2 * tau_c))
    m = qubit_model(1.0, "z", 0.1)
    grid, rates = canonical_rates_over_time(m, b, 2, np.linspace(0, 5, 11), QuadratureSpec(24))
    assert np.all(rates >= -1e-8)
    assert rates[-1, 0] > 0


def test_strong_resonant_mode_has_negative_rate():
    m = qubit_model(1.0, "x", 0.5)
    b = single_mode_thermal(1.0, 1.0, 0.0)
    grid, rates = canonical_rates_over_time(m, b, 2, np.linspace(0, 6, 13), Q8, threads=2)
    assert np.any(rates < 0)
    assert np.all(np.diff(rates, axis=1) <= 0)


def test_rate_sign_changes():
    grid = np.array([0.0, 1.0, 2.0, 3.0])
    rates = np.array([[0.0, 0.0], [0.5, -0.1], [-0.2, -0.3], [0.1, -0.2]])
    assert rate_sign_changes(grid, rates) == [(2.0, 0)]
    assert rate_sign_changes(grid, np.zeros((4, 2))) == []
