import numpy as np
import pytest
from hypothesis import given, strategies as st

from aar_tilc.convergence import (build_augmented, certify, conservative_bound, contraction_norm,
                                  initial_state, iterate_recursion, matrix_power, noise_vectors,
                                  random_gains, random_negative_definite, sample_noise,
                                  spectral_radius, nominal_bound)
from aar_tilc.errors import SingularMatrix
from aar_tilc.tilc import TilcGains

DEFAULT_M1 = np.array([[-0.25, 0, 0], [0, -0.41, -0.03], [0, -0.03, -0.24]])


def test_scalar_block_examples():
    it = build_augmented(-0.5 * np.eye(3), 0.5, 0.5)
    np.testing.assert_allclose(it.A1, 2 / 3 * np.eye(3), atol=1e-15)
    np.testing.assert_allclose(it.A3, 0.5 * np.eye(3), atol=1e-15)
    assert it.rho == pytest.approx(2 / 3, abs=1e-12)
    it = build_augmented(-np.eye(3), 0.0, 1.0)
    np.testing.assert_allclose(it.A1, 0.5 * np.eye(3), atol=1e-15)
    np.testing.assert_allclose(it.A3, 0.0, atol=1e-15)
    assert it.rho == pytest.approx(0.5, abs=1e-12)


def test_complementary_gains_zero_coupling():
    it = build_augmented(DEFAULT_M1, [0.3, 0.1, 0.7], [0.7, 0.9, 0.3])
    np.testing.assert_allclose(it.A2, 0.0, atol=1e-15)


def test_A1_closed_form_scalar():
    # A1 = (m - ka)/(m - 1) per axis for diagonal M1
    m, ka = np.array([-0.2, -1.0, -3.0]), np.array([0.1, 0.5, 0.9])
    it = build_augmented(np.diag(m), ka, 0.5)
    np.testing.assert_allclose(np.diag(it.A1), (m - ka) / (m - 1), atol=1e-15)


def test_nominal_bound_examples():
    assert nominal_bound(0, 0) == 0
    assert nominal_bound(0.03, 0.04) == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(ValueError):
        nominal_bound(-1, 0)


def test_iterate_examples():
    A = np.diag([2 / 3, 0.5])
    seq = iterate_recursion(A, (0.5, 0.2), 2)
    np.testing.assert_allclose(seq.X[1], (1 / 3, 0.1), atol=1e-15)
    np.testing.assert_allclose(seq.X[2], (2 / 9, 0.05), atol=1e-15)
    seq = iterate_recursion(A, (0, 0), 1, noise=[[0.1, -0.1]])
    np.testing.assert_allclose(seq.X[1], (0.1, -0.1))
    with pytest.raises(ValueError):
        iterate_recursion(A, (0, 0), 2, noise=[[0.1, -0.1]])


def test_singular():
    with pytest.raises(SingularMatrix):
        build_augmented(np.eye(3), 0.3, 0.8)


@given(st.integers(0, 2 ** 31), st.integers(0, 60))
def test_matrix_power_matches_iteration(seed, k):
    rng = np.random.default_rng(seed)
    g = random_gains(rng)
    it = build_augmented(random_negative_definite(rng), g.k_alpha, g.k_p)
    X0 = rng.standard_normal(6)
    direct = iterate_recursion(it, X0, k).X[-1]
    np.testing.assert_allclose(matrix_power(it.A, k) @ X0, direct, atol=1e-10)


@given(st.integers(0, 2 ** 31))
def test_block_triangular_spectrum(seed):
    rng = np.random.default_rng(seed)
    g = random_gains(rng)
    it = build_augmented(random_negative_definite(rng), g.k_alpha, g.k_p)
    lam = np.concatenate([np.linalg.eigvals(it.A1), np.linalg.eigvals(it.A3)])
    assert it.rho == pytest.approx(np.max(np.abs(lam)), abs=1e-9)
    assert it.rho < 1


@given(st.integers(0, 2 ** 31))
def test_spectral_radius_matches_numpy(seed):
    A = np.random.default_rng(seed).standard_normal((6, 6))
    assert spectral_radius(A) == pytest.approx(np.max(np.abs(np.linalg.eigvals(A))), rel=1e-9)


def test_default_golden_radius():
    it = build_augmented(DEFAULT_M1, 0.3, 0.8)
    expected = max(np.max(np.abs(np.linalg.eigvals(it.A1))), 0.2)
    assert it.rho == pytest.approx(expected, abs=1e-12)
    assert it.rho == pytest.approx(0.50535, abs=5e-5)


def test_certificate_examples():
    c = certify(DEFAULT_M1, TilcGains(0.3, 0.8), 0.02, 0.03)
    assert c.passed and c.M1_symmetric and c.conservative_bound >= c.nominal_bound
    d = c.to_dict()
    assert d["passed"] and d["nominal_bound"] == pytest.approx(2 * np.hypot(0.02, 0.03))
    c = certify(DEFAULT_M1, TilcGains([1.0, 0.3, 0.3], 0.8))
    assert not c.passed and any("k_alpha[0]" in m for m in c.messages)
    c = certify(-5 * np.eye(3), TilcGains(0.0, 1.0))
    assert c.passed and c.rho == pytest.approx(5 / 6, abs=1e-12)
    c = certify(np.diag([-1.0, 0.5, -1.0]), TilcGains(0.3, 0.8))
    assert not c.passed and not c.M1_negative_definite


def test_certificate_singular_does_not_raise():
    c = certify(np.eye(3), TilcGains(0.3, 0.8))
    assert not c.passed and any("SingularMatrix" in m for m in c.messages)
    assert c.to_dict()["spectral_radius"] is None


def test_non_symmetric_negative_definite():
    M1 = np.array([[-1.0, 0.3, 0], [0, -0.5, 0], [0, 0, -2.0]])
    c = certify(M1, TilcGains(0.3, 0.8))
    assert c.passed and not c.M1_symmetric
    assert any("not symmetric" in m for m in c.messages)


def test_contraction_norm_bounds_powers():
    it = build_augmented(DEFAULT_M1, 0.3, 0.8)
    n, kappa, method = contraction_norm(it.A)
    assert n < 1 and method in ("spectral", "eigen-scaled")
    for i in range(1, 40):
        assert np.linalg.norm(matrix_power(it.A, i), 2) <= kappa * n ** i * (1 + 1e-9)
    b, *_ = conservative_bound(0.02, 0.03, it.A)
    assert np.isfinite(b) and b >= nominal_bound(0.02, 0.03)


def test_noise_vector_forms():
    rng = np.random.default_rng(1)
    v_dr, v_pr = rng.standard_normal((4, 3)), rng.standard_normal((4, 3))
    ex = noise_vectors(DEFAULT_M1, v_dr, v_pr, "exact")
    pa = noise_vectors(DEFAULT_M1, v_dr, v_pr, "drogue_only")
    assert ex.shape == pa.shape == (3, 6)
    np.testing.assert_array_equal(ex[:, 3:], pa[:, 3:])
    Q = np.linalg.inv(np.eye(3) - DEFAULT_M1)
    np.testing.assert_allclose(ex[:, :3] - pa[:, :3], np.diff(v_pr, axis=0) @ Q.T, atol=1e-14)
    with pytest.raises(ValueError):
        noise_vectors(DEFAULT_M1, v_dr, v_pr, "other")


def test_noise_samplers_respect_bound():
    rng = np.random.default_rng(7)
    for kind in ("ball", "alternating", "mixed"):
        v = sample_noise(rng, 500, 0.03, kind)
        assert v.shape == (500, 3) and np.all(np.linalg.norm(v, axis=1) <= 0.03 + 1e-15)
    assert np.array_equal(sample_noise(rng, 4, 0.0), np.zeros((4, 3)))


def test_initial_state_zero_when_learned():
    m0 = np.array([0.1, -0.2, 0.3])
    Q = np.linalg.inv(np.eye(3) - DEFAULT_M1)
    # with u_e = 0 the top block is (I - M1)^-1 (m0 - u_de)
    X0 = initial_state(DEFAULT_M1, m0, m0, np.zeros(3))
    np.testing.assert_allclose(X0, 0.0, atol=1e-15)
    X0 = initial_state(DEFAULT_M1, m0, np.zeros(3), np.zeros(3))
    np.testing.assert_allclose(X0[:3], Q @ m0, atol=1e-15)
