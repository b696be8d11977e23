import math

import numpy as np
import pytest

from radonlab.kernels import odd_power_kernel
from radonlab.normlab import (
    NormEstimate,
    holder_conjugate,
    modulated_toeplitz_norm2,
    norm2_power,
    norm_bracket,
    norm_exact,
    norm_p_lower,
    norm_p_upper,
    toeplitz_norm2,
)


def test_holder_conjugate_pairs():
    assert holder_conjugate(1.0) == math.inf
    assert holder_conjugate(math.inf) == 1.0
    assert holder_conjugate(2.0) == 2.0
    assert holder_conjugate(1.5) == pytest.approx(3.0)
    assert holder_conjugate(3.0) == pytest.approx(1.5)


def test_norm_exact_endpoints():
    m = np.array([[1.0, -2.0], [3.0, 4.0]])
    assert norm_exact(m, 1) == 6.0
    assert norm_exact(m, math.inf) == 7.0
    with pytest.raises(ValueError):
        norm_exact(m, 1.5)


def test_norm2_golden_ratio():
    m = np.array([[1.0, 1.0], [0.0, 1.0]])
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    value, used = norm2_power(m)
    assert value == pytest.approx(phi, abs=1e-9)
    assert used > 0


def test_norm2_matches_svd(rng):
    for _ in range(10):
        m = rng.normal(size=(7, 5)) + 1j * rng.normal(size=(7, 5))
        want = float(np.linalg.svd(m, compute_uv=False)[0])
        assert norm2_power(m)[0] == pytest.approx(want, rel=1e-8)


def test_matrix_validation():
    with pytest.raises(ValueError):
        norm_exact(np.array([1.0, 2.0]), 1)
    with pytest.raises(ValueError):
        norm_exact(np.array([[np.inf, 0.0], [0.0, 1.0]]), 1)


def test_bracket_inversion_rejected():
    with pytest.raises(ValueError):
        NormEstimate(p=2.0, lower=2.0, upper=1.0, method="bogus")


def test_rank_one_norm_closed_form(rng):
    u = rng.normal(size=6) + 1j * rng.normal(size=6)
    v = rng.normal(size=5) + 1j * rng.normal(size=5)
    m = np.outer(u, v.conj())
    for p in (1.5, 2.0, 3.0):
        q = holder_conjugate(p)
        want = float(np.sum(np.abs(u) ** p) ** (1 / p)
                     * np.sum(np.abs(v) ** q) ** (1 / q))
        est = norm_bracket(m, p)
        assert est.lower == pytest.approx(want, rel=1e-8)
        assert est.upper >= want * (1 - 1e-12)


def test_diagonal_norm_is_p_independent():
    m = np.diag([1.0, -3.0, 2.0])
    for p in (1.0, 1.5, 2.0, 3.0, math.inf):
        est = norm_bracket(m, p)
        assert est.lower == pytest.approx(3.0, rel=1e-8)
        assert est.upper == pytest.approx(3.0, rel=1e-8)


def test_bracket_sandwich_and_duality(rng):
    for _ in range(5):
        m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        for p in (1.5, 3.0):
            est = norm_bracket(m, p)
            dual = norm_bracket(m.conj().T, holder_conjugate(p))
            assert est.lower <= est.upper * (1 + 1e-12)
            assert est.lower == pytest.approx(dual.lower, rel=1e-6)
            assert est.lower <= dual.upper * (1 + 1e-9)


def test_p_estimators_reject_endpoints():
    m = np.eye(3)
    with pytest.raises(ValueError):
        norm_p_lower(m, 1.0)
    with pytest.raises(ValueError):
        norm_p_upper(m, math.inf)


def test_upper_bound_uses_best_interpolation():
    m = np.array([[1.0, 0.5], [0.0, 1.0]])
    est = norm_p_upper(m, 1.5)
    assert est.method.startswith("interp")
    n1, n2, ninf = norm_exact(m, 1), norm_exact(m, 2), norm_exact(m, math.inf)
    assert est.upper <= n1 ** (1 / 1.5) * ninf ** (1 - 1 / 1.5) + 1e-8
    t = 2.0 - 2.0 / 1.5
    assert est.upper <= n1 ** (1 - t) * n2 ** t + 1e-8


def _dense_toeplitz(gen: np.ndarray) -> np.ndarray:
    n = (len(gen) + 1) // 2
    out = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            out[i, j] = gen[i - j + n - 1]
    return out


def test_toeplitz_norm_matches_dense_svd(rng):
    n = 12
    gen = rng.normal(size=2 * n - 1) + 1j * rng.normal(size=2 * n - 1)
    want = float(np.linalg.svd(_dense_toeplitz(gen), compute_uv=False)[0])
    assert toeplitz_norm2(gen) == pytest.approx(want, rel=1e-8)


def test_toeplitz_generator_must_be_odd_length():
    with pytest.raises(ValueError):
        toeplitz_norm2(np.ones(4))


def test_modulated_norm_matches_dense_chirp(rng):
    theta = (math.sqrt(5.0) - 1.0) / 2.0
    radius = 8
    kern = odd_power_kernel(support_radius=12.0)
    pts = np.arange(-radius, radius + 1)
    dense = np.zeros((len(pts), len(pts)), dtype=complex)
    for i, n in enumerate(pts):
        for j, m in enumerate(pts):
            if n != m and abs(n - m) <= 12:
                dense[i, j] = np.exp(2j * np.pi * ((theta * n * m) % 1.0)) / (n - m)
    want = float(np.linalg.svd(dense, compute_uv=False)[0])
    got = modulated_toeplitz_norm2(theta, kern, radius)
    assert got == pytest.approx(want, rel=1e-8)


def test_modulated_norm_at_zero_theta_is_plain_toeplitz():
    kern = odd_power_kernel(support_radius=6.0)
    radius = 6
    t = np.arange(-2 * radius, 2 * radius + 1)
    gen = kern.values_on(t).astype(complex)
    assert modulated_toeplitz_norm2(0.0, kern, radius) == pytest.approx(
        toeplitz_norm2(gen), rel=1e-10)
