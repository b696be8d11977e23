import math

import numpy as np
import pytest

import oracles
from radonlab.kernels import (
    CZKernel,
    WindowedKernelSum,
    annulus_window,
    cz_verify,
    dyadic_decompose,
    mean_one_bump,
    odd_power_kernel,
    radial_cutoff,
    riesz_like_kernel,
    smooth_step,
)


def test_smooth_step_edges_and_monotone():
    u = np.linspace(-1.0, 2.0, 301)
    v = smooth_step(u)
    assert np.all(v[u <= 0] == 0.0)
    assert np.all(v[u >= 1] == 1.0)
    inner = v[(u > 0) & (u < 1)]
    assert np.all(np.diff(inner) >= 0)
    assert 0.0 < float(smooth_step(np.array([0.5]))[0]) < 1.0


def test_radial_cutoff_plateaus():
    r = np.array([0.0, 0.25, 0.5, 0.7, 1.0, 3.0])
    v = radial_cutoff(r)
    assert np.all(v[:3] == 1.0)
    assert np.all(v[4:] == 0.0)
    assert 0.0 < v[3] < 1.0


def test_annulus_window_support_and_partition():
    r = np.linspace(0.01, 64.0, 2000)
    for j in range(0, 5):
        w = annulus_window(r, j)
        lo, hi = 2.0 ** (j - 1), 2.0 ** (j + 1)
        assert np.all(w[(r <= lo) | (r >= hi)] == 0.0)
        assert np.all((w >= 0.0) & (w <= 1.0))
    big_j = 7
    total = sum(annulus_window(r, j) for j in range(0, big_j + 1))
    mid = (r >= 1.0) & (r <= 2.0**big_j)
    assert np.allclose(total[mid], 1.0, atol=1e-14)


def test_mean_one_bump_support_and_mass():
    x = np.linspace(-2.0, 2.0, 1 << 16)
    v = mean_one_bump(x, 1)
    assert np.all(v[(np.abs(x) < 0.75) | (np.abs(x) > 1.5)] == 0.0)
    assert float(v.sum() * (x[1] - x[0])) == pytest.approx(1.0, abs=1e-6)
    r = np.linspace(0.0, 2.0, 1 << 16)
    pts = np.stack([r, np.zeros_like(r)], axis=1)
    ring = mean_one_bump(pts, 2) * 2 * math.pi * r
    assert float(ring.sum() * (r[1] - r[0])) == pytest.approx(1.0, abs=1e-6)


def test_odd_power_values_match_formula():
    k = odd_power_kernel(scale=3.0)
    for t in (1, -1, 2, -7, 12):
        assert k.evaluate(t) == 3.0 / t
    vals = k.values_on(np.array([-2, 0, 5]))
    assert vals[1] == 0.0 and vals[0] == -1.5 and vals[2] == 0.6


def test_odd_power_truncation():
    k = odd_power_kernel(support_radius=4.0)
    assert k.evaluate(4) == 0.25
    assert k.evaluate(5) == 0.0


def test_evaluate_rejects_origin():
    with pytest.raises(ValueError):
        odd_power_kernel().evaluate(0)
    with pytest.raises(ValueError):
        riesz_like_kernel().evaluate((0, 0))


def test_riesz_default_matches_cartesian_formula():
    k = riesz_like_kernel()
    pts = [(1, 0), (0, 1), (2, 3), (-4, 1), (5, -5)]
    for p in pts:
        assert k.evaluate(p) == pytest.approx(oracles.riesz_cos2(p), rel=1e-12, abs=1e-15)


def test_riesz_rejects_constant_harmonic():
    with pytest.raises(ValueError):
        riesz_like_kernel(cos_harmonics={0: 1.0})


def test_kernel_dim_family_consistency():
    with pytest.raises(ValueError):
        CZKernel(dim=2, family="odd_power")
    with pytest.raises(ValueError):
        CZKernel(dim=1, family="custom_closed_form")


def test_json_roundtrip_preserves_values():
    for k in (odd_power_kernel(scale=-2.0, support_radius=9.0),
              riesz_like_kernel(cos_harmonics={2: 1.0, 4: -0.5}, sin_harmonics={1: 0.25})):
        k2 = CZKernel.from_json(k.to_json())
        assert k2.support_radius == k.support_radius
        assert k2.cz_constant == k.cz_constant
        if k.dim == 1:
            assert k2.evaluate(3) == k.evaluate(3)
        else:
            assert k2.evaluate((3, -2)) == k.evaluate((3, -2))


def test_custom_kernel_not_serializable():
    k = CZKernel(dim=1, family="custom_closed_form",
                 func=lambda t: 1.0 / np.maximum(np.abs(t), 0.5))
    with pytest.raises(ValueError):
        k.to_json()


def test_cz_verify_accepts_standard_kernels():
    rep = cz_verify(odd_power_kernel())
    assert rep.passed
    assert rep.size_ratio_sup == pytest.approx(1.0, rel=1e-6)
    assert rep.derivative_ratio_sup == pytest.approx(1.0, rel=1e-3)
    assert rep.cancellation_sup < 1e-8
    rep2 = cz_verify(riesz_like_kernel())
    assert rep2.passed
    assert rep2.cancellation_sup < 1e-6


def test_cz_verify_flags_missing_cancellation():
    # even kernel ~ 1/|t|: right size and smoothness, but no cancellation,
    # so shell integrals grow like log R and must trip the check
    k = CZKernel(dim=1, family="custom_closed_form", cz_constant=1.0,
                 func=lambda t: 1.0 / np.maximum(np.abs(np.asarray(t, dtype=float)), 1e-9))
    rep = cz_verify(k)
    assert not rep.passed
    assert rep.cancellation_sup > 1.0


def test_dyadic_piece_support_is_hard_zero():
    k = odd_power_kernel()
    for j in (0, 2, 5):
        piece = dyadic_decompose(k, j)
        lo, hi = piece.support_bounds()
        assert (lo, hi) == (2.0 ** (j - 1), 2.0 ** (j + 1))
        for t in (int(math.floor(lo)), int(math.ceil(hi)), int(math.ceil(hi)) + 3, 0):
            if abs(t) <= lo or abs(t) >= hi:
                assert piece.values_on(np.array([t]))[0] == 0.0


def test_odd_kernel_pieces_need_no_correction():
    k = odd_power_kernel()
    for j in range(0, 6):
        assert abs(dyadic_decompose(k, j).mean_correction) < 1e-12


def test_riesz_pieces_need_no_correction():
    k = riesz_like_kernel()
    for j in range(0, 4):
        assert abs(dyadic_decompose(k, j).mean_correction) < 1e-10


def test_even_kernel_correction_is_scale_invariant():
    # K = 1/|t| is homogeneous of degree -1, so c_j = 2 * int window_0(s)/s ds
    # independently of j; the quadrature must reproduce that
    k = CZKernel(dim=1, family="custom_closed_form",
                 func=lambda t: 1.0 / np.maximum(np.abs(np.asarray(t, dtype=float)), 1e-9))
    cs = [dyadic_decompose(k, j).mean_correction for j in (1, 2, 3, 4)]
    assert cs[0] > 0.5
    for c in cs[1:]:
        assert c == pytest.approx(cs[0], rel=1e-9)


def test_even_kernel_correction_matches_frullani_value():
    # For K = 1/|t| the window integral is a Frullani integral:
    # int (psi(t/2^(j+1)) - psi(t/2^j)) 2/t dt = 2 ln 2, whatever the profile
    k = CZKernel(dim=1, family="custom_closed_form",
                 func=lambda t: 1.0 / np.maximum(np.abs(np.asarray(t, dtype=float)), 1e-9))
    for j in (1, 3, 5):
        c = dyadic_decompose(k, j).mean_correction
        assert c == pytest.approx(2.0 * math.log(2.0), rel=1e-9)


def test_truncated_kernel_beyond_support_gets_zero_correction():
    k = CZKernel(dim=1, family="custom_closed_form", support_radius=4.0,
                 func=lambda t: 1.0 / np.maximum(np.abs(np.asarray(t, dtype=float)), 1e-9))
    piece = dyadic_decompose(k, 4)
    assert piece.mean_correction == 0.0


def test_dyadic_decompose_rejects_negative_index():
    with pytest.raises(ValueError):
        dyadic_decompose(odd_power_kernel(), -1)


def test_pieces_telescope_to_parent_on_lattice():
    k = odd_power_kernel()
    big_j = 6
    pieces = [dyadic_decompose(k, j) for j in range(big_j + 1)]
    total = WindowedKernelSum(pieces)
    for t in range(1, 2**big_j + 1):
        assert total.evaluate(t) == pytest.approx(1.0 / t, abs=1e-13)
        assert total.evaluate(-t) == pytest.approx(-1.0 / t, abs=1e-13)


def test_pieces_telescope_over_wide_range():
    k = odd_power_kernel()
    pieces = [dyadic_decompose(k, j) for j in range(21)]
    total = WindowedKernelSum(pieces)
    sample = np.unique(np.round(2.0 ** np.linspace(1, 18, 100)).astype(np.int64))
    got = total.values_on(sample)
    assert np.abs(got - 1.0 / sample).max() <= 1e-10


def test_pieces_telescope_in_two_dims():
    k = riesz_like_kernel()
    pieces = [dyadic_decompose(k, j) for j in range(6)]
    total = WindowedKernelSum(pieces)
    for p in [(1, 0), (2, 1), (-3, 5), (7, -7), (11, 2)]:
        assert total.evaluate(p) == pytest.approx(oracles.riesz_cos2(p), abs=1e-10)


def test_windowed_sum_validation():
    with pytest.raises(ValueError):
        WindowedKernelSum([])
    p1 = dyadic_decompose(odd_power_kernel(), 1)
    p2 = dyadic_decompose(riesz_like_kernel(), 1)
    with pytest.raises(ValueError):
        WindowedKernelSum([p1, p2])


def test_windowed_sum_orders_pieces():
    k = odd_power_kernel()
    s = WindowedKernelSum([dyadic_decompose(k, 3), dyadic_decompose(k, 1)])
    assert [p.j for p in s.pieces] == [1, 3]
