"""Discrete Radon-type operators with polynomial phases.

The three translation-structured families are

    radon          T f(n)  = sum_{m != 0} f(n - P(m)) K(m)
    twisted_radon  T f(n)  = sum_{m != 0} f(n - P(m)) K(m) e(Q(m))
    quasi_radon    R f(n, n') = sum_{m != 0} f(n - m, n' - P(n, m)) K(m) e(Q(n, m))

with e(t) = exp(2 pi i t), K a Calderon-Zygmund kernel on the m-lattice, P an
integer polynomial map and Q a real polynomial phase.  On top of these sit
the non-convolution forms used by the dyadic analysis:

    oscillatory    T f(n)  = sum_{m != n} e(Q(n, m)) K(n - m) f(m)
    expsum         T f(n)  = sum_{m in Omega} e(P(n, m)) w(n, m) f(m)

All appliers consume and produce LatticeFunction values.  The first two
families are translation invariant, so they also admit a pushed-forward
kernel fast path (weight table over output offsets, applied by shifting or by
FFT); the direct summation stays available as the defining route and the two
are cross-checked in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import backend
from .kernels import CZKernel, DyadicPiece, WindowedKernelSum
from .lattice import Ball, LatticeFunction, Point, as_point, coords_array
from .polyalg import (
    BilinearPhase,
    CoefficientVector,
    IntPolyMap,
    frac_part,
    generic_poly_map,
)

KernelLike = CZKernel | DyadicPiece | WindowedKernelSum


def _range_coords(m_range) -> np.ndarray:
    """Lattice points of the summation range, origin removed, sorted."""
    if isinstance(m_range, Ball):
        coords = m_range.coords()
    else:
        coords = coords_array(m_range)
    keep = ~(coords == 0).all(axis=1)
    coords = coords[keep]
    order = np.lexsort(coords.T[::-1])
    return coords[order]


def _phase_factors(coords: np.ndarray, phase: CoefficientVector | None) -> np.ndarray:
    if phase is None:
        return np.ones(coords.shape[0], dtype=np.complex128)
    fracs = np.array([phase.eval_frac(tuple(row)) for row in coords])
    return np.exp(2j * np.pi * fracs)


def pushforward_weights(P: IntPolyMap, kernel: KernelLike, m_range,
                        phase: CoefficientVector | None = None) -> dict[Point, complex]:
    """Weight table w[v] = sum_{P(m) = v} K(m) e(Q(m)) over the range."""
    coords = _range_coords(m_range)
    kvals = kernel.values_on(coords if P.k1 > 1 else coords[:, 0])
    factors = _phase_factors(coords, phase)
    images = P.component_values(coords)
    weights: dict[Point, complex] = {}
    for row, kv, ph in zip(images, kvals, factors):
        if kv == 0.0:
            continue
        v = tuple(int(c) for c in row)
        weights[v] = weights.get(v, 0j) + kv * ph
    return weights


def radon_apply(f: LatticeFunction, P: IntPolyMap, kernel: KernelLike, m_range,
                phase: CoefficientVector | None = None,
                method: str = "direct") -> LatticeFunction:
    """Apply T_P (or its twisted form when a phase is given).

    method='direct' sums over the range per the definition;
    method='pushforward' first collapses the range through P;
    method='fft' evaluates the pushforward convolution on a dense box.
    """
    if f.dim != P.k2:
        raise ValueError("function lives on the target lattice of P")
    if method == "direct":
        coords = _range_coords(m_range)
        kvals = kernel.values_on(coords if P.k1 > 1 else coords[:, 0])
        factors = _phase_factors(coords, phase)
        images = P.component_values(coords)
        out: dict[Point, complex] = {}
        items = sorted(f.items())
        for row, kv, ph in zip(images, kvals, factors):
            if kv == 0.0:
                continue
            w = kv * ph
            shift = tuple(int(c) for c in row)
            for s, val in items:
                key = tuple(a + b for a, b in zip(s, shift))
                out[key] = out.get(key, 0j) + val * w
        return LatticeFunction(f.dim, out)
    if method == "pushforward":
        weights = pushforward_weights(P, kernel, m_range, phase)
        out = {}
        for s, val in sorted(f.items()):
            for v, w in sorted(weights.items()):
                key = tuple(a + b for a, b in zip(s, v))
                out[key] = out.get(key, 0j) + val * w
        return LatticeFunction(f.dim, out)
    if method == "fft":
        return _fft_pushforward_apply(f, P, kernel, m_range, phase)
    raise ValueError(f"unknown method {method!r}")


def twisted_radon_apply(f: LatticeFunction, P: IntPolyMap, phase: CoefficientVector,
                        kernel: KernelLike, m_range,
                        method: str = "direct") -> LatticeFunction:
    return radon_apply(f, P, kernel, m_range, phase=phase, method=method)


def _fft_pushforward_apply(f, P, kernel, m_range, phase) -> LatticeFunction:
    weights = pushforward_weights(P, kernel, m_range, phase)
    if not weights or len(f) == 0:
        return LatticeFunction(f.dim, {})
    fpts, fvals = f.arrays()
    wpts = coords_array(list(weights.keys()))
    wvals = np.array([weights[tuple(p)] for p in wpts], dtype=np.complex128)
    flo, fhi = fpts.min(axis=0), fpts.max(axis=0)
    wlo, whi = wpts.min(axis=0), wpts.max(axis=0)
    shape = tuple(int(h - l + 1) for l, h in zip(flo + wlo, fhi + whi))
    fa = np.zeros(tuple(int(h - l + 1) for l, h in zip(flo, fhi)), dtype=np.complex128)
    fa[tuple((fpts - flo).T)] = fvals
    wa = np.zeros(tuple(int(h - l + 1) for l, h in zip(wlo, whi)), dtype=np.complex128)
    wa[tuple((wpts - wlo).T)] = wvals
    axes = tuple(range(len(shape)))
    conv = np.fft.ifftn(
        np.fft.fftn(fa, s=shape, axes=axes) * np.fft.fftn(wa, s=shape, axes=axes),
        axes=axes,
    )
    out = {}
    origin = flo + wlo
    for idx in np.ndindex(conv.shape):
        v = conv[idx]
        if abs(v) > 1e-300:
            out[tuple(int(i + o) for i, o in zip(idx, origin))] = complex(v)
    return LatticeFunction(f.dim, out)


def quasi_radon_apply(f: LatticeFunction, k: int, P: IntPolyMap, phase: BilinearPhase,
                      kernel: KernelLike, m_range,
                      period: int | None = None) -> LatticeFunction:
    """Apply the quasi-translation-invariant form on Z^k x Z^l.

    P maps the concatenated argument (n, m) in Z^{2k} to the second-factor
    lattice Z^l; the phase is a polynomial in (n, m).  With ``period`` the
    second factor is treated as (Z/period)^l.
    """
    if P.k1 != 2 * k:
        raise ValueError("P must take the concatenated (n, m) argument")
    l = P.k2
    if f.dim != k + l:
        raise ValueError("function lives on Z^k x Z^l")
    coords = _range_coords(m_range)
    kvals = kernel.values_on(coords if k > 1 else coords[:, 0])
    out: dict[Point, complex] = {}
    for m_row, kv in zip(coords, kvals):
        if kv == 0.0:
            continue
        m = tuple(int(c) for c in m_row)
        for s, val in sorted(f.items()):
            s1, s2 = s[:k], s[k:]
            n = tuple(a + b for a, b in zip(s1, m))
            pv = P.eval(n + m)
            n2 = tuple(a + b for a, b in zip(s2, pv))
            if period is not None:
                n2 = tuple(c % period for c in n2)
            ph = phase.eval(n, m)
            out_key = n + n2
            out[out_key] = out.get(out_key, 0j) + val * kv * np.exp(2j * np.pi * (ph % 1.0))
    return LatticeFunction(f.dim, out)


# -- oscillatory (kernel at n - m) forms ---------------------------------------


def _kernel_table(kernel: KernelLike, out_coords: np.ndarray,
                  in_coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dense kernel values over every offset out - in, plus the origin index."""
    lo = out_coords.min(axis=0) - in_coords.max(axis=0)
    hi = out_coords.max(axis=0) - in_coords.min(axis=0)
    axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    dim = out_coords.shape[1]
    vals = kernel.values_on(pts if dim > 1 else pts[:, 0])
    table = vals.reshape([len(a) for a in axes])
    return table, -lo


def _coords_of(region, f: LatticeFunction | None = None) -> np.ndarray:
    if region is None:
        if f is None or len(f) == 0:
            raise ValueError("no coordinates to work on")
        return f.arrays()[0]
    if isinstance(region, Ball):
        return region.coords()
    return coords_array(region)


def oscillatory_apply(f: LatticeFunction, phase: BilinearPhase | None,
                      kernel: KernelLike, in_box=None, out_box=None) -> LatticeFunction:
    """Apply T f(n) = sum_{m != n} e(Q(n, m)) K(n - m) f(m).

    Input points default to the support of f; output points must be bounded,
    so either pass out_box or use a kernel with bounded support (a dyadic
    piece or window sum), in which case the support box of f grown by the
    kernel radius is used.
    """
    in_coords = _coords_of(in_box, f)
    if in_coords.ndim == 1:
        in_coords = in_coords.reshape(-1, 1)
    if out_box is None:
        if isinstance(kernel, (DyadicPiece, WindowedKernelSum)):
            if isinstance(kernel, WindowedKernelSum):
                reach = int(math.floor(kernel.pieces[-1].support_bounds()[1]))
            else:
                reach = int(math.floor(kernel.support_bounds()[1]))
        elif isinstance(kernel, CZKernel) and math.isfinite(kernel.support_radius):
            reach = int(math.floor(kernel.support_radius))
        else:
            raise ValueError("out_box is required for kernels with unbounded support")
        lo = in_coords.min(axis=0) - reach
        hi = in_coords.max(axis=0) + reach
        axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        out_coords = np.stack([m.ravel() for m in mesh], axis=1)
    else:
        out_coords = _coords_of(out_box)
        if out_coords.ndim == 1:
            out_coords = out_coords.reshape(-1, 1)

    fvals = np.array([f(tuple(row)) for row in in_coords], dtype=np.complex128)
    if phase is None:
        coeffs = np.zeros(0, dtype=np.float64)
        alphas = np.zeros((0, in_coords.shape[1]), dtype=np.int64)
        betas = alphas.copy()
    else:
        coeffs, alphas, betas = phase.term_arrays()
    table, origin = _kernel_table(kernel, out_coords, in_coords)
    y = backend.osc_apply(out_coords, in_coords, fvals, coeffs, alphas, betas, table, origin)
    return LatticeFunction.from_arrays(out_coords, y)


def expsum_apply(f: LatticeFunction, phase: BilinearPhase,
                 weight: Callable[[np.ndarray, np.ndarray], np.ndarray],
                 omega, scale_r: float | None = None) -> LatticeFunction:
    """Finite exponential-sum operator over a lattice region Omega.

    ``weight`` receives broadcastable (N, 1, k) and (1, M, k) coordinate
    arrays and must return the (N, M) weight matrix; the a-priori bounds
    |w| <= 1 and |grad w| <= 1/r are the caller's claim, checkable with
    ``weight_certificate``.
    """
    pts = _coords_of(omega)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    fvals = np.array([f(tuple(row)) for row in pts], dtype=np.complex128)
    coeffs, alphas, betas = phase.term_arrays()
    from ._slowpath import _power_products

    pn = _power_products(pts, alphas)
    pm = _power_products(pts, betas)
    ph = (coeffs[:, None] * pn).T @ pm
    np.mod(ph, 1.0, out=ph)
    w = np.asarray(weight(pts[:, None, :].astype(float), pts[None, :, :].astype(float)))
    y = (np.exp(2j * np.pi * ph) * w) @ fvals
    return LatticeFunction.from_arrays(pts, y)


def weight_certificate(weight, omega, scale_r: float, rng=None,
                       samples: int = 256) -> dict:
    """Spot-check the expsum weight bounds |w| <= 1, |grad w| <= 1/r."""
    rng = np.random.default_rng(rng)
    pts = _coords_of(omega)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    k = pts.shape[1]
    ii = rng.integers(0, pts.shape[0], size=samples)
    jj = rng.integers(0, pts.shape[0], size=samples)
    a = pts[ii].astype(float)[:, None, :]
    b = pts[jj].astype(float)[None, :, :].transpose(1, 0, 2)
    vals = np.array([weight(a[i : i + 1], b[i : i + 1]).ravel()[0] for i in range(samples)])
    max_abs = float(np.abs(vals).max())
    h = 1e-5 * max(scale_r, 1.0)
    max_grad = 0.0
    for axis in range(2 * k):
        da = np.zeros((1, 1, k))
        db = np.zeros((1, 1, k))
        if axis < k:
            da[..., axis] = h
        else:
            db[..., axis - k] = h
        plus = np.array(
            [weight(a[i : i + 1] + da, b[i : i + 1] + db).ravel()[0] for i in range(samples)]
        )
        minus = np.array(
            [weight(a[i : i + 1] - da, b[i : i + 1] - db).ravel()[0] for i in range(samples)]
        )
        max_grad = max(max_grad, float(np.abs(plus - minus).max() / (2 * h)))
    return {
        "max_abs": max_abs,
        "max_grad": max_grad,
        "abs_ok": max_abs <= 1.0 + 1e-9,
        "grad_ok": max_grad <= 1.0 / scale_r + 1e-9,
        "samples": samples,
    }


# -- modulation ---------------------------------------------------------------------


def modulate(f: LatticeFunction, theta, sign: int = 1) -> LatticeFunction:
    """Pointwise multiplication by e(sign * theta . x), with exact phase reduction."""
    theta = list(theta)
    out = {}
    for p, v in f.items():
        ph = sum(frac_part(t, c) for t, c in zip(theta, p)) % 1.0
        out[p] = v * np.exp(2j * np.pi * sign * ph)
    return LatticeFunction(f.dim, out)


def modulation_conjugation_check(k1: int, degree: int, theta, f: LatticeFunction,
                                 kernel: KernelLike, m_range):
    """Both sides of the linear-twist reduction for the universal map P0.

    Left: the twisted operator with one-variable phase theta . P0(m).
    Right: modulate(theta) o T_{P0} o modulate(-theta).  The two agree
    identically; returned as a pair for the harness to compare.
    """
    P0 = generic_poly_map(k1, degree)
    theta = tuple(theta)
    if len(theta) != P0.k2:
        raise ValueError("theta must have one entry per monomial")
    twist = CoefficientVector(dim=k1, degree=degree, values=theta)
    lhs = twisted_radon_apply(f, P0, twist, kernel, m_range)
    rhs = modulate(radon_apply(modulate(f, theta, -1), P0, kernel, m_range), theta, +1)
    return lhs, rhs


# -- materialization ------------------------------------------------------------------


@dataclass
class MatrixRealization:
    """Dense matrix of an operator between two finite point sets."""

    in_points: list[Point]
    out_points: list[Point]
    matrix: np.ndarray

    def apply_to(self, f: LatticeFunction) -> LatticeFunction:
        vec = np.array([f(p) for p in self.in_points], dtype=np.complex128)
        return LatticeFunction.from_arrays(coords_array(self.out_points), self.matrix @ vec)


@dataclass
class OperatorSpec:
    """Declarative operator description for materialization and configs."""

    variant: str
    kernel: KernelLike | None = None
    P: IntPolyMap | None = None
    phase: CoefficientVector | BilinearPhase | None = None
    m_range: object = None
    quasi_k: int | None = None
    period: int | None = None
    weight: Callable | None = None
    scale_r: float | None = None

    def apply(self, f: LatticeFunction) -> LatticeFunction:
        if self.variant == "radon":
            return radon_apply(f, self.P, self.kernel, self.m_range)
        if self.variant == "twisted_radon":
            return twisted_radon_apply(f, self.P, self.phase, self.kernel, self.m_range)
        if self.variant == "quasi_radon":
            return quasi_radon_apply(f, self.quasi_k, self.P, self.phase, self.kernel,
                                     self.m_range, period=self.period)
        if self.variant == "expsum":
            return expsum_apply(f, self.phase, self.weight, self.m_range, self.scale_r)
        if self.variant == "oscillatory":
            raise ValueError("oscillatory application needs explicit boxes; use oscillatory_apply")
        raise ValueError(f"unknown variant {self.variant!r}")


DEFAULT_BUDGET = 4096 * 4096


def materialize(spec: OperatorSpec, in_box, out_box=None,
                budget: int = DEFAULT_BUDGET) -> MatrixRealization:
    """Dense matrix of the operator on the given boxes (column-by-column definition).

    The translation-invariant variants are filled from the pushed-forward
    weight table; the oscillatory variant uses the backend fill.  An entry
    budget guards against accidentally huge realizations.
    """
    in_coords = _coords_of(in_box)
    if in_coords.ndim == 1:
        in_coords = in_coords.reshape(-1, 1)
    out_coords = _coords_of(out_box) if out_box is not None else in_coords
    if out_coords.ndim == 1:
        out_coords = out_coords.reshape(-1, 1)
    n_out, n_in = out_coords.shape[0], in_coords.shape[0]
    if n_out * n_in > budget:
        raise ValueError(f"materialization of {n_out} x {n_in} exceeds the budget {budget}")

    if spec.variant in ("radon", "twisted_radon"):
        phase = spec.phase if spec.variant == "twisted_radon" else None
        weights = pushforward_weights(spec.P, spec.kernel, spec.m_range, phase)
        mat = np.zeros((n_out, n_in), dtype=np.complex128)
        offsets = out_coords[:, None, :] - in_coords[None, :, :]
        for v, w in sorted(weights.items()):
            mask = (offsets == np.asarray(v)).all(axis=2)
            mat[mask] += w
    elif spec.variant == "oscillatory":
        coeffs, alphas, betas = (
            spec.phase.term_arrays()
            if spec.phase is not None
            else (np.zeros(0), np.zeros((0, in_coords.shape[1]), dtype=np.int64),
                  np.zeros((0, in_coords.shape[1]), dtype=np.int64))
        )
        table, origin = _kernel_table(spec.kernel, out_coords, in_coords)
        mat = backend.osc_materialize(out_coords, in_coords, coeffs, alphas, betas,
                                      table, origin)
    else:
        mat = np.zeros((n_out, n_in), dtype=np.complex128)
        out_index = {tuple(int(c) for c in row): i for i, row in enumerate(out_coords)}
        for j, row in enumerate(in_coords):
            col = spec.apply(LatticeFunction.delta(tuple(int(c) for c in row)))
            for p, v in col.items():
                i = out_index.get(p)
                if i is not None:
                    mat[i, j] = v
    return MatrixRealization(
        in_points=[tuple(int(c) for c in r) for r in in_coords],
        out_points=[tuple(int(c) for c in r) for r in out_coords],
        matrix=mat,
    )
