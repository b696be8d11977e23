"""Fourier multipliers of the polynomial Radon operators and identity checks.

With the transform convention fhat(xi) = sum_n f(n) e(-2 pi i n . xi), the
translation-invariant operators become multiplication by the truncated
lattice sums

    m(xi)      = sum_{0<|m|<=R} K(m) e(-xi . P(m))             (plain)
    mt(xi)     = sum_{0<|m|<=R} K(m) e(-(xi . P(m) - Q(m)))    (twisted)
    mu(xi)     = sum_{0<|m|<=R} K(m) e(-xi . P0(m))            (universal)
    mut(xi)    = sum_{0<|m|<=R} K(m) e(-(xi - theta) . P0(m))  (shifted universal)

where P0 is the full monomial map of the ambient degree.  The descent matrix
L of P satisfies mu(L xi) = m(xi) and mut(L xi) = mt(xi) when theta is the
coefficient vector of Q; mut(xi) = mu(xi - theta) by construction.  Each
phase term is reduced mod 1 with exact dyadic/rational arithmetic, so these
identities and the exact 1-periodicity in every coordinate hold to roundoff
regardless of how large P(m) gets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import product

import numpy as np

from .kernels import CZKernel
from .lattice import Ball, LatticeFunction, lp_norm
from .operators import oscillatory_apply, quasi_radon_apply
from .polyalg import (
    BilinearPhase,
    CoefficientVector,
    IntPolyMap,
    descent_map,
    frac_part,
    generic_poly_map,
    index_set,
)

KINDS = ("plain", "twisted", "universal", "shifted_universal")


@dataclass(frozen=True)
class MultiplierSpec:
    """Which symbol to evaluate, over which truncated kernel sum."""

    kind: str
    kernel: CZKernel
    trunc_radius: float
    P: IntPolyMap | None = None
    twist: CoefficientVector | None = None
    degree: int | None = None
    arg_dim: int | None = None
    theta: CoefficientVector | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.kind in ("plain", "twisted") and self.P is None:
            raise ValueError("polynomial map required")
        if self.kind == "twisted" and self.twist is None:
            raise ValueError("twist phase required")
        if self.kind in ("universal", "shifted_universal") and (
            self.degree is None or self.arg_dim is None
        ):
            raise ValueError("universal symbols need degree and argument dimension")
        if self.kind == "shifted_universal" and self.theta is None:
            raise ValueError("shifted universal symbol needs theta")

    @property
    def xi_len(self) -> int:
        if self.kind in ("plain", "twisted"):
            return self.P.k2
        return index_set(self.arg_dim, self.degree).size


def _sum_points(dim: int, radius: float) -> np.ndarray:
    ball = Ball(radius=radius, dim=dim, norm_kind="euclidean")
    coords = ball.coords()
    return coords[~(coords == 0).all(axis=1)]


def eval_multiplier(spec: MultiplierSpec, xi) -> complex:
    """Exact truncated lattice sum of the symbol at xi (floats or Fractions)."""
    xi = [x if isinstance(x, Fraction) else Fraction(float(x)) for x in xi]
    if len(xi) != spec.xi_len:
        raise ValueError("argument length mismatch")
    k1 = spec.P.k1 if spec.P is not None else spec.arg_dim
    pts = _sum_points(k1, spec.trunc_radius)
    kvals = spec.kernel.values_on(pts if k1 > 1 else pts[:, 0])

    if spec.kind in ("plain", "twisted"):
        images = spec.P.component_values(pts)
        phases = np.empty(pts.shape[0])
        for i, row in enumerate(images):
            ph = sum(frac_part(x, int(v)) for x, v in zip(xi, row))
            if spec.kind == "twisted":
                ph -= spec.twist.eval_frac(tuple(pts[i]))
            phases[i] = ph % 1.0
    else:
        iset = index_set(spec.arg_dim, spec.degree)
        phases = np.empty(pts.shape[0])
        for i, row in enumerate(pts):
            p = tuple(int(c) for c in row)
            ph = 0.0
            for x, alpha in zip(xi, iset.indices):
                mono = 1
                for c, e in zip(p, alpha):
                    mono *= c**e
                ph += frac_part(x, mono)
                if spec.kind == "shifted_universal":
                    th = spec.theta.values[iset.position(alpha)]
                    if th:
                        ph -= frac_part(th, mono)
            phases[i] = ph % 1.0
    return complex((kvals * np.exp(-2j * np.pi * phases)).sum())


def universal_spec(kernel: CZKernel, trunc_radius: float, arg_dim: int,
                   degree: int) -> MultiplierSpec:
    return MultiplierSpec(kind="universal", kernel=kernel, trunc_radius=trunc_radius,
                          degree=degree, arg_dim=arg_dim)


# -- identity checks ---------------------------------------------------------------


def descent_identity_check(P: IntPolyMap, kernel: CZKernel, trunc_radius: float,
                           xis: list, twist: CoefficientVector | None = None,
                           degree: int | None = None) -> float:
    """max |mu(L xi) - m(xi)| over the sample points (twisted variant included).

    L xi is computed exactly (integer matrix times dyadic rationals), so the
    deviation measures only the two evaluation routes.
    """
    d = degree if degree is not None else max(P.degree, 2 if twist is None else twist.degree)
    if twist is not None:
        d = max(d, twist.degree)
    L = descent_map(P, d)
    down = MultiplierSpec(kind="plain" if twist is None else "twisted", kernel=kernel,
                          trunc_radius=trunc_radius, P=P, twist=twist)
    if twist is None:
        up = universal_spec(kernel, trunc_radius, P.k1, d)
    else:
        theta_vals = []
        iset = index_set(P.k1, d)
        tw_iset = index_set(twist.dim, twist.degree)
        lookup = dict(zip(tw_iset.indices, twist.values))
        for alpha in iset.indices:
            theta_vals.append(lookup.get(alpha, 0))
        up = MultiplierSpec(kind="shifted_universal", kernel=kernel,
                            trunc_radius=trunc_radius, degree=d, arg_dim=P.k1,
                            theta=CoefficientVector(P.k1, d, tuple(theta_vals)))
    worst = 0.0
    for xi in xis:
        exact = [Fraction(float(x)) for x in xi]
        lifted = L.apply(exact)
        dev = abs(eval_multiplier(up, lifted) - eval_multiplier(down, exact))
        worst = max(worst, dev)
    return worst


def quasi_shift_check(theta: CoefficientVector, kernel: CZKernel, trunc_radius: float,
                      xis: list) -> float:
    """max |mut(xi) - mu(xi - theta)| over the samples; exact shift arithmetic."""
    d, k1 = theta.degree, theta.dim
    shifted = MultiplierSpec(kind="shifted_universal", kernel=kernel,
                             trunc_radius=trunc_radius, degree=d, arg_dim=k1, theta=theta)
    plain = universal_spec(kernel, trunc_radius, k1, d)
    worst = 0.0
    for xi in xis:
        exact = [Fraction(float(x)) for x in xi]
        moved = [
            x - (t if isinstance(t, Fraction) else Fraction(float(t)))
            for x, t in zip(exact, theta.values)
        ]
        dev = abs(eval_multiplier(shifted, exact) - eval_multiplier(plain, moved))
        worst = max(worst, dev)
    return worst


def periodicity_check(spec: MultiplierSpec, xis: list) -> float:
    """max deviation of the symbol under xi -> xi + e_i (exact 1-periodicity)."""
    worst = 0.0
    for xi in xis:
        base = eval_multiplier(spec, xi)
        for i in range(len(xi)):
            moved = list(xi)
            moved[i] = Fraction(float(moved[i])) + 1
            worst = max(worst, abs(eval_multiplier(spec, moved) - base))
    return worst


def periodic_plancherel_check(k: int, P: IntPolyMap, phase: BilinearPhase,
                              kernel: CZKernel, m_radius: float,
                              f: LatticeFunction, period: int) -> tuple[float, float]:
    """ell^2 norm of the quasi-invariant operator output, two ways.

    Direct: apply on Z^k x (Z/period)^l.  Fiberwise: DFT the second variable,
    apply the oscillatory operator with the substituted phase on each
    frequency fiber, and combine by Parseval.  Returns (direct, fiberwise).
    """
    if period < 1:
        raise ValueError("period must be at least 1")
    if k != 1 or P.k2 != 1:
        raise ValueError("fiber route implemented for k = l = 1")
    m_range = Ball(radius=m_radius, dim=k, norm_kind="euclidean")
    direct = quasi_radon_apply(f, k, P, phase, kernel, m_range, period=period)
    direct_norm = lp_norm(direct, 2)

    xs = sorted({p[0] for p in f.support()})
    lo, hi = min(xs), max(xs)
    grid = np.zeros((hi - lo + 1, period), dtype=np.complex128)
    for (x, y), v in f.items():
        grid[x - lo, y % period] += v
    fibers = np.fft.fft(grid, axis=1)

    trunc = replace(kernel, support_radius=m_radius)
    qsub = phase.compose_n_minus_m()
    psub_terms = _pair_substitution_terms(P, k)
    total = 0.0
    reach = int(math.floor(m_radius))
    out_pts = np.arange(lo - reach, hi + reach + 1, dtype=np.int64)
    in_pts = np.arange(lo, hi + 1, dtype=np.int64)
    for v in range(period):
        xi = Fraction(v, period)
        table = qsub.full_table()
        for (alpha, beta), c in psub_terms.items():
            table[(alpha, beta)] = table.get((alpha, beta), 0) - xi * c
        fiber_phase = BilinearPhase(k, table)
        fin = LatticeFunction.from_arrays(in_pts, fibers[:, v])
        fout = oscillatory_apply(fin, fiber_phase, trunc,
                                 in_box=[(int(x),) for x in in_pts],
                                 out_box=[(int(x),) for x in out_pts])
        total += lp_norm(fout, 2) ** 2
    fiber_norm = math.sqrt(total / period)
    return direct_norm, fiber_norm


def _pair_substitution_terms(P: IntPolyMap, k: int) -> dict:
    """Integer table of P(n, n - m) as a polynomial in (n, m), single component."""
    if P.k2 != 1:
        raise ValueError("single-component substitution only")
    out: dict[tuple, int] = {}
    for (l, alpha), c in P.coeffs.items():
        a_n, a_m = alpha[:k], alpha[k:]
        for g in product(*[range(e + 1) for e in a_m]):
            coef = c
            for e, gi in zip(a_m, g):
                coef *= math.comb(e, gi)
            sign = (-1) ** sum(g)
            key_n = tuple(an + am - gi for an, am, gi in zip(a_n, a_m, g))
            key = (key_n, tuple(g))
            out[key] = out.get(key, 0) + coef * sign
    return {key: v for key, v in out.items() if v}


def circulant_eigen_check(P: IntPolyMap, kernel: CZKernel, m_radius: float,
                          period: int, twist: CoefficientVector | None = None) -> float:
    """Eigenvalues of the periodized operator vs the symbol at rational points.

    On (Z/period)^{k2} the operator is circulant; its eigenvalue at frequency
    v is the symbol at xi = v / period.  Returns the max absolute deviation
    between the FFT of the periodized weight column and the multiplier values.
    """
    from .operators import pushforward_weights

    m_range = Ball(radius=m_radius, dim=P.k1, norm_kind="euclidean")
    weights = pushforward_weights(P, kernel, m_range, twist)
    col = np.zeros((period,) * P.k2, dtype=np.complex128)
    for v, w in weights.items():
        col[tuple(c % period for c in v)] += w
    eig = np.fft.fftn(col)

    spec = MultiplierSpec(kind="plain" if twist is None else "twisted", kernel=kernel,
                          trunc_radius=m_radius, P=P, twist=twist)
    worst = 0.0
    for idx in np.ndindex(col.shape):
        xi = [Fraction(i, period) for i in idx]
        worst = max(worst, abs(eig[idx] - eval_multiplier(spec, xi)))
    return worst
