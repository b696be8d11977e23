"""Calderon-Zygmund kernels on Z^k \\ {0} and their dyadic decomposition.

A kernel K here is a closed-form function on R^k \\ {0} satisfying the size
bounds |d^a K(t)| <= A |t|^(-k-|a|) for |a| <= 1 and the cancellation bound
|int_{eps<=|t|<=R} K| <= A for all 0 < eps < R.  Three families are provided:

* ``odd_power``     K(t) = c * sign(t) / |t|^k in dimension 1,
* ``riesz_like``    K(t) = Omega(t/|t|) / |t|^k in dimension 2 with Omega a
                    mean-zero trigonometric polynomial on the circle,
* ``custom_closed_form``  any user callable (verified, not trusted).

``dyadic_decompose`` produces annular pieces

    K_j(x) = K(x) * (psi(2^(-(j+1)) x) - psi(2^(-j) x)) - c_j * eta_j(x)

where psi is a fixed smooth radial cutoff (1 on |x| <= 1/2, 0 on |x| >= 1,
glued with exp(-1/s)), eta is a fixed mean-one bump supported on
3/4 <= |x| <= 3/2 with eta_j(x) = 2^(-jk) eta(2^(-j) x), and c_j is the
quadrature value of int K * window so that every piece has mean zero.  Each
piece vanishes outside 2^(j-1) < |x| < 2^(j+1), and the pieces telescope back
to K on 1 <= |x| <= 2^J up to the outer tail.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

RADIAL_NODES_1D = 2**14
RADIAL_NODES_2D = 2**10
ANGULAR_NODES_2D = 2**7


# -- smooth cutoff machinery --------------------------------------------------


def _expm_bump(s: np.ndarray) -> np.ndarray:
    """exp(-1/s) for s > 0, zero otherwise (smooth at 0)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def smooth_step(u) -> np.ndarray:
    """C^infinity step: 0 for u <= 0, 1 for u >= 1, exp(-1/s)-glued between."""
    u = np.asarray(u, dtype=float)
    a = _expm_bump(u)
    b = _expm_bump(1.0 - u)
    return a / (a + b + (a + b == 0))


def radial_cutoff(r) -> np.ndarray:
    """psi as a function of the radius: 1 for r <= 1/2, 0 for r >= 1, smooth."""
    return smooth_step(2.0 * (1.0 - np.asarray(r, dtype=float)))


def annulus_window(r, j: int) -> np.ndarray:
    """Window of the j-th piece as a function of radius.

    Equals psi(r / 2^(j+1)) - psi(r / 2^j); supported on 2^(j-1) < r < 2^(j+1)
    and the windows telescope: sum_{j=0..J} = psi(r / 2^(J+1)) - psi(r).
    """
    r = np.asarray(r, dtype=float)
    return radial_cutoff(r * 2.0 ** (-(j + 1))) - radial_cutoff(r * 2.0 ** (-j))


def _bump_profile(r) -> np.ndarray:
    """Unnormalized radial bump supported on 3/4 <= r <= 3/2."""
    r = np.asarray(r, dtype=float)
    s = (r - 0.75) / 0.75
    inside = (s > 0) & (s < 1)
    out = np.zeros_like(r)
    si = s[inside]
    out[inside] = np.exp(-1.0 / (si * (1.0 - si)))
    return out


@lru_cache(maxsize=8)
def _bump_normalizer(dim: int) -> float:
    """Constant making the radial bump integrate to one over R^dim."""
    r = np.linspace(0.75, 1.5, 200001)
    vals = _bump_profile(r)
    if dim == 1:
        total = 2.0 * np.trapezoid(vals, r)
    elif dim == 2:
        total = 2.0 * math.pi * np.trapezoid(vals * r, r)
    else:
        raise ValueError("mean-one bump implemented for dimensions 1 and 2")
    return 1.0 / total


def mean_one_bump(x: np.ndarray, dim: int) -> np.ndarray:
    """eta: smooth, supported on 3/4 <= |x| <= 3/2, integral one over R^dim."""
    x = np.asarray(x, dtype=float)
    r = np.abs(x) if dim == 1 else np.sqrt((x * x).sum(axis=-1))
    return _bump_normalizer(dim) * _bump_profile(r)


# -- kernel families -----------------------------------------------------------


@dataclass(frozen=True)
class CZKernel:
    """Closed-form singular kernel with its claimed constant and truncation radius."""

    dim: int
    family: str
    params: dict = field(default_factory=dict)
    cz_constant: float = 1.0
    support_radius: float = math.inf
    func: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.family == "odd_power":
            if self.dim != 1:
                raise ValueError("odd_power kernels are one-dimensional")
        elif self.family == "riesz_like":
            if self.dim != 2:
                raise ValueError("riesz_like kernels are two-dimensional")
        elif self.family == "custom_closed_form":
            if self.func is None:
                raise ValueError("custom kernels need a callable")
        else:
            raise ValueError(f"unknown kernel family {self.family!r}")

    def _closed_form(self, pts: np.ndarray) -> np.ndarray:
        """Family formula without truncation; caller handles the origin."""
        if self.family == "odd_power":
            t = pts.reshape(-1).astype(float)
            scale = float(self.params.get("scale", 1.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = scale * np.sign(t) / np.abs(t) ** self.dim
            return vals
        if self.family == "riesz_like":
            x = pts[:, 0].astype(float)
            y = pts[:, 1].astype(float)
            r2 = x * x + y * y
            ang = np.arctan2(y, x)
            omega = np.zeros_like(ang)
            for m, amp in self.params.get("cos", {}).items():
                omega += float(amp) * np.cos(int(m) * ang)
            for m, amp in self.params.get("sin", {}).items():
                omega += float(amp) * np.sin(int(m) * ang)
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = omega / r2
            return vals
        return np.asarray(self.func(pts), dtype=float)

    def values_on(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized evaluation; the origin (if present) gets value 0.

        Lattice operator tables always exclude the diagonal, so a zero there
        is the convenient convention; scalar evaluation at 0 is an error.
        """
        pts = np.asarray(pts)
        if self.dim == 1:
            flat = pts.reshape(-1).astype(np.int64)
            radii = np.abs(flat).astype(float)
        else:
            flat = pts.reshape(-1, self.dim)
            radii = np.sqrt((flat.astype(float) ** 2).sum(axis=1))
        vals = self._closed_form(flat if self.dim > 1 else flat)
        vals = np.where(radii == 0, 0.0, vals)
        if math.isfinite(self.support_radius):
            vals = np.where(radii > self.support_radius, 0.0, vals)
        return vals.reshape(pts.shape if self.dim == 1 else pts.shape[:-1])

    def evaluate(self, t) -> float:
        p = np.asarray(t).reshape(1, -1) if self.dim > 1 else np.asarray(t).reshape(-1)
        r = np.abs(p).max() if self.dim == 1 else math.sqrt(float((p.astype(float) ** 2).sum()))
        if r == 0:
            raise ValueError("kernel is undefined at the origin")
        return float(self.values_on(p)[0])

    # -- JSON round trip ---------------------------------------------------

    def to_json(self) -> str:
        if self.family == "custom_closed_form":
            raise ValueError("custom kernels are not serializable")
        return json.dumps(
            {
                "family": self.family,
                "dim": self.dim,
                "params": self.params,
                "A": self.cz_constant,
                "support_radius": None
                if math.isinf(self.support_radius)
                else self.support_radius,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "CZKernel":
        obj = json.loads(text)
        params = obj.get("params", {})
        if "cos" in params:
            params = dict(params)
            params["cos"] = {int(k): v for k, v in params["cos"].items()}
        if "sin" in params:
            params = dict(params)
            params["sin"] = {int(k): v for k, v in params["sin"].items()}
        rad = obj.get("support_radius")
        return cls(
            dim=int(obj["dim"]),
            family=obj["family"],
            params=params,
            cz_constant=float(obj.get("A", 1.0)),
            support_radius=math.inf if rad is None else float(rad),
        )


def odd_power_kernel(scale: float = 1.0, cz_constant: float | None = None,
                     support_radius: float = math.inf) -> CZKernel:
    """K(t) = scale / t on Z \\ {0}."""
    return CZKernel(
        dim=1,
        family="odd_power",
        params={"scale": scale},
        cz_constant=abs(scale) if cz_constant is None else cz_constant,
        support_radius=support_radius,
    )


def riesz_like_kernel(cos_harmonics: dict[int, float] | None = None,
                      sin_harmonics: dict[int, float] | None = None,
                      cz_constant: float | None = None,
                      support_radius: float = math.inf) -> CZKernel:
    """K(t) = Omega(t/|t|)/|t|^2 with Omega a mean-zero circle polynomial."""
    cos_h = {int(m): float(a) for m, a in (cos_harmonics or {}).items()}
    sin_h = {int(m): float(a) for m, a in (sin_harmonics or {}).items()}
    if 0 in cos_h:
        raise ValueError("a constant harmonic would break mean-zero cancellation")
    if not cos_h and not sin_h:
        cos_h = {2: 1.0}
    if cz_constant is None:
        # |d_x K| r^3 = |2 cos(t) Omega + sin(t) Omega'| <= sum (2 + m)|a_m|,
        # which also dominates the size ratio sum |a_m|
        cz_constant = sum((2 + m) * abs(a) for m, a in cos_h.items()) + sum(
            (2 + m) * abs(a) for m, a in sin_h.items()
        )
    return CZKernel(
        dim=2,
        family="riesz_like",
        params={"cos": cos_h, "sin": sin_h},
        cz_constant=cz_constant,
        support_radius=support_radius,
    )


# -- verification ---------------------------------------------------------------


@dataclass
class CZReport:
    size_ratio_sup: float
    derivative_ratio_sup: float
    cancellation_sup: float
    passed: bool
    worst_size_point: tuple
    worst_cancellation: tuple


def _grid_radii(kernel: CZKernel, per_decade: int = 16) -> np.ndarray:
    lo, hi = -4.0, 16.0
    if math.isfinite(kernel.support_radius):
        hi = min(hi, math.log2(kernel.support_radius) - 1e-3)
    n = max(8, int((hi - lo) * per_decade))
    return 2.0 ** np.linspace(lo, hi, n)


def cz_verify(kernel: CZKernel, ranges: list[tuple[float, float]] | None = None,
              slack: float = 1.05, angular: int = 64) -> CZReport:
    """Check the size/derivative bounds on a log grid and cancellation by quadrature.

    Derivatives are central differences with step |t| * 1e-5; points within a
    step of the truncation radius are skipped (a sharp truncation is not
    differentiable on that sphere).  Cancellation integrates K over
    eps <= |t| <= R shells with the midpoint rule.
    """
    A = kernel.cz_constant
    radii = _grid_radii(kernel)
    h_rel = 1e-5

    if kernel.dim == 1:
        pts = np.concatenate([radii, -radii])
    else:
        angles = (np.arange(angular) + 0.5) * (2 * math.pi / angular)
        pts = np.stack(
            [np.outer(radii, np.cos(angles)).ravel(), np.outer(radii, np.sin(angles)).ravel()],
            axis=1,
        )
    r_of = np.abs(pts) if kernel.dim == 1 else np.sqrt((pts**2).sum(axis=1))
    if math.isfinite(kernel.support_radius):
        keep = r_of < kernel.support_radius * (1 - 10 * h_rel)
        pts, r_of = pts[keep], r_of[keep]

    # closed form, not values_on: the grid is off-lattice and values_on
    # snaps 1-d inputs to integers
    vals = kernel._closed_form(pts)
    size_ratio = np.abs(vals) * r_of**kernel.dim
    i_worst = int(np.argmax(size_ratio))

    deriv_ratio = np.zeros_like(r_of)
    for axis in range(kernel.dim):
        h = r_of * h_rel
        if kernel.dim == 1:
            vplus = kernel._closed_form(pts + h)
            vminus = kernel._closed_form(pts - h)
        else:
            step = np.zeros_like(pts)
            step[:, axis] = h
            vplus = kernel._closed_form(pts + step)
            vminus = kernel._closed_form(pts - step)
        d = (vplus - vminus) / (2 * h)
        deriv_ratio = np.maximum(deriv_ratio, np.abs(d) * r_of ** (kernel.dim + 1))

    if ranges is None:
        ranges = [(2.0**a, 2.0**b) for a in range(-2, 12, 2) for b in range(a + 2, 14, 4)]
    worst_cancel = 0.0
    worst_pair = (0.0, 0.0)
    for eps, R in ranges:
        if math.isfinite(kernel.support_radius):
            R = min(R, kernel.support_radius)
        if R <= eps:
            continue
        if kernel.dim == 1:
            n = RADIAL_NODES_1D
            mids = eps + (np.arange(n) + 0.5) * (R - eps) / n
            total = ((kernel._closed_form(mids) + kernel._closed_form(-mids)).sum()
                     * (R - eps) / n)
        else:
            nr, na = RADIAL_NODES_2D, ANGULAR_NODES_2D
            rm = eps + (np.arange(nr) + 0.5) * (R - eps) / nr
            am = (np.arange(na) + 0.5) * (2 * math.pi / na)
            grid = np.stack(
                [np.outer(rm, np.cos(am)).ravel(), np.outer(rm, np.sin(am)).ravel()], axis=1
            )
            w = np.repeat(rm, na) * ((R - eps) / nr) * (2 * math.pi / na)
            total = float((kernel._closed_form(grid) * w).sum())
        if abs(total) > worst_cancel:
            worst_cancel, worst_pair = abs(total), (eps, R)

    passed = bool(
        size_ratio[i_worst] <= slack * A
        and deriv_ratio.max() <= slack * A
        and worst_cancel <= slack * A
    )
    worst_pt = pts[i_worst] if kernel.dim > 1 else (float(pts[i_worst]),)
    return CZReport(
        size_ratio_sup=float(size_ratio[i_worst]),
        derivative_ratio_sup=float(deriv_ratio.max()),
        cancellation_sup=float(worst_cancel),
        passed=passed,
        worst_size_point=tuple(np.atleast_1d(worst_pt).tolist()),
        worst_cancellation=worst_pair,
    )


# -- dyadic decomposition --------------------------------------------------------


@dataclass(frozen=True)
class DyadicPiece:
    """Mean-zero annular piece K_j, supported on 2^(j-1) < |x| < 2^(j+1)."""

    j: int
    parent: CZKernel
    mean_correction: float

    @property
    def dim(self) -> int:
        return self.parent.dim

    def support_bounds(self) -> tuple[float, float]:
        return 2.0 ** (self.j - 1), 2.0 ** (self.j + 1)

    def values_on(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts)
        if self.dim == 1:
            flat = pts.reshape(-1)
            radii = np.abs(flat).astype(float)
        else:
            flat = pts.reshape(-1, self.dim)
            radii = np.sqrt((flat.astype(float) ** 2).sum(axis=1))
        win = annulus_window(radii, self.j)
        vals = self.parent.values_on(flat) * win
        if self.mean_correction != 0.0:
            vals = vals - self.mean_correction * (
                2.0 ** (-self.j * self.dim) * mean_one_bump(flat * 2.0 ** (-self.j), self.dim)
            )
        return vals.reshape(pts.shape if self.dim == 1 else pts.shape[:-1])

    def evaluate(self, t) -> float:
        p = np.asarray(t).reshape(-1) if self.dim == 1 else np.asarray(t).reshape(1, -1)
        return float(self.values_on(p)[0])


def _window_integral(kernel: CZKernel, j: int) -> float:
    """Quadrature of K(x) * window_j(x) over the annulus (the c_j constant)."""
    lo, hi = 2.0 ** (j - 1), 2.0 ** (j + 1)
    if kernel.dim == 1:
        n = RADIAL_NODES_1D
        mids = lo + (np.arange(n) + 0.5) * (hi - lo) / n
        win = annulus_window(mids, j)
        vals = (kernel._closed_form(mids) + kernel._closed_form(-mids)) * win
        return float(vals.sum() * (hi - lo) / n)
    nr, na = RADIAL_NODES_2D, ANGULAR_NODES_2D
    rm = lo + (np.arange(nr) + 0.5) * (hi - lo) / nr
    am = (np.arange(na) + 0.5) * (2 * math.pi / na)
    grid = np.stack([np.outer(rm, np.cos(am)).ravel(), np.outer(rm, np.sin(am)).ravel()], axis=1)
    w = np.repeat(rm, na) * ((hi - lo) / nr) * (2 * math.pi / na)
    win = annulus_window(np.repeat(rm, na), j)
    return float((kernel._closed_form(grid) * win * w).sum())


def dyadic_decompose(kernel: CZKernel, j: int) -> DyadicPiece:
    """Build the j-th mean-zero annular piece of the kernel.

    The correction coefficient c_j is computed by midpoint quadrature; for odd
    kernels it vanishes by symmetry (and comes out at roundoff level here).
    """
    if j < 0:
        raise ValueError("piece index must be nonnegative")
    if math.isfinite(kernel.support_radius) and 2.0 ** (j - 1) >= kernel.support_radius:
        return DyadicPiece(j=j, parent=kernel, mean_correction=0.0)
    return DyadicPiece(j=j, parent=kernel, mean_correction=_window_integral(kernel, j))


class WindowedKernelSum:
    """Sum of dyadic pieces over a j-window, used as a single operator kernel."""

    def __init__(self, pieces: list[DyadicPiece]):
        if not pieces:
            raise ValueError("need at least one piece")
        dims = {p.dim for p in pieces}
        if len(dims) != 1:
            raise ValueError("mixed dimensions")
        self.pieces = sorted(pieces, key=lambda p: p.j)
        self.dim = self.pieces[0].dim

    def values_on(self, pts: np.ndarray) -> np.ndarray:
        total = self.pieces[0].values_on(pts)
        for p in self.pieces[1:]:
            total = total + p.values_on(pts)
        return total

    def evaluate(self, t) -> float:
        return float(sum(p.evaluate(t) for p in self.pieces))
