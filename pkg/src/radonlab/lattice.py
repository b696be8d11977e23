"""Lattice geometry and finitely supported functions on Z^k.

Everything downstream works with functions f: Z^k -> C that are nonzero at
finitely many points.  This module provides the point/ball containers, the
ell^p norms, the residue-class splitting n = nbar*Q + r used by the
factorization experiments, and two serialization formats (a JSON list of
point/value pairs, and a raw dense dump over a sup-norm box for large data).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator

import numpy as np

Point = tuple[int, ...]


def as_point(x) -> Point:
    """Coerce a coordinate sequence (or a bare int in dimension 1) to a tuple of ints."""
    if isinstance(x, (int, np.integer)):
        return (int(x),)
    return tuple(int(c) for c in x)


def coords_array(points: Iterable[Point]) -> np.ndarray:
    """Stack points into an (N, k) int64 array."""
    arr = np.asarray(list(points), dtype=np.int64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


@dataclass(frozen=True)
class Ball:
    """Origin-centered lattice ball, Euclidean or sup-norm."""

    radius: float
    dim: int
    norm_kind: str = "euclidean"

    def __post_init__(self):
        if self.norm_kind not in ("euclidean", "sup"):
            raise ValueError(f"unknown norm kind {self.norm_kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if not self.radius >= 0:
            raise ValueError("radius must be nonnegative")

    def contains(self, p) -> bool:
        p = as_point(p)
        if len(p) != self.dim:
            raise ValueError("point dimension mismatch")
        if self.norm_kind == "sup":
            return max(abs(c) for c in p) <= self.radius
        return math.sqrt(sum(c * c for c in p)) <= self.radius + 0.0

    def points(self) -> Iterator[Point]:
        """Enumerate the lattice points of the ball (finite radius only)."""
        if not math.isfinite(self.radius):
            raise ValueError("cannot enumerate an infinite ball")
        r = int(math.floor(self.radius))
        rng = range(-r, r + 1)
        if self.norm_kind == "sup":
            yield from product(rng, repeat=self.dim)
            return
        r2 = self.radius * self.radius
        for p in product(rng, repeat=self.dim):
            if sum(c * c for c in p) <= r2:
                yield p

    def coords(self) -> np.ndarray:
        return coords_array(self.points())


class LatticeFunction:
    """Finitely supported function on Z^k, stored as point -> complex value.

    Instances are treated as immutable; arithmetic returns new objects.
    Zero values are dropped from the support.
    """

    __slots__ = ("dim", "_data")

    def __init__(self, dim: int, data: dict[Point, complex] | None = None):
        self.dim = int(dim)
        clean: dict[Point, complex] = {}
        for p, v in (data or {}).items():
            p = as_point(p)
            if len(p) != self.dim:
                raise ValueError("point dimension mismatch")
            v = complex(v)
            if v != 0:
                clean[p] = v
        self._data = clean

    @classmethod
    def delta(cls, point) -> "LatticeFunction":
        p = as_point(point)
        return cls(len(p), {p: 1.0 + 0j})

    @classmethod
    def from_arrays(cls, coords: np.ndarray, values: np.ndarray) -> "LatticeFunction":
        coords = np.asarray(coords)
        if coords.ndim == 1:
            coords = coords.reshape(-1, 1)
        data = {tuple(int(c) for c in row): complex(v) for row, v in zip(coords, values)}
        return cls(coords.shape[1], data)

    def __call__(self, point) -> complex:
        return self._data.get(as_point(point), 0j)

    def items(self):
        return self._data.items()

    def support(self) -> list[Point]:
        return list(self._data.keys())

    def __len__(self) -> int:
        return len(self._data)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Support coordinates and values as parallel arrays (sorted for determinism)."""
        pts = sorted(self._data.keys())
        if not pts:
            return np.zeros((0, self.dim), dtype=np.int64), np.zeros(0, dtype=np.complex128)
        return coords_array(pts), np.array([self._data[p] for p in pts], dtype=np.complex128)

    def __add__(self, other: "LatticeFunction") -> "LatticeFunction":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        data = dict(self._data)
        for p, v in other._data.items():
            data[p] = data.get(p, 0j) + v
        return LatticeFunction(self.dim, data)

    def __sub__(self, other: "LatticeFunction") -> "LatticeFunction":
        return self + (-1.0) * other

    def __rmul__(self, scalar) -> "LatticeFunction":
        return LatticeFunction(self.dim, {p: scalar * v for p, v in self._data.items()})

    def restricted(self, region) -> "LatticeFunction":
        """Restriction to a Ball (or any object with a contains method)."""
        return LatticeFunction(
            self.dim, {p: v for p, v in self._data.items() if region.contains(p)}
        )

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        pts = sorted(self._data.keys())
        entries = [[list(p), [self._data[p].real, self._data[p].imag]] for p in pts]
        return json.dumps({"dim": self.dim, "points": entries})

    @classmethod
    def from_json(cls, text: str) -> "LatticeFunction":
        obj = json.loads(text)
        data = {tuple(coords): complex(re, im) for coords, (re, im) in obj["points"]}
        return cls(obj["dim"], data)

    def dense_bytes(self, radius: int) -> bytes:
        """Raw dump over the sup-norm box [-radius, radius]^k.

        Row-major over the box, each value as little-endian float64 (re, im)
        pairs.  Support outside the box is rejected rather than silently
        truncated.
        """
        for p in self._data:
            if max(abs(c) for c in p) > radius:
                raise ValueError("support exceeds the requested box")
        side = 2 * radius + 1
        arr = np.zeros((side,) * self.dim, dtype="<c16")
        for p, v in self._data.items():
            arr[tuple(c + radius for c in p)] = v
        return arr.tobytes()

    @classmethod
    def from_dense_bytes(cls, blob: bytes, dim: int, radius: int) -> "LatticeFunction":
        side = 2 * radius + 1
        arr = np.frombuffer(blob, dtype="<c16").reshape((side,) * dim)
        data = {}
        for idx in np.argwhere(arr != 0):
            data[tuple(int(i) - radius for i in idx)] = complex(arr[tuple(idx)])
        return cls(dim, data)


def lp_norm(f: LatticeFunction, p: float) -> float:
    """ell^p norm; p = inf gives the sup norm.  p < 1 is rejected."""
    if p != math.inf and p < 1:
        raise ValueError("p must satisfy p >= 1")
    if len(f) == 0:
        return 0.0
    mags = np.abs(f.arrays()[1])
    if p == math.inf:
        return float(mags.max())
    return float((mags**p).sum() ** (1.0 / p))


@dataclass(frozen=True)
class ResiduePair:
    """Splitting n = nbar*Q + r with r in [0, Q)^k (floor division per coordinate)."""

    r: Point
    nbar: Point
    modulus: int

    def reconstruct(self) -> Point:
        return tuple(b * self.modulus + c for b, c in zip(self.nbar, self.r))


def residue_split(n, Q: int) -> ResiduePair:
    if Q < 1:
        raise ValueError("modulus must be a positive integer")
    n = as_point(n)
    r = tuple(c % Q for c in n)
    nbar = tuple((c - rc) // Q for c, rc in zip(n, r))
    return ResiduePair(r=r, nbar=nbar, modulus=int(Q))


def step_embedding_norms(f: LatticeFunction, p: float) -> tuple[float, float]:
    """ell^p(Z^k) norm of f and L^p(R^k) norm of its unit-cube step extension.

    The step extension is constant on n + [0,1)^k, so its p-th power
    integrates to sum |f(n)|^p * 1 over the same terms; both numbers are
    computed from the identical term sequence and agree exactly.  Returned as
    a pair so harness checks can compare them verbatim.
    """
    if p != math.inf and p < 1:
        raise ValueError("p must satisfy p >= 1")
    if len(f) == 0:
        return 0.0, 0.0
    mags = np.abs(f.arrays()[1])
    if p == math.inf:
        ell = float(mags.max())
        return ell, ell
    powers = mags**p
    ell = float(powers.sum() ** (1.0 / p))
    integral = float((powers * 1.0).sum() ** (1.0 / p))
    return ell, integral
