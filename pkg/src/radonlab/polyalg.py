"""Polynomial bookkeeping: multi-index sets, integer polynomial maps,
real bilinear phase tables, and the descent (lifting) matrix.

Conventions fixed here and used everywhere else:

* Ind(d) is the set of multi-indices a with 1 <= |a| <= d in graded order,
  grades ascending and, within a grade, exponent tuples in descending
  lexicographic order (so for k = 2, d = 2: x1, x2, x1^2, x1 x2, x2^2).
  Its size is D = C(k + d, d) - 1.
* The generic degree-d map P0: Z^k -> Z^D has components [P0(x)]_a = x^a.
* A polynomial map P of degree d with coefficients beta_{l,a} induces the
  descent matrix [L xi]_a = sum_l beta_{l,a} xi_l, so that
  (L xi) . P0(m) = xi . P(m) identically.

Phase arithmetic note: a float is an exact dyadic rational, so the
fractional part of coeff * integer can be computed exactly with integer
arithmetic.  ``frac_part`` does this; multiplier and twisted-operator code
uses it so that algebraic identities hold to roundoff independently of how
large the polynomial values get.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Iterable

import numpy as np

from .lattice import Point, as_point

MultiIndex = tuple[int, ...]


def _mod1(x):
    return x % 1


def frac_part(coeff, value: int) -> float:
    """Exact fractional part of coeff * value for integer value.

    coeff may be a Fraction or a float (interpreted as the dyadic rational it
    is).  The result is the exact rational reduced mod 1, returned as float.
    """
    fr = coeff if isinstance(coeff, Fraction) else Fraction(coeff)
    num = fr.numerator * int(value) % fr.denominator
    return num / fr.denominator


def frac_part_exact(coeff, value: int) -> Fraction:
    fr = coeff if isinstance(coeff, Fraction) else Fraction(coeff)
    return (fr * value) % 1


# -- multi-index sets ------------------------------------------------------------


@dataclass(frozen=True)
class IndexSet:
    """Graded multi-index set Ind(d) over dimension k (grades 1..d)."""

    dim: int
    degree: int
    indices: tuple[MultiIndex, ...]

    @property
    def size(self) -> int:
        return len(self.indices)

    def position(self, alpha: MultiIndex) -> int:
        return self.indices.index(tuple(alpha))


@lru_cache(maxsize=None)
def index_set(dim: int, degree: int) -> IndexSet:
    if dim < 1 or degree < 1:
        raise ValueError("need dim >= 1 and degree >= 1")
    idx = [
        a
        for a in product(range(degree + 1), repeat=dim)
        if 1 <= sum(a) <= degree
    ]
    idx.sort(key=lambda a: (sum(a), tuple(-x for x in a)))
    out = IndexSet(dim=dim, degree=degree, indices=tuple(idx))
    expected = math.comb(dim + degree, degree) - 1
    assert out.size == expected
    return out


def monomial(point: Point, alpha: MultiIndex) -> int:
    """Exact integer m^alpha (arbitrary precision)."""
    val = 1
    for c, e in zip(point, alpha):
        val *= c**e
    return val


def generic_eval(point, degree: int) -> tuple[int, ...]:
    """P0(m): the full monomial vector (m^a)_{a in Ind(degree)}."""
    p = as_point(point)
    iset = index_set(len(p), degree)
    return tuple(monomial(p, a) for a in iset.indices)


# -- integer polynomial maps -----------------------------------------------------


@dataclass(frozen=True)
class IntPolyMap:
    """Polynomial map Z^{k1} -> Z^{k2} with integer coefficients.

    Coefficients are keyed by (component, multi-index); the zero multi-index
    (a constant term) is allowed for operator arguments but rejected by the
    descent construction.
    """

    k1: int
    k2: int
    degree: int
    coeffs: dict[tuple[int, MultiIndex], int] = field(default_factory=dict)

    def __post_init__(self):
        for (l, alpha), c in self.coeffs.items():
            if not (0 <= l < self.k2):
                raise ValueError("component index out of range")
            if len(alpha) != self.k1 or any(e < 0 for e in alpha):
                raise ValueError("bad multi-index")
            if sum(alpha) > self.degree:
                raise ValueError("term exceeds declared degree")
            if c != int(c):
                raise ValueError("coefficients must be integers")

    def eval(self, point) -> tuple[int, ...]:
        p = as_point(point)
        if len(p) != self.k1:
            raise ValueError("argument dimension mismatch")
        out = [0] * self.k2
        for (l, alpha), c in self.coeffs.items():
            out[l] += c * monomial(p, alpha)
        return tuple(out)

    def component_values(self, coords: np.ndarray) -> np.ndarray:
        """Vectorized exact evaluation on an (N, k1) int array -> (N, k2) object/int64."""
        coords = np.asarray(coords, dtype=np.int64)
        if coords.ndim == 1:
            coords = coords.reshape(-1, 1)
        out = np.zeros((coords.shape[0], self.k2), dtype=np.int64)
        for (l, alpha), c in self.coeffs.items():
            term = np.full(coords.shape[0], c, dtype=np.int64)
            for d, e in enumerate(alpha):
                for _ in range(e):
                    term = term * coords[:, d]
            out[:, l] += term
        return out

    def padded(self, degree: int) -> "IntPolyMap":
        if degree < self.degree:
            raise ValueError("cannot pad to a smaller degree")
        return IntPolyMap(self.k1, self.k2, degree, dict(self.coeffs))

    def to_json(self) -> str:
        entries = [
            {"l": l, "alpha": list(alpha), "beta": c}
            for (l, alpha), c in sorted(self.coeffs.items())
        ]
        return json.dumps({"k1": self.k1, "k2": self.k2, "degree": self.degree, "terms": entries})

    @classmethod
    def from_json(cls, text: str) -> "IntPolyMap":
        obj = json.loads(text)
        coeffs = {
            (int(t["l"]), tuple(int(e) for e in t["alpha"])): int(t["beta"])
            for t in obj["terms"]
        }
        return cls(int(obj["k1"]), int(obj["k2"]), int(obj["degree"]), coeffs)


def generic_poly_map(k1: int, degree: int) -> IntPolyMap:
    """The universal map P0 whose components are all monomials in Ind(degree)."""
    iset = index_set(k1, degree)
    coeffs = {(l, alpha): 1 for l, alpha in enumerate(iset.indices)}
    return IntPolyMap(k1=k1, k2=iset.size, degree=degree, coeffs=coeffs)


# -- one-variable phase tables ----------------------------------------------------


@dataclass(frozen=True)
class CoefficientVector:
    """Real phase polynomial Q(m) = sum_a theta_a m^a over Ind(degree).

    Entries may be floats or Fractions; evaluation reduces each term mod 1
    exactly, so e(Q(m)) is computed without large-argument cancellation.
    """

    dim: int
    degree: int
    values: tuple

    def __post_init__(self):
        iset = index_set(self.dim, self.degree)
        if len(self.values) != iset.size:
            raise ValueError("coefficient vector length must match Ind(degree)")

    @classmethod
    def from_dict(cls, dim: int, degree: int, table: dict[MultiIndex, object]) -> "CoefficientVector":
        iset = index_set(dim, degree)
        vals = [table.get(a, 0) for a in iset.indices]
        return cls(dim=dim, degree=degree, values=tuple(vals))

    def index_set(self) -> IndexSet:
        return index_set(self.dim, self.degree)

    def eval_frac(self, point) -> float:
        """{Q(m)} with exact per-term reduction, as a float in [0, 1)."""
        p = as_point(point)
        total = 0.0
        for theta, alpha in zip(self.values, self.index_set().indices):
            if theta:
                total += frac_part(theta, monomial(p, alpha))
        return total % 1.0

    def eval_frac_exact(self, point) -> Fraction:
        p = as_point(point)
        total = Fraction(0)
        for theta, alpha in zip(self.values, self.index_set().indices):
            if theta:
                total += frac_part_exact(theta, monomial(p, alpha))
        return total % 1


def linear_phase(theta: Iterable) -> CoefficientVector:
    """Degree-1 phase theta . x on Z^len(theta)."""
    vals = tuple(theta)
    return CoefficientVector(dim=len(vals), degree=1, values=vals)


# -- descent matrix ---------------------------------------------------------------


@dataclass(frozen=True)
class DescentMap:
    """Linear lift L: R^{k2} -> R^D with (L xi) . P0(m) = xi . P(m)."""

    source: IntPolyMap
    iset: IndexSet
    matrix: np.ndarray  # (D, k2) int64

    def apply(self, xi) -> tuple:
        """Exact image of a coefficient vector (entries float or Fraction)."""
        xi = list(xi)
        if len(xi) != self.source.k2:
            raise ValueError("argument length mismatch")
        out = []
        for row in self.matrix:
            acc = 0
            for b, x in zip(row, xi):
                if b:
                    acc = acc + int(b) * x
            out.append(acc)
        return tuple(out)


def descent_map(P: IntPolyMap, degree: int | None = None) -> DescentMap:
    """Descent matrix of P, padded to the requested degree."""
    d = P.degree if degree is None else degree
    padded = P.padded(d)
    iset = index_set(P.k1, d)
    mat = np.zeros((iset.size, P.k2), dtype=np.int64)
    for (l, alpha), c in padded.coeffs.items():
        if sum(alpha) == 0:
            raise ValueError("constant terms have no descent image")
        mat[iset.position(alpha), l] = mat[iset.position(alpha), l] + c
    return DescentMap(source=padded, iset=iset, matrix=mat)


# -- bilinear phases ----------------------------------------------------------------


def _shift_expand_term(alpha: MultiIndex, z: Point) -> dict[MultiIndex, int]:
    """(x + z)^alpha as a dict exponent -> integer coefficient."""
    out: dict[MultiIndex, int] = {(): 1}
    for e, zc in zip(alpha, z):
        new: dict[MultiIndex, int] = {}
        for part, coef in out.items():
            for i in range(e + 1):
                term = part + (i,)
                new[term] = new.get(term, 0) + coef * math.comb(e, i) * zc ** (e - i)
        out = new
    return out


class BilinearPhase:
    """Real polynomial phase Q(n, m) on Z^k x Z^k, coefficients mod 1.

    The table is stored split into the core (terms with both |alpha| and
    |beta| nonzero), pure-n and pure-m parts, and a constant.  Pure parts are
    kept because operator evaluation needs them; norm-level reasoning and the
    approximation schedule only consult the core.  Coefficients may be floats
    or Fractions; zero coefficients (mod 1) are dropped.
    """

    __slots__ = ("dim", "core", "pure_n", "pure_m", "const", "nominal_degree", "history")

    def __init__(self, dim: int, table: dict[tuple[MultiIndex, MultiIndex], object],
                 nominal_degree: int | None = None,
                 history: tuple = ()):
        self.dim = int(dim)
        self.core: dict[tuple[MultiIndex, MultiIndex], object] = {}
        self.pure_n: dict[MultiIndex, object] = {}
        self.pure_m: dict[MultiIndex, object] = {}
        self.const = 0
        max_deg = 0
        for (alpha, beta), theta in table.items():
            alpha, beta = tuple(alpha), tuple(beta)
            if len(alpha) != self.dim or len(beta) != self.dim:
                raise ValueError("multi-index dimension mismatch")
            theta = _mod1(theta)
            if not theta:
                continue
            deg = sum(alpha) + sum(beta)
            max_deg = max(max_deg, deg)
            if sum(alpha) == 0 and sum(beta) == 0:
                self.const = _mod1(self.const + theta)
            elif sum(beta) == 0:
                self.pure_n[alpha] = _mod1(self.pure_n.get(alpha, 0) + theta)
            elif sum(alpha) == 0:
                self.pure_m[beta] = _mod1(self.pure_m.get(beta, 0) + theta)
            else:
                self.core[(alpha, beta)] = _mod1(self.core.get((alpha, beta), 0) + theta)
        self.pure_n = {a: v for a, v in self.pure_n.items() if v}
        self.pure_m = {b: v for b, v in self.pure_m.items() if v}
        self.core = {k: v for k, v in self.core.items() if v}
        self.nominal_degree = max(max_deg, nominal_degree or 0, 2 if self.core else 0)
        self.history = tuple(history)

    # -- views ---------------------------------------------------------------

    def degree(self) -> int:
        return self.nominal_degree

    def core_degree(self) -> int:
        return max((sum(a) + sum(b) for a, b in self.core), default=0)

    def is_core_only(self) -> bool:
        return not self.pure_n and not self.pure_m and not self.const

    def core_at_level(self, s: int) -> dict[tuple[MultiIndex, MultiIndex], object]:
        return {
            (a, b): v for (a, b), v in self.core.items() if sum(a) + sum(b) == s
        }

    def core_phase(self) -> "BilinearPhase":
        return BilinearPhase(self.dim, dict(self.core),
                             nominal_degree=self.nominal_degree, history=self.history)

    def full_table(self) -> dict[tuple[MultiIndex, MultiIndex], object]:
        zero = (0,) * self.dim
        table: dict[tuple[MultiIndex, MultiIndex], object] = dict(self.core)
        for a, v in self.pure_n.items():
            table[(a, zero)] = v
        for b, v in self.pure_m.items():
            table[(zero, b)] = v
        if self.const:
            table[(zero, zero)] = self.const
        return table

    # -- evaluation ------------------------------------------------------------

    def eval(self, n, m) -> float:
        n, m = as_point(n), as_point(m)
        total = 0.0
        for (alpha, beta), theta in self.full_table().items():
            total += float(theta) * monomial(n, alpha) * monomial(m, beta)
        return total

    def term_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(coeffs, alphas, betas) arrays for the numeric kernels; Fractions become floats."""
        items = sorted(self.full_table().items())
        T = len(items)
        coeffs = np.zeros(T, dtype=np.float64)
        alphas = np.zeros((T, self.dim), dtype=np.int64)
        betas = np.zeros((T, self.dim), dtype=np.int64)
        for t, ((alpha, beta), theta) in enumerate(items):
            coeffs[t] = float(theta)
            alphas[t] = alpha
            betas[t] = beta
        return coeffs, alphas, betas

    # -- transforms ---------------------------------------------------------------

    def shifted(self, level: int, z) -> "BilinearPhase":
        """Expanded table of Q(n + z, m + z), recording (level, z) in the history.

        The top-degree coefficients are unchanged; lower degrees pick up
        binomial combinations of the originals.
        """
        z = as_point(z)
        if len(z) != self.dim:
            raise ValueError("shift dimension mismatch")
        table: dict[tuple[MultiIndex, MultiIndex], object] = {}
        for (alpha, beta), theta in self.full_table().items():
            ea = _shift_expand_term(alpha, z)
            eb = _shift_expand_term(beta, z)
            for a2, ca in ea.items():
                for b2, cb in eb.items():
                    c = ca * cb
                    if c:
                        key = (a2, b2)
                        table[key] = _mod1(table.get(key, 0) + theta * c)
        return BilinearPhase(self.dim, table, nominal_degree=self.nominal_degree,
                             history=self.history + ((level, z),))

    def compose_n_minus_m(self) -> "BilinearPhase":
        """Table of (n, m) -> Q(n, n - m), the substitution used fiberwise.

        Expands each m-factor: n^alpha (n-m)^beta =
        sum_{g <= b} C(b, g) (-1)^{|g|} n^{alpha + beta - g} m^g.
        """
        table: dict[tuple[MultiIndex, MultiIndex], object] = {}
        for (alpha, beta), theta in self.full_table().items():
            for g in product(*[range(e + 1) for e in beta]):
                coef = 1
                for e, gi in zip(beta, g):
                    coef *= math.comb(e, gi)
                sign = (-1) ** sum(g)
                a2 = tuple(ae + be - gi for ae, be, gi in zip(alpha, beta, g))
                key = (a2, tuple(g))
                table[key] = _mod1(table.get(key, 0) + theta * coef * sign)
        return BilinearPhase(self.dim, table, nominal_degree=self.nominal_degree)

    # -- construction helpers -------------------------------------------------------

    @classmethod
    def from_terms(cls, dim: int, terms: Iterable[tuple[MultiIndex, MultiIndex, object]],
                   nominal_degree: int | None = None) -> "BilinearPhase":
        table: dict[tuple[MultiIndex, MultiIndex], object] = {}
        for alpha, beta, theta in terms:
            key = (tuple(alpha), tuple(beta))
            table[key] = table.get(key, 0) + theta
        return cls(dim, table, nominal_degree=nominal_degree)

    def to_json(self) -> str:
        entries = []
        for (alpha, beta), theta in sorted(self.full_table().items()):
            if isinstance(theta, Fraction):
                val = [theta.numerator, theta.denominator]
            else:
                val = float(theta)
            entries.append({"alpha": list(alpha), "beta_idx": list(beta), "theta": val})
        return json.dumps({"dim": self.dim, "degree": self.nominal_degree, "terms": entries})

    @classmethod
    def from_json(cls, text: str) -> "BilinearPhase":
        obj = json.loads(text)
        table = {}
        for t in obj["terms"]:
            val = t["theta"]
            theta = Fraction(int(val[0]), int(val[1])) if isinstance(val, list) else float(val)
            key = (tuple(int(e) for e in t["alpha"]), tuple(int(e) for e in t["beta_idx"]))
            table[key] = table.get(key, 0) + theta
        return cls(int(obj["dim"]), table, nominal_degree=int(obj.get("degree", 0)))


def normalize_bilinear(dim: int, table: dict[tuple[MultiIndex, MultiIndex], object],
                       nominal_degree: int | None = None):
    """Split a raw table into (core phase, pure-n, pure-m, constant).

    Purely-n factors pull out of the operator sum and purely-m factors cancel
    against a pre-multiplication, so neither affects operator norms; the core
    is what the approximation schedule works on.
    """
    full = BilinearPhase(dim, table, nominal_degree=nominal_degree)
    return full.core_phase(), dict(full.pure_n), dict(full.pure_m), full.const


def pad_degree(phase: BilinearPhase, degree: int) -> BilinearPhase:
    if degree < phase.nominal_degree:
        raise ValueError("cannot pad to a smaller degree")
    return BilinearPhase(phase.dim, phase.full_table(), nominal_degree=degree,
                         history=phase.history)
