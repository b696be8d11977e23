"""Dirichlet approximation, the level-by-level major/minor schedule, and the
Gauss-sum x coarse-operator factorization of the surviving leaf operators.

Conventions fixed here:

* An approximation of theta in (0, 1) at scale N means a fraction a/q with
  gcd(a, q) = 1, 0 <= a <= q <= N and |theta - a/q| <= 1/(qN); among valid
  fractions the one with smallest q is returned (it is always a continued
  fraction convergent, with 0/1 and 1/1 covering the boundary cases).  All
  comparisons are exact: floats are treated as the dyadic rationals they are.
* The schedule walks levels s = d down to 2.  At level s every surviving j
  is classified against the level-s core coefficients at scale
  N = 2^{(s - eps_s) j}: minor when some denominator exceeds 2^{eps_s j},
  major otherwise.  Major j group by their fraction collection; each group
  picks a radius rho_s, draws a shift z_s from the ball of radius rho_{s+1},
  and re-expands the lower-degree coefficients around the shift.  A leaf
  keeps, per level, the frozen fractions, the exact gamma = theta - a/q, the
  radius, and the drawn shift; its effective shift at level s is the sum of
  the shifts applied at levels 2..s.
* The factorization of a leaf uses Q = lcm of all its denominators.  The
  phase A(r, l) = sum (a/q) (r + Z_s)^alpha (l + Z_s)^beta is computed with
  integer numerators mod Q (never through floats); the companion phase
  B(nbar, mbar) = sum gamma (nbar Q + Z_s)^alpha (mbar Q + Z_s)^beta uses the
  float gammas, whose products stay far below the rounding threshold by the
  leaf constraints.  The coarse box holds the nbar with
  |nbar| <= (rho_2 + sqrt(k)) / Q.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import gcd, lcm
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .kernels import WindowedKernelSum, dyadic_decompose
from .lattice import Ball, Point, as_point
from .operators import oscillatory_apply
from .polyalg import BilinearPhase, MultiIndex, _shift_expand_term

IndexPair = tuple[MultiIndex, MultiIndex]

TWO_PI = 2.0 * math.pi


# -- Dirichlet approximation ---------------------------------------------------


@dataclass(frozen=True)
class RationalApprox:
    """A fraction a/q approximating some theta, with the exact error gamma."""

    a: int
    q: int
    gamma: Fraction

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("denominator must be positive")
        if not 0 <= self.a <= self.q:
            raise ValueError("numerator must lie in [0, q]")
        if gcd(self.a, self.q) != 1:
            raise ValueError("fraction must be reduced")

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.a, self.q)

    @property
    def theta(self) -> Fraction:
        return self.fraction + self.gamma

    @property
    def gamma_float(self) -> float:
        return float(self.gamma)

    def valid_at(self, scale: Fraction) -> bool:
        return self.q <= scale and abs(self.gamma) * self.q * scale <= 1


def _cf_denominators(theta: Fraction, bound: Fraction) -> list[int]:
    """Continued-fraction convergent denominators of theta, up to bound."""
    out = [1]
    x, y = theta.denominator, theta.numerator
    prev2, prev1 = 0, 1
    while y:
        a, rem = divmod(x, y)
        qa = a * prev1 + prev2
        if qa > bound:
            break
        out.append(qa)
        prev2, prev1 = prev1, qa
        x, y = y, rem
    return sorted(set(out))


def _approx_at_scale(theta: Fraction, scale: Fraction) -> RationalApprox:
    """Minimal-q approximation of theta in (0, 1) at a (possibly non-integer) scale.

    The minimal valid denominator is always a convergent denominator: if
    (a, q) is valid and q_i is the largest convergent denominator <= q, the
    best-approximation law gives |q_i theta - p_i| <= |q theta - a|, so q_i
    is valid too.  At the chosen q the optimal numerators are the floor and
    ceiling of q theta, and any valid numerator there is automatically
    coprime (otherwise the reduced fraction would beat the minimality of q).
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if scale < 1:
        raise ValueError("scale must be >= 1")
    for q in _cf_denominators(theta, scale):
        best: RationalApprox | None = None
        t = theta * q
        floor_a = t.numerator // t.denominator
        for a in {floor_a, floor_a + 1}:
            if not 0 <= a <= q or gcd(a, q) != 1:
                continue
            gamma = theta - Fraction(a, q)
            if abs(gamma) * q * scale <= 1:
                cand = RationalApprox(a, q, gamma)
                if best is None or (abs(cand.gamma), cand.a) < (abs(best.gamma), best.a):
                    best = cand
        if best is not None:
            return best
    raise ArithmeticError("no valid approximation; scale below 1?")


def dirichlet_approx(theta, N: int) -> RationalApprox:
    """Smallest-denominator a/q with q <= N and |theta - a/q| <= 1/(qN).

    theta is reduced mod 1 first and must land strictly inside (0, 1).
    """
    if N < 1:
        raise ValueError("N must be a positive integer")
    th = Fraction(theta) % 1
    if th == 0:
        raise ValueError("theta must not be an integer")
    return _approx_at_scale(th, Fraction(N))


def level_scale(level: int, eps_level: float, j: int) -> Fraction:
    """The classification scale N = 2^{(s - eps_s) j}, as an exact dyadic rational."""
    x = (level - eps_level) * j
    if x > 900:
        raise ValueError("classification scale overflows a float")
    return Fraction(2.0 ** x)


def classify_index(j: int, level: int, approxs: Mapping[IndexPair, RationalApprox],
                   eps_level: float) -> str:
    """'minor' when some denominator at this level exceeds 2^{eps_s j}."""
    threshold = 2.0 ** (eps_level * j)
    if any(ap.q > threshold for ap in approxs.values()):
        return "minor"
    return "major"


# -- dyadic separation of denominators ----------------------------------------


@dataclass(frozen=True)
class SeparationVerdict:
    """Outcome of the denominator trichotomy at two admissible scales."""

    admissible: bool
    reason: str = ""
    first: RationalApprox | None = None
    second: RationalApprox | None = None
    same_fraction: bool = False
    first_doubles: bool = False
    second_doubles: bool = False

    @property
    def holds(self) -> bool:
        if not self.admissible:
            return False
        return (self.same_fraction + self.first_doubles + self.second_doubles) == 1


def dyadic_separation_check(theta, first: tuple[int, float],
                            second: tuple[int, float]) -> SeparationVerdict:
    """Check that two admissible approximations share a fraction or have
    denominators separated by a factor of 2.

    Each scale is a pair (N, eps); admissibility needs N > 16, eps < 1/2 and
    q <= N^eps on both sides, otherwise the check is skipped with a reason.
    """
    (n1, e1), (n2, e2) = first, second
    if min(n1, n2) <= 16:
        return SeparationVerdict(False, "scales must exceed 16")
    if not (0 < e1 < 0.5 and 0 < e2 < 0.5):
        return SeparationVerdict(False, "eps must lie in (0, 1/2)")
    ap1 = dirichlet_approx(theta, n1)
    ap2 = dirichlet_approx(theta, n2)
    if ap1.q > n1 ** e1:
        return SeparationVerdict(False, f"q = {ap1.q} exceeds N^eps at the first scale",
                                 ap1, ap2)
    if ap2.q > n2 ** e2:
        return SeparationVerdict(False, f"q = {ap2.q} exceeds N^eps at the second scale",
                                 ap1, ap2)
    return SeparationVerdict(
        True, "", ap1, ap2,
        same_fraction=ap1.fraction == ap2.fraction,
        first_doubles=ap1.q >= 2 * ap2.q,
        second_doubles=ap2.q >= 2 * ap1.q,
    )


# -- schedule data model --------------------------------------------------------


@dataclass(frozen=True)
class LevelCollection:
    """The fractions frozen for one level, keyed by the (alpha, beta) pair."""

    level: int
    approx: tuple[tuple[IndexPair, RationalApprox], ...]

    @property
    def q_total(self) -> int:
        return sum(ap.q for _, ap in self.approx)

    @property
    def q_lcm(self) -> int:
        return lcm(1, *(ap.q for _, ap in self.approx))

    @property
    def key(self) -> tuple:
        return tuple((pair, (ap.a, ap.q)) for pair, ap in self.approx)

    def as_dict(self) -> dict[IndexPair, RationalApprox]:
        return dict(self.approx)


@dataclass(frozen=True)
class LevelRecord:
    """One processed level of a branch: fractions, radius, and drawn shift."""

    collection: LevelCollection
    rho: float
    shift: Point

    @property
    def level(self) -> int:
        return self.collection.level


@dataclass(frozen=True)
class PhaseTerm:
    """A frozen coefficient theta = a/q + gamma with its effective shift."""

    alpha: MultiIndex
    beta: MultiIndex
    a: int
    q: int
    gamma: Fraction
    shift: Point

    @property
    def level(self) -> int:
        return sum(self.alpha) + sum(self.beta)

    @property
    def theta(self) -> Fraction:
        return Fraction(self.a, self.q) + self.gamma


@dataclass(frozen=True)
class Leaf:
    """A surviving branch: its j window plus the per-level frozen data."""

    dim: int
    j_set: tuple[int, ...]
    records: tuple[LevelRecord, ...]

    @property
    def rho2(self) -> float:
        return self.records[-1].rho if self.records else math.inf

    @property
    def min_j(self) -> int:
        return min(self.j_set)

    def record(self, level: int) -> LevelRecord:
        for rec in self.records:
            if rec.level == level:
                return rec
        raise KeyError(f"no record at level {level}")

    def cumulative_shift(self, level: int) -> Point:
        """Effective shift Z_s: the level's own shift plus all later ones."""
        total = [0] * self.dim
        for rec in self.records:
            if rec.level <= level:
                for i, c in enumerate(rec.shift):
                    total[i] += c
        return tuple(total)

    def q_lcm(self) -> int:
        return lcm(1, *(rec.collection.q_lcm for rec in self.records))

    def phase_terms(self) -> tuple[PhaseTerm, ...]:
        out = []
        for rec in self.records:
            z = self.cumulative_shift(rec.level)
            for (alpha, beta), ap in rec.collection.approx:
                out.append(PhaseTerm(alpha, beta, ap.a, ap.q, ap.gamma, z))
        return tuple(out)


@dataclass(frozen=True)
class MinorBucket:
    """The j discarded as minor at one level of one branch."""

    level: int
    j_set: tuple[int, ...]
    context: tuple[LevelRecord, ...]


@dataclass(frozen=True)
class Schedule:
    """Full decomposition of a j range into leaves and minor buckets."""

    dim: int
    degree: int
    j_range: tuple[int, ...]
    eps: tuple[tuple[int, float], ...]
    leaves: tuple[Leaf, ...]
    minors: tuple[MinorBucket, ...]
    footnote_radii: bool
    marks: tuple[tuple[int, int, str], ...]

    @property
    def eps_map(self) -> dict[int, float]:
        return dict(self.eps)

    def classification(self, j: int) -> dict[int, str]:
        return {level: mark for jj, level, mark in self.marks if jj == j}

    def leaf_for(self, j: int) -> Leaf:
        for leaf in self.leaves:
            if j in leaf.j_set:
                return leaf
        raise KeyError(f"j = {j} is not in any leaf")

    def partition_multiset(self) -> list[int]:
        out: list[int] = []
        for leaf in self.leaves:
            out.extend(leaf.j_set)
        for bucket in self.minors:
            out.extend(bucket.j_set)
        return sorted(out)

    def partition_ok(self) -> bool:
        return self.partition_multiset() == sorted(self.j_range)

    def radii_ok(self) -> bool:
        for leaf in self.leaves:
            radii = [rec.rho for rec in leaf.records]
            if any(r <= 0 for r in radii):
                return False
            if any(lo > hi for hi, lo in zip(radii, radii[1:])):
                return False
        return True

    def to_json(self) -> str:
        def approx_obj(pair, ap):
            return {"alpha": list(pair[0]), "beta_idx": list(pair[1]),
                    "a": ap.a, "q": ap.q,
                    "gamma": [ap.gamma.numerator, ap.gamma.denominator]}

        def record_obj(rec):
            return {"level": rec.level,
                    "rho": rec.rho if math.isfinite(rec.rho) else "inf",
                    "shift": list(rec.shift),
                    "collection": [approx_obj(p, ap) for p, ap in rec.collection.approx]}

        obj = {
            "dim": self.dim,
            "degree": self.degree,
            "j_range": list(self.j_range),
            "eps": {str(s): e for s, e in self.eps},
            "footnote_radii": self.footnote_radii,
            "leaves": [{"j_set": list(leaf.j_set),
                        "records": [record_obj(r) for r in leaf.records]}
                       for leaf in self.leaves],
            "minors": [{"level": b.level, "j_set": list(b.j_set)}
                       for b in self.minors],
        }
        return json.dumps(obj, indent=2)


# -- schedule construction -------------------------------------------------------


def default_eps(degree: int) -> dict[int, float]:
    """Geometric cascade eps_s = 0.2 / 4^{s-2}, small at high levels."""
    return {s: 0.2 / 4 ** (s - 2) for s in range(2, degree + 1)}


ShiftRule = Callable[[int, float, int], Point]


def zero_shift(level: int, radius: float, dim: int) -> Point:
    return (0,) * dim


class RandomShiftSampler:
    """Draw integer shifts from the allowed ball, capped for enumerability."""

    def __init__(self, rng: np.random.Generator, cap: float = 16.0):
        self.rng = rng
        self.cap = float(cap)

    def __call__(self, level: int, radius: float, dim: int) -> Point:
        r = min(radius, self.cap)
        if r < 1:
            return (0,) * dim
        bound = int(math.floor(r))
        while True:
            z = tuple(int(c) for c in self.rng.integers(-bound, bound + 1, size=dim))
            if sum(c * c for c in z) <= r * r:
                return z


def _exact_mod1(theta) -> Fraction:
    return Fraction(theta) % 1


def _shift_core(core: dict[IndexPair, Fraction], z: Point) -> dict[IndexPair, Fraction]:
    """Core coefficients of Q(n + z, m + z), exactly, mod 1.

    Pure and constant byproducts of the expansion are dropped: they never
    feed back into core terms under further shifts and the schedule only
    consults the core.
    """
    table: dict[IndexPair, Fraction] = {}
    for (alpha, beta), theta in core.items():
        for a2, ca in _shift_expand_term(alpha, z).items():
            if sum(a2) == 0:
                continue
            for b2, cb in _shift_expand_term(beta, z).items():
                if sum(b2) == 0:
                    continue
                c = ca * cb
                if not c:
                    continue
                key = (a2, b2)
                table[key] = (table.get(key, Fraction(0)) + theta * c) % 1
    return {k: v for k, v in table.items() if v}


def _group_radius(rho_prev: float, level: int, eps_level: float,
                  approxs: Iterable[RationalApprox], footnote: bool) -> float:
    vals = []
    for ap in approxs:
        base = abs(ap.gamma) if footnote else ap.q * abs(ap.gamma)
        if base:
            vals.append(float(base) ** (-1.0 / (level - eps_level)))
    return min(rho_prev, min(vals)) if vals else rho_prev


def build_schedule(phase: BilinearPhase, j_range: Iterable[int], *,
                   eps: Mapping[int, float] | None = None,
                   shift_rule: ShiftRule | None = None,
                   footnote_radii: bool = False) -> Schedule:
    """Partition a j range into leaves and minor buckets, level by level.

    Only the core of the phase participates (pure terms are modulations).
    Coefficients are carried as exact fractions throughout, so the frozen
    gammas and the shift re-expansions are exact.
    """
    js = tuple(sorted({int(j) for j in j_range}))
    if not js:
        raise ValueError("empty j range")
    if js[0] < 0:
        raise ValueError("j must be nonnegative")
    cur = {pair: _exact_mod1(th) for pair, th in phase.core.items()}
    cur = {pair: th for pair, th in cur.items() if th}
    degree = max((sum(a) + sum(b) for a, b in cur), default=0)
    rule = shift_rule or zero_shift
    if degree < 2:
        leaf = Leaf(dim=phase.dim, j_set=js, records=())
        return Schedule(phase.dim, degree, js, (), (leaf,), (), footnote_radii, ())

    eps_map = dict(eps) if eps is not None else default_eps(degree)
    for s in range(2, degree + 1):
        if s not in eps_map:
            raise ValueError(f"eps missing for level {s}")
        if not 0 < eps_map[s] < 0.5:
            raise ValueError("eps values must lie in (0, 1/2)")
        if s > 2 and not eps_map[s] < eps_map[s - 1]:
            raise ValueError("eps must decrease as the level rises")

    leaves: list[Leaf] = []
    minors: list[MinorBucket] = []
    marks: list[tuple[int, int, str]] = []

    def descend(core, level, j_set, records, rho_prev):
        if level < 2:
            leaves.append(Leaf(dim=phase.dim, j_set=tuple(j_set), records=records))
            return
        e = eps_map[level]
        pairs_here = sorted(p for p in core if sum(p[0]) + sum(p[1]) == level)
        groups: dict[tuple, list[int]] = {}
        group_approx: dict[tuple, dict[IndexPair, RationalApprox]] = {}
        minor_js: list[int] = []
        for j in j_set:
            scale = level_scale(level, e, j)
            approxs = {p: _approx_at_scale(core[p], scale) for p in pairs_here}
            mark = classify_index(j, level, approxs, e)
            marks.append((j, level, mark))
            if mark == "minor":
                minor_js.append(j)
                continue
            key = tuple((p, (ap.a, ap.q)) for p, ap in sorted(approxs.items()))
            groups.setdefault(key, []).append(j)
            group_approx[key] = approxs
        if minor_js:
            minors.append(MinorBucket(level=level, j_set=tuple(minor_js), context=records))
        for key in sorted(groups):
            approxs = group_approx[key]
            coll = LevelCollection(level=level,
                                   approx=tuple(sorted(approxs.items())))
            rho = _group_radius(rho_prev, level, e, approxs.values(), footnote_radii)
            z = as_point(rule(level, rho_prev, phase.dim))
            if len(z) != phase.dim:
                raise ValueError("shift dimension mismatch")
            if sum(c * c for c in z) > rho_prev * rho_prev:
                raise ValueError("shift outside its ball")
            rec = LevelRecord(collection=coll, rho=rho, shift=z)
            lower = {p: th for p, th in core.items() if sum(p[0]) + sum(p[1]) < level}
            descend(_shift_core(lower, z) if any(z) else lower,
                    level - 1, groups[key], records + (rec,), rho)

    descend(cur, degree, js, (), math.inf)
    eps_tuple = tuple(sorted(eps_map.items()))
    return Schedule(phase.dim, degree, js, eps_tuple, tuple(leaves), tuple(minors),
                    footnote_radii, tuple(marks))


def leaf_constraint_report(leaf: Leaf, eps_map: Mapping[int, float]) -> list[dict]:
    """Violations of the leaf window constraints; empty when all hold.

    Every j in the leaf must satisfy, at each of its levels,
    q <= 2^{eps_s j} and q |gamma| <= 2^{-(s - eps_s) j}.
    """
    bad = []
    for rec in leaf.records:
        s = rec.level
        e = eps_map[s]
        for pair, ap in rec.collection.approx:
            for j in leaf.j_set:
                if ap.q > 2.0 ** (e * j):
                    bad.append({"j": j, "level": s, "pair": pair, "kind": "q"})
                if Fraction(ap.q) * abs(ap.gamma) * level_scale(s, e, j) > 1:
                    bad.append({"j": j, "level": s, "pair": pair, "kind": "q_gamma"})
    return bad


def schedule_reconstruction_residual(schedule: Schedule, phase: BilinearPhase,
                                     kernel, f, in_box=None, out_box=None
                                     ) -> tuple[float, float]:
    """Sup-norm gap between the direct j sum and the leaf/minor regrouping.

    The partition property makes the gap pure roundoff: both sides apply the
    identical phase and the identical dyadic pieces, only associated
    differently.  Returns (absolute gap, gap relative to the direct sum).
    """
    pieces = {j: dyadic_decompose(kernel, j) for j in schedule.j_range}
    direct = oscillatory_apply(f, phase, WindowedKernelSum(list(pieces.values())),
                               in_box=in_box, out_box=out_box)
    grouped = None
    blocks = [leaf.j_set for leaf in schedule.leaves]
    blocks += [bucket.j_set for bucket in schedule.minors]
    for j_set in blocks:
        part = oscillatory_apply(f, phase, WindowedKernelSum([pieces[j] for j in j_set]),
                                 in_box=in_box, out_box=out_box)
        grouped = part if grouped is None else grouped + part
    diff = direct - grouped
    gap = max((abs(v) for _, v in diff.items()), default=0.0)
    ref = max((abs(v) for _, v in direct.items()), default=0.0)
    return gap, gap / ref if ref else 0.0


# -- the S (x) T-natural factorization ------------------------------------------


def _pow_mod(base: np.ndarray, exp: int, q: int) -> np.ndarray:
    out = np.ones_like(base)
    for _ in range(exp):
        out = out * base % q
    return out


@dataclass(frozen=True)
class FactorizationData:
    """Everything needed to apply a leaf operator and its factored form."""

    dim: int
    q_lcm: int
    terms: tuple[PhaseTerm, ...]
    rho2: float
    box: Ball
    kernel: object
    j_set: tuple[int, ...]
    eps_prime: float

    @property
    def residue_count(self) -> int:
        return self.q_lcm ** self.dim

    @cached_property
    def residues(self) -> np.ndarray:
        grids = np.meshgrid(*([np.arange(self.q_lcm)] * self.dim), indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1).astype(np.int64)

    @cached_property
    def coarse_coords(self) -> np.ndarray:
        pts = self.box.coords()
        return pts.reshape(-1, self.dim).astype(np.int64)

    @cached_property
    def fine_coords(self) -> np.ndarray:
        coarse = self.coarse_coords
        res = self.residues
        fine = coarse[:, None, :] * self.q_lcm + res[None, :, :]
        return fine.reshape(-1, self.dim)

    @cached_property
    def windowed_kernel(self) -> WindowedKernelSum:
        return WindowedKernelSum([dyadic_decompose(self.kernel, j) for j in self.j_set])

    @cached_property
    def error_budgets(self) -> tuple[tuple[int, float, float], ...]:
        return tuple((j, *error_kernel_norms(j, self.eps_prime, self.q_lcm, self.dim))
                     for j in self.j_set)

    # -- the arithmetic phase A and the error phase B --

    def phase_numerators(self) -> np.ndarray:
        """A(r, l) as exact numerators mod Q: A = num / Q with num in [0, Q)."""
        res = self.residues
        count = res.shape[0]
        num = np.zeros((count, count), dtype=np.int64)
        big_q = self.q_lcm
        for t in self.terms:
            a, q = t.a % t.q, t.q
            if a == 0:
                continue
            rfac = np.ones(count, dtype=np.int64)
            cfac = np.ones(count, dtype=np.int64)
            for i in range(self.dim):
                base = (res[:, i] + t.shift[i]) % q
                rfac = rfac * _pow_mod(base, t.alpha[i], q) % q
                cfac = cfac * _pow_mod(base, t.beta[i], q) % q
            part = (a * rfac[:, None]) % q * cfac[None, :] % q
            num = (num + part * (big_q // q)) % big_q
        return num

    def b_phase(self, nbar: np.ndarray, mbar: np.ndarray) -> np.ndarray:
        """B(nbar, mbar) mod 1 from the float gammas."""
        nbar = np.asarray(nbar, dtype=np.int64).reshape(-1, self.dim)
        mbar = np.asarray(mbar, dtype=np.int64).reshape(-1, self.dim)
        phase = np.zeros((nbar.shape[0], mbar.shape[0]))
        for t in self.terms:
            g = float(t.gamma)
            if g == 0.0:
                continue
            rf = np.ones(nbar.shape[0])
            cf = np.ones(mbar.shape[0])
            for i in range(self.dim):
                rf *= (nbar[:, i] * self.q_lcm + t.shift[i]).astype(float) ** t.alpha[i]
                cf *= (mbar[:, i] * self.q_lcm + t.shift[i]).astype(float) ** t.beta[i]
            phase += g * rf[:, None] * cf[None, :]
        return np.mod(phase, 1.0)

    # -- materialized factors --

    def gauss_matrix(self) -> np.ndarray:
        count = self.residue_count
        if count > 4096:
            raise ValueError("residue grid too large to materialize")
        num = self.phase_numerators()
        return np.exp(TWO_PI * 1j * num / self.q_lcm) / count

    def tnatural_matrix(self) -> np.ndarray:
        coarse = self.coarse_coords
        if coarse.shape[0] > 4096:
            raise ValueError("coarse box too large to materialize")
        diff = (coarse[:, None, :] - coarse[None, :, :]) * self.q_lcm
        args = diff if self.dim > 1 else diff[..., 0]
        kv = self.windowed_kernel.values_on(args) * float(self.q_lcm ** self.dim)
        return np.exp(TWO_PI * 1j * self.b_phase(coarse, coarse)) * kv


def build_factorization(leaf: Leaf, kernel, *, rho_cap: float | None = None,
                        lcm_budget: int = 512, eps_prime: float = 0.1
                        ) -> FactorizationData:
    """Assemble the lcm modulus, phases, coarse box and budgets for a leaf."""
    if not leaf.j_set:
        raise ValueError("leaf has no j window")
    big_q = leaf.q_lcm()
    if big_q > lcm_budget:
        raise ValueError(f"lcm {big_q} exceeds the budget {lcm_budget}")
    rho2 = leaf.rho2 if rho_cap is None else min(leaf.rho2, rho_cap)
    if not math.isfinite(rho2):
        raise ValueError("rho_2 is infinite (all gammas vanish); pass rho_cap")
    box = Ball((rho2 + math.sqrt(leaf.dim)) / big_q, leaf.dim, "euclidean")
    return FactorizationData(dim=leaf.dim, q_lcm=big_q, terms=leaf.phase_terms(),
                             rho2=rho2, box=box, kernel=kernel,
                             j_set=tuple(sorted(leaf.j_set)), eps_prime=eps_prime)


def single_fraction_leaf(a: int, q: int, *, dim: int = 1,
                         alpha: MultiIndex | None = None,
                         beta: MultiIndex | None = None,
                         gamma: Fraction = Fraction(0),
                         rho: float = 4.0,
                         j_set: tuple[int, ...] = (3,)) -> Leaf:
    """A synthetic one-term leaf, handy for Gauss-sum and residual studies."""
    alpha = alpha if alpha is not None else (1,) + (0,) * (dim - 1)
    beta = beta if beta is not None else (1,) + (0,) * (dim - 1)
    ap = RationalApprox(a, q, gamma)
    coll = LevelCollection(level=sum(alpha) + sum(beta),
                           approx=(((tuple(alpha), tuple(beta)), ap),))
    rec = LevelRecord(collection=coll, rho=rho, shift=(0,) * dim)
    return Leaf(dim=dim, j_set=tuple(j_set), records=(rec,))


# -- operator applications -------------------------------------------------------


def gauss_operator_apply(fdata: FactorizationData, f) -> np.ndarray:
    """Sf(r) = Q^{-k} sum_l e(A(r, l)) f(l), exact phases."""
    arr = np.asarray(f, dtype=complex)
    flat = arr.reshape(-1)
    if flat.shape[0] != fdata.residue_count:
        raise ValueError("function size must match the residue grid")
    return (fdata.gauss_matrix() @ flat).reshape(arr.shape)


def tnatural_apply(fdata: FactorizationData, f) -> np.ndarray:
    """The coarse operator: sum over mbar of e(B) Q^k K(Q(nbar - mbar)) f(mbar)."""
    arr = np.asarray(f, dtype=complex)
    flat = arr.reshape(-1)
    if flat.shape[0] != fdata.coarse_coords.shape[0]:
        raise ValueError("function size must match the coarse box")
    return (fdata.tnatural_matrix() @ flat).reshape(arr.shape)


def _leaf_phase_factors(fdata: FactorizationData, coords: np.ndarray):
    """Per-term separable row/column factors over the fine points.

    The rational part is carried as residues mod q (exact); the gamma part
    as floats, whose absolute error gamma * V * 2^-53 is negligible next to
    the mod-1 scale by the leaf window constraints.
    """
    rational = []
    smooth = []
    for t in fdata.terms:
        shifted = coords + np.asarray(t.shift, dtype=np.int64)
        a, q = t.a % t.q, t.q
        if a:
            rfac = np.ones(coords.shape[0], dtype=np.int64)
            cfac = np.ones(coords.shape[0], dtype=np.int64)
            for i in range(fdata.dim):
                base = shifted[:, i] % q
                rfac = rfac * _pow_mod(base, t.alpha[i], q) % q
                cfac = cfac * _pow_mod(base, t.beta[i], q) % q
            rational.append((a, q, rfac, cfac))
        g = float(t.gamma)
        if g:
            rf = np.ones(coords.shape[0])
            cf = np.ones(coords.shape[0])
            for i in range(fdata.dim):
                rf *= shifted[:, i].astype(float) ** t.alpha[i]
                cf *= shifted[:, i].astype(float) ** t.beta[i]
            smooth.append((g, rf, cf))
    return rational, smooth


def leaf_operator_apply(fdata: FactorizationData, f, *, block: int = 256) -> np.ndarray:
    """Apply the leaf operator itself: shifted phase, windowed kernel.

    Works on the fine points (the Q-blowup of the coarse box), row-blocked so
    the (P, P) tables never materialize at once.
    """
    coords = fdata.fine_coords
    count = coords.shape[0]
    flat = np.asarray(f, dtype=complex).reshape(-1)
    if flat.shape[0] != count:
        raise ValueError("function size must match the fine points")
    rational, smooth = _leaf_phase_factors(fdata, coords)
    out = np.zeros(count, dtype=complex)
    for lo in range(0, count, block):
        hi = min(lo + block, count)
        diff = coords[lo:hi, None, :] - coords[None, :, :]
        args = diff if fdata.dim > 1 else diff[..., 0]
        kv = fdata.windowed_kernel.values_on(args)
        phase = np.zeros((hi - lo, count))
        for a, q, rfac, cfac in rational:
            phase += ((a * rfac[lo:hi, None]) % q * cfac[None, :] % q) / q
        for g, rf, cf in smooth:
            phase += np.mod(g * rf[lo:hi, None] * cf[None, :], 1.0)
        out[lo:hi] = (np.exp(TWO_PI * 1j * phase) * kv) @ flat
    return out


def factored_apply(fdata: FactorizationData, f) -> np.ndarray:
    """Apply S (x) T-natural through the residue splitting n = nbar Q + r."""
    coarse_n = fdata.coarse_coords.shape[0]
    flat = np.asarray(f, dtype=complex).reshape(coarse_n, fdata.residue_count)
    after_s = flat @ fdata.gauss_matrix().T
    return (fdata.tnatural_matrix() @ after_s).reshape(-1)


def error_kernel_norms(j: int, eps_prime: float, big_q: int, k: int
                       ) -> tuple[float, float]:
    """l1 masses on the j-th annulus of the two approximation majorants:
    2^{-j(1-eps')} (1+|n|)^{-k} and Q (1+|n|)^{-(k+1)}."""
    if j < 1:
        raise ValueError("j must be >= 1")
    lo, hi = 2.0 ** (j - 1), 2.0 ** (j + 1)
    if k == 1:
        r = np.arange(int(lo), int(hi) + 1, dtype=float)
        s_k = (2.0 / (1.0 + r) ** k).sum()
        s_k1 = (2.0 / (1.0 + r) ** (k + 1)).sum()
    elif k == 2:
        if j > 12:
            raise ValueError("2d annulus too large to sum directly")
        m = int(hi)
        n2 = np.arange(-m, m + 1, dtype=float)
        s_k = 0.0
        s_k1 = 0.0
        for n1 in range(-m, m + 1):
            r = np.sqrt(n1 * n1 + n2 * n2)
            mask = (r >= lo) & (r <= hi)
            rr = 1.0 + r[mask]
            s_k += (1.0 / rr ** k).sum()
            s_k1 += (1.0 / rr ** (k + 1)).sum()
    else:
        raise ValueError("only k = 1 and k = 2 are summed directly")
    return 2.0 ** (-j * (1.0 - eps_prime)) * s_k, big_q * s_k1


@dataclass(frozen=True)
class ResidualReport:
    """Measured gap between a leaf operator and its factored form."""

    p: float
    residual: float
    g_budget: float
    h_budget: float
    per_function: tuple[float, ...]
    min_j: int
    q_lcm: int

    @property
    def budget(self) -> float:
        return self.g_budget + self.h_budget

    @property
    def ratio(self) -> float:
        return self.residual / self.budget if self.budget else math.inf


def factorization_residual(fdata: FactorizationData, fns: Sequence | None = None, *,
                           p: float = 2.0, rng: np.random.Generator | None = None,
                           samples: int = 4) -> ResidualReport:
    """Apply both forms to test functions and report the worst relative gap
    alongside the summed majorant budgets."""
    count = fdata.fine_coords.shape[0]
    if fns is None:
        rng = rng or np.random.default_rng(0)
        fns = [rng.standard_normal(count) + 1j * rng.standard_normal(count)
               for _ in range(samples)]
    gaps = []
    for f in fns:
        flat = np.asarray(f, dtype=complex).reshape(-1)
        lhs = leaf_operator_apply(fdata, flat)
        rhs = factored_apply(fdata, flat)
        denom = np.linalg.norm(flat, p)
        gaps.append(float(np.linalg.norm(lhs - rhs, p) / denom) if denom else 0.0)
    g_total = sum(g for _, g, _ in fdata.error_budgets)
    h_total = sum(h for _, _, h in fdata.error_budgets)
    return ResidualReport(p=p, residual=max(gaps), g_budget=g_total,
                          h_budget=h_total, per_function=tuple(gaps),
                          min_j=min(fdata.j_set), q_lcm=fdata.q_lcm)


# -- shifted-ball diagnostic ------------------------------------------------------


@dataclass(frozen=True)
class ShiftedBallReport:
    full_norm: float
    local_norms: tuple[float, ...]
    ratio: float


def shifted_ball_report(matrix: np.ndarray, coords: np.ndarray, rho: float,
                        centers: Sequence) -> ShiftedBallReport:
    """l2 norm on the whole point set against the max over shifted sub-balls.

    The covering constant is a measurement, not an assertion; callers log it.
    """
    coords = np.asarray(coords, dtype=float).reshape(matrix.shape[0], -1)
    full = float(np.linalg.norm(matrix, 2))
    locals_: list[float] = []
    for z in centers:
        zvec = np.asarray(as_point(z), dtype=float)
        mask = ((coords - zvec) ** 2).sum(axis=1) <= rho * rho
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            locals_.append(0.0)
            continue
        sub = matrix[np.ix_(idx, idx)]
        locals_.append(float(np.linalg.norm(sub, 2)))
    best = max(locals_, default=0.0)
    return ShiftedBallReport(full, tuple(locals_), full / best if best else math.inf)
