"""Command-line experiment harness.

Each experiment reads a JSON config, runs a deterministic sweep, and writes
CSV tables plus a JSON manifest (config hash, versions, seed) into the output
directory.  Exit codes: 0 all checks passed, 1 a measured property failed,
2 the config was rejected (schema violation or budget overrun).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from . import backend
from .diophantine import (
    Leaf,
    LevelCollection,
    LevelRecord,
    RandomShiftSampler,
    RationalApprox,
    build_factorization,
    build_schedule,
    dirichlet_approx,
    factorization_residual,
    leaf_constraint_report,
    level_scale,
    schedule_reconstruction_residual,
    single_fraction_leaf,
)
from .kernels import dyadic_decompose, odd_power_kernel, riesz_like_kernel
from .lattice import Ball, LatticeFunction, step_embedding_norms
from .multipliers import (
    circulant_eigen_check,
    descent_identity_check,
    periodic_plancherel_check,
    quasi_shift_check,
)
from .normlab import modulated_toeplitz_norm2, norm_bracket, norm_exact
from .operators import OperatorSpec, materialize, modulation_conjugation_check
from .polyalg import BilinearPhase, CoefficientVector, IntPolyMap, index_set


class ConfigError(Exception):
    """Raised by runners for config problems the schema cannot express."""


@dataclass
class RunResult:
    ok: bool
    summary: dict
    outputs: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


# -- small plumbing ---------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(c) for c in row])


def _map_indexed(fn, items, threads: int) -> list:
    """Run fn over the sweep points; results keep the sweep order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _linfit(xs, ys) -> tuple[float, float, float]:
    """Least-squares line through (xs, ys): (slope, intercept, R^2)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / total if total > 0 else 1.0
    return float(slope), float(intercept), r2


def _kernel_from(obj, dim: int = 1, support_radius: float = math.inf):
    if obj is None:
        if dim == 1:
            return odd_power_kernel(support_radius=support_radius)
        return riesz_like_kernel(support_radius=support_radius)
    kind = obj["kind"]
    if kind == "odd_power":
        if dim != 1:
            raise ConfigError("kernels: odd_power is one-dimensional")
        return odd_power_kernel(scale=float(obj.get("scale", 1.0)),
                                support_radius=support_radius)
    if dim != 2:
        raise ConfigError("kernels: riesz harmonics need dimension 2")
    to_map = lambda h: {int(k): float(v) for k, v in (h or {}).items()}  # noqa: E731
    return riesz_like_kernel(cos_harmonics=to_map(obj.get("cos_harmonics")),
                             sin_harmonics=to_map(obj.get("sin_harmonics")),
                             support_radius=support_radius)


def _rational_or_float(rng: np.random.Generator, mix: float, q_bound: int):
    if rng.random() < mix:
        q = int(rng.integers(1, q_bound + 1))
        return Fraction(int(rng.integers(0, q + 1)), q)
    return float(rng.random())


def _theta_value(raw) -> float:
    named = {
        "golden": (math.sqrt(5.0) - 1.0) / 2.0,
        "sqrt2": math.sqrt(2.0) - 1.0,
        "cbrt2": 2.0 ** (1.0 / 3.0) - 1.0,
    }
    if isinstance(raw, str):
        return named[raw]
    return float(raw)


def _primes_upto(n: int) -> list[int]:
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(n**0.5) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return [int(p) for p in np.nonzero(sieve)[0]]


def _random_function(rng: np.random.Generator, box: Ball) -> LatticeFunction:
    coords = box.coords()
    vals = rng.standard_normal(coords.shape[0]) + 1j * rng.standard_normal(coords.shape[0])
    return LatticeFunction.from_arrays(coords, vals)


def _max_gap(a: LatticeFunction, b: LatticeFunction) -> float:
    diff = a - b
    return max((abs(v) for _, v in diff.items()), default=0.0)


_KERNEL_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["odd_power", "riesz"]},
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "cos_harmonics": {"type": "object", "additionalProperties": {"type": "number"}},
        "sin_harmonics": {"type": "object", "additionalProperties": {"type": "number"}},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_SEED = {"type": "integer", "minimum": 0}


# -- uniformity: norm plateaus across coefficient draws ----------------------------


_UNIFORMITY_SCHEMA = {
    "type": "object",
    "properties": {
        "seed": _SEED,
        "degree": {"type": "integer", "minimum": 1, "maximum": 4},
        "draws": {"type": "integer", "minimum": 1, "maximum": 500},
        "radii": {
            "type": "array",
            "items": {"type": "integer", "minimum": 4, "maximum": 512},
            "minItems": 1,
        },
        "p_list": {
            "type": "array",
            "items": {"type": "number", "minimum": 1},
            "minItems": 1,
        },
        "m_radius": {"type": "number", "minimum": 1, "maximum": 64},
        "coeff_bound": {"type": "integer", "minimum": 1, "maximum": 8},
        "rational_mix": {"type": "number", "minimum": 0, "maximum": 1},
        "plateau_factor": {"type": "number", "minimum": 1},
        "restarts": {"type": "integer", "minimum": 1, "maximum": 8},
        "kernel": _KERNEL_SCHEMA,
    },
    "required": ["draws", "radii", "p_list"],
    "additionalProperties": False,
}


def _sample_twisted_pair(rng: np.random.Generator, degree: int, bound: int, mix: float):
    coeffs = {}
    for s in range(1, degree + 1):
        c = int(rng.integers(-bound, bound + 1))
        if c:
            coeffs[(0, (s,))] = c
    if not coeffs:
        coeffs[(0, (degree,))] = 1
    poly = IntPolyMap(1, 1, degree, coeffs)
    vals = tuple(_rational_or_float(rng, mix, 40) for _ in index_set(1, degree).indices)
    twist = CoefficientVector(dim=1, degree=degree, values=vals)
    desc = json.dumps({
        "P": {str(a[0]): c for (_, a), c in sorted(coeffs.items())},
        "Q": [str(v) for v in vals],
    })
    return poly, twist, desc


def _run_uniformity(cfg: dict, out_dir: Path, seed: int, threads: int) -> RunResult:
    degree = int(cfg.get("degree", 3))
    draws = int(cfg["draws"])
    radii = sorted(int(r) for r in cfg["radii"])
    p_list = [float(p) for p in cfg["p_list"]]
    m_radius = float(cfg.get("m_radius", 8.0))
    bound = int(cfg.get("coeff_bound", 3))
    mix = float(cfg.get("rational_mix", 0.5))
    factor = float(cfg.get("plateau_factor", 1.25))
    restarts = int(cfg.get("restarts", 2))
    kernel = _kernel_from(cfg.get("kernel"), dim=1, support_radius=m_radius)
    m_range = Ball(radius=m_radius, dim=1, norm_kind="euclidean")
    children = np.random.SeedSequence(seed).spawn(draws)

    def one(idx: int):
        rng = np.random.default_rng(children[idx])
        poly, twist, desc = _sample_twisted_pair(rng, degree, bound, mix)
        spec = OperatorSpec(variant="twisted_radon", kernel=kernel, P=poly,
                            phase=twist, m_range=m_range)
        out = []
        for r in radii:
            mat = materialize(spec, Ball(radius=float(r), dim=1, norm_kind="sup")).matrix
            for p in p_list:
                est = norm_bracket(mat, p, seeds=restarts)
                out.append((idx, r, p, est.lower, est.upper, est.method, desc))
        return out

    rows = [row for group in _map_indexed(one, range(draws), threads) for row in group]
    write_csv(out_dir / "uniformity.csv",
              ("draw", "radius", "p", "lower", "upper", "method", "coeffs"), rows)

    plateau: dict[str, dict] = {}
    plateau_rows = []
    ok = True
    for p in p_list:
        peak = {r: max(row[3] for row in rows if row[1] == r and row[2] == p)
                for r in radii}
        if len(radii) >= 2:
            ratio = peak[radii[-1]] / peak[radii[-2]]
        else:
            ratio = 1.0
        good = ratio <= factor
        ok = ok and good
        plateau[_fmt(p)] = {"ratio": ratio, "bound": factor, "ok": good,
                            "max_by_radius": {str(r): peak[r] for r in radii}}
        plateau_rows.append((p, ratio, factor, int(good)))
    write_csv(out_dir / "plateau.csv", ("p", "ratio", "bound", "ok"), plateau_rows)
    notes = [f"p = {_fmt(p)}: plateau ratio {d['ratio']:.6f} (bound {factor})"
             for p, d in plateau.items()]
    return RunResult(ok=ok, summary={"plateau": plateau},
                     outputs=["uniformity.csv", "plateau.csv"], notes=notes)


# -- minor-decay: ||T_j|| over minor indices ---------------------------------------


_MINOR_DECAY_SCHEMA = {
    "type": "object",
    "properties": {
        "seed": _SEED,
        "theta": {
            "anyOf": [
                {"type": "number"},
                {"enum": ["golden", "sqrt2", "cbrt2"]},
            ]
        },
        "j_min": {"type": "integer", "minimum": 1, "maximum": 14},
        "j_max": {"type": "integer", "minimum": 1, "maximum": 14},
        "eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
        "min_delta": {"type": "number"},
        "min_r2": {"type": "number", "minimum": 0, "maximum": 1},
        "kernel": _KERNEL_SCHEMA,
    },
    "required": ["theta", "j_min", "j_max"],
    "additionalProperties": False,
}


def _run_minor_decay(cfg: dict, out_dir: Path, seed: int, threads: int) -> RunResult:
    theta = _theta_value(cfg["theta"])
    j_lo, j_hi = int(cfg["j_min"]), int(cfg["j_max"])
    if j_lo > j_hi:
        raise ConfigError("minor-decay: empty j range")
    eps = float(cfg.get("eps", 0.25))
    min_delta = float(cfg.get("min_delta", 0.0))
    min_r2 = float(cfg.get("min_r2", 0.9))
    kernel = _kernel_from(cfg.get("kernel"), dim=1)
    exact_theta = Fraction(theta)

    def one(j: int):
        piece = dyadic_decompose(kernel, j)
        norm = modulated_toeplitz_norm2(theta, piece, radius=2 ** (j + 1))
        ap = dirichlet_approx(exact_theta, max(1, int(level_scale(2, eps, j))))
        minor = ap.q > 2.0 ** (eps * j)
        return (j, ap.a, ap.q, abs(ap.gamma_float), int(minor), norm,
                math.log2(norm) if norm > 0 else -math.inf)

    rows = _map_indexed(one, range(j_lo, j_hi + 1), threads)
    write_csv(out_dir / "minor_decay.csv",
              ("j", "a", "q", "gamma_abs", "minor", "norm2", "log2_norm"), rows)

    pts = [(r[0], r[6]) for r in rows if r[4]]
    if len(pts) < 3:
        raise ConfigError("minor-decay: fewer than 3 minor indices; widen the "
                          "j range or lower eps")
    slope, intercept, r2 = _linfit([p[0] for p in pts], [p[1] for p in pts])
    delta = -slope
    ok = delta > min_delta and r2 >= min_r2
    summary = {"delta": delta, "r2": r2, "intercept": intercept,
               "minor_count": len(pts), "theta": theta, "eps": eps}
    notes = [f"fitted 2^(-delta j): delta = {delta:.4f}, R^2 = {r2:.4f} "
             f"over {len(pts)} minor indices"]
    return RunResult(ok=ok, summary=summary, outputs=["minor_decay.csv"], notes=notes)


# -- gauss-decay: averaging-operator norms vs the modulus ---------------------------


_GAUSS_DECAY_SCHEMA = {
    "type": "object",
    "properties": {
        "seed": _SEED,
        "q_max": {"type": "integer", "minimum": 2, "maximum": 512},
        "prime_only": {"type": "boolean"},
        "numerator": {"enum": ["one", "random"]},
        "norm_tol": {"type": "number", "exclusiveMinimum": 0},
        "slope_tol": {"type": "number", "exclusiveMinimum": 0},
        "min_delta": {"type": "number", "minimum": 0},
    },
    "required": ["q_max"],
    "additionalProperties": False,
}


def _run_gauss_decay(cfg: dict, out_dir: Path, seed: int, threads: int) -> RunResult:
    q_max = int(cfg["q_max"])
    prime_only = bool(cfg.get("prime_only", True))
    rule = cfg.get("numerator", "one")
    norm_tol = float(cfg.get("norm_tol", 1e-10))
    slope_tol = float(cfg.get("slope_tol", 0.02))
    min_delta = float(cfg.get("min_delta", 0.4))
    qs = _primes_upto(q_max) if prime_only else list(range(2, q_max + 1))
    if not qs:
        raise ConfigError("gauss-decay: no moduli below q_max")
    rng = np.random.default_rng(seed)
    kernel = odd_power_kernel()

    def pick_a(q: int) -> int:
        if rule == "one" or q == 2:
            return 1
        while True:
            a = int(rng.integers(1, q))
            if math.gcd(a, q) == 1:
                return a

    picks = [(q, pick_a(q)) for q in qs]

    def one(item):
        q, a = item
        fdata = build_factorization(single_fraction_leaf(a, q), kernel,
                                    lcm_budget=q_max)
        norm = norm_exact(fdata.gauss_matrix(), 2)
        expected = q**-0.5
        return (q, a, norm, expected, abs(norm - expected))

    rows = _map_indexed(one, picks, threads)
    write_csv(out_dir / "gauss_decay.csv",
              ("q", "a", "norm2", "q_pow_minus_half", "abs_dev"), rows)
    worst = max(r[4] for r in rows)
    slope, _, r2 = _linfit([math.log2(r[0]) for r in rows],
                           [math.log2(r[2]) for r in rows])
    delta = -slope
    ok = worst <= norm_tol and abs(slope + 0.5) <= slope_tol and delta >= min_delta
    summary = {"max_abs_dev": worst, "slope": slope, "r2": r2, "delta": delta,
               "moduli": len(rows)}
    notes = [f"max |norm - q^-1/2| = {worst:.3e}; log-log slope {slope:.4f} "
             f"(R^2 = {r2:.4f}) over {len(rows)} moduli"]
    return RunResult(ok=ok, summary=summary, outputs=["gauss_decay.csv"], notes=notes)


# -- decompose: schedule construction and reconstruction ----------------------------


_TERM_SCHEMA = {
    "type": "object",
    "properties": {
        "alpha": {"type": "array", "items": {"type": "integer", "minimum": 0},
                  "minItems": 1, "maxItems": 2},
        "beta": {"type": "array", "items": {"type": "integer", "minimum": 0},
                 "minItems": 1, "maxItems": 2},
        "theta": {
            "anyOf": [
                {"type": "number"},
                {"type": "array", "items": {"type": "integer"}, "minItems": 2,
                 "maxItems": 2},
            ]
        },
    },
    "required": ["alpha", "beta", "theta"],
    "additionalProperties": False,
}

_DECOMPOSE_SCHEMA = {
    "type": "object",
    "properties": {
        "seed": _SEED,
        "degree": {"type": "integer", "minimum": 2, "maximum": 4},
        "phases": {"type": "integer", "minimum": 1, "maximum": 50},
        "terms": {"type": "array", "items": _TERM_SCHEMA, "minItems": 1},
        "j_min": {"type": "integer", "minimum": 1, "maximum": 10},
        "j_max": {"type": "integer", "minimum": 1, "maximum": 10},
        "box_radius": {"type": "integer", "minimum": 8, "maximum": 512},
        "shift_samples": {"type": "integer", "minimum": 0, "maximum": 8},
        "rational_mix": {"type": "number", "minimum": 0, "maximum": 1},
        "q_bound": {"type": "integer", "minimum": 1, "maximum": 64},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "footnote_radii": {"type": "boolean"},
        "kernel": _KERNEL_SCHEMA,
    },
    "required": ["j_min", "j_max"],
    "additionalProperties": False,
}


def _sample_phase(rng: np.random.Generator, degree: int, mix: float,
                  q_bound: int) -> BilinearPhase:
    terms = []
    for i in range(1, degree):
        for j in range(1, degree - i + 1):
            if rng.random() < 0.7:
                terms.append(((i,), (j,), _rational_or_float(rng, mix, q_bound)))
    if not terms:
        terms.append(((1,), (degree - 1,), _rational_or_float(rng, mix, q_bound)))
    return BilinearPhase.from_terms(1, terms, nominal_degree=degree)


def _phase_from_terms(raw_terms) -> BilinearPhase:
    terms = []
    dim = len(raw_terms[0]["alpha"])
    for t in raw_terms:
        theta = t["theta"]
        value = Fraction(int(theta[0]), int(theta[1])) if isinstance(theta, list) \
            else float(theta)
        terms.append((tuple(t["alpha"]), tuple(t["beta"]), value))
    return BilinearPhase.from_terms(dim, terms)


def _run_decompose(cfg: dict, out_dir: Path, seed: int, threads: int) -> RunResult:
    degree = int(cfg.get("degree", 3))
    j_lo, j_hi = int(cfg["j_min"]), int(cfg["j_max"])
    if j_lo > j_hi:
        raise ConfigError("decompose: empty j range")
    j_range = range(j_lo, j_hi + 1)
    box_radius = int(cfg.get("box_radius", 64))
    shift_samples = int(cfg.get("shift_samples", 2))
    mix = float(cfg.get("rational_mix", 0.5))
    q_bound = int(cfg.get("q_bound", 24))
    tol = float(cfg.get("tol", 1e-12))
    footnote = bool(cfg.get("footnote_radii", False))
    kernel = _kernel_from(cfg.get("kernel"), dim=1)
    rng = np.random.default_rng(seed)

    if "terms" in cfg:
        phases = [_phase_from_terms(cfg["terms"])]
        if phases[0].dim != 1:
            raise ConfigError("decompose: explicit terms must be one-dimensional")
    else:
        count = int(cfg.get("phases", 5))
        phases = [_sample_phase(rng, degree, mix, q_bound) for _ in range(count)]

    box = Ball(radius=float(box_radius), dim=1, norm_kind="sup")
    rows = []
    outputs = []
    ok = True
    worst_rel = 0.0
    for i, phase in enumerate(phases):
        f = _random_function(rng, box)
        for variant in range(shift_samples + 1):
            rule = None if variant == 0 else RandomShiftSampler(
                np.random.default_rng((seed, i, variant)))
            sched = build_schedule(phase, j_range, shift_rule=rule,
                                   footnote_radii=footnote)
            name = f"schedule_p{i}_v{variant}.json"
            (out_dir / name).write_text(sched.to_json())
            outputs.append(name)
            violations = sum(len(leaf_constraint_report(leaf, sched.eps_map))
                             for leaf in sched.leaves)
            good = sched.partition_ok() and sched.radii_ok() and violations == 0
            if variant == 0:
                abs_gap, rel_gap = schedule_reconstruction_residual(
                    sched, phase, kernel, f, in_box=box, out_box=box)
                worst_rel = max(worst_rel, rel_gap)
                good = good and rel_gap <= tol
                rows.append((i, variant, len(sched.leaves), len(sched.minors),
                             int(sched.partition_ok()), int(sched.radii_ok()),
                             violations, abs_gap, rel_gap))
            else:
                rows.append((i, variant, len(sched.leaves), len(sched.minors),
                             int(sched.partition_ok()), int(sched.radii_ok()),
                             violations, "", ""))
            ok = ok and good
    write_csv(out_dir / "decompose.csv",
              ("phase", "variant", "leaves", "minors", "partition_ok", "radii_ok",
               "constraint_violations", "abs_gap", "rel_gap"), rows)
    summary = {"phases": len(phases), "variants": shift_samples + 1,
               "worst_rel_gap": worst_rel, "tol": tol}
    notes = [f"worst reconstruction gap {worst_rel:.3e} (tol {tol:g}) over "
             f"{len(phases)} phases"]
    return RunResult(ok=ok, summary=summary,
                     outputs=["decompose.csv"] + outputs, notes=notes)


# -- factorize: leaf residuals against the majorant budgets -------------------------


_FRACTION_SCHEMA = {
    "type": "object",
    "properties": {
        "a": {"type": "integer", "minimum": 0},
        "q": {"type": "integer", "minimum": 1, "maximum": 512},
        "alpha": {"type": "array", "items": {"type": "integer", "minimum": 0},
                  "minItems": 1, "maxItems": 2},
        "beta": {"type": "array", "items": {"type": "integer", "minimum": 0},
                 "minItems": 1, "maxItems": 2},
        "gamma": {
            "anyOf": [
                {"type": "number"},
                {"type": "array", "items": {"type": "integer"}, "minItems": 2,
                 "maxItems": 2},
            ]
        },
    },
    "required": ["a", "q", "alpha", "beta"],
    "additionalProperties": False,
}

_FACTORIZE_SCHEMA = {
    "type": "object",
    "properties": {
        "seed": _SEED,
        "terms": {"type": "array", "items": _FRACTION_SCHEMA, "minItems": 1},
        "rho": {"type": "number", "exclusiveMinimum": 0, "maximum": 512},
        "j_windows": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "integer", "minimum": 1, "maximum": 14},
                "minItems": 1,
            },
            "minItems": 1,
        },
        "eps_prime": {"type": "number", "exclusiveMinimum": 0,
                      "exclusiveMaximum": 0.5},
        "samples": {"type": "integer", "minimum": 1, "maximum": 64},
        "p": {"type": "number", "minimum": 1},
        "ratio_max": {"type": "number", "exclusiveMinimum": 0},
        "lcm_budget": {"type": "integer", "minimum": 1, "maximum": 512},
        "kernel": _KERNEL_SCHEMA,
    },
    "required": ["terms", "j_windows"],
    "additionalProperties": False,
}


def _leaf_from_terms(raw_terms, rho: float, j_set) -> Leaf:
    dim = len(raw_terms[0]["alpha"])
    by_level: dict[int, list] = {}
    for t in raw_terms:
        alpha, beta = tuple(t["alpha"]), tuple(t["beta"])
        if len(alpha) != dim or len(beta) != dim:
            raise ConfigError("factorize: mixed term dimensions")
        raw_g = t.get("gamma", 0)
        gamma = Fraction(int(raw_g[0]), int(raw_g[1])) if isinstance(raw_g, list) \
            else Fraction(float(raw_g))
        try:
            ap = RationalApprox(int(t["a"]), int(t["q"]), gamma)
        except ValueError as exc:
            raise ConfigError(f"factorize: bad fraction {t}: {exc}") from exc
        by_level.setdefault(sum(alpha) + sum(beta), []).append(((alpha, beta), ap))
    records = tuple(
        LevelRecord(collection=LevelCollection(level=s, approx=tuple(by_level[s])),
                    rho=rho, shift=(0,) * dim)
        for s in sorted(by_level, reverse=True)
    )
    return Leaf(dim=dim, j_set=tuple(sorted(j_set)), records=records)


def _run_factorize(cfg: dict, out_dir: Path, seed: int, threads: int) -> RunResult:
    rho = float(cfg.get("rho", 48.0))
    windows = [tuple(sorted(int(j) for j in w)) for w in cfg["j_windows"]]
    eps_prime = float(cfg.get("eps_prime", 0.1))
    samples = int(cfg.get("samples", 4))
    p = float(cfg.get("p", 2.0))
    ratio_max = float(cfg.get("ratio_max", 10.0))
    lcm_budget = int(cfg.get("lcm_budget", 64))
    all_exact = all(not t.get("gamma") for t in cfg["terms"])
    leaves = [_leaf_from_terms(cfg["terms"], rho, w) for w in windows]
    kernel = _kernel_from(cfg.get("kernel"), dim=leaves[0].dim)
    children = np.random.SeedSequence(seed).spawn(len(windows))

    def one(idx: int):
        fdata = build_factorization(leaves[idx], kernel, lcm_budget=lcm_budget,
                                    eps_prime=eps_prime)
        report = factorization_residual(
            fdata, p=p, rng=np.random.default_rng(children[idx]), samples=samples)
        budget_rows = [(idx, j, g, h) for j, g, h in fdata.error_budgets]
        return report, budget_rows

    results = _map_indexed(one, range(len(windows)), threads)
    order = sorted(range(len(windows)), key=lambda i: min(windows[i]))
    rows = []
    for i in order:
        rep = results[i][0]
        rows.append((rep.min_j, rep.q_lcm, rep.residual, rep.g_budget,
                     rep.h_budget, rep.ratio))
    write_csv(out_dir / "factorize.csv",
              ("min_j", "q_lcm", "residual", "g_budget", "h_budget", "ratio"), rows)
    write_csv(out_dir / "error_budgets.csv", ("window", "j", "g_norm", "h_norm"),
              [r for _, group in results for r in group])

    residuals = [row[2] for row in rows]
    if all_exact:
        ok = all(b <= a * (1 + 1e-9) for a, b in zip(residuals, residuals[1:]))
        verdict = "monotone" if ok else "not monotone"
        notes = [f"exact-rational residuals across windows: {verdict} "
                 f"({', '.join('%.3e' % r for r in residuals)})"]
    else:
        worst = max(row[5] for row in rows)
        ok = worst <= ratio_max
        notes = [f"worst residual/budget ratio {worst:.3f} (max {ratio_max:g})"]
    summary = {"residuals": residuals, "all_exact_rational": all_exact,
               "windows": [list(w) for w in windows]}
    return RunResult(ok=ok, summary=summary,
                     outputs=["factorize.csv", "error_budgets.csv"], notes=notes)


# -- identities: the exact-structure checks -----------------------------------------


_IDENTITIES_SCHEMA = {
    "type": "object",
    "properties": {
        "seed": _SEED,
        "samples": {"type": "integer", "minimum": 1, "maximum": 2000},
        "trunc_radius": {"type": "number", "minimum": 2, "maximum": 64},
        "degree": {"type": "integer", "minimum": 1, "maximum": 4},
        "xi_per_instance": {"type": "integer", "minimum": 1, "maximum": 8},
        "descent_tol": {"type": "number", "exclusiveMinimum": 0},
        "shift_tol": {"type": "number", "exclusiveMinimum": 0},
        "conj_tol": {"type": "number", "exclusiveMinimum": 0},
        "conj_samples": {"type": "integer", "minimum": 1, "maximum": 100},
        "plancherel": {
            "type": "object",
            "properties": {
                "samples": {"type": "integer", "minimum": 1, "maximum": 100},
                "period": {"type": "integer", "minimum": 2, "maximum": 64},
                "m_radius": {"type": "number", "minimum": 1, "maximum": 16},
                "tol": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "circulant": {
            "type": "object",
            "properties": {
                "samples": {"type": "integer", "minimum": 1, "maximum": 100},
                "period": {"type": "integer", "minimum": 2, "maximum": 64},
                "m_radius": {"type": "number", "minimum": 1, "maximum": 16},
                "tol": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "step_samples": {"type": "integer", "minimum": 1, "maximum": 100},
    },
    "additionalProperties": False,
}


def _random_poly_map(rng: np.random.Generator, k1: int, k2: int,
                     degree: int) -> IntPolyMap:
    coeffs = {}
    for l in range(k2):
        for alpha in index_set(k1, degree).indices:
            c = int(rng.integers(-3, 4))
            if c:
                coeffs[(l, alpha)] = c
        if not any(key[0] == l for key in coeffs):
            coeffs[(l, index_set(k1, degree).indices[0])] = 1
    return IntPolyMap(k1, k2, degree, coeffs)


def _run_identities(cfg: dict, out_dir: Path, seed: int, threads: int) -> RunResult:
    samples = int(cfg.get("samples", 100))
    trunc = float(cfg.get("trunc_radius", 32.0))
    degree = int(cfg.get("degree", 2))
    xi_count = int(cfg.get("xi_per_instance", 2))
    descent_tol = float(cfg.get("descent_tol", 1e-10))
    shift_tol = float(cfg.get("shift_tol", 1e-12))
    conj_tol = float(cfg.get("conj_tol", 1e-12))
    conj_samples = int(cfg.get("conj_samples", 10))
    pl = cfg.get("plancherel", {})
    ci = cfg.get("circulant", {})
    step_samples = int(cfg.get("step_samples", 20))
    rng = np.random.default_rng(seed)
    kernel = odd_power_kernel()

    rows = []

    def record(check: str, trials: int, dev: float, tol: float):
        rows.append((check, trials, dev, tol, int(dev <= tol)))

    worst_plain = worst_twisted = 0.0
    for i in range(samples):
        poly = _random_poly_map(rng, 1, int(rng.integers(1, 3)), degree)
        xis = [tuple(rng.random(poly.k2)) for _ in range(xi_count)]
        if i % 2 == 0:
            dev = descent_identity_check(poly, kernel, trunc, xis)
            worst_plain = max(worst_plain, dev)
        else:
            twist = CoefficientVector(
                dim=1, degree=degree,
                values=tuple(_rational_or_float(rng, 0.5, 16)
                             for _ in index_set(1, degree).indices))
            dev = descent_identity_check(poly, kernel, trunc, xis, twist=twist)
            worst_twisted = max(worst_twisted, dev)
    record("descent", (samples + 1) // 2 * xi_count, worst_plain, descent_tol)
    record("descent_twisted", samples // 2 * xi_count, worst_twisted, descent_tol)

    worst = 0.0
    arg_len = index_set(1, degree).size
    for _ in range(samples):
        theta = CoefficientVector(
            dim=1, degree=degree,
            values=tuple(_rational_or_float(rng, 0.5, 16) for _ in range(arg_len)))
        xis = [tuple(rng.random(arg_len)) for _ in range(xi_count)]
        worst = max(worst, quasi_shift_check(theta, kernel, trunc, xis))
    record("quasi_shift", samples * xi_count, worst, shift_tol)

    worst = 0.0
    conj_len = index_set(1, degree).size
    # f lives on the universal map's target lattice Z^{conj_len}
    conj_box = Ball(radius=float(max(2, 8 // conj_len)), dim=conj_len,
                    norm_kind="sup")
    for _ in range(conj_samples):
        theta = tuple(float(rng.random()) for _ in range(conj_len))
        f = _random_function(rng, conj_box)
        lhs, rhs = modulation_conjugation_check(
            1, degree, theta, f, odd_power_kernel(support_radius=8.0),
            Ball(radius=8.0, dim=1, norm_kind="euclidean"))
        worst = max(worst, _max_gap(lhs, rhs))
    record("modulation_conjugation", conj_samples, worst, conj_tol)

    pl_samples = int(pl.get("samples", 10))
    period = int(pl.get("period", 16))
    pl_radius = float(pl.get("m_radius", 6.0))
    pl_tol = float(pl.get("tol", 1e-10))
    worst = 0.0
    for _ in range(pl_samples):
        poly = _random_poly_map(rng, 2, 1, int(rng.integers(2, 4)))
        terms = [((1,), (1,), _rational_or_float(rng, 0.5, 16))]
        if rng.random() < 0.5:
            terms.append(((1,), (2,), _rational_or_float(rng, 0.5, 16)))
        phase = BilinearPhase.from_terms(1, terms)
        pts = np.array([(x, y) for x in range(-6, 7) for y in range(-4, 5)])
        vals = rng.standard_normal(len(pts)) + 1j * rng.standard_normal(len(pts))
        f = LatticeFunction.from_arrays(pts, vals)
        direct, fiber = periodic_plancherel_check(
            1, poly, phase, odd_power_kernel(support_radius=pl_radius),
            pl_radius, f, period)
        worst = max(worst, abs(direct - fiber) / direct if direct else 0.0)
    record("plancherel_route", pl_samples, worst, pl_tol)

    worst = 0.0
    for i in range(step_samples):
        f = _random_function(rng, Ball(radius=16.0, dim=1, norm_kind="sup"))
        for p in (1.0, 1.5, 2.0, 3.0, math.inf):
            seq_norm, step_norm = step_embedding_norms(f, p)
            worst = max(worst, abs(seq_norm - step_norm))
    record("step_embedding", step_samples * 5, worst, 0.0)

    ci_samples = int(ci.get("samples", 10))
    ci_period = int(ci.get("period", 64))
    ci_radius = float(ci.get("m_radius", 8.0))
    ci_tol = float(ci.get("tol", 1e-10))
    worst = 0.0
    for i in range(ci_samples):
        poly = _random_poly_map(rng, 1, 1, int(rng.integers(1, 4)))
        twist = None
        if i % 2:
            twist = CoefficientVector(
                dim=1, degree=poly.degree,
                values=tuple(_rational_or_float(rng, 0.5, 16)
                             for _ in index_set(1, poly.degree).indices))
        worst = max(worst, circulant_eigen_check(
            poly, odd_power_kernel(support_radius=ci_radius), ci_radius,
            ci_period, twist=twist))
    record("circulant_eigen", ci_samples, worst, ci_tol)

    write_csv(out_dir / "identities.csv",
              ("check", "trials", "max_dev", "tol", "ok"), rows)
    ok = all(bool(row[4]) for row in rows)
    summary = {row[0]: {"max_dev": row[2], "tol": row[3], "ok": bool(row[4])}
               for row in rows}
    notes = [f"{row[0]}: max deviation {row[2]:.3e} (tol {row[3]:g})"
             for row in rows]
    return RunResult(ok=ok, summary=summary, outputs=["identities.csv"], notes=notes)


# -- dirichlet-audit: exhaustive comparison ------------------------------------------


_DIRICHLET_SCHEMA = {
    "type": "object",
    "properties": {
        "seed": _SEED,
        "den": {"type": "integer", "minimum": 2, "maximum": 20000},
        "n_max": {"type": "integer", "minimum": 1, "maximum": 1000},
    },
    "required": ["den", "n_max"],
    "additionalProperties": False,
}


def _audit_one_theta(i: int, den: int, n_max: int) -> tuple[int, int, int]:
    """(i, cases, failures) for theta = i/den against brute-force search.

    For each q the only numerator candidates are floor(q theta) and its
    successor; a pair (a, q) is within 1/(qN) of theta iff N |iq - a den| <=
    den, so the minimal valid q per N comes from one integer error table.
    """
    qs = np.arange(1, n_max + 1, dtype=np.int64)
    # den + 1 acts as an infeasibility sentinel: err * N <= den needs err <= den
    best_err = np.full(n_max, den + 1, dtype=np.int64)
    for cand in ((i * qs) // den, (i * qs) // den + 1):
        valid = (cand >= 0) & (cand <= qs) & (np.gcd(cand, qs) == 1)
        err = np.abs(i * qs - cand * den)
        keep = valid & (err < best_err)
        best_err[keep] = err[keep]
    theta = Fraction(i, den)
    failures = 0
    for n in range(1, n_max + 1):
        ap = dirichlet_approx(theta, n)
        feasible = np.nonzero(best_err[:n] * n <= den)[0]
        oracle_q = int(feasible[0]) + 1 if feasible.size else None
        good = (
            oracle_q is not None
            and ap.q == oracle_q
            and ap.q <= n
            and math.gcd(ap.a, ap.q) == 1
            and n * abs(i * ap.q - ap.a * den) <= den
        )
        if not good:
            failures += 1
    return i, n_max, failures


def _run_dirichlet_audit(cfg: dict, out_dir: Path, seed: int,
                         threads: int) -> RunResult:
    den = int(cfg["den"])
    n_max = int(cfg["n_max"])
    rows = _map_indexed(lambda i: _audit_one_theta(i, den, n_max),
                        range(1, den), threads)
    write_csv(out_dir / "dirichlet_audit.csv", ("numerator", "cases", "failures"),
              rows)
    failures = sum(r[2] for r in rows)
    cases = sum(r[1] for r in rows)
    summary = {"den": den, "n_max": n_max, "cases": cases, "failures": failures}
    notes = [f"{cases} (theta, N) cases, {failures} failures"]
    return RunResult(ok=failures == 0, summary=summary,
                     outputs=["dirichlet_audit.csv"], notes=notes)


# -- entry point --------------------------------------------------------------------


EXPERIMENTS = {
    "uniformity": (_run_uniformity, _UNIFORMITY_SCHEMA),
    "minor-decay": (_run_minor_decay, _MINOR_DECAY_SCHEMA),
    "gauss-decay": (_run_gauss_decay, _GAUSS_DECAY_SCHEMA),
    "decompose": (_run_decompose, _DECOMPOSE_SCHEMA),
    "factorize": (_run_factorize, _FACTORIZE_SCHEMA),
    "identities": (_run_identities, _IDENTITIES_SCHEMA),
    "dirichlet-audit": (_run_dirichlet_audit, _DIRICHLET_SCHEMA),
}


def write_manifest(out_dir: Path, experiment: str, cfg_path: Path, raw: bytes,
                   cfg: dict, seed: int, threads: int, result: RunResult) -> None:
    from . import __version__

    manifest = {
        "experiment": experiment,
        "config_path": str(cfg_path),
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "config": cfg,
        "seed": seed,
        "threads": threads,
        "backend": backend.backend_name(),
        "versions": {
            "radonlab": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "outputs": result.outputs,
        "ok": result.ok,
        "summary": result.summary,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                      sort_keys=True) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="radon-lab",
        description="deterministic experiment sweeps over the lattice-operator "
                    "toolkit; results land as CSV tables plus a JSON manifest")
    parser.add_argument("experiment", choices=sorted(EXPERIMENTS))
    parser.add_argument("--config", required=True, type=Path,
                        help="JSON config for the chosen experiment")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default out/<experiment>)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for independent sweep points")
    args = parser.parse_args(argv)

    runner, schema = EXPERIMENTS[args.experiment]
    try:
        raw = args.config.read_bytes()
        cfg = json.loads(raw)
        jsonschema.validate(cfg, schema)
    except OSError as exc:
        print(f"config error ({args.experiment}): {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"config error ({args.experiment}): invalid JSON: {exc}",
              file=sys.stderr)
        return 2
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        print(f"config error ({args.experiment}): {exc.message} at {where}",
              file=sys.stderr)
        return 2

    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    threads = max(1, args.threads)
    out_dir = args.out if args.out is not None else Path("out") / args.experiment
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = runner(cfg, out_dir, seed, threads)
    except (ConfigError, ValueError) as exc:
        print(f"config error ({args.experiment}): {exc}", file=sys.stderr)
        return 2
    write_manifest(out_dir, args.experiment, args.config, raw, cfg, seed,
                   threads, result)
    for line in result.notes:
        print(line)
    print(f"{args.experiment}: {'pass' if result.ok else 'FAIL'}")
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
