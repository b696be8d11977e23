"""Release acceptance suite.

One test per gate criterion, in order.  Each test drives the public API (or
the command-line runner) at the advertised sizes and tolerances and reports a
single summary line through the ``criterion`` fixture; the lines are echoed
together after the run.
"""

import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

import oracles
from conftest import dyadic, random_lattice_values
from radonlab import cli
from radonlab.diophantine import (
    Leaf,
    LevelCollection,
    LevelRecord,
    RationalApprox,
    build_factorization,
    build_schedule,
    dyadic_separation_check,
    error_kernel_norms,
    factorization_residual,
    schedule_reconstruction_residual,
    single_fraction_leaf,
)
from radonlab.kernels import dyadic_decompose, odd_power_kernel, riesz_like_kernel
from radonlab.lattice import Ball, LatticeFunction, step_embedding_norms
from radonlab.multipliers import (
    circulant_eigen_check,
    descent_identity_check,
    periodic_plancherel_check,
    quasi_shift_check,
)
from radonlab.normlab import holder_conjugate, norm2_power, norm_bracket, norm_p_lower
from radonlab.operators import (
    expsum_apply,
    modulation_conjugation_check,
    oscillatory_apply,
    quasi_radon_apply,
    radon_apply,
    twisted_radon_apply,
)
from radonlab.polyalg import BilinearPhase, CoefficientVector, IntPolyMap, index_set


def _run_cli(tmp_path, experiment: str, cfg: dict, threads: int | None = None):
    cfg_path = tmp_path / f"{experiment}.json"
    cfg_path.write_text(json.dumps(cfg))
    out_dir = tmp_path / f"{experiment}-out"
    argv = [experiment, "--config", str(cfg_path), "--out", str(out_dir)]
    if threads is not None:
        argv += ["--threads", str(threads)]
    code = cli.main(argv)
    manifest = {}
    mpath = out_dir / "manifest.json"
    if mpath.exists():
        manifest = json.loads(mpath.read_text())
    return code, manifest


def _rand_poly(rng, k1: int, k2: int, degree: int, bound: int = 3) -> IntPolyMap:
    iset = index_set(k1, degree)
    coeffs = {}
    while not coeffs:
        for ell in range(k2):
            for a in iset.indices:
                c = int(rng.integers(-bound, bound + 1))
                if c:
                    coeffs[(ell, a)] = c
    return IntPolyMap(k1=k1, k2=k2, degree=degree, coeffs=coeffs)


def _rand_fraction(rng, num_cap: int, den_cap: int) -> Fraction:
    return Fraction(int(rng.integers(0, num_cap)), int(rng.integers(2, den_cap + 1)))


def _coprime(rng, q: int) -> int:
    a = int(rng.integers(1, q))
    while math.gcd(a, q) != 1:
        a = int(rng.integers(1, q))
    return a


def _one_term_leaf(a: int, q: int, gamma: Fraction, alpha, beta, shift,
                   rho: float, j_set) -> Leaf:
    rec = LevelRecord(
        collection=LevelCollection(level=sum(alpha) + sum(beta), approx=(
            ((tuple(alpha), tuple(beta)), RationalApprox(a, q, gamma)),)),
        rho=rho, shift=tuple(shift))
    return Leaf(dim=len(alpha), j_set=tuple(j_set), records=(rec,))


def _smooth_weight(r: float):
    def w(a, b):
        return 1.0 / (1.0 + ((a - b) ** 2).sum(axis=-1) / (r * r))

    return w


# -- criterion 1: every operator form against its reference sum -----------------


def _form_radon(rng) -> float:
    worst = 0.0
    for i in range(20):
        if i % 2 == 0:
            fd = random_lattice_values(rng, [(n,) for n in range(-6, 7)])
            P = _rand_poly(rng, 1, 1, int(rng.integers(2, 4)))
            box = Ball(radius=4.0, dim=1)
            got = radon_apply(LatticeFunction(1, fd), P, odd_power_kernel(), box)
            want = oracles.radon(fd, P.coeffs, 1, oracles.odd_power(),
                                 list(box.points()))
        else:
            pts = [(x, y) for x in range(-3, 4) for y in range(-3, 4)]
            fd = random_lattice_values(rng, pts, density=0.4)
            P = _rand_poly(rng, 2, 2, 2, bound=2)
            box = Ball(radius=3.0, dim=2)
            got = radon_apply(LatticeFunction(2, fd), P, riesz_like_kernel(), box)
            want = oracles.radon(fd, P.coeffs, 2, oracles.riesz_cos2,
                                 list(box.points()))
        worst = max(worst, oracles.max_gap(dict(got.items()), want))
    return worst


def _form_twisted(rng) -> float:
    worst = 0.0
    for _ in range(20):
        deg = int(rng.integers(2, 4))
        P = _rand_poly(rng, 1, 1, deg)
        iset = index_set(1, deg)
        twist = CoefficientVector(dim=1, degree=deg, values=tuple(
            _rand_fraction(rng, 7, 40) for _ in iset.indices))
        fd = random_lattice_values(rng, [(n,) for n in range(-5, 6)])
        got = twisted_radon_apply(LatticeFunction(1, fd), P, twist,
                                  odd_power_kernel(), Ball(radius=4.0, dim=1))
        want = oracles.radon(fd, P.coeffs, 1, oracles.odd_power(),
                             [(m,) for m in range(-4, 5)],
                             twist_values=twist.values, twist_indices=iset.indices)
        worst = max(worst, oracles.max_gap(dict(got.items()), want))
    return worst


def _form_quasi(rng) -> float:
    worst = 0.0
    for i in range(20):
        coeffs = {}
        for a in index_set(2, 2).indices:
            c = int(rng.integers(-2, 3))
            if c:
                coeffs[(0, a)] = c
        if not coeffs:
            coeffs[(0, (1, 1))] = 1
        P = IntPolyMap(k1=2, k2=1, degree=2, coeffs=coeffs)
        phase = BilinearPhase(1, {((1,), (1,)): dyadic(rng),
                                  ((0,), (2,)): dyadic(rng)})
        if i % 2:
            pts = [(a, b) for a in range(-2, 3) for b in range(0, 8)]
            period = 8
        else:
            pts = [(a, b) for a in range(-3, 4) for b in range(-3, 4)]
            period = None
        fd = random_lattice_values(rng, pts, density=0.35)
        got = quasi_radon_apply(LatticeFunction(2, fd), 1, P, phase,
                                odd_power_kernel(), Ball(radius=3.0, dim=1),
                                period=period)
        want = oracles.quasi_radon(fd, 1, P.coeffs, 1, phase.full_table(),
                                   oracles.odd_power(),
                                   [(m,) for m in range(-3, 4)], period=period)
        worst = max(worst, oracles.max_gap(dict(got.items()), want))
    return worst


_PHASE_KEYS = (((1,), (1,)), ((2,), (1,)), ((1,), (2,)), ((2,), (2,)))


def _rand_phase(rng, keys=_PHASE_KEYS) -> BilinearPhase:
    table = {k: dyadic(rng) for k in keys if rng.random() < 0.7}
    if not table:
        table[keys[0]] = dyadic(rng)
    return BilinearPhase(1, table)


def _form_oscillatory(rng) -> float:
    worst = 0.0
    for _ in range(20):
        fd = random_lattice_values(rng, [(n,) for n in range(-4, 5)])
        phase = _rand_phase(rng)
        kern = odd_power_kernel(support_radius=6.0)
        got = oscillatory_apply(LatticeFunction(1, fd), phase, kern,
                                out_box=Ball(radius=8.0, dim=1))
        want = oracles.oscillatory(fd, phase.full_table(),
                                   oracles.truncate(oracles.odd_power(), 6.0),
                                   list(fd), [(n,) for n in range(-8, 9)])
        worst = max(worst, oracles.max_gap(dict(got.items()), want))
    return worst


def _form_dyadic_piece(rng) -> float:
    worst = 0.0
    for i in range(20):
        piece = dyadic_decompose(odd_power_kernel(), 1 + i % 3)
        fd = random_lattice_values(rng, [(n,) for n in range(-3, 4)])
        phase = _rand_phase(rng)
        got = oscillatory_apply(LatticeFunction(1, fd), phase, piece,
                                out_box=Ball(radius=8.0, dim=1))
        want = oracles.oscillatory(fd, phase.full_table(), piece.evaluate,
                                   list(fd), [(n,) for n in range(-8, 9)])
        worst = max(worst, oracles.max_gap(dict(got.items()), want))
    return worst


def _form_expsum(rng) -> float:
    worst = 0.0
    r = 5.0
    pts = [(n,) for n in range(-5, 6)]

    def w_scalar(n, m):
        return 1.0 / (1.0 + float(sum((a - b) ** 2 for a, b in zip(n, m))) / (r * r))

    for _ in range(20):
        fd = random_lattice_values(rng, pts)
        phase = _rand_phase(rng)
        got = expsum_apply(LatticeFunction(1, fd), phase, _smooth_weight(r),
                           Ball(radius=5.0, dim=1), r)
        want = oracles.expsum(fd, phase.full_table(), w_scalar, pts)
        worst = max(worst, oracles.max_gap(dict(got.items()), want))
    return worst


def _form_gauss(rng) -> float:
    worst = 0.0
    for _ in range(20):
        q = int(rng.integers(2, 9))
        a = _coprime(rng, q)
        alpha = (int(rng.integers(1, 3)),)
        beta = (int(rng.integers(1, 3)),)
        shift = (int(rng.integers(0, 3)),)
        leaf = _one_term_leaf(a, q, Fraction(0), alpha, beta, shift,
                              rho=4.0, j_set=(3,))
        fdata = build_factorization(leaf, odd_power_kernel())
        terms = [(t.a, t.q, t.alpha, t.beta, t.shift) for t in fdata.terms]
        s = fdata.gauss_matrix()
        for r_ in range(q):
            for ell in range(q):
                want = oracles.gauss_entry(terms, q, 1, (r_,), (ell,))
                worst = max(worst, abs(s[r_, ell] - want))
    return worst


def _form_tnatural(rng) -> float:
    worst = 0.0
    for _ in range(20):
        q = int(rng.integers(2, 9))
        a = _coprime(rng, q)
        gamma = Fraction(int(rng.integers(0, 8)), 1 << int(rng.integers(10, 14)))
        alpha = (int(rng.integers(1, 3)),)
        beta = (int(rng.integers(1, 3)),)
        leaf = _one_term_leaf(a, q, gamma, alpha, beta, (0,), rho=6.0, j_set=(3,))
        fdata = build_factorization(leaf, odd_power_kernel())
        coarse = fdata.coarse_coords
        b_terms = [(t.gamma, t.alpha, t.beta, t.shift) for t in fdata.terms]

        def window(diff):
            return float(fdata.windowed_kernel.values_on(np.asarray(diff))[0])

        t_mat = fdata.tnatural_matrix()
        for i, nbar in enumerate(coarse):
            for j, mbar in enumerate(coarse):
                want = oracles.tnatural_entry(b_terms, q, 1, window,
                                              tuple(nbar), tuple(mbar))
                worst = max(worst, abs(t_mat[i, j] - want))
    return worst


def test_operator_forms_match_reference_sums(criterion):
    rng = np.random.default_rng(101)
    forms = {
        "radon": _form_radon,
        "twisted": _form_twisted,
        "quasi": _form_quasi,
        "oscillatory": _form_oscillatory,
        "dyadic-piece": _form_dyadic_piece,
        "expsum": _form_expsum,
        "gauss": _form_gauss,
        "coarse-toeplitz": _form_tnatural,
    }
    t0 = time.perf_counter()
    gaps = {name: fn(rng) for name, fn in forms.items()}
    elapsed = time.perf_counter() - t0
    worst = max(gaps.values())
    ok = worst <= 1e-12 and elapsed <= 30.0
    criterion(f"operator oracle equivalence: {'pass' if ok else 'FAIL'} "
              f"(8 forms x 20 instances, worst gap {worst:.2e}, {elapsed:.1f}s)")
    for name, gap in gaps.items():
        assert gap <= 1e-12, name
    assert elapsed <= 30.0


# -- criterion 2: exact-structure identity suite ---------------------------------


def test_identity_suite_holds(criterion):
    rng = np.random.default_rng(102)
    kern = odd_power_kernel()

    worst_descent = 0.0
    for i in range(100):
        deg = int(rng.integers(2, 4))
        P = _rand_poly(rng, 1, 1, deg)
        twist = None
        if i % 2:
            iset = index_set(1, deg)
            twist = CoefficientVector(dim=1, degree=deg, values=tuple(
                _rand_fraction(rng, 5, 16) for _ in iset.indices))
        xis = [[dyadic(rng)] for _ in range(2)]
        worst_descent = max(worst_descent,
                            descent_identity_check(P, kern, 32.0, xis, twist=twist))

    worst_shift = 0.0
    for _ in range(100):
        deg = int(rng.integers(2, 4))
        iset = index_set(1, deg)
        theta = CoefficientVector(dim=1, degree=deg, values=tuple(
            _rand_fraction(rng, 9, 32) for _ in iset.indices))
        xis = [[dyadic(rng) for _ in range(deg)]]
        worst_shift = max(worst_shift, quasi_shift_check(theta, kern, 32.0, xis))

    worst_conj = 0.0
    for i in range(20):
        deg = 2 + i % 2
        if deg == 2:
            pts = [(a, b) for a in range(-2, 3) for b in range(-2, 3)]
            f = LatticeFunction(2, random_lattice_values(rng, pts, density=0.5))
        else:
            pts = [(a, b, c) for a in range(-1, 2) for b in range(-1, 2)
                   for c in range(-1, 2)]
            f = LatticeFunction(3, random_lattice_values(rng, pts, density=0.5))
        theta = tuple(_rand_fraction(rng, 7, 12) for _ in range(deg))
        lhs, rhs = modulation_conjugation_check(1, deg, theta, f, kern,
                                                Ball(radius=4.0, dim=1))
        worst_conj = max(worst_conj,
                         oracles.max_gap(dict(lhs.items()), dict(rhs.items())))

    worst_step = 0.0
    for i in range(20):
        dim = 1 + i % 2
        pts = ([(n,) for n in range(-6, 7)] if dim == 1 else
               [(a, b) for a in range(-3, 4) for b in range(-3, 4)])
        f = LatticeFunction(dim, random_lattice_values(rng, pts))
        p = (1.0, 1.5, 2.0, 3.0, math.inf)[i % 5]
        seq_norm, step_norm = step_embedding_norms(f, p)
        worst_step = max(worst_step, abs(seq_norm - step_norm))

    worst_circ = 0.0
    for i in range(20):
        deg = int(rng.integers(2, 4))
        P = _rand_poly(rng, 1, 1, deg)
        period = int(rng.integers(8, 65))
        twist = None
        if i % 2:
            twist = CoefficientVector(dim=1, degree=deg, values=tuple(
                _rand_fraction(rng, 5, 12) for _ in index_set(1, deg).indices))
        worst_circ = max(worst_circ,
                         circulant_eigen_check(P, kern, 8.0, period, twist=twist))

    ok = (worst_descent <= 1e-10 and worst_shift <= 1e-12
          and worst_conj <= 1e-12 and worst_step == 0.0 and worst_circ <= 1e-10)
    criterion(f"identity suite: {'pass' if ok else 'FAIL'} "
              f"(descent {worst_descent:.2e}, shift {worst_shift:.2e}, "
              f"conjugation {worst_conj:.2e}, step {worst_step:.1e}, "
              f"circulant {worst_circ:.2e})")
    assert worst_descent <= 1e-10
    assert worst_shift <= 1e-12
    assert worst_conj <= 1e-12
    assert worst_step == 0.0
    assert worst_circ <= 1e-10


# -- criterion 3: Parseval consistency on a cylinder ------------------------------


def test_parseval_two_routes_agree(criterion):
    rng = np.random.default_rng(103)
    kern = odd_power_kernel()
    worst = 0.0
    for i in range(10):
        deg = int(rng.integers(2, 4))
        coeffs = {}
        for a in index_set(2, deg).indices:
            c = int(rng.integers(-2, 3))
            if c:
                coeffs[(0, a)] = c
        if not coeffs:
            coeffs[(0, (1, 1))] = 1
        P = IntPolyMap(k1=2, k2=1, degree=deg, coeffs=coeffs)
        phase = BilinearPhase(1, {
            ((1,), (int(rng.integers(1, 3)),)): _rand_fraction(rng, 7, 9)})
        pts = [(a, b) for a in range(-6, 7) for b in range(-4, 5)]
        f = LatticeFunction(2, random_lattice_values(rng, pts, density=0.3))
        direct, fiber = periodic_plancherel_check(1, P, phase, kern,
                                                  m_radius=4.0, f=f, period=16)
        worst = max(worst, abs(direct - fiber) / max(direct, 1e-300))
    ok = worst <= 1e-10
    criterion(f"cylinder Parseval: {'pass' if ok else 'FAIL'} "
              f"(10 instances, worst relative gap {worst:.2e})")
    assert worst <= 1e-10


# -- criterion 4: exhaustive rational-approximation audit --------------------------


def test_rational_approximation_audit_is_exhaustive(tmp_path, criterion):
    t0 = time.perf_counter()
    code, man = _run_cli(tmp_path, "dirichlet-audit",
                         {"den": 1009, "n_max": 100}, threads=4)
    elapsed = time.perf_counter() - t0
    s = man.get("summary", {})
    ok = (code == 0 and s.get("failures") == 0
          and s.get("cases") == 1008 * 100 and elapsed <= 60.0)
    criterion(f"approximation audit: {'pass' if ok else 'FAIL'} "
              f"({s.get('cases', 0)} cases, {s.get('failures', '?')} failures, "
              f"{elapsed:.1f}s)")
    assert code == 0
    assert s["failures"] == 0
    assert s["cases"] == 1008 * 100
    assert elapsed <= 60.0


# -- criterion 5: denominator trichotomy on admissible scale pairs -----------------


def test_denominator_trichotomy_holds_on_admissible_scales(criterion):
    rng = np.random.default_rng(105)
    specials = (Fraction((math.sqrt(5.0) - 1.0) / 2.0),
                Fraction(math.sqrt(2.0) - 1.0),
                Fraction(2.0 ** (1.0 / 3.0) - 1.0))
    admissible = 0
    held = 0
    attempts = 0
    while admissible < 10_000 and attempts < 100_000:
        attempts += 1
        mode = rng.random()
        if mode < 0.25:
            theta = specials[int(rng.integers(0, 3))]
        elif mode < 0.55:
            q = int(rng.integers(2, 65))
            theta = Fraction(int(rng.integers(1, q)), q)
        else:
            q = int(rng.integers(2, 13))
            bump = Fraction(1 if rng.random() < 0.5 else -1,
                            1 << int(rng.integers(22, 49)))
            theta = Fraction(int(rng.integers(1, q)), q) + bump
        if theta <= 0 or theta >= 1:
            continue
        scales = ((int(rng.integers(17, 3001)), float(rng.uniform(0.15, 0.49))),
                  (int(rng.integers(17, 3001)), float(rng.uniform(0.15, 0.49))))
        verdict = dyadic_separation_check(theta, scales[0], scales[1])
        if verdict.admissible:
            admissible += 1
            held += verdict.holds
    ok = admissible == 10_000 and held == admissible
    criterion(f"denominator trichotomy: {'pass' if ok else 'FAIL'} "
              f"({held}/{admissible} admissible instances hold, "
              f"{attempts} draws)")
    assert admissible == 10_000
    assert held == admissible


# -- criterion 6: schedule reconstruction on a large box ---------------------------


def test_schedule_reconstruction_is_exact_to_roundoff(criterion):
    rng = np.random.default_rng(106)
    kern = odd_power_kernel()
    box = Ball(radius=256.0, dim=1)
    pts = [(n,) for n in range(-256, 257)]
    level_keys = {2: (((1,), (1,)),),
                  3: (((1,), (2,)), ((2,), (1,))),
                  4: (((2,), (2,)), ((1,), (3,)), ((3,), (1,)))}
    worst = 0.0
    for trial, deg in enumerate((2, 2, 3, 3, 4, 4)):
        table = {}
        for s in range(2, deg + 1):
            key = level_keys[s][int(rng.integers(0, len(level_keys[s])))]
            if trial % 2:
                table[key] = _rand_fraction(rng, 23, 24)
            else:
                table[key] = dyadic(rng)
        phase = BilinearPhase(1, table)
        sched = build_schedule(phase, range(1, 8))
        assert sched.partition_ok()
        f = LatticeFunction(1, random_lattice_values(rng, pts, density=0.25))
        _, rel_gap = schedule_reconstruction_residual(sched, phase, kern, f,
                                                      in_box=box, out_box=box)
        worst = max(worst, rel_gap)
    ok = worst <= 1e-12
    criterion(f"schedule reconstruction: {'pass' if ok else 'FAIL'} "
              f"(6 phases, degrees 2-4, box 256, worst relative gap {worst:.2e})")
    assert worst <= 1e-12


# -- criterion 7: averaging-operator norm law across prime moduli ------------------


def test_gauss_norm_decay_across_prime_moduli(tmp_path, criterion):
    code, man = _run_cli(tmp_path, "gauss-decay", {"q_max": 211})
    s = man.get("summary", {})
    ok = (code == 0 and s.get("max_abs_dev", 1.0) <= 1e-10
          and abs(s.get("slope", 0.0) + 0.5) <= 0.02
          and s.get("delta", 0.0) >= 0.4)
    criterion(f"normalized-sum norm law: {'pass' if ok else 'FAIL'} "
              f"({s.get('moduli', 0)} primes, max |dev| {s.get('max_abs_dev', 1.0):.1e}, "
              f"slope {s.get('slope', 0.0):.4f}, delta {s.get('delta', 0.0):.3f})")
    assert code == 0
    assert s["moduli"] == 47
    assert s["max_abs_dev"] <= 1e-10
    assert abs(s["slope"] + 0.5) <= 0.02
    assert s["delta"] >= 0.4


# -- criterion 8: geometric decay over minor indices -------------------------------


def test_minor_index_norm_decay_fits_geometric_law(tmp_path, criterion):
    code, man = _run_cli(tmp_path, "minor-decay",
                         {"theta": "golden", "j_min": 4, "j_max": 12}, threads=4)
    s = man.get("summary", {})
    ok = code == 0 and s.get("delta", 0.0) > 0 and s.get("r2", 0.0) >= 0.9
    criterion(f"minor-index decay: {'pass' if ok else 'FAIL'} "
              f"(delta {s.get('delta', 0.0):.4f}, R^2 {s.get('r2', 0.0):.4f} "
              f"over {s.get('minor_count', 0)} indices)")
    assert code == 0
    assert s["minor_count"] >= 3
    assert s["delta"] > 0.0
    assert s["r2"] >= 0.9


# -- criterion 9: error-kernel masses under the calibrated budgets -----------------


def test_error_kernel_masses_stay_under_budget(criterion):
    eps_prime = 0.1
    big_q = 6
    # envelope constants: integral majorants of the annulus sums, evaluated
    # at j = 4; both envelopes decrease in j, so the j = 4 value dominates
    c_g = 2.0 * math.log(33.0 / 8.0)
    c_h = 32.0 * (1.0 / 8.0 - 1.0 / 33.0)
    worst_g = 0.0
    worst_h = 0.0
    for j in range(4, 15):
        g, h = error_kernel_norms(j, eps_prime, big_q, 1)
        g_budget = c_g * 2.0 ** (-j * (1.0 - eps_prime))
        h_budget = c_h * big_q * 2.0 ** (-j)
        assert g > 0.0 and h > 0.0
        worst_g = max(worst_g, g / g_budget)
        worst_h = max(worst_h, h / h_budget)
    ok = worst_g <= 1.0 and worst_h <= 1.0
    criterion(f"error-kernel budgets: {'pass' if ok else 'FAIL'} "
              f"(j in 4..14, worst G ratio {worst_g:.4f}, "
              f"worst H ratio {worst_h:.4f})")
    assert worst_g <= 1.0
    assert worst_h <= 1.0


# -- criterion 10: factorization residuals across windows --------------------------


def test_factorization_residual_shrinks_and_respects_budget(criterion):
    kern = odd_power_kernel()
    residuals = []
    for j in (3, 4, 5):
        leaf = single_fraction_leaf(5, 12, rho=3.0 * 2.0 ** j, j_set=(j,))
        fdata = build_factorization(leaf, kern)
        rep = factorization_residual(fdata, rng=np.random.default_rng(40 + j),
                                     samples=3)
        residuals.append(rep.residual)
    exact_monotone = residuals[0] > residuals[1] > residuals[2]

    drifted = single_fraction_leaf(5, 12, gamma=Fraction(1, 1 << 14),
                                   rho=48.0, j_set=(4,))
    rep2 = factorization_residual(build_factorization(drifted, kern),
                                  rng=np.random.default_rng(99), samples=3)
    ok = exact_monotone and rep2.ratio <= 10.0
    criterion(f"factorization residuals: {'pass' if ok else 'FAIL'} "
              f"(exact case {residuals[0]:.2e} > {residuals[1]:.2e} > "
              f"{residuals[2]:.2e}; drifted ratio {rep2.ratio:.2f}x budget)")
    assert exact_monotone
    assert rep2.ratio <= 10.0


# -- criterion 11: norm plateaus across radii --------------------------------------


def test_norm_plateau_across_radii(tmp_path, criterion):
    cfg = {"draws": 50, "radii": [64, 128, 256], "p_list": [1.5, 2, 3],
           "degree": 3}
    code, man = _run_cli(tmp_path, "uniformity", cfg, threads=4)
    plateau = man.get("summary", {}).get("plateau", {})
    ratios = {k: d.get("ratio", math.inf) for k, d in plateau.items()}
    ok = (code == 0 and set(ratios) == {"1.5", "2", "3"}
          and all(d["ok"] and d["ratio"] <= 1.25 for d in plateau.values()))
    shown = ", ".join(f"p={k}: {v:.4f}" for k, v in sorted(ratios.items()))
    criterion(f"norm plateau: {'pass' if ok else 'FAIL'} "
              f"(50 draws, radii 64/128/256, ratios {shown})")
    assert code == 0
    assert set(plateau) == {"1.5", "2", "3"}
    for d in plateau.values():
        assert d["ok"] and d["ratio"] <= 1.25
    assert "uniformity.csv" in man["outputs"]
    assert "plateau.csv" in man["outputs"]


# -- criterion 12: norm brackets, closed forms, duality ----------------------------


def test_norm_brackets_and_duality(criterion):
    rng = np.random.default_rng(112)

    checked = 0
    for i in range(1000):
        rows = int(rng.integers(2, 13))
        cols = int(rng.integers(2, 13))
        mat = rng.normal(size=(rows, cols))
        if i % 2:
            mat = mat + 1j * rng.normal(size=(rows, cols))
        p = float(rng.choice([1.25, 1.5, 2.0, 2.5, 3.0, 4.0]))
        est = norm_bracket(mat, p)
        assert est.lower <= est.upper * (1 + 1e-12) + 1e-300
        checked += 1

    worst_closed = 0.0
    for _ in range(50):
        u = rng.normal(size=int(rng.integers(2, 10))) * 1.0
        v = rng.normal(size=int(rng.integers(2, 10))) * 1.0
        u = u + 1j * rng.normal(size=u.shape)
        v = v + 1j * rng.normal(size=v.shape)
        got, _ = norm2_power(np.outer(u, v.conj()))
        want = float(np.linalg.norm(u) * np.linalg.norm(v))
        worst_closed = max(worst_closed, abs(got - want) / want)
    for _ in range(50):
        d = rng.normal(size=int(rng.integers(2, 12)))
        got, _ = norm2_power(np.diag(d))
        want = float(np.max(np.abs(d)))
        worst_closed = max(worst_closed, abs(got - want) / want)

    worst_dual = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        mat = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        p = float(rng.choice([1.5, 2.5, 3.0]))
        # generous restart budget: both sides must land on the global optimum
        # for the exact duality ||M||_p = ||M*||_p' to show through
        a = norm_p_lower(mat, p, max_iters=200, seeds=32)
        b = norm_p_lower(mat.conj().T, holder_conjugate(p), max_iters=200, seeds=32)
        worst_dual = max(worst_dual, abs(a.lower - b.lower) / max(a.lower, 1e-300))

    ok = checked == 1000 and worst_closed <= 1e-8 and worst_dual <= 1e-6
    criterion(f"norm brackets: {'pass' if ok else 'FAIL'} "
              f"(1000 brackets ordered, closed-form dev {worst_closed:.2e}, "
              f"duality dev {worst_dual:.2e})")
    assert checked == 1000
    assert worst_closed <= 1e-8
    assert worst_dual <= 1e-6
