"""Timings for the compiled and pure-python oscillatory kernels.

Both implementations are loaded regardless of which one the package picked
at import, run on identical inputs, and checked against each other before
any number is reported.  Use --repeats to steady the medians.
"""

import argparse
import statistics
import time

import numpy as np

from radonlab.backend import backend_name, implementations
from radonlab.lattice import Ball


def make_instance(rng: np.random.Generator, dim: int, radius: float, terms: int = 3):
    out_coords = Ball(radius=radius, dim=dim, norm_kind="sup").coords().reshape(-1, dim)
    in_coords = out_coords.copy()
    coeffs = np.array([int(rng.integers(0, 1 << 16)) / float(1 << 16)
                       for _ in range(terms)])
    alphas = rng.integers(0, 3, size=(terms, dim))
    betas = rng.integers(0, 3, size=(terms, dim))
    lo = out_coords.min(axis=0) - in_coords.max(axis=0)
    hi = out_coords.max(axis=0) - in_coords.min(axis=0)
    shape = tuple(int(b - a + 1) for a, b in zip(lo, hi))
    kern = rng.standard_normal(shape)
    kern[rng.random(shape) < 0.3] = 0.0
    fvals = rng.standard_normal(in_coords.shape[0]) \
        + 1j * rng.standard_normal(in_coords.shape[0])
    return out_coords, in_coords, fvals, coeffs, alphas, betas, kern, -lo


def median_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    impls = implementations()
    print(f"default backend: {backend_name()}")
    print(f"{'case':<24} {'python':>10} {'compiled':>10} {'speedup':>8}")

    rng = np.random.default_rng(args.seed)
    cases = [("apply 1d n=2049", 1, 1024.0, "apply"),
             ("apply 2d n=4225", 2, 32.0, "apply"),
             ("materialize 1d n=1025", 1, 512.0, "mat"),
             ("materialize 2d n=1089", 2, 16.0, "mat")]
    for label, dim, radius, kind in cases:
        inst = make_instance(rng, dim, radius)
        timed = {}
        results = {}
        for name, impl in impls.items():
            if kind == "apply":
                fn = lambda impl=impl: impl.osc_apply(*inst)
            else:
                fn = lambda impl=impl: impl.osc_materialize(*inst[:2], *inst[3:])
            results[name] = fn()
            timed[name] = median_time(fn, args.repeats)
        gap = float(np.max(np.abs(results["python"] - results["compiled"])))
        if gap > 1e-10:
            print(f"{label}: backends disagree by {gap:.2e}")
            return 1
        speedup = timed["python"] / timed["compiled"]
        print(f"{label:<24} {timed['python']:>9.4f}s {timed['compiled']:>9.4f}s "
              f"{speedup:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
