"""Compare the compiled block-tridiagonal kernels with the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--nodes 64 256 1024] [--repeat 200]
"""

import argparse
import timeit

import numpy as np

from chsparse import _fallback

try:
    from chsparse import _kernels
except ImportError:  # extension not built
    _kernels = None


def random_system(n, rng):
    lower = 0.1 * rng.standard_normal((n, 3, 3))
    upper = 0.1 * rng.standard_normal((n, 3, 3))
    diag = rng.standard_normal((n, 3, 3)) + 4.0 * np.eye(3)
    lower[0] = 0.0
    upper[-1] = 0.0
    return lower, diag, upper, rng.standard_normal((n, 3))


def bench(mod, system, repeat):
    lower, diag, upper, rhs = system
    factor = mod.btd_factor(lower, diag, upper)
    t_factor = min(timeit.repeat(lambda: mod.btd_factor(lower, diag, upper), number=repeat, repeat=3)) / repeat
    t_solve = min(timeit.repeat(lambda: mod.btd_solve(factor, rhs), number=repeat, repeat=3)) / repeat
    return t_factor, t_solve, mod.btd_solve(factor, rhs)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, nargs="+", default=[64, 256, 1024])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'nodes':>6} {'backend':>9} {'factor [us]':>12} {'solve [us]':>11}")
    for n in args.nodes:
        system = random_system(n, rng)
        results = {"python": bench(_fallback, system, args.repeat)}
        if _kernels is not None:
            results["compiled"] = bench(_kernels, system, args.repeat)
        for name, (tf, ts, _) in results.items():
            print(f"{n:>6} {name:>9} {1e6 * tf:>12.1f} {1e6 * ts:>11.1f}")
        if "compiled" in results:
            diff = np.max(np.abs(results["compiled"][2] - results["python"][2]))
            print(f"{'':>6} max |compiled - python| = {diff:.2e}")


if __name__ == "__main__":
    main()
