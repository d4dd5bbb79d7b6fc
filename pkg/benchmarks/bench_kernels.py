"""Times the compiled domination kernel against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [repeats]
"""

import sys
import time

import numpy as np

from srsearch import kernels


def bench(fn, *args, repeats=20):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 20
    if kernels.BACKEND != "native":
        print("native kernel not built; only the python backend is available")
    rng = np.random.default_rng(0)
    print(f"{'N':>6} {'op':<18} {'python':>12} {'native':>12} {'speedup':>8}")
    for n in (64, 128, 256, 1024, 4096):
        keys = rng.uniform(0, 10, size=(n, 3))
        viols = np.where(rng.random(n) < 0.6, 0.0, rng.uniform(0, 2, size=n))
        for name, fn in (
            ("domination_matrix", kernels.domination_matrix),
            ("nondominated_mask", kernels.nondominated_mask),
        ):
            t_py = bench(fn, keys, viols, "python", repeats=repeats)
            if kernels.BACKEND == "native":
                t_nat = bench(fn, keys, viols, "native", repeats=repeats)
                print(f"{n:>6} {name:<18} {t_py * 1e3:>10.3f}ms {t_nat * 1e3:>10.3f}ms "
                      f"{t_py / t_nat:>7.1f}x")
            else:
                print(f"{n:>6} {name:<18} {t_py * 1e3:>10.3f}ms {'-':>12} {'-':>8}")


if __name__ == "__main__":
    main()
