"""Compare the numba kernels with their numpy twins.

Usage: python3 benchmarks/bench_kernels.py [--n 1000000] [--repeat 5]

Also times one end-to-end ``generate`` call under each backend; the backend
flag is read at import, so that part runs in subprocesses.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from multidiscrete import _kernels as K


def best(fn, repeat):
    fn()  # warm-up (and JIT compile)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


E2E = """
import time
from multidiscrete import build_plan, generate, MarginalSpec
from multidiscrete.calibration import CalibrationOptions
import numpy as np
specs = [MarginalSpec.gp(5.14, 0.6445), MarginalSpec.nb(8, 0.45), MarginalSpec.binomial(25, 0.45)]
sigma = np.array([[1, .3, .2], [.3, 1, .25], [.2, .25, 1]])
plan = build_plan(specs, sigma, CalibrationOptions(n_binary=20000))
generate(plan, 1000, 0)
t = time.perf_counter()
generate(plan, {n}, 1)
print(time.perf_counter() - t)
"""


def end_to_end(flag, n):
    env = dict(os.environ, MULTIDISCRETE_USE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", E2E.format(n=n)], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not K.NUMBA_AVAILABLE:
        sys.exit("numba is not installed")

    g = np.random.default_rng(0)
    n = args.n
    binary = (g.random(n) < 0.5).astype(np.uint8)
    u = g.random(n)
    cdf0 = np.cumsum(np.full(12, 1 / 12))
    cdf1 = np.cumsum(np.full(40, 1 / 40))
    x = g.integers(0, 60, n)
    y = g.integers(0, 60, n)
    xb = g.integers(0, 60, 2000)
    idx = g.integers(0, 2000, (500, 2000))

    cases = [
        ("expand_column", lambda: K.expand_column_jit(binary, u, 0, cdf0, 12, cdf1),
         lambda: K.expand_column_numpy(binary, u, 0, cdf0, 12, cdf1)),
        ("pair_sums", lambda: K.pair_sums_jit(x, y), lambda: K.pair_sums_numpy(x, y)),
        ("bootstrap_sums B=500 n=2000", lambda: K.bootstrap_sums_jit(xb, idx),
         lambda: K.bootstrap_sums_numpy(xb, idx)),
    ]
    print(f"{'kernel':<30}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, jit_fn, np_fn in cases:
        tj, tn = best(jit_fn, args.repeat), best(np_fn, args.repeat)
        print(f"{name:<30}{1e3 * tj:>10.2f}{1e3 * tn:>10.2f}{tn / tj:>8.1f}x")

    tj, tn = end_to_end("1", n), end_to_end("0", n)
    print(f"{f'generate n={n}':<30}{1e3 * tj:>10.2f}{1e3 * tn:>10.2f}{tn / tj:>8.1f}x")


if __name__ == "__main__":
    main()
