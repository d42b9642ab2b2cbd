"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 10000000] [--repeat 3] [--json out.json]

Each kernel runs on identical inputs under both backends; the outputs are
compared before timings are reported.
"""
import argparse
import json
import math
import time

import numpy as np

from momo_lab._kernels import backends
from momo_lab.arith import small_primes

BLOCK = 1 << 20


def run_sieve(mod, n):
    primes = small_primes(math.isqrt(n))
    mu = np.empty(n + 1, dtype=np.int8)
    for lo in range(0, n + 1, BLOCK):
        hi = min(lo + BLOCK, n + 1)
        mu[lo:hi], _ = mod.sieve_block(lo, hi, primes)
    return mu


def cases(n):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(n)
    idx = np.arange(n, dtype=np.uint64)
    return {
        "sieve_block": lambda mod: run_sieve(mod, n),
        "neumaier_cumsum": lambda mod: mod.neumaier_cumsum(x)[0],
        "thue_morse_bits": lambda mod: mod.thue_morse_bits(idx),
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10**7)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", default=None)
    args = ap.parse_args(argv)

    mods = backends()
    results = []
    for name, fn in cases(args.n).items():
        row = {"kernel": name, "n": args.n}
        outs = {}
        for label, mod in mods.items():
            row[label], outs[label] = best_of(lambda: fn(mod), args.repeat)
        if len(outs) == 2:
            a, b = outs["python"], outs["cython"]
            same = np.array_equal(a, b) if name != "neumaier_cumsum" else np.allclose(a, b, 0, 1e-9)
            row["match"] = bool(same)
            row["speedup"] = row["python"] / row["cython"]
        results.append(row)

    print(f"{'kernel':<18}{'python s':>10}{'cython s':>10}{'speedup':>9}  match")
    for r in results:
        print(f"{r['kernel']:<18}{r['python']:>10.3f}{r.get('cython', float('nan')):>10.3f}"
              f"{r.get('speedup', float('nan')):>9.2f}  {r.get('match', '-')}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
