"""Throughput of the compiled block kernel against the numpy fallback.

Usage::

    python benchmarks/bench_accumulate.py [--n 4096] [--repeat 5]

Both backends are fed the same observation in 2**18-coordinate chunks; the
script checks that their statistics agree bit for bit and prints the time
per coordinate.
"""

import argparse
import time

import numpy as np

from adaptquad.accumulate import BACKENDS, make_accumulator
from adaptquad.seq_model import ModelConfig, ThetaVector, block_scheme, simulate

CHUNK = 1 << 18


def run(backend, scheme, y):
    acc = make_accumulator(scheme, y.size, backend=backend)
    for lo in range(0, y.size, CHUNK):
        acc.feed(y[lo:lo + CHUNK])
    return acc.result()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    scheme = block_scheme(args.n)
    y = simulate(ThetaVector.zero(), ModelConfig(args.n, seed=1)).y
    print(f"n={args.n}  m0={scheme.m0}  J={scheme.J}  coordinates={y.size}")
    results = {}
    for name in sorted(BACKENDS):
        best = float("inf")
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            results[name] = run(name, scheme, y)
            best = min(best, time.perf_counter() - t0)
        print(f"{name:>7}: {best * 1e3:9.2f} ms  {best / y.size * 1e9:7.2f} ns/coord")
    if len(results) == 2:
        a, b = results["cython"], results["python"]
        same = (a["xi0"] == b["xi0"] and a["tail"] == b["tail"]
                and np.array_equal(a["prefix"], b["prefix"]) and np.array_equal(a["thr_acc"], b["thr_acc"]))
        print("bit-identical:", same)
    else:
        print("compiled backend unavailable; only the fallback was timed")


if __name__ == "__main__":
    main()
