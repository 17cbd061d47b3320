"""Compare the compiled and numpy grid kernels on a loss map.

Usage: python3 benchmarks/bench_kernels.py [--points N] [--repeat R] [--threads T]
"""

import argparse
import timeit

import numpy as np

from su11 import kernels, states
from su11.engine import MeasurementScheme, grid_delta_phi
from su11.optics import full_config


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--points", type=int, default=301, help="grid points per loss axis")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    state = states.two_mode_squeezed(0.3, 2.0 + 1.0j, 0.5)
    config = full_config(2.0, 5.0)
    scheme = MeasurementScheme("joint-minus", 0.2)
    axis = np.linspace(0.0, 0.9, args.points)
    LS, LI = np.meshgrid(axis, axis, indexing="ij")

    results, timings = {}, {}
    for name in sorted(kernels.BACKENDS):
        def call(name=name):
            return grid_delta_phi(state, config, scheme, L_s=LS, L_i=LI,
                                  threads=args.threads, backend=name)
        results[name] = call()
        timings[name] = min(timeit.repeat(call, number=1, repeat=args.repeat))
        print(f"{name:>9}: {timings[name] * 1e3:8.2f} ms for {LS.size} points "
              f"({LS.size / timings[name] / 1e6:.2f} Mpoints/s)")

    if len(results) == 2:
        diff = np.max(np.abs(results["compiled"] / results["python"] - 1.0))
        print(f"max relative difference: {diff:.2e}")
        print(f"speedup compiled/python: {timings['python'] / timings['compiled']:.1f}x")
    else:
        print("compiled extension not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
