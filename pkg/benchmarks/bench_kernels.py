#!/usr/bin/env python3
"""Compare the numba and numpy kernel backends on the CRAIG hot path.

Times pairwise distances, greedy facility location, nearest-medoid
assignment, and the full per-class CRAIG selection at both backends and
prints per-kernel speedups. The numba path is warmed before timing so JIT
compilation is excluded.
"""

import argparse
import time

import numpy as np

from coreset_bench import kernels
from coreset_bench.model import GradientMatrix
from coreset_bench.selectors import BudgetSpec, select_craig


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(class_size, grad_dim, budget, classes, repeats):
    rng = np.random.default_rng(0)
    rows = rng.standard_normal((class_size, grad_dim))
    all_rows = rng.standard_normal((class_size * classes, grad_dim))
    labels = np.repeat(np.arange(classes), class_size)
    spec = BudgetSpec(total=budget * classes,
                      per_class={c: budget for c in range(classes)})
    grads = GradientMatrix(rows=all_rows, mode="last_layer")

    results = {}
    for backend in ("numpy", "numba"):
        try:
            kernels.set_backend(backend)
        except ValueError:
            print(f"{backend}: unavailable, skipping")
            continue
        # warm (JIT compile / cache load)
        dist = kernels.pairwise_distances(rows)
        sim = dist.max() + 1e-12 - dist
        sel, _ = kernels.facility_location_greedy(sim, budget)
        sel = np.sort(sel)
        kernels.nearest_assignment_counts(dist, sel)

        results[backend] = {
            "pairwise_distances": _time(lambda: kernels.pairwise_distances(rows), repeats),
            "facility_location_greedy": _time(
                lambda: kernels.facility_location_greedy(sim, budget), repeats),
            "nearest_assignment_counts": _time(
                lambda: kernels.nearest_assignment_counts(dist, sel), repeats),
            "select_craig (end to end)": _time(
                lambda: select_craig(grads, spec, labels), repeats),
        }

    names = list(next(iter(results.values())).keys())
    width = max(len(n) for n in names)
    header = f"{'kernel':<{width}}  " + "".join(f"{b:>12}" for b in results) + "   speedup"
    print(header)
    print("-" * len(header))
    for name in names:
        times = [results[b][name] for b in results]
        row = f"{name:<{width}}  " + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) == 2 and times[1] > 0:
            row += f"  {times[0] / times[1]:>7.2f}x"
        print(row)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--class-size", type=int, default=600,
                        help="samples per class for the kernel benchmarks")
    parser.add_argument("--grad-dim", type=int, default=210,
                        help="gradient-row dimensionality")
    parser.add_argument("--budget", type=int, default=60, help="per-class budget")
    parser.add_argument("--classes", type=int, default=4,
                        help="classes for the end-to-end selection")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    bench(args.class_size, args.grad_dim, args.budget, args.classes, args.repeats)


if __name__ == "__main__":
    main()
