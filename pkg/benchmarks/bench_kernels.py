"""Compare the compiled and numpy kernels on representative workloads.

    python3 benchmarks/bench_kernels.py [--repeat R]
"""

import argparse
import math
import time

import numpy as np

from dgramsey import kernels
from dgramsey.counting import _pred_arrays
from dgramsey.graphs import degeneracy_ordering, sharpness_graph, single_edge
from dgramsey.gridset import generate
from dgramsey.search import CopyQuery, find_copy


def timed(fn, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def bench_fold(backend, repeat):
    g = sharpness_graph(2, dim=3)
    o = degeneracy_ordering(g)
    pos, ptr, sq = _pred_arrays(g, o)
    gauss = np.random.default_rng(0).standard_normal((200_000, 4, 3))
    kern = kernels.get(backend)
    return timed(lambda: kern.fold_batch(pos, ptr, sq, gauss), repeat)


def bench_search(backend, repeat):
    A = generate({"kind": "ball_lattice", "spacing": 1 / 8, "radius": 1 / 320}, 512, 2)
    q = CopyQuery(single_edge(), 1.2 / 8, math.sqrt(2) / 512)
    return timed(lambda: find_copy(A, q, backend=backend), repeat)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = ["python"] + (["compiled"] if kernels.compiled_backend is not None else [])
    print(f"{'kernel':<14}{'backend':<10}{'seconds':>10}")
    results = {}
    for name, fn in (("fold_batch", bench_fold), ("search_copy", bench_search)):
        for b in backends:
            t, out = fn(b, args.repeat)
            results[(name, b)] = (t, out)
            print(f"{name:<14}{b:<10}{t:>10.4f}")
        if len(backends) == 2:
            print(f"{'':<14}{'speedup':<10}{results[(name, 'python')][0] / results[(name, 'compiled')][0]:>10.1f}x")
    if len(backends) == 2:
        p, c = results[("fold_batch", "python")][1], results[("fold_batch", "compiled")][1]
        print("fold_batch outputs identical:", all(np.array_equal(x, y) for x, y in zip(p, c)))


if __name__ == "__main__":
    main()
